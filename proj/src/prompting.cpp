#include "ktele/prompting.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace ktele::prompting {

using corpus::CorpusRecord;
using corpus::MachineLogRow;
using corpus::Modality;
using corpus::NormalizationStats;
using corpus::SpecialTokenSet;

std::string to_string(UnitKind k) {
  switch (k) {
    case UnitKind::text_token: return "text_token";
    case UnitKind::prompt_token: return "prompt_token";
    case UnitKind::numeric_anchor: return "numeric_anchor";
    case UnitKind::cls: return "cls";
    case UnitKind::sep: return "sep";
    case UnitKind::mask: return "mask";
  }
  throw std::logic_error("bad unit kind");
}

SequenceUnit SequenceUnit::text(std::string s) {
  return {UnitKind::text_token, std::move(s), std::nullopt};
}
SequenceUnit SequenceUnit::prompt(std::string s) {
  return {UnitKind::prompt_token, std::move(s), std::nullopt};
}
SequenceUnit SequenceUnit::anchor(std::string tag, double value) {
  return {UnitKind::numeric_anchor, "[NUM]", NumericPayload{std::move(tag), value}};
}
SequenceUnit SequenceUnit::cls_unit() { return {UnitKind::cls, "[CLS]", std::nullopt}; }
SequenceUnit SequenceUnit::sep_unit() { return {UnitKind::sep, "[SEP]", std::nullopt}; }

void WrappedSequence::validate() const {
  if (units.size() < 2 || units.front().kind != UnitKind::cls ||
      units.back().kind != UnitKind::sep)
    throw std::invalid_argument("sequence must be framed by [CLS] ... [SEP]");
  const auto& prompts = SpecialTokenSet::prompt_tokens();
  for (const auto& u : units) {
    const bool has_numeric = u.numeric.has_value();
    if (has_numeric != (u.kind == UnitKind::numeric_anchor))
      throw std::invalid_argument("numeric payload present iff numeric_anchor");
    if (u.kind == UnitKind::prompt_token) {
      const bool known = std::find(prompts.begin(), prompts.end(), u.surface) != prompts.end() ||
                         u.surface == SpecialTokenSet::separator();
      if (!known) throw std::invalid_argument("unknown prompt token: " + u.surface);
    }
    if (u.kind == UnitKind::numeric_anchor &&
        (u.numeric->value < 0.0 || u.numeric->value > 1.0))
      throw std::invalid_argument("anchor value outside [0,1]");
  }
}

namespace {

void push_text_tokens(std::vector<SequenceUnit>& units, const std::string& text) {
  for (auto& tok : corpus::split_whitespace(text)) units.push_back(SequenceUnit::text(tok));
}

void push_attr_block(std::vector<SequenceUnit>& units, const std::string& name,
                     const corpus::AttrValue& value, const NormalizationStats& stats) {
  units.push_back(SequenceUnit::prompt("[ATTR]"));
  push_text_tokens(units, name);
  units.push_back(SequenceUnit::prompt(SpecialTokenSet::separator()));
  if (std::holds_alternative<double>(value)) {
    const double v = corpus::normalize_value(std::get<double>(value), name, stats);
    units.push_back(SequenceUnit::anchor(name, v));
  } else {
    push_text_tokens(units, std::get<std::string>(value));
  }
}

std::vector<SequenceUnit> triple_units(const corpus::KnowledgeTriple& t,
                                       const NormalizationStats& stats) {
  std::vector<SequenceUnit> units;
  units.push_back(SequenceUnit::prompt("[ENT]"));
  push_text_tokens(units, t.head_surface);
  units.push_back(SequenceUnit::prompt("[REL]"));
  push_text_tokens(units, t.relation_surface);
  units.push_back(SequenceUnit::prompt("[ENT]"));
  push_text_tokens(units, t.tail_surface);
  for (const auto& [name, value] : t.attributes) push_attr_block(units, name, value, stats);
  return units;
}

std::vector<SequenceUnit> log_units(const MachineLogRow& row,
                                    const NormalizationStats& stats) {
  if (row.entries.empty()) throw std::invalid_argument("machine log row without entries");
  std::vector<SequenceUnit> units;
  if (row.alarm) {
    units.push_back(SequenceUnit::prompt("[ALM]"));
    push_text_tokens(units, *row.alarm);
  }
  units.push_back(SequenceUnit::prompt("[LOC]"));
  push_text_tokens(units, row.ne_id);
  for (const auto& [tag, raw] : row.entries) {
    units.push_back(SequenceUnit::prompt("[ATTR]"));
    push_text_tokens(units, tag);
    units.push_back(SequenceUnit::prompt(SpecialTokenSet::separator()));
    units.push_back(SequenceUnit::anchor(tag, corpus::normalize_value(raw, tag, stats)));
  }
  return units;
}

WrappedSequence frame(std::vector<SequenceUnit> body, std::string id, std::string modality) {
  WrappedSequence s;
  s.units.reserve(body.size() + 2);
  s.units.push_back(SequenceUnit::cls_unit());
  for (auto& u : body) s.units.push_back(std::move(u));
  s.units.push_back(SequenceUnit::sep_unit());
  s.source_id = std::move(id);
  s.source_modality = std::move(modality);
  s.validate();
  return s;
}

}  // namespace

WrappedSequence wrap_record(const CorpusRecord& r, const NormalizationStats& stats) {
  switch (r.modality) {
    case Modality::causal_sentence:
    case Modality::document_sentence: {
      std::vector<SequenceUnit> units;
      units.push_back(SequenceUnit::prompt("[DOC]"));
      push_text_tokens(units, r.text);
      return frame(std::move(units), r.id, corpus::to_string(r.modality));
    }
    case Modality::machine_log: {
      if (!r.log) throw std::invalid_argument("machine_log record without payload: " + r.id);
      return frame(log_units(*r.log, stats), r.id, corpus::to_string(r.modality));
    }
    case Modality::kg_triple: {
      if (!r.triple) throw std::invalid_argument("kg_triple record without payload: " + r.id);
      return frame(triple_units(*r.triple, stats), r.id, corpus::to_string(r.modality));
    }
  }
  throw std::logic_error("bad modality");
}

std::set<std::size_t> maskable_positions(const WrappedSequence& s) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < s.units.size(); ++i)
    if (s.units[i].kind == UnitKind::text_token) out.insert(i);
  return out;
}

WrappedSequence wrap_entity_surface(const std::string& surface) {
  if (surface.empty()) throw std::invalid_argument("empty entity surface");
  std::vector<SequenceUnit> units;
  units.push_back(SequenceUnit::prompt("[ENT]"));
  push_text_tokens(units, surface);
  return frame(std::move(units), "", "entity_surface");
}

WrappedSequence wrap_relation_surface(const std::string& surface) {
  if (surface.empty()) throw std::invalid_argument("empty relation surface");
  std::vector<SequenceUnit> units;
  units.push_back(SequenceUnit::prompt("[REL]"));
  push_text_tokens(units, surface);
  return frame(std::move(units), "", "relation_surface");
}

WrappedSequence wrap_log_row(const corpus::MachineLogRow& row,
                             const corpus::NormalizationStats& stats) {
  return frame(log_units(row, stats), "", "machine_log");
}

std::string to_debug_json(const WrappedSequence& s) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& u : s.units) {
    nlohmann::json ju;
    ju["kind"] = to_string(u.kind);
    ju["surface"] = u.surface;
    if (u.numeric) {
      ju["tag"] = u.numeric->tag_name;
      ju["value"] = u.numeric->value;
    }
    units.push_back(ju);
  }
  nlohmann::json j;
  j["units"] = units;
  return j.dump();
}

}  // namespace ktele::prompting
