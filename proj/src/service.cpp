#include "ktele/harness/service.hpp"

#include <algorithm>
#include <stdexcept>

namespace ktele::harness {

using prompting::SequenceUnit;
using prompting::WrappedSequence;

ServiceFormat service_format_from_string(const std::string& s) {
  if (s == "only_name") return ServiceFormat::only_name;
  if (s == "entity_no_attr") return ServiceFormat::entity_no_attr;
  if (s == "entity_with_attr") return ServiceFormat::entity_with_attr;
  throw std::invalid_argument("unknown service format: " + s);
}

ServiceVector encode_service_vector(
    const std::string& name, ServiceFormat format, const ke::KnowledgeGraph& kg,
    const backbone::Encoder& enc, const tokenizer::Vocabulary& vocab,
    const std::vector<std::pair<std::string, corpus::AttrValue>>& task_attributes,
    const corpus::NormalizationStats* stats) {
  if (name.empty()) throw std::invalid_argument("empty service name");

  ServiceVector out;
  bool surface_matched =
      std::find(kg.entities.begin(), kg.entities.end(), name) != kg.entities.end();
  ServiceFormat effective = format;
  if (format != ServiceFormat::only_name && !surface_matched) {
    effective = ServiceFormat::only_name;
    out.fell_back_to_name = true;
  }

  WrappedSequence seq = prompting::wrap_entity_surface(name);
  if (effective == ServiceFormat::entity_with_attr && !task_attributes.empty()) {
    // re-open the frame and append [ATTR] blocks before [SEP]
    corpus::NormalizationStats empty_stats;
    const corpus::NormalizationStats& st = stats ? *stats : empty_stats;
    seq.units.pop_back();
    for (const auto& [attr_name, attr_value] : task_attributes) {
      seq.units.push_back(SequenceUnit::prompt("[ATTR]"));
      for (const auto& tok : corpus::split_whitespace(attr_name))
        seq.units.push_back(SequenceUnit::text(tok));
      seq.units.push_back(SequenceUnit::prompt(corpus::SpecialTokenSet::separator()));
      if (std::holds_alternative<double>(attr_value)) {
        const double v =
            corpus::normalize_value(std::get<double>(attr_value), attr_name, st);
        seq.units.push_back(SequenceUnit::anchor(attr_name, v));
      } else {
        for (const auto& tok : corpus::split_whitespace(std::get<std::string>(attr_value)))
          seq.units.push_back(SequenceUnit::text(tok));
      }
    }
    seq.units.push_back(SequenceUnit::sep_unit());
    seq.validate();
  }

  out.sequence = seq;
  out.vector = enc.encode(seq, vocab).pooled;
  return out;
}

}  // namespace ktele::harness
