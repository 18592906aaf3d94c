#include "ktele/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ktele::corpus {

using nlohmann::json;

std::string to_string(Modality m) {
  switch (m) {
    case Modality::causal_sentence: return "causal_sentence";
    case Modality::document_sentence: return "document_sentence";
    case Modality::machine_log: return "machine_log";
    case Modality::kg_triple: return "kg_triple";
  }
  throw std::logic_error("bad modality");
}

Modality modality_from_string(const std::string& s) {
  if (s == "causal_sentence") return Modality::causal_sentence;
  if (s == "document_sentence") return Modality::document_sentence;
  if (s == "machine_log") return Modality::machine_log;
  if (s == "kg_triple") return Modality::kg_triple;
  throw std::invalid_argument("unknown modality: " + s);
}

std::vector<std::string> split_whitespace(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

// ---- NormalizationStats ------------------------------------------------------

void NormalizationStats::observe(const std::string& tag, double value) {
  auto it = stats_.find(tag);
  if (it == stats_.end()) {
    stats_[tag] = TagStats{value, value, 1};
  } else {
    it->second.min = std::min(it->second.min, value);
    it->second.max = std::max(it->second.max, value);
    it->second.count += 1;
  }
}

void NormalizationStats::merge(const NormalizationStats& other) {
  for (const auto& [tag, s] : other.stats_) {
    auto it = stats_.find(tag);
    if (it == stats_.end()) {
      stats_[tag] = s;
    } else {
      it->second.min = std::min(it->second.min, s.min);
      it->second.max = std::max(it->second.max, s.max);
      it->second.count += s.count;
    }
  }
}

std::string NormalizationStats::to_json() const {
  json j = json::object();
  for (const auto& [tag, s] : stats_)
    j[tag] = {{"min", s.min}, {"max", s.max}, {"count", s.count}};
  return j.dump();
}

NormalizationStats NormalizationStats::from_json(const std::string& text) {
  NormalizationStats out;
  json j = json::parse(text);
  for (auto it = j.begin(); it != j.end(); ++it) {
    TagStats s;
    s.min = it.value().at("min").get<double>();
    s.max = it.value().at("max").get<double>();
    s.count = it.value().at("count").get<std::int64_t>();
    if (s.min > s.max || s.count < 1)
      throw std::invalid_argument("invalid stats for tag " + it.key());
    out.stats_[it.key()] = s;
  }
  return out;
}

// ---- SpecialTokenSet ---------------------------------------------------------

const std::vector<std::string>& SpecialTokenSet::prompt_tokens() {
  static const std::vector<std::string> toks = {"[ALM]", "[REL]", "[ENT]", "[LOC]",
                                                "[DOC]", "[ATTR]", "[NUM]"};
  return toks;
}

const std::string& SpecialTokenSet::separator() {
  static const std::string sep = "|";
  return sep;
}

// ---- causal extraction -------------------------------------------------------

std::string strip_unique_identifiers(const std::string& sentence) {
  static const std::regex id_re(R"(\[[A-Za-z_]+\]\s*[0-9]+)");
  std::string out = std::regex_replace(sentence, id_re, " ");
  return out;
}

std::vector<std::string> extract_causal_sentences(const std::vector<std::string>& sentences,
                                                  const std::set<std::string>& keywords,
                                                  int min_length) {
  if (keywords.empty()) throw std::invalid_argument("causal keyword set is empty");
  if (min_length < 1) throw std::invalid_argument("min_length must be >= 1");
  std::vector<std::string> out;
  for (const auto& s : sentences) {
    const std::string cleaned = strip_unique_identifiers(s);
    bool hit = false;
    for (const auto& kw : keywords) {
      if (!kw.empty() && cleaned.find(kw) != std::string::npos) {
        hit = true;
        break;
      }
    }
    if (!hit) continue;
    if (int(split_whitespace(cleaned).size()) < min_length) continue;
    out.push_back(s);
  }
  return out;
}

// ---- tele special-token mining -------------------------------------------------

std::int64_t substring_frequency(const std::vector<std::string>& corpus,
                                 const std::string& candidate) {
  if (candidate.empty()) return 0;
  std::int64_t total = 0;
  for (const auto& line : corpus) {
    for (const auto& word : split_whitespace(line)) {
      std::size_t pos = 0;
      while ((pos = word.find(candidate, pos)) != std::string::npos) {
        ++total;
        pos += candidate.size();  // non-overlapping
      }
    }
  }
  return total;
}

std::set<std::string> mine_special_tokens(const std::vector<std::string>& corpus,
                                          const std::set<std::string>& base_vocab,
                                          std::int64_t min_freq, int min_len, int max_len) {
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");

  // word -> multiplicity
  std::map<std::string, std::int64_t> word_freq;
  for (const auto& line : corpus)
    for (const auto& w : split_whitespace(line)) word_freq[w] += 1;

  // each distinct word as a symbol sequence, initially characters
  std::vector<std::pair<std::vector<std::string>, std::int64_t>> words;
  words.reserve(word_freq.size());
  for (const auto& [w, f] : word_freq) {
    std::vector<std::string> syms;
    for (char c : w) syms.emplace_back(1, c);
    words.emplace_back(std::move(syms), f);
  }

  std::set<std::string> merged_tokens;
  const int max_merges = 4096;
  for (int iter = 0; iter < max_merges; ++iter) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pair_freq;
    for (const auto& [syms, f] : words)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        pair_freq[{syms[i], syms[i + 1]}] += f;

    std::pair<std::string, std::string> best;
    std::int64_t best_freq = 0;
    for (const auto& [pr, f] : pair_freq) {
      if (f > best_freq) {  // ties resolve to the lexicographically smallest pair
        best_freq = f;
        best = pr;
      }
    }
    if (best_freq < min_freq) break;

    const std::string merged = best.first + best.second;
    for (auto& [syms, f] : words) {
      std::vector<std::string> next;
      next.reserve(syms.size());
      std::size_t i = 0;
      while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i] == best.first && syms[i + 1] == best.second) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(next);
    }
    merged_tokens.insert(merged);
  }

  std::set<std::string> out;
  for (const auto& tok : merged_tokens) {
    const int len = int(tok.size());
    if (len < min_len || len > max_len) continue;
    if (base_vocab.count(tok)) continue;
    if (substring_frequency(corpus, tok) < min_freq) continue;
    out.insert(tok);
  }
  return out;
}

// ---- triple serialization ------------------------------------------------------

std::string serialize_triple(const KnowledgeTriple& t) {
  if (t.head_surface.empty() || t.relation_surface.empty() || t.tail_surface.empty())
    throw std::invalid_argument("triple surfaces must be non-empty");
  std::string out =
      "[ENT] " + t.head_surface + " [REL] " + t.relation_surface + " [ENT] " + t.tail_surface;
  for (const auto& [name, value] : t.attributes) {
    out += " [ATTR] " + name + " | ";
    if (std::holds_alternative<double>(value)) {
      out += "[NUM]";
    } else {
      out += std::get<std::string>(value);
    }
  }
  return out;
}

// ---- normalization --------------------------------------------------------------

NormalizationStats fit_normalization(const std::vector<MachineLogRow>& logs) {
  if (logs.empty()) throw std::invalid_argument("fit_normalization: no logs");
  NormalizationStats stats;
  for (const auto& row : logs)
    for (const auto& [tag, value] : row.entries) stats.observe(tag, value);
  return stats;
}

NormalizedValue normalize_value_checked(double v, const std::string& tag,
                                        const NormalizationStats& stats) {
  if (!stats.has(tag)) return {0.5, true};
  const TagStats& s = stats.at(tag);
  if (s.max == s.min) return {0.0, false};
  const double x = (v - s.min) / (s.max - s.min);
  return {std::clamp(x, 0.0, 1.0), false};
}

double normalize_value(double v, const std::string& tag, const NormalizationStats& stats) {
  return normalize_value_checked(v, tag, stats).value;
}

// ---- JSONL I/O -------------------------------------------------------------------

namespace {

json record_to_json(const CorpusRecord& r) {
  json j;
  j["id"] = r.id;
  j["modality"] = to_string(r.modality);
  switch (r.modality) {
    case Modality::causal_sentence:
    case Modality::document_sentence:
      j["text"] = r.text;
      break;
    case Modality::machine_log: {
      if (!r.log) throw std::invalid_argument("machine_log record without log payload");
      json lg;
      lg["ne"] = r.log->ne_id;
      lg["ts"] = r.log->timestamp;
      json entries = json::array();
      for (const auto& [tag, value] : r.log->entries) entries.push_back({tag, value});
      lg["entries"] = entries;
      if (r.log->alarm) lg["alarm"] = *r.log->alarm;
      j["log"] = lg;
      break;
    }
    case Modality::kg_triple: {
      if (!r.triple) throw std::invalid_argument("kg_triple record without triple payload");
      json tr;
      tr["h"] = r.triple->head_surface;
      tr["r"] = r.triple->relation_surface;
      tr["t"] = r.triple->tail_surface;
      json attrs = json::array();
      for (const auto& [name, value] : r.triple->attributes) {
        if (std::holds_alternative<double>(value))
          attrs.push_back({name, std::get<double>(value)});
        else
          attrs.push_back({name, std::get<std::string>(value)});
      }
      tr["attrs"] = attrs;
      j["triple"] = tr;
      break;
    }
  }
  return j;
}

CorpusRecord record_from_json(const json& j) {
  CorpusRecord r;
  r.id = j.at("id").get<std::string>();
  r.modality = modality_from_string(j.at("modality").get<std::string>());
  switch (r.modality) {
    case Modality::causal_sentence:
    case Modality::document_sentence:
      r.text = j.at("text").get<std::string>();
      break;
    case Modality::machine_log: {
      const auto& lg = j.at("log");
      MachineLogRow row;
      row.ne_id = lg.at("ne").get<std::string>();
      row.timestamp = lg.at("ts").get<std::int64_t>();
      for (const auto& e : lg.at("entries"))
        row.entries.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
      if (lg.contains("alarm")) row.alarm = lg.at("alarm").get<std::string>();
      if (row.entries.empty())
        throw std::invalid_argument("machine_log entries must be non-empty: " + r.id);
      r.log = std::move(row);
      break;
    }
    case Modality::kg_triple: {
      const auto& tr = j.at("triple");
      KnowledgeTriple t;
      t.head_surface = tr.at("h").get<std::string>();
      t.relation_surface = tr.at("r").get<std::string>();
      t.tail_surface = tr.at("t").get<std::string>();
      if (tr.contains("attrs")) {
        for (const auto& a : tr.at("attrs")) {
          if (a.at(1).is_number())
            t.attributes.emplace_back(a.at(0).get<std::string>(), a.at(1).get<double>());
          else
            t.attributes.emplace_back(a.at(0).get<std::string>(), a.at(1).get<std::string>());
        }
      }
      r.triple = std::move(t);
      break;
    }
  }
  return r;
}

}  // namespace

std::vector<CorpusRecord> load_corpus_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<CorpusRecord> out;
  std::set<std::string> seen_ids;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(json::parse(line)));
    if (!seen_ids.insert(out.back().id).second)
      throw std::invalid_argument("duplicate record id: " + out.back().id);
  }
  return out;
}

void save_corpus_jsonl(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open corpus file for writing: " + path);
  for (const auto& r : records) os << record_to_json(r).dump() << "\n";
}

}  // namespace ktele::corpus
