#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace ktele::corpus {

enum class Modality { causal_sentence, document_sentence, machine_log, kg_triple };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

struct MachineLogRow {
  std::string ne_id;
  std::int64_t timestamp = 0;
  std::vector<std::pair<std::string, double>> entries;  // (tag_name, raw_value)
  std::optional<std::string> alarm;                     // [ALM] slot, when present
};

using AttrValue = std::variant<std::string, double>;

struct KnowledgeTriple {
  std::string head_surface;
  std::string relation_surface;
  std::string tail_surface;
  std::vector<std::pair<std::string, AttrValue>> attributes;
};

struct CorpusRecord {
  std::string id;
  Modality modality = Modality::document_sentence;
  std::string text;                      // sentence modalities
  std::optional<MachineLogRow> log;      // machine_log
  std::optional<KnowledgeTriple> triple; // kg_triple
};

struct TagStats {
  double min = 0.0;
  double max = 0.0;
  std::int64_t count = 0;
};

class NormalizationStats {
 public:
  void observe(const std::string& tag, double value);
  void merge(const NormalizationStats& other);
  bool has(const std::string& tag) const { return stats_.count(tag) > 0; }
  const TagStats& at(const std::string& tag) const { return stats_.at(tag); }
  const std::map<std::string, TagStats>& all() const { return stats_; }

  std::string to_json() const;
  static NormalizationStats from_json(const std::string& json);

 private:
  std::map<std::string, TagStats> stats_;
};

struct SpecialTokenSet {
  static const std::vector<std::string>& prompt_tokens();  // the seven of the template
  static const std::string& separator();                   // "|"
  std::set<std::string> tele_tokens;
};

// Sentences that contain a causal keyword and have at least min_length
// whitespace-delimited units, after unique identifiers like "[KPI] 1929480378"
// are stripped. Order preserved.
std::vector<std::string> extract_causal_sentences(const std::vector<std::string>& sentences,
                                                  const std::set<std::string>& keywords,
                                                  int min_length);

std::string strip_unique_identifiers(const std::string& sentence);

// BPE-style mining: iterative most-frequent-pair merges over whitespace words,
// then candidates filtered to length in [min_len, max_len] characters,
// corpus frequency >= min_freq, and absence from base_vocab.
std::set<std::string> mine_special_tokens(const std::vector<std::string>& corpus,
                                          const std::set<std::string>& base_vocab,
                                          std::int64_t min_freq, int min_len = 2,
                                          int max_len = 4);

// Non-overlapping left-to-right occurrences inside whitespace words; the
// frequency definition mine_special_tokens filters against.
std::int64_t substring_frequency(const std::vector<std::string>& corpus,
                                 const std::string& candidate);

// "[ENT] h [REL] r [ENT] t" with " [ATTR] name | value" per attribute; numeric
// attribute values render as the [NUM] anchor token.
std::string serialize_triple(const KnowledgeTriple& t);

NormalizationStats fit_normalization(const std::vector<MachineLogRow>& logs);

struct NormalizedValue {
  double value = 0.0;
  bool unseen_tag = false;
};

// (v - min)/(max - min) clipped to [0,1]; 0.0 when max == min; 0.5 with the
// unseen flag set for tags absent from stats.
NormalizedValue normalize_value_checked(double v, const std::string& tag,
                                        const NormalizationStats& stats);
double normalize_value(double v, const std::string& tag, const NormalizationStats& stats);

// JSON-lines corpus file.
std::vector<CorpusRecord> load_corpus_jsonl(const std::string& path);
void save_corpus_jsonl(const std::string& path, const std::vector<CorpusRecord>& records);

std::vector<std::string> split_whitespace(const std::string& s);

}  // namespace ktele::corpus
