#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ktele/corpus.hpp"

namespace ktele::prompting {

enum class UnitKind { text_token, prompt_token, numeric_anchor, cls, sep, mask };

struct NumericPayload {
  std::string tag_name;
  double value = 0.0;  // normalized, in [0,1]
};

struct SequenceUnit {
  UnitKind kind = UnitKind::text_token;
  std::string surface;
  std::optional<NumericPayload> numeric;  // present iff kind == numeric_anchor

  static SequenceUnit text(std::string s);
  static SequenceUnit prompt(std::string s);
  static SequenceUnit anchor(std::string tag, double value);
  static SequenceUnit cls_unit();
  static SequenceUnit sep_unit();
};

struct WrappedSequence {
  std::vector<SequenceUnit> units;  // [CLS] ... [SEP]
  std::string source_id;
  std::string source_modality;

  std::size_t size() const { return units.size(); }
  // Throws if the CLS/SEP frame, prompt-token closure, or anchor payload
  // invariants are violated.
  void validate() const;
};

// Deterministic per-modality template expansion. Numeric entries become
// "[ATTR] tag | [NUM]" with the anchor carrying the min-max-normalized value.
WrappedSequence wrap_record(const corpus::CorpusRecord& r,
                            const corpus::NormalizationStats& stats);

// Slots eligible for masking: text tokens only.
std::set<std::size_t> maskable_positions(const WrappedSequence& s);

// Convenience wrappers used by the KE module and the service-vector paradigm.
WrappedSequence wrap_entity_surface(const std::string& surface);
WrappedSequence wrap_relation_surface(const std::string& surface);
WrappedSequence wrap_log_row(const corpus::MachineLogRow& row,
                             const corpus::NormalizationStats& stats);

// One JSON object per sequence: {"units":[{"kind","surface","tag"?,"value"?}]}.
std::string to_debug_json(const WrappedSequence& s);

std::string to_string(UnitKind k);

}  // namespace ktele::prompting
