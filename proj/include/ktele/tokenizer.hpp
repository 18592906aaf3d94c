#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ktele/core/random.hpp"
#include "ktele/prompting.hpp"

namespace ktele::tokenizer {

// Vocabulary layout: [PAD] [UNK] [CLS] [SEP] [MASK], the seven prompt tokens,
// the "|" separator, mined tele tokens, then the base tokens. Whole-word
// phrases are sequences of base tokens.
class Vocabulary {
 public:
  Vocabulary(const std::vector<std::string>& base_tokens,
             const std::set<std::string>& tele_tokens,
             const std::vector<std::vector<std::string>>& lexicon_phrases = {});

  int id_of(const std::string& token) const;  // [UNK] id when absent
  const std::string& token_of(int id) const;
  int size() const { return int(id_to_token_.size()); }

  int pad_id() const { return 0; }
  int unk_id() const { return 1; }
  int cls_id() const { return 2; }
  int sep_id() const { return 3; }
  int mask_id() const { return 4; }
  bool is_special_id(int id) const { return id < first_regular_; }
  int first_regular_id() const { return first_regular_; }
  int regular_count() const { return size() - first_regular_; }

  int unit_id(const prompting::SequenceUnit& u) const;
  std::vector<int> encode_units(const std::vector<prompting::SequenceUnit>& units) const;

  const std::vector<std::vector<std::string>>& lexicon() const { return lexicon_; }

  void save(const std::string& vocab_path) const;            // one token per line
  static Vocabulary load(const std::string& vocab_path,
                         const std::vector<std::vector<std::string>>& lexicon = {});

  static void save_lexicon(const std::string& path,
                           const std::vector<std::vector<std::string>>& lexicon);
  static std::vector<std::vector<std::string>> load_lexicon(const std::string& path);

 private:
  explicit Vocabulary() = default;
  void index_tokens(const std::vector<std::string>& ordered, int first_regular);

  std::map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  int first_regular_ = 0;
  std::vector<std::vector<std::string>> lexicon_;
};

// Greedy longest-match left-to-right grouping of a token run against the
// lexicon; unmatched tokens become singleton groups. Returned indices are
// relative to `tokens`.
std::vector<std::vector<std::size_t>> segment_whole_words(
    const std::vector<std::string>& tokens,
    const std::vector<std::vector<std::string>>& lexicon);

// Whole-word groups of a wrapped sequence in absolute unit positions; prompt
// and numeric units split runs and never join groups.
std::vector<std::vector<std::size_t>> word_groups(const prompting::WrappedSequence& s,
                                                  const Vocabulary& vocab);

enum class Replacement { mask_token, random_token, keep };
enum class MaskStrategy { dynamic, wwm };

struct MaskPlan {
  std::set<std::size_t> masked_positions;
  std::map<std::size_t, int> targets;             // position -> original token id
  std::map<std::size_t, Replacement> replacement;
  std::map<std::size_t, int> random_ids;          // drawn at build time
};

// ceil(rate * |maskable tokens|) positions under dynamic, ceil(rate * |groups|)
// whole groups under wwm; 80/10/10 mask/random/keep per masked position.
MaskPlan build_mask_plan(const prompting::WrappedSequence& s,
                         const std::vector<std::vector<std::size_t>>& groups, double rate,
                         MaskStrategy strategy, const Vocabulary& vocab,
                         std::uint64_t rng_seed);

// Token ids with the plan applied (mask/random/keep at masked positions).
std::vector<int> apply_mask_plan(const std::vector<int>& ids, const MaskPlan& plan,
                                 const Vocabulary& vocab);

MaskStrategy mask_strategy_from_string(const std::string& s);

}  // namespace ktele::tokenizer
