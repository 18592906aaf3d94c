#include "ktele/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ktele::tokenizer {

using corpus::SpecialTokenSet;
using prompting::UnitKind;
using prompting::WrappedSequence;

namespace {

std::vector<std::string> fixed_specials() {
  std::vector<std::string> s = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  for (const auto& p : SpecialTokenSet::prompt_tokens()) s.push_back(p);
  s.push_back(SpecialTokenSet::separator());
  return s;
}

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& base_tokens,
                       const std::set<std::string>& tele_tokens,
                       const std::vector<std::vector<std::string>>& lexicon_phrases) {
  std::vector<std::string> ordered = fixed_specials();
  for (const auto& t : tele_tokens) ordered.push_back(t);
  const int first_regular = int(ordered.size());
  for (const auto& t : base_tokens) {
    if (std::find(ordered.begin(), ordered.end(), t) == ordered.end()) ordered.push_back(t);
  }
  index_tokens(ordered, first_regular);
  lexicon_ = lexicon_phrases;
}

void Vocabulary::index_tokens(const std::vector<std::string>& ordered, int first_regular) {
  id_to_token_ = ordered;
  token_to_id_.clear();
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (!token_to_id_.emplace(ordered[i], int(i)).second)
      throw std::invalid_argument("duplicate vocabulary token: " + ordered[i]);
  }
  first_regular_ = first_regular;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  return id_to_token_.at(std::size_t(id));
}

int Vocabulary::unit_id(const prompting::SequenceUnit& u) const {
  switch (u.kind) {
    case UnitKind::cls: return cls_id();
    case UnitKind::sep: return sep_id();
    case UnitKind::mask: return mask_id();
    case UnitKind::numeric_anchor: return id_of("[NUM]");
    case UnitKind::prompt_token:
    case UnitKind::text_token: return id_of(u.surface);
  }
  throw std::logic_error("bad unit kind");
}

std::vector<int> Vocabulary::encode_units(
    const std::vector<prompting::SequenceUnit>& units) const {
  std::vector<int> ids;
  ids.reserve(units.size());
  for (const auto& u : units) ids.push_back(unit_id(u));
  return ids;
}

void Vocabulary::save(const std::string& vocab_path) const {
  std::ofstream os(vocab_path);
  if (!os) throw std::runtime_error("cannot write vocabulary: " + vocab_path);
  // first_regular marker kept implicit: specials are the fixed prefix plus
  // tele tokens, terminated by a blank marker line.
  for (int i = 0; i < size(); ++i) {
    if (i == first_regular_) os << "##BASE##\n";
    os << id_to_token_[std::size_t(i)] << "\n";
  }
  if (first_regular_ == size()) os << "##BASE##\n";
}

Vocabulary Vocabulary::load(const std::string& vocab_path,
                            const std::vector<std::vector<std::string>>& lexicon) {
  std::ifstream is(vocab_path);
  if (!is) throw std::runtime_error("cannot open vocabulary: " + vocab_path);
  std::vector<std::string> ordered;
  int first_regular = -1;
  std::string line;
  while (std::getline(is, line)) {
    if (line == "##BASE##") {
      first_regular = int(ordered.size());
      continue;
    }
    if (!line.empty()) ordered.push_back(line);
  }
  if (first_regular < 0) throw std::runtime_error("vocabulary missing ##BASE## marker");
  Vocabulary v;
  v.index_tokens(ordered, first_regular);
  v.lexicon_ = lexicon;
  return v;
}

void Vocabulary::save_lexicon(const std::string& path,
                              const std::vector<std::vector<std::string>>& lexicon) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write lexicon: " + path);
  for (const auto& phrase : lexicon) {
    for (std::size_t i = 0; i < phrase.size(); ++i) os << (i ? " " : "") << phrase[i];
    os << "\n";
  }
}

std::vector<std::vector<std::string>> Vocabulary::load_lexicon(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open lexicon: " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    auto toks = corpus::split_whitespace(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

// ---- whole-word segmentation -------------------------------------------------

std::vector<std::vector<std::size_t>> segment_whole_words(
    const std::vector<std::string>& tokens,
    const std::vector<std::vector<std::string>>& lexicon) {
  // phrases sorted longest-first so the greedy match prefers them
  std::vector<const std::vector<std::string>*> phrases;
  phrases.reserve(lexicon.size());
  for (const auto& p : lexicon)
    if (!p.empty()) phrases.push_back(&p);
  std::sort(phrases.begin(), phrases.end(),
            [](const auto* a, const auto* b) {
              if (a->size() != b->size()) return a->size() > b->size();
              return *a < *b;
            });

  std::vector<std::vector<std::size_t>> groups;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t matched = 0;
    for (const auto* p : phrases) {
      if (p->size() > tokens.size() - i) continue;
      if (std::equal(p->begin(), p->end(), tokens.begin() + long(i))) {
        matched = p->size();
        break;
      }
    }
    if (matched == 0) matched = 1;
    std::vector<std::size_t> group(matched);
    for (std::size_t k = 0; k < matched; ++k) group[k] = i + k;
    groups.push_back(std::move(group));
    i += matched;
  }
  return groups;
}

std::vector<std::vector<std::size_t>> word_groups(const WrappedSequence& s,
                                                  const Vocabulary& vocab) {
  std::vector<std::vector<std::size_t>> out;
  std::size_t i = 0;
  while (i < s.units.size()) {
    if (s.units[i].kind != UnitKind::text_token) {
      ++i;
      continue;
    }
    std::size_t run_start = i;
    std::vector<std::string> run;
    while (i < s.units.size() && s.units[i].kind == UnitKind::text_token) {
      run.push_back(s.units[i].surface);
      ++i;
    }
    for (auto& group : segment_whole_words(run, vocab.lexicon())) {
      for (auto& idx : group) idx += run_start;
      out.push_back(std::move(group));
    }
  }
  return out;
}

// ---- mask plans ----------------------------------------------------------------

MaskStrategy mask_strategy_from_string(const std::string& s) {
  if (s == "dynamic") return MaskStrategy::dynamic;
  if (s == "wwm") return MaskStrategy::wwm;
  throw std::invalid_argument("unknown mask strategy: " + s);
}

MaskPlan build_mask_plan(const WrappedSequence& s,
                         const std::vector<std::vector<std::size_t>>& groups, double rate,
                         MaskStrategy strategy, const Vocabulary& vocab,
                         std::uint64_t rng_seed) {
  if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("mask rate outside [0,1]");
  const auto maskable = prompting::maskable_positions(s);

  Rng rng(rng_seed);
  std::vector<std::size_t> chosen;
  if (strategy == MaskStrategy::wwm) {
    const std::size_t k = std::size_t(std::ceil(rate * double(groups.size())));
    for (auto gi : rng.sample_without_replacement(groups.size(), k))
      for (auto pos : groups[gi]) chosen.push_back(pos);
  } else {
    std::vector<std::size_t> pool(maskable.begin(), maskable.end());
    const std::size_t k = std::size_t(std::ceil(rate * double(pool.size())));
    for (auto pi : rng.sample_without_replacement(pool.size(), k))
      chosen.push_back(pool[pi]);
  }

  MaskPlan plan;
  for (auto pos : chosen) {
    if (!maskable.count(pos))
      throw std::invalid_argument("mask plan group touches a non-maskable position");
    plan.masked_positions.insert(pos);
  }
  // replacement draws in ascending position order, so a seed fixes the plan
  for (auto pos : plan.masked_positions) {
    plan.targets[pos] = vocab.id_of(s.units[pos].surface);
    const double u = rng.uniform01();
    if (u < 0.8) {
      plan.replacement[pos] = Replacement::mask_token;
    } else if (u < 0.9) {
      plan.replacement[pos] = Replacement::random_token;
      plan.random_ids[pos] =
          vocab.first_regular_id() + int(rng.index(std::size_t(vocab.regular_count())));
    } else {
      plan.replacement[pos] = Replacement::keep;
    }
  }
  return plan;
}

std::vector<int> apply_mask_plan(const std::vector<int>& ids, const MaskPlan& plan,
                                 const Vocabulary& vocab) {
  std::vector<int> out = ids;
  for (auto pos : plan.masked_positions) {
    switch (plan.replacement.at(pos)) {
      case Replacement::mask_token:
        out[pos] = vocab.mask_id();
        break;
      case Replacement::random_token:
        out[pos] = plan.random_ids.at(pos);
        break;
      case Replacement::keep:
        break;
    }
  }
  return out;
}

}  // namespace ktele::tokenizer
