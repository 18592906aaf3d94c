#pragma once

#include <map>
#include <string>
#include <vector>

#include "ktele/core/tape.hpp"
#include "ktele/prompting.hpp"
#include "ktele/tokenizer.hpp"

namespace ktele::backbone {

struct EncoderConfig {
  int num_layers = 4;
  int num_heads = 4;
  int hidden_dim = 128;
  int ffn_dim = 512;
  int vocab_size = 0;
  int max_len = 128;
  double dropout_rate = 0.1;

  void validate() const;
};

struct EncoderOutput {
  Mat hidden;  // n x d
  Vec pooled;  // hidden row 0 ([CLS])
};

// Post-LN transformer encoder with learned absolute position embeddings.
// Numeric-anchor positions take externally supplied embeddings (the adaptive
// numeric encoder output) in place of the [NUM] token embedding.
class Encoder {
 public:
  // Creates parameters under `prefix` in the store. `tied_token_embedding`
  // lets the RTD generator share the main model's token table.
  Encoder(EncoderConfig cfg, ad::ParamStore& store, Rng& init_rng,
          std::string prefix = "backbone/", ad::Param* tied_token_embedding = nullptr);

  // Tape forward. `anchors` maps sequence position -> 1 x d Var to inject.
  // Sequences longer than max_len are truncated (keeping the final [SEP]) and
  // counted in truncation_count().
  ad::Var forward(ad::Tape& t, std::vector<int> ids,
                  std::map<Index, ad::Var> anchors = {}, bool train = false,
                  Rng* dropout_rng = nullptr) const;

  // Evaluation-mode encode of a wrapped sequence; `anchor_values` maps unit
  // position -> precomputed numeric embedding. Missing anchors fall back to
  // the [NUM] token embedding.
  EncoderOutput encode(const prompting::WrappedSequence& seq,
                       const tokenizer::Vocabulary& vocab,
                       const std::map<Index, Vec>& anchor_values = {}) const;

  // MLM head logits for the given positions of a forward result (k x vocab).
  // The output projection is tied to the token embedding table.
  ad::Var mlm_logits(ad::Tape& t, ad::Var hidden, const std::vector<Index>& positions) const;

  // Replaced-token-detection head: one logit per position (n x 1).
  ad::Var rtd_logits(ad::Tape& t, ad::Var hidden) const;

  const EncoderConfig& config() const { return cfg_; }
  ad::Param& token_embedding() const { return *tok_emb_; }
  long truncation_count() const { return truncations_; }

 private:
  ad::Var embed(ad::Tape& t, const std::vector<int>& ids,
                const std::map<Index, ad::Var>& anchors, bool train, Rng* rng) const;

  EncoderConfig cfg_;
  ad::ParamStore* store_ = nullptr;
  std::string prefix_;
  ad::Param* tok_emb_ = nullptr;
  mutable long truncations_ = 0;
};

// Mean cross-entropy of the MLM head over the plan's masked positions; 0 when
// the plan is empty.
ad::Var mlm_loss(ad::Tape& t, const Encoder& enc, ad::Var hidden,
                 const tokenizer::MaskPlan& plan);

// Mean binary cross-entropy of per-position discriminator logits against
// replaced/original labels; the caller restricts positions to non-special ones.
ad::Var rtd_loss(ad::Tape& t, ad::Var logits, const std::vector<Index>& positions,
                 const Vec& labels);

// InfoNCE over two dropout views of a batch of pooled vectors (B x d each),
// cosine similarity, temperature tau. B must be >= 2.
ad::Var simcse_loss(ad::Tape& t, ad::Var pooled_a, ad::Var pooled_b, double tau);

}  // namespace ktele::backbone
