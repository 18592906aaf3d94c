#pragma once

#include <array>
#include <string>
#include <vector>

#include "ktele/backbone.hpp"
#include "ktele/core/tape.hpp"

namespace ktele::anenc {

struct ANEncConfig {
  int N = 8;           // meta embeddings
  int L = 3;           // stacked layers
  int d = 128;         // hidden dim, divisible by N
  int r = 16;          // low-rank bypass rank, <= d
  double alpha = 1.0;  // bypass scale, >= 1
  double lambda = 1e-4;
  std::string act_fn = "gelu";
  bool enabled = true;

  void validate() const;
};

struct UncertaintyWeights {
  double mu1 = 1.0, mu2 = 1.0, mu3 = 1.0;
};

// Adaptive numeric encoder: L layers of attention-based numeric projection
// over N field-aware meta embeddings, FFN with a low-rank bypass, plus the
// numeric decoder, tag classifier and learnable uncertainty weights.
// Parameters live under the `prefix` namespace so an ablated checkpoint
// simply lacks them.
class ANEnc {
 public:
  ANEnc(ANEncConfig cfg, ad::ParamStore& store, Rng& init_rng, int known_tags,
        std::string prefix = "anenc/");

  // Attention-based numeric projection: softmax(t Wq E^T / sqrt(d/N)) weights
  // over the per-domain value conversions x Wv_i. Both inputs are 1 x d.
  ad::Var anp(ad::Tape& t, ad::Var x, ad::Var tag_emb) const;

  // One encoder layer: Norm(FFN(anp(x)) + alpha * x Wdown Wup).
  ad::Var layer(ad::Tape& t, ad::Var x, ad::Var tag_emb, int l) const;

  // Full stack for a scalar value in [0,1]; layer 1 input is act(v * Wfc).
  ad::Var forward_value(ad::Tape& t, double v, ad::Var tag_emb) const;

  // Numeric decoder: 2-layer feed-forward scalar head.
  ad::Var decode(ad::Tape& t, ad::Var h) const;

  // Tag classifier logits over the known-tag set.
  ad::Var tgc_logits(ad::Tape& t, ad::Var h) const;

  // lambda * sum_i ||I - Wv_i^T Wv_i||_F^2 over this encoder's parameters.
  ad::Var orthogonal_penalty(ad::Tape& t) const;

  // 1/2 sum L_i/mu_i^2 + sum ln(1 + mu_i^2) with mu^2 = exp(rho) learnable.
  ad::Var combine_uncertainty(ad::Tape& t, ad::Var l_reg, ad::Var l_cls, ad::Var l_nc) const;

  UncertaintyWeights weights() const;
  const ANEncConfig& config() const { return cfg_; }
  int known_tags() const { return known_tags_; }
  const std::string& prefix() const { return prefix_; }

  // Mean-pooled token embedding of a tag name from the backbone embedding
  // layer (the attention query source).
  ad::Var tag_embedding(ad::Tape& t, const backbone::Encoder& enc,
                        const tokenizer::Vocabulary& vocab, const std::string& tag) const;

  // Evaluation-mode embedding of one (tag, value) observation.
  Vec encode_observation(const backbone::Encoder& enc, const tokenizer::Vocabulary& vocab,
                         const std::string& tag, double value) const;

 private:
  ad::Var act(ad::Tape& t, ad::Var x) const;

  ANEncConfig cfg_;
  ad::ParamStore* store_ = nullptr;
  std::string prefix_;
  int known_tags_ = 0;
};

// Mean squared error between scalar predictions (B x 1) and target values.
ad::Var loss_reg(ad::Tape& t, ad::Var preds, const Vec& values);

// Cross-entropy of tag-classifier logits (rows) against tag indices.
ad::Var loss_cls(ad::Tape& t, ad::Var logits, const std::vector<Index>& tags);

// Numerical contrastive InfoNCE: for each anchor the in-batch sample with the
// nearest value is positive (ties to the lowest index); denominator spans all
// other samples. Batch must be >= 3.
ad::Var loss_nc(ad::Tape& t, const std::vector<ad::Var>& embeddings, const Vec& values,
                double tau);

// The positive index chosen for each anchor (exposed for property tests).
std::vector<Index> nearest_value_positives(const Vec& values);

// Plain-number versions for closed-form checks.
double auto_weighted_combine_value(const std::array<double, 3>& losses,
                                   const std::array<double, 3>& mu);
double orthogonal_penalty_value(const std::vector<Mat>& wv, double lambda);

}  // namespace ktele::anenc
