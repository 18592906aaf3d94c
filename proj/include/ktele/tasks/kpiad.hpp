#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ktele/core/tape.hpp"

namespace ktele::tasks {

// A machine-data segment: per-moment encoded feature vectors plus anomaly
// labels. A segment is abnormal iff any point is.
struct KpiSegment {
  Mat points;                    // n x d_enc, frozen encoder outputs
  std::vector<int> point_labels; // 0/1 per point
  int segment_label = 0;

  void validate() const;
};

struct VtConfig {
  int layers = 2;
  int heads = 3;
  int d_model = 48;  // divisible by heads
  int max_len = 64;
  double focal_gamma = 2.0;

  void validate() const;
};

// Self-attention stack over the time axis with learnable position embeddings;
// per-point logits plus one pooled segment logit.
class VerticalTransformer {
 public:
  VerticalTransformer(int input_dim, VtConfig cfg, ad::ParamStore& store, Rng& rng,
                      std::string prefix = "kpiad/");

  // Returns (point logits n x 1, segment logit 1 x 1).
  std::pair<ad::Var, ad::Var> forward(ad::Tape& t, const Mat& points) const;

  std::pair<Vec, double> forward_eval(const Mat& points) const;

  const VtConfig& config() const { return cfg_; }

 private:
  VtConfig cfg_;
  ad::ParamStore* store_;
  std::string prefix_;
  int input_dim_;
};

// L_AD = focal(segment) + (1/N_seg) sum_n focal(point_n).
ad::Var kpiad_loss(ad::Tape& t, ad::Var point_logits, ad::Var segment_logit,
                   const std::vector<int>& point_labels, int segment_label,
                   double focal_gamma);

}  // namespace ktele::tasks
