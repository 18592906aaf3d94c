#pragma once

#include <set>
#include <string>
#include <vector>

#include "ktele/core/tape.hpp"

namespace ktele::tasks {

// Network state: NE graph plus the abnormal-event count matrix X and labeled
// root-cause nodes (y = +1, others -1).
struct NetworkStateGraph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // undirected
  Mat X;                                   // |V| x N_ev, non-negative counts
  std::set<int> root_labels;

  void validate(bool require_roots = true) const;
};

// H_j = x_j E / sum(x_j); all-zero rows become zero vectors.
Mat rca_init_features(const NetworkStateGraph& g, const Mat& event_embeddings);

// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
Mat normalized_adjacency(const NetworkStateGraph& g);

// One GCN layer on plain matrices (reference path for the spec examples).
Mat gcn_layer(const Mat& norm_adj, const Mat& h, const Mat& omega, bool relu_act);

struct RcaConfig {
  std::vector<int> gcn_dims = {1024, 512};  // hidden, output
  int mlp_hidden = 128;
  bool relu_act = true;
};

// 2-layer GCN + 2-layer scoring MLP trained with the logistic loss.
class RcaModel {
 public:
  RcaModel(int in_dim, RcaConfig cfg, ad::ParamStore& store, Rng& rng,
           std::string prefix = "rca/");

  // Node scores (|V| x 1) for one graph given its initialized features.
  ad::Var scores(ad::Tape& t, const NetworkStateGraph& g, const Mat& h0) const;
  Vec scores_eval(const NetworkStateGraph& g, const Mat& h0) const;

  const RcaConfig& config() const { return cfg_; }

 private:
  RcaConfig cfg_;
  ad::ParamStore* store_;
  std::string prefix_;
  int in_dim_;
};

// sum_j ln(1 + exp(-y_j s_j)) with y in {+1,-1}.
ad::Var rca_logistic_loss(ad::Tape& t, ad::Var scores, const std::vector<int>& labels_pm1);

}  // namespace ktele::tasks
