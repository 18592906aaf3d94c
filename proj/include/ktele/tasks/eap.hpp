#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ktele/core/tape.hpp"

namespace ktele::tasks {

// Event pair with the NEs the events depend on and their occurrence times.
struct EventPairSample {
  int event_i = 0;
  int event_j = 0;
  int ne_i = 0;
  int ne_j = 0;
  std::int64_t t_i = 0;
  std::int64_t t_j = 0;
  int label = 0;  // 1 = validated trigger pair
};

struct NeGraph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;

  // one-hop neighborhood including the node itself
  std::vector<std::vector<int>> closed_neighborhoods() const;
};

struct EapConfig {
  int ne_dim = 16;  // learnable per-NE vectors at desk scale
};

// s_ij = W2 [E_i; E_j; n_i; n_j; d_ij]: two logits classified with softmax CE.
class EapModel {
 public:
  EapModel(int event_dim, int num_nes, EapConfig cfg, ad::ParamStore& store, Rng& rng,
           std::string prefix = "eap/");

  // Mean of the learnable NE embeddings over the closed neighborhood.
  ad::Var aggregate_ne(ad::Tape& t, int ne, const NeGraph& g) const;

  // (t_i - t_j) proyected by W1 in R^{1x2}, no bias.
  ad::Var time_encode(ad::Tape& t, std::int64_t t_i, std::int64_t t_j) const;

  // 1 x 2 logits for a pair; event embeddings are rows of `event_embeddings`.
  ad::Var pair_logits(ad::Tape& t, const EventPairSample& pair, const Mat& event_embeddings,
                      const NeGraph& g) const;

  int concat_dim() const;

 private:
  EapConfig cfg_;
  ad::ParamStore* store_;
  std::string prefix_;
  int event_dim_;
  int num_nes_;
};

// Softmax cross-entropy over the two logits, averaged over the batch rows.
ad::Var eap_loss(ad::Tape& t, ad::Var logits, const std::vector<int>& labels);

// One negative per positive by replacing one side with a random pool event;
// rejection-sampled against the positive set (and already drawn negatives).
std::vector<EventPairSample> eap_generate_negatives(
    const std::vector<EventPairSample>& positives, int num_events,
    const std::vector<std::pair<int, std::int64_t>>& event_context,  // (ne, base time)
    std::uint64_t seed);

}  // namespace ktele::tasks
