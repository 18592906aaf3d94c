#include "ktele/tasks/eap.hpp"

#include <stdexcept>

namespace ktele::tasks {

using namespace ktele::ad;

std::vector<std::vector<int>> NeGraph::closed_neighborhoods() const {
  std::vector<std::set<int>> nbr(std::size_t(num_nodes));
  for (int i = 0; i < num_nodes; ++i) nbr[std::size_t(i)].insert(i);
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw std::invalid_argument("NE edge out of range");
    nbr[std::size_t(u)].insert(v);
    nbr[std::size_t(v)].insert(u);
  }
  std::vector<std::vector<int>> out(std::size_t(num_nodes));
  for (int i = 0; i < num_nodes; ++i)
    out[std::size_t(i)].assign(nbr[std::size_t(i)].begin(), nbr[std::size_t(i)].end());
  return out;
}

EapModel::EapModel(int event_dim, int num_nes, EapConfig cfg, ParamStore& store, Rng& rng,
                   std::string prefix)
    : cfg_(cfg), store_(&store), prefix_(std::move(prefix)), event_dim_(event_dim),
      num_nes_(num_nes) {
  if (event_dim < 1 || num_nes < 1) throw std::invalid_argument("bad EAP dims");
  store.create_normal(prefix_ + "ne_emb", num_nes, cfg_.ne_dim, 0.1, rng);
  store.create_normal(prefix_ + "w1", 1, 2, 0.1, rng);
  store.create_normal(prefix_ + "w2", concat_dim(), 2, 0.1, rng);
}

int EapModel::concat_dim() const { return 2 * event_dim_ + 2 * cfg_.ne_dim + 2; }

Var EapModel::aggregate_ne(Tape& t, int ne, const NeGraph& g) const {
  if (ne < 0 || ne >= g.num_nodes || g.num_nodes != num_nes_)
    throw std::invalid_argument("NE id out of range");
  const auto hood = g.closed_neighborhoods()[std::size_t(ne)];
  std::vector<Index> rows(hood.begin(), hood.end());
  Var gathered = gather_rows(t, t.param(store_->get(prefix_ + "ne_emb")), rows);
  Mat pool = Mat::Constant(1, Index(rows.size()), 1.0 / double(rows.size()));
  return matmul(t, t.constant(pool), gathered);
}

Var EapModel::time_encode(Tape& t, std::int64_t t_i, std::int64_t t_j) const {
  return scale(t, t.param(store_->get(prefix_ + "w1")), double(t_i - t_j));
}

Var EapModel::pair_logits(Tape& t, const EventPairSample& pair, const Mat& event_embeddings,
                          const NeGraph& g) const {
  if (event_embeddings.cols() != event_dim_)
    throw std::invalid_argument("event embedding dim mismatch with model configuration");
  if (pair.event_i < 0 || pair.event_i >= event_embeddings.rows() || pair.event_j < 0 ||
      pair.event_j >= event_embeddings.rows())
    throw std::invalid_argument("event id out of range");
  Var e_i = t.constant(event_embeddings.row(pair.event_i));
  Var e_j = t.constant(event_embeddings.row(pair.event_j));
  Var n_i = aggregate_ne(t, pair.ne_i, g);
  Var n_j = aggregate_ne(t, pair.ne_j, g);
  Var d_ij = time_encode(t, pair.t_i, pair.t_j);
  Var feats = concat_cols(t, {e_i, e_j, n_i, n_j, d_ij});
  return matmul(t, feats, t.param(store_->get(prefix_ + "w2")));
}

Var eap_loss(Tape& t, Var logits, const std::vector<int>& labels) {
  if (Index(labels.size()) != t.val(logits).rows())
    throw std::invalid_argument("eap_loss: label count mismatch");
  std::vector<Index> targets;
  targets.reserve(labels.size());
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0/1");
    targets.push_back(y);
  }
  return cross_entropy_rows(t, logits, targets);
}

std::vector<EventPairSample> eap_generate_negatives(
    const std::vector<EventPairSample>& positives, int num_events,
    const std::vector<std::pair<int, std::int64_t>>& event_context, std::uint64_t seed) {
  if (num_events < 2) throw std::invalid_argument("event pool too small");
  if (int(event_context.size()) != num_events)
    throw std::invalid_argument("event context size mismatch");
  std::set<std::pair<int, int>> taken;
  for (const auto& p : positives) taken.insert({p.event_i, p.event_j});

  Rng rng(seed);
  std::vector<EventPairSample> negatives;
  negatives.reserve(positives.size());
  for (const auto& p : positives) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      EventPairSample n = p;
      n.label = 0;
      const bool replace_first = rng.bernoulli(0.5);
      const int candidate = int(rng.index(std::size_t(num_events)));
      if (replace_first) {
        if (candidate == p.event_i) continue;
        n.event_i = candidate;
        n.ne_i = event_context[std::size_t(candidate)].first;
        n.t_i = event_context[std::size_t(candidate)].second;
      } else {
        if (candidate == p.event_j) continue;
        n.event_j = candidate;
        n.ne_j = event_context[std::size_t(candidate)].first;
        n.t_j = event_context[std::size_t(candidate)].second;
      }
      if (taken.count({n.event_i, n.event_j})) continue;
      taken.insert({n.event_i, n.event_j});
      negatives.push_back(n);
      placed = true;
    }
    if (!placed)
      throw std::runtime_error("eap_generate_negatives: exhausted attempts");
  }
  return negatives;
}

}  // namespace ktele::tasks
