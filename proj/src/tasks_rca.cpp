#include "ktele/tasks/rca.hpp"

#include <cmath>
#include <stdexcept>

namespace ktele::tasks {

using namespace ktele::ad;

void NetworkStateGraph::validate(bool require_roots) const {
  if (num_nodes < 1) throw std::invalid_argument("graph needs nodes");
  if (X.rows() != num_nodes) throw std::invalid_argument("X row count != |V|");
  if ((X.array() < 0.0).any()) throw std::invalid_argument("X entries must be >= 0");
  for (const auto& [u, v] : edges)
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw std::invalid_argument("edge endpoint out of range");
  if (require_roots && root_labels.empty())
    throw std::invalid_argument("training graph needs root labels");
  for (int r : root_labels)
    if (r < 0 || r >= num_nodes) throw std::invalid_argument("root label out of range");
}

Mat rca_init_features(const NetworkStateGraph& g, const Mat& event_embeddings) {
  if (g.X.cols() != event_embeddings.rows())
    throw std::invalid_argument("event embedding count != feature columns");
  Mat h = Mat::Zero(g.num_nodes, event_embeddings.cols());
  for (int j = 0; j < g.num_nodes; ++j) {
    const double total = g.X.row(j).sum();
    if (total > 0.0) h.row(j) = (g.X.row(j) * event_embeddings) / total;
  }
  return h;
}

Mat normalized_adjacency(const NetworkStateGraph& g) {
  Mat a = Mat::Identity(g.num_nodes, g.num_nodes);  // self-loops
  for (const auto& [u, v] : g.edges) {
    if (u == v) continue;
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  Vec dinv_sqrt(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) dinv_sqrt(i) = 1.0 / std::sqrt(a.row(i).sum());
  return dinv_sqrt.asDiagonal() * a * dinv_sqrt.asDiagonal();
}

Mat gcn_layer(const Mat& norm_adj, const Mat& h, const Mat& omega, bool relu_act) {
  Mat z = norm_adj * h * omega;
  if (relu_act) z = z.array().max(0.0);
  return z;
}

RcaModel::RcaModel(int in_dim, RcaConfig cfg, ParamStore& store, Rng& rng,
                   std::string prefix)
    : cfg_(std::move(cfg)), store_(&store), prefix_(std::move(prefix)), in_dim_(in_dim) {
  if (cfg_.gcn_dims.empty()) throw std::invalid_argument("need at least one GCN layer");
  int d = in_dim;
  const double std0 = 0.1;
  for (std::size_t l = 0; l < cfg_.gcn_dims.size(); ++l) {
    store.create_normal(prefix_ + "gcn/omega" + std::to_string(l), d, cfg_.gcn_dims[l],
                        std0 / std::sqrt(double(d)), rng);
    d = cfg_.gcn_dims[l];
  }
  store.create_normal(prefix_ + "mlp/w1", d, cfg_.mlp_hidden, std0 / std::sqrt(double(d)),
                      rng);
  store.create_constant(prefix_ + "mlp/b1", 1, cfg_.mlp_hidden, 0.0);
  store.create_normal(prefix_ + "mlp/w2", cfg_.mlp_hidden, 1,
                      std0 / std::sqrt(double(cfg_.mlp_hidden)), rng);
  store.create_constant(prefix_ + "mlp/b2", 1, 1, 0.0);
}

Var RcaModel::scores(Tape& t, const NetworkStateGraph& g, const Mat& h0) const {
  if (h0.cols() != in_dim_) throw std::invalid_argument("feature dim mismatch");
  Var adj = t.constant(normalized_adjacency(g));
  Var h = t.constant(h0);
  for (std::size_t l = 0; l < cfg_.gcn_dims.size(); ++l) {
    Var omega = t.param(store_->get(prefix_ + "gcn/omega" + std::to_string(l)));
    h = matmul(t, adj, matmul(t, h, omega));
    if (cfg_.relu_act) h = relu(t, h);
  }
  Var z = add_rowvec(t, matmul(t, h, t.param(store_->get(prefix_ + "mlp/w1"))),
                     t.param(store_->get(prefix_ + "mlp/b1")));
  z = relu(t, z);
  return add_rowvec(t, matmul(t, z, t.param(store_->get(prefix_ + "mlp/w2"))),
                    t.param(store_->get(prefix_ + "mlp/b2")));
}

Vec RcaModel::scores_eval(const NetworkStateGraph& g, const Mat& h0) const {
  Tape t;
  return t.val(scores(t, g, h0)).col(0);
}

Var rca_logistic_loss(Tape& t, Var scores, const std::vector<int>& labels_pm1) {
  const Index n = t.val(scores).rows();
  if (Index(labels_pm1.size()) != n)
    throw std::invalid_argument("label count mismatch");
  Vec neg_y(n);
  for (Index i = 0; i < n; ++i) {
    if (labels_pm1[std::size_t(i)] != 1 && labels_pm1[std::size_t(i)] != -1)
      throw std::invalid_argument("labels must be +-1");
    neg_y(i) = -double(labels_pm1[std::size_t(i)]);
  }
  // ln(1 + e^{-y s}) == softplus(-y s)
  return sum_all(t, softplus(t, cmul(t, scores, t.constant(neg_y))));
}

}  // namespace ktele::tasks
