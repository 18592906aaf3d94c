#include "ktele/tasks/kpiad.hpp"

#include <cmath>
#include <stdexcept>

namespace ktele::tasks {

using namespace ktele::ad;

void KpiSegment::validate() const {
  if (points.rows() < 1) throw std::invalid_argument("segment must have points");
  if (Index(point_labels.size()) != points.rows())
    throw std::invalid_argument("point label count mismatch");
  bool any = false;
  for (int y : point_labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0/1");
    any = any || y == 1;
  }
  if ((segment_label == 1) != any)
    throw std::invalid_argument("segment label must be the OR of point labels");
}

void VtConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < heads || max_len < 1)
    throw std::invalid_argument("bad vertical transformer dims");
  if (d_model % heads != 0) throw std::invalid_argument("d_model must divide by heads");
  if (focal_gamma < 0.0) throw std::invalid_argument("focal gamma must be >= 0");
}

VerticalTransformer::VerticalTransformer(int input_dim, VtConfig cfg, ParamStore& store,
                                         Rng& rng, std::string prefix)
    : cfg_(cfg), store_(&store), prefix_(std::move(prefix)), input_dim_(input_dim) {
  cfg_.validate();
  const int d = cfg_.d_model;
  const double std0 = 0.05;
  store.create_normal(prefix_ + "in/w", input_dim, d, std0, rng);
  store.create_constant(prefix_ + "in/b", 1, d, 0.0);
  store.create_normal(prefix_ + "pos", cfg_.max_len, d, std0, rng);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string lp = prefix_ + "layer" + std::to_string(l) + "/";
    for (const char* w : {"attn/wq", "attn/wk", "attn/wv", "attn/wo"})
      store.create_normal(lp + w, d, d, std0, rng);
    store.create_constant(lp + "ln1_g", 1, d, 1.0);
    store.create_constant(lp + "ln1_b", 1, d, 0.0);
    store.create_normal(lp + "ffn/w1", d, 2 * d, std0, rng);
    store.create_constant(lp + "ffn/b1", 1, 2 * d, 0.0);
    store.create_normal(lp + "ffn/w2", 2 * d, d, std0, rng);
    store.create_constant(lp + "ffn/b2", 1, d, 0.0);
    store.create_constant(lp + "ln2_g", 1, d, 1.0);
    store.create_constant(lp + "ln2_b", 1, d, 0.0);
  }
  store.create_normal(prefix_ + "point_head/w", d, 1, std0, rng);
  store.create_constant(prefix_ + "point_head/b", 1, 1, 0.0);
  store.create_normal(prefix_ + "seg_head/w", d, 1, std0, rng);
  store.create_constant(prefix_ + "seg_head/b", 1, 1, 0.0);
}

std::pair<Var, Var> VerticalTransformer::forward(Tape& t, const Mat& points) const {
  if (points.rows() < 1) throw std::invalid_argument("empty segment");
  if (points.cols() != input_dim_) throw std::invalid_argument("point dim mismatch");
  if (points.rows() > cfg_.max_len) throw std::invalid_argument("segment exceeds max_len");
  const int d = cfg_.d_model;
  const int dh = d / cfg_.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));
  const Index n = points.rows();

  Var x = add_rowvec(t, matmul(t, t.constant(points), t.param(store_->get(prefix_ + "in/w"))),
                     t.param(store_->get(prefix_ + "in/b")));
  std::vector<Index> posrows(std::size_t(n));
  for (Index i = 0; i < n; ++i) posrows[std::size_t(i)] = i;
  x = add(t, x, gather_rows(t, t.param(store_->get(prefix_ + "pos")), posrows));

  auto ln = [&](Var v, const std::string& g, const std::string& b) {
    return add_rowvec(t, mul_rowvec(t, layer_norm_rows(t, v), t.param(store_->get(g))),
                      t.param(store_->get(b)));
  };

  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string lp = prefix_ + "layer" + std::to_string(l) + "/";
    Var q = matmul(t, x, t.param(store_->get(lp + "attn/wq")));
    Var k = matmul(t, x, t.param(store_->get(lp + "attn/wk")));
    Var v = matmul(t, x, t.param(store_->get(lp + "attn/wv")));
    std::vector<Var> heads;
    for (int h = 0; h < cfg_.heads; ++h) {
      Var qh = slice_cols(t, q, h * dh, dh);
      Var kh = slice_cols(t, k, h * dh, dh);
      Var vh = slice_cols(t, v, h * dh, dh);
      Var attn = softmax_rows(t, scale(t, matmul(t, qh, transpose(t, kh)), inv_sqrt_dh));
      heads.push_back(matmul(t, attn, vh));
    }
    Var o = matmul(t, concat_cols(t, heads), t.param(store_->get(lp + "attn/wo")));
    x = ln(add(t, x, o), lp + "ln1_g", lp + "ln1_b");
    Var f = add_rowvec(t, matmul(t, x, t.param(store_->get(lp + "ffn/w1"))),
                       t.param(store_->get(lp + "ffn/b1")));
    f = gelu(t, f);
    f = add_rowvec(t, matmul(t, f, t.param(store_->get(lp + "ffn/w2"))),
                   t.param(store_->get(lp + "ffn/b2")));
    x = ln(add(t, x, f), lp + "ln2_g", lp + "ln2_b");
  }

  Var point_logits = add_rowvec(t, matmul(t, x, t.param(store_->get(prefix_ + "point_head/w"))),
                                t.param(store_->get(prefix_ + "point_head/b")));
  Mat pool = Mat::Constant(1, n, 1.0 / double(n));
  Var pooled = matmul(t, t.constant(pool), x);
  Var seg_logit = add_rowvec(t, matmul(t, pooled, t.param(store_->get(prefix_ + "seg_head/w"))),
                             t.param(store_->get(prefix_ + "seg_head/b")));
  return {point_logits, seg_logit};
}

std::pair<Vec, double> VerticalTransformer::forward_eval(const Mat& points) const {
  Tape t;
  auto [pt, seg] = forward(t, points);
  return {t.val(pt).col(0), t.scalar(seg)};
}

Var kpiad_loss(Tape& t, Var point_logits, Var segment_logit,
               const std::vector<int>& point_labels, int segment_label,
               double focal_gamma) {
  if (focal_gamma < 0.0) throw std::invalid_argument("focal gamma must be >= 0");
  const Index n = t.val(point_logits).rows();
  if (Index(point_labels.size()) != n)
    throw std::invalid_argument("kpiad_loss: label count mismatch");
  Vec pl(n);
  for (Index i = 0; i < n; ++i) pl(i) = double(point_labels[std::size_t(i)]);
  Vec sl(1);
  sl(0) = double(segment_label);
  // focal_bce averages over rows, which matches the (1/N_seg) * sum form
  Var point_term = focal_bce_with_logits(t, point_logits, pl, focal_gamma);
  Var seg_term = focal_bce_with_logits(t, segment_logit, sl, focal_gamma);
  return add(t, seg_term, point_term);
}

}  // namespace ktele::tasks
