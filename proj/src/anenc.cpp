#include "ktele/anenc.hpp"

#include <cmath>
#include <stdexcept>

namespace ktele::anenc {

using namespace ktele::ad;

void ANEncConfig::validate() const {
  if (N < 1 || L < 1 || d < 1) throw std::invalid_argument("anenc dims must be positive");
  if (d % N != 0) throw std::invalid_argument("d must be divisible by N");
  if (r < 1 || r > d) throw std::invalid_argument("rank r must be in [1, d]");
  if (alpha < 1.0) throw std::invalid_argument("alpha must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (act_fn != "gelu" && act_fn != "relu" && act_fn != "tanh")
    throw std::invalid_argument("unknown activation: " + act_fn);
}

ANEnc::ANEnc(ANEncConfig cfg, ParamStore& store, Rng& rng, int known_tags,
             std::string prefix)
    : cfg_(cfg), store_(&store), prefix_(std::move(prefix)), known_tags_(known_tags) {
  cfg_.validate();
  const int d = cfg_.d;
  const int dn = d / cfg_.N;
  const double std0 = 0.02;

  store.create_normal(prefix_ + "E", cfg_.N, dn, std0, rng);
  store.create_normal(prefix_ + "wq", d, dn, std0, rng);
  for (int i = 0; i < cfg_.N; ++i) {
    // near-orthogonal start: identity plus noise keeps the penalty small
    Param& wv = store.create_normal(prefix_ + "wv" + std::to_string(i), d, d, std0, rng);
    wv.value += Mat::Identity(d, d);
  }
  store.create_normal(prefix_ + "wfc", 1, d, 1.0, rng);
  for (int l = 0; l < cfg_.L; ++l) {
    const std::string lp = prefix_ + "layer" + std::to_string(l) + "/";
    store.create_normal(lp + "ffn/w1", d, d, std0, rng);
    store.create_constant(lp + "ffn/b1", 1, d, 0.0);
    store.create_normal(lp + "ffn/w2", d, d, std0, rng);
    store.create_constant(lp + "ffn/b2", 1, d, 0.0);
  }
  store.create_normal(prefix_ + "wdown", d, cfg_.r, std0, rng);
  store.create_normal(prefix_ + "wup", cfg_.r, d, std0, rng);

  store.create_normal(prefix_ + "ndec/w1", d, d, std0, rng);
  store.create_constant(prefix_ + "ndec/b1", 1, d, 0.0);
  store.create_normal(prefix_ + "ndec/w2", d, 1, std0, rng);
  store.create_constant(prefix_ + "ndec/b2", 1, 1, 0.0);

  if (known_tags_ > 0) {
    store.create_normal(prefix_ + "tgc/w", d, known_tags_, std0, rng);
    store.create_constant(prefix_ + "tgc/b", 1, known_tags_, 0.0);
  }

  store.create_constant(prefix_ + "uncertainty/rho", 1, 3, 0.0);  // mu = 1
}

Var ANEnc::act(Tape& t, Var x) const {
  if (cfg_.act_fn == "relu") return relu(t, x);
  if (cfg_.act_fn == "tanh") return tanh(t, x);
  return gelu(t, x);
}

Var ANEnc::anp(Tape& t, Var x, Var tag_emb) const {
  const int dn = cfg_.d / cfg_.N;
  Var q = matmul(t, tag_emb, t.param(store_->get(prefix_ + "wq")));  // 1 x d/N
  Var scores = scale(t, matmul(t, q, transpose(t, t.param(store_->get(prefix_ + "E")))),
                     1.0 / std::sqrt(double(dn)));                   // 1 x N
  Var weights = softmax_rows(t, scores);
  std::vector<Var> projections;
  projections.reserve(std::size_t(cfg_.N));
  for (int i = 0; i < cfg_.N; ++i)
    projections.push_back(
        matmul(t, x, t.param(store_->get(prefix_ + "wv" + std::to_string(i)))));
  return matmul(t, weights, concat_rows(t, projections));  // 1 x d
}

Var ANEnc::layer(Tape& t, Var x, Var tag_emb, int l) const {
  const std::string lp = prefix_ + "layer" + std::to_string(l) + "/";
  Var h = anp(t, x, tag_emb);
  Var f = add_rowvec(t, matmul(t, h, t.param(store_->get(lp + "ffn/w1"))),
                     t.param(store_->get(lp + "ffn/b1")));
  f = act(t, f);
  f = add_rowvec(t, matmul(t, f, t.param(store_->get(lp + "ffn/w2"))),
                 t.param(store_->get(lp + "ffn/b2")));
  Var bypass = matmul(t, matmul(t, x, t.param(store_->get(prefix_ + "wdown"))),
                      t.param(store_->get(prefix_ + "wup")));
  return layer_norm_rows(t, add(t, f, scale(t, bypass, cfg_.alpha)));
}

Var ANEnc::forward_value(Tape& t, double v, Var tag_emb) const {
  Var x = act(t, scale(t, t.param(store_->get(prefix_ + "wfc")), v));
  for (int l = 0; l < cfg_.L; ++l) x = layer(t, x, tag_emb, l);
  return x;
}

Var ANEnc::decode(Tape& t, Var h) const {
  Var z = add_rowvec(t, matmul(t, h, t.param(store_->get(prefix_ + "ndec/w1"))),
                     t.param(store_->get(prefix_ + "ndec/b1")));
  z = act(t, z);
  return add_rowvec(t, matmul(t, z, t.param(store_->get(prefix_ + "ndec/w2"))),
                    t.param(store_->get(prefix_ + "ndec/b2")));
}

Var ANEnc::tgc_logits(Tape& t, Var h) const {
  if (known_tags_ <= 0) throw std::logic_error("tag classifier has no known tags");
  return add_rowvec(t, matmul(t, h, t.param(store_->get(prefix_ + "tgc/w"))),
                    t.param(store_->get(prefix_ + "tgc/b")));
}

Var ANEnc::orthogonal_penalty(Tape& t) const {
  Var total = t.constant(Mat::Zero(1, 1));
  const Mat eye = Mat::Identity(cfg_.d, cfg_.d);
  for (int i = 0; i < cfg_.N; ++i) {
    Var w = t.param(store_->get(prefix_ + "wv" + std::to_string(i)));
    Var dev = sub(t, t.constant(eye), matmul(t, transpose(t, w), w));
    total = add(t, total, sum_all(t, square(t, dev)));
  }
  return scale(t, total, cfg_.lambda);
}

Var ANEnc::combine_uncertainty(Tape& t, Var l_reg, Var l_cls, Var l_nc) const {
  Var rho = t.param(store_->get(prefix_ + "uncertainty/rho"));  // 1 x 3
  std::array<Var, 3> losses = {l_reg, l_cls, l_nc};
  Var total = t.constant(Mat::Zero(1, 1));
  for (int i = 0; i < 3; ++i) {
    Var rho_i = slice_cols(t, rho, i, 1);
    Var weighted = cmul(t, exp(t, neg(t, rho_i)), losses[std::size_t(i)]);
    total = add(t, total, scale(t, weighted, 0.5));
    total = add(t, total, softplus(t, rho_i));  // ln(1 + mu^2), mu^2 = e^rho
  }
  return total;
}

UncertaintyWeights ANEnc::weights() const {
  const Mat& rho = store_->get(prefix_ + "uncertainty/rho").value;
  return {std::sqrt(std::exp(rho(0, 0))), std::sqrt(std::exp(rho(0, 1))),
          std::sqrt(std::exp(rho(0, 2)))};
}

Var ANEnc::tag_embedding(Tape& t, const backbone::Encoder& enc,
                         const tokenizer::Vocabulary& vocab, const std::string& tag) const {
  const auto toks = corpus::split_whitespace(tag);
  if (toks.empty()) throw std::invalid_argument("empty tag name");
  std::vector<Index> rows;
  rows.reserve(toks.size());
  for (const auto& tok : toks) rows.push_back(vocab.id_of(tok));
  Var gathered = gather_rows(t, t.param(enc.token_embedding()), rows);
  Mat pool = Mat::Constant(1, Index(rows.size()), 1.0 / double(rows.size()));
  return matmul(t, t.constant(pool), gathered);
}

Vec ANEnc::encode_observation(const backbone::Encoder& enc,
                              const tokenizer::Vocabulary& vocab, const std::string& tag,
                              double value) const {
  Tape t;
  Var h = forward_value(t, value, tag_embedding(t, enc, vocab, tag));
  return t.val(h).row(0).transpose();
}

// ---- losses ----------------------------------------------------------------

Var loss_reg(Tape& t, Var preds, const Vec& values) {
  if (t.val(preds).cols() != 1 || t.val(preds).rows() != values.size())
    throw std::invalid_argument("loss_reg: shape mismatch");
  Var diff = sub(t, preds, t.constant(values));
  return mean_all(t, square(t, diff));
}

Var loss_cls(Tape& t, Var logits, const std::vector<Index>& tags) {
  return cross_entropy_rows(t, logits, tags);
}

std::vector<Index> nearest_value_positives(const Vec& values) {
  const Index b = values.size();
  std::vector<Index> out(std::size_t(b));
  for (Index i = 0; i < b; ++i) {
    Index best = -1;
    double best_gap = 0.0;
    for (Index j = 0; j < b; ++j) {
      if (j == i) continue;
      const double gap = std::abs(values(j) - values(i));
      if (best < 0 || gap < best_gap) {  // strict: ties keep the lowest index
        best = j;
        best_gap = gap;
      }
    }
    out[std::size_t(i)] = best;
  }
  return out;
}

Var loss_nc(Tape& t, const std::vector<Var>& embeddings, const Vec& values, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");
  const Index b = Index(embeddings.size());
  if (b < 3) throw std::invalid_argument("loss_nc needs a batch of at least 3");
  if (values.size() != b) throw std::invalid_argument("loss_nc: value count mismatch");

  Var h = concat_rows(t, embeddings);
  Var sims = matmul(t, l2_normalize_rows(t, h), transpose(t, l2_normalize_rows(t, h)));
  sims = scale(t, sims, 1.0 / tau);
  // self-similarity excluded from every denominator
  Mat diag_mask = Mat::Zero(b, b);
  for (Index i = 0; i < b; ++i) diag_mask(i, i) = -1e30;
  sims = add(t, sims, t.constant(diag_mask));
  return cross_entropy_rows(t, sims, nearest_value_positives(values));
}

// ---- plain-number helpers ----------------------------------------------------

double auto_weighted_combine_value(const std::array<double, 3>& losses,
                                   const std::array<double, 3>& mu) {
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (mu[std::size_t(i)] <= 0.0) throw std::invalid_argument("mu must be positive");
    const double mu2 = mu[std::size_t(i)] * mu[std::size_t(i)];
    total += 0.5 * losses[std::size_t(i)] / mu2 + std::log1p(mu2);
  }
  return total;
}

double orthogonal_penalty_value(const std::vector<Mat>& wv, double lambda) {
  double total = 0.0;
  for (const auto& w : wv) {
    if (w.rows() != w.cols()) throw std::invalid_argument("Wv must be square");
    const Mat dev = Mat::Identity(w.rows(), w.cols()) - w.transpose() * w;
    total += dev.squaredNorm();
  }
  return lambda * total;
}

}  // namespace ktele::anenc
