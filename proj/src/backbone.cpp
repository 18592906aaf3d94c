#include "ktele/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace ktele::backbone {

using namespace ktele::ad;

void EncoderConfig::validate() const {
  if (num_layers < 1 || num_heads < 1 || hidden_dim < 1 || ffn_dim < 1 || max_len < 2)
    throw std::invalid_argument("encoder dims must be positive");
  if (hidden_dim % num_heads != 0)
    throw std::invalid_argument("hidden_dim must be divisible by num_heads");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("dropout_rate must be in [0,1)");
  if (vocab_size < 6) throw std::invalid_argument("vocab_size too small");
}

Encoder::Encoder(EncoderConfig cfg, ParamStore& store, Rng& rng, std::string prefix,
                 Param* tied_token_embedding)
    : cfg_(cfg), store_(&store), prefix_(std::move(prefix)) {
  cfg_.validate();
  const int d = cfg_.hidden_dim;
  const double std0 = 0.02;

  if (tied_token_embedding) {
    if (tied_token_embedding->value.rows() != cfg_.vocab_size ||
        tied_token_embedding->value.cols() != d)
      throw std::invalid_argument("tied token embedding shape mismatch");
    tok_emb_ = tied_token_embedding;
  } else {
    tok_emb_ = &store.create_normal(prefix_ + "emb/tok", cfg_.vocab_size, d, std0, rng);
  }
  store.create_normal(prefix_ + "emb/pos", cfg_.max_len, d, std0, rng);
  store.create_constant(prefix_ + "emb/ln_g", 1, d, 1.0);
  store.create_constant(prefix_ + "emb/ln_b", 1, d, 0.0);

  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string lp = prefix_ + "layer" + std::to_string(l) + "/";
    for (const char* w : {"attn/wq", "attn/wk", "attn/wv", "attn/wo"})
      store.create_normal(lp + w, d, d, std0, rng);
    for (const char* b : {"attn/bq", "attn/bk", "attn/bv", "attn/bo"})
      store.create_constant(lp + b, 1, d, 0.0);
    store.create_constant(lp + "ln1_g", 1, d, 1.0);
    store.create_constant(lp + "ln1_b", 1, d, 0.0);
    store.create_normal(lp + "ffn/w1", d, cfg_.ffn_dim, std0, rng);
    store.create_constant(lp + "ffn/b1", 1, cfg_.ffn_dim, 0.0);
    store.create_normal(lp + "ffn/w2", cfg_.ffn_dim, d, std0, rng);
    store.create_constant(lp + "ffn/b2", 1, d, 0.0);
    store.create_constant(lp + "ln2_g", 1, d, 1.0);
    store.create_constant(lp + "ln2_b", 1, d, 0.0);
  }

  store.create_normal(prefix_ + "mlm/w_t", d, d, std0, rng);
  store.create_constant(prefix_ + "mlm/b_t", 1, d, 0.0);
  store.create_constant(prefix_ + "mlm/ln_g", 1, d, 1.0);
  store.create_constant(prefix_ + "mlm/ln_b", 1, d, 0.0);
  store.create_constant(prefix_ + "mlm/bias", 1, cfg_.vocab_size, 0.0);

  store.create_normal(prefix_ + "rtd/w1", d, d, std0, rng);
  store.create_constant(prefix_ + "rtd/b1", 1, d, 0.0);
  store.create_normal(prefix_ + "rtd/w2", d, 1, std0, rng);
  store.create_constant(prefix_ + "rtd/b2", 1, 1, 0.0);
}

namespace {

Var affine_layer_norm(Tape& t, Var x, Param& gain, Param& bias) {
  Var normed = layer_norm_rows(t, x);
  return add_rowvec(t, mul_rowvec(t, normed, t.param(gain)), t.param(bias));
}

}  // namespace

Var Encoder::embed(Tape& t, const std::vector<int>& ids,
                   const std::map<Index, Var>& anchors, bool train, Rng* rng) const {
  std::vector<Index> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) rows[i] = ids[i];
  Var x = gather_rows(t, t.param(*tok_emb_), rows);

  std::vector<Index> posrows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) posrows[i] = Index(i);
  Var pos = gather_rows(t, t.param(store_->get(prefix_ + "emb/pos")), posrows);
  x = add(t, x, pos);

  if (!anchors.empty()) {
    std::vector<Var> rowsv;
    std::vector<Index> where;
    for (const auto& [at, v] : anchors) {
      if (at < 0 || at >= Index(ids.size()))
        throw std::invalid_argument("anchor position out of range");
      // the anchor replaces the token embedding but keeps its position signal
      Var with_pos = add(t, v, gather_rows(t, t.param(store_->get(prefix_ + "emb/pos")), {at}));
      rowsv.push_back(with_pos);
      where.push_back(at);
    }
    x = overwrite_rows(t, x, concat_rows(t, rowsv), where);
  }

  x = affine_layer_norm(t, x, store_->get(prefix_ + "emb/ln_g"),
                        store_->get(prefix_ + "emb/ln_b"));
  if (train && cfg_.dropout_rate > 0.0 && rng) x = dropout(t, x, cfg_.dropout_rate, rng);
  return x;
}

Var Encoder::forward(Tape& t, std::vector<int> ids, std::map<Index, Var> anchors,
                     bool train, Rng* rng) const {
  if (ids.empty()) throw std::invalid_argument("empty sequence");
  if (int(ids.size()) > cfg_.max_len) {
    // keep the trailing [SEP]; drop the tail of the body
    const int last = ids.back();
    ids.resize(std::size_t(cfg_.max_len));
    ids.back() = last;
    std::map<Index, Var> kept;
    for (const auto& [at, v] : anchors)
      if (at < cfg_.max_len - 1) kept.emplace(at, v);
    anchors = std::move(kept);
    ++truncations_;
  }

  const int d = cfg_.hidden_dim;
  const int dh = d / cfg_.num_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));

  Var x = embed(t, ids, anchors, train, rng);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string lp = prefix_ + "layer" + std::to_string(l) + "/";
    Var q = add_rowvec(t, matmul(t, x, t.param(store_->get(lp + "attn/wq"))),
                       t.param(store_->get(lp + "attn/bq")));
    Var k = add_rowvec(t, matmul(t, x, t.param(store_->get(lp + "attn/wk"))),
                       t.param(store_->get(lp + "attn/bk")));
    Var v = add_rowvec(t, matmul(t, x, t.param(store_->get(lp + "attn/wv"))),
                       t.param(store_->get(lp + "attn/bv")));
    std::vector<Var> heads;
    heads.reserve(std::size_t(cfg_.num_heads));
    for (int h = 0; h < cfg_.num_heads; ++h) {
      Var qh = slice_cols(t, q, h * dh, dh);
      Var kh = slice_cols(t, k, h * dh, dh);
      Var vh = slice_cols(t, v, h * dh, dh);
      Var scores = scale(t, matmul(t, qh, transpose(t, kh)), inv_sqrt_dh);
      Var attn = softmax_rows(t, scores);
      heads.push_back(matmul(t, attn, vh));
    }
    Var o = add_rowvec(t, matmul(t, concat_cols(t, heads), t.param(store_->get(lp + "attn/wo"))),
                       t.param(store_->get(lp + "attn/bo")));
    if (train && cfg_.dropout_rate > 0.0 && rng) o = dropout(t, o, cfg_.dropout_rate, rng);
    x = affine_layer_norm(t, add(t, x, o), store_->get(lp + "ln1_g"),
                          store_->get(lp + "ln1_b"));

    Var f = add_rowvec(t, matmul(t, x, t.param(store_->get(lp + "ffn/w1"))),
                       t.param(store_->get(lp + "ffn/b1")));
    f = gelu(t, f);
    f = add_rowvec(t, matmul(t, f, t.param(store_->get(lp + "ffn/w2"))),
                   t.param(store_->get(lp + "ffn/b2")));
    if (train && cfg_.dropout_rate > 0.0 && rng) f = dropout(t, f, cfg_.dropout_rate, rng);
    x = affine_layer_norm(t, add(t, x, f), store_->get(lp + "ln2_g"),
                          store_->get(lp + "ln2_b"));
  }
  return x;
}

EncoderOutput Encoder::encode(const prompting::WrappedSequence& seq,
                              const tokenizer::Vocabulary& vocab,
                              const std::map<Index, Vec>& anchor_values) const {
  Tape t;
  std::map<Index, Var> anchors;
  for (const auto& [at, vec] : anchor_values) {
    if (vec.size() != cfg_.hidden_dim)
      throw std::invalid_argument("anchor embedding dim mismatch");
    anchors.emplace(at, t.constant(vec.transpose()));
  }
  Var h = forward(t, vocab.encode_units(seq.units), std::move(anchors), false, nullptr);
  EncoderOutput out;
  out.hidden = t.val(h);
  out.pooled = out.hidden.row(0).transpose();
  return out;
}

Var Encoder::mlm_logits(Tape& t, Var hidden, const std::vector<Index>& positions) const {
  Var picked = gather_rows(t, hidden, positions);
  Var z = add_rowvec(t, matmul(t, picked, t.param(store_->get(prefix_ + "mlm/w_t"))),
                     t.param(store_->get(prefix_ + "mlm/b_t")));
  z = gelu(t, z);
  z = affine_layer_norm(t, z, store_->get(prefix_ + "mlm/ln_g"),
                        store_->get(prefix_ + "mlm/ln_b"));
  Var logits = matmul(t, z, transpose(t, t.param(*tok_emb_)));
  return add_rowvec(t, logits, t.param(store_->get(prefix_ + "mlm/bias")));
}

Var Encoder::rtd_logits(Tape& t, Var hidden) const {
  Var z = add_rowvec(t, matmul(t, hidden, t.param(store_->get(prefix_ + "rtd/w1"))),
                     t.param(store_->get(prefix_ + "rtd/b1")));
  z = gelu(t, z);
  return add_rowvec(t, matmul(t, z, t.param(store_->get(prefix_ + "rtd/w2"))),
                    t.param(store_->get(prefix_ + "rtd/b2")));
}

Var mlm_loss(Tape& t, const Encoder& enc, Var hidden, const tokenizer::MaskPlan& plan) {
  if (plan.masked_positions.empty()) return t.constant(Mat::Zero(1, 1));
  std::vector<Index> positions;
  std::vector<Index> targets;
  for (auto pos : plan.masked_positions) {
    positions.push_back(Index(pos));
    targets.push_back(plan.targets.at(pos));
  }
  Var logits = enc.mlm_logits(t, hidden, positions);
  return cross_entropy_rows(t, logits, targets);
}

Var rtd_loss(Tape& t, Var logits, const std::vector<Index>& positions, const Vec& labels) {
  if (positions.empty()) return t.constant(Mat::Zero(1, 1));
  if (Index(positions.size()) != labels.size())
    throw std::invalid_argument("rtd_loss: label count mismatch");
  Var picked = gather_rows(t, logits, positions);
  return bce_with_logits(t, picked, labels);
}

Var simcse_loss(Tape& t, Var pooled_a, Var pooled_b, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");
  const Index b = t.val(pooled_a).rows();
  if (b < 2) throw std::invalid_argument("simcse needs a batch of at least 2");
  if (t.val(pooled_b).rows() != b) throw std::invalid_argument("batch size mismatch");
  Var sims = matmul(t, l2_normalize_rows(t, pooled_a),
                    transpose(t, l2_normalize_rows(t, pooled_b)));
  sims = scale(t, sims, 1.0 / tau);
  std::vector<Index> diag(std::size_t(b));
  for (Index i = 0; i < b; ++i) diag[std::size_t(i)] = i;
  return cross_entropy_rows(t, sims, diag);
}

}  // namespace ktele::backbone
