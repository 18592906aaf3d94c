#include "ktele/core/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace ktele::ad {

// ---- ParamStore ------------------------------------------------------------

Param& ParamStore::create(const std::string& name, Index rows, Index cols) {
  if (params_.count(name)) throw std::invalid_argument("duplicate param: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  auto& ref = *p;
  params_[name] = std::move(p);
  return ref;
}

Param& ParamStore::create_normal(const std::string& name, Index rows, Index cols,
                                 double stddev, Rng& rng) {
  Param& p = create(name, rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) p.value(i, j) = rng.normal(0.0, stddev);
  return p;
}

Param& ParamStore::create_constant(const std::string& name, Index rows, Index cols,
                                   double fill) {
  Param& p = create(name, rows, cols);
  p.value.setConstant(fill);
  return p;
}

Param& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no such param: " + name);
  return *it->second;
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no such param: " + name);
  return *it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) {
    p->ensure_grad();
    p->grad.setZero();
  }
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += std::size_t(p->value.size());
  return n;
}

std::vector<Param*> ParamStore::with_prefix(const std::string& prefix) {
  std::vector<Param*> out;
  for (auto& [name, p] : params_)
    if (name.rfind(prefix, 0) == 0) out.push_back(p.get());
  return out;
}

// ---- Tape ------------------------------------------------------------------

Var Tape::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat(), nullptr, false});
  return Var{int(nodes_.size()) - 1};
}

Var Tape::leaf(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat(), nullptr, true});
  return Var{int(nodes_.size()) - 1};
}

Var Tape::param(Param& p) {
  p.ensure_grad();
  Var v = leaf(p.value);
  Param* pp = &p;
  nodes_.back().back = [v, pp](Tape& t) { pp->grad += t.grad(v); };
  return v;
}

Var Tape::emplace(Mat value, std::function<void(Tape&)> back, bool needs_grad) {
  nodes_.push_back(Node{std::move(value), Mat(), needs_grad ? std::move(back) : nullptr,
                        needs_grad});
  return Var{int(nodes_.size()) - 1};
}

void Tape::backward(Var root) {
  if (val(root).size() != 1) throw std::invalid_argument("backward root must be 1x1");
  for (auto& n : nodes_) {
    if (n.needs_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  auto& rn = nodes_[std::size_t(root.id)];
  if (!rn.needs_grad) return;  // constant graph, nothing to do
  rn.grad(0, 0) = 1.0;
  for (int id = root.id; id >= 0; --id) {
    auto& n = nodes_[std::size_t(id)];
    if (n.back) n.back(*this);
  }
}

namespace {

bool any_tracked(Tape& t, std::initializer_list<Var> vars) {
  for (Var v : vars)
    if (t.tracked(v)) return true;
  return false;
}

void acc(Tape& t, Var v, const Mat& g) {
  if (t.tracked(v)) t.grad(v) += g;
}

}  // namespace

// ---- basic ops -------------------------------------------------------------

Var add(Tape& t, Var a, Var b) {
  Mat y = t.val(a) + t.val(b);
  bool tracked = any_tracked(t, {a, b});
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     acc(tt, a, tt.grad(out));
                     acc(tt, b, tt.grad(out));
                   },
                   tracked);
}

Var sub(Tape& t, Var a, Var b) {
  Mat y = t.val(a) - t.val(b);
  bool tracked = any_tracked(t, {a, b});
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     acc(tt, a, tt.grad(out));
                     acc(tt, b, -tt.grad(out));
                   },
                   tracked);
}

Var neg(Tape& t, Var a) { return scale(t, a, -1.0); }

Var matmul(Tape& t, Var a, Var b) {
  Mat y = t.val(a) * t.val(b);
  bool tracked = any_tracked(t, {a, b});
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     acc(tt, a, g * tt.val(b).transpose());
                     acc(tt, b, tt.val(a).transpose() * g);
                   },
                   tracked);
}

Var transpose(Tape& t, Var a) {
  Mat y = t.val(a).transpose();
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) { acc(tt, a, tt.grad(out).transpose()); }, tracked);
}

Var cmul(Tape& t, Var a, Var b) {
  Mat y = t.val(a).cwiseProduct(t.val(b));
  bool tracked = any_tracked(t, {a, b});
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     acc(tt, a, g.cwiseProduct(tt.val(b)));
                     acc(tt, b, g.cwiseProduct(tt.val(a)));
                   },
                   tracked);
}

Var cdiv(Tape& t, Var a, Var b) {
  Mat y = t.val(a).cwiseQuotient(t.val(b));
  bool tracked = any_tracked(t, {a, b});
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     acc(tt, a, g.cwiseQuotient(tt.val(b)));
                     acc(tt, b, -g.cwiseProduct(tt.val(out)).cwiseQuotient(tt.val(b)));
                   },
                   tracked);
}

Var scale(Tape& t, Var a, double c) {
  Mat y = c * t.val(a);
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y), [=](Tape& tt) { acc(tt, a, c * tt.grad(out)); },
                   tracked);
}

Var add_const(Tape& t, Var a, double c) {
  Mat y = t.val(a).array() + c;
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y), [=](Tape& tt) { acc(tt, a, tt.grad(out)); }, tracked);
}

Var add_rowvec(Tape& t, Var a, Var rowvec) {
  Mat y = t.val(a).rowwise() + t.val(rowvec).row(0);
  bool tracked = any_tracked(t, {a, rowvec});
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     acc(tt, a, g);
                     acc(tt, rowvec, g.colwise().sum());
                   },
                   tracked);
}

Var mul_rowvec(Tape& t, Var a, Var rowvec) {
  Mat y = t.val(a).array().rowwise() * t.val(rowvec).row(0).array();
  bool tracked = any_tracked(t, {a, rowvec});
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     acc(tt, a, g.array().rowwise() * tt.val(rowvec).row(0).array());
                     acc(tt, rowvec, g.cwiseProduct(tt.val(a)).colwise().sum());
                   },
                   tracked);
}

Var mul_colvec(Tape& t, Var a, Var colvec) {
  Mat y = t.val(a).array().colwise() * t.val(colvec).col(0).array();
  bool tracked = any_tracked(t, {a, colvec});
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     acc(tt, a, g.array().colwise() * tt.val(colvec).col(0).array());
                     acc(tt, colvec, g.cwiseProduct(tt.val(a)).rowwise().sum());
                   },
                   tracked);
}

Var div_colvec(Tape& t, Var a, Var colvec) {
  Mat y = t.val(a).array().colwise() / t.val(colvec).col(0).array();
  bool tracked = any_tracked(t, {a, colvec});
  Var out{int(t.size())};
  return t.emplace(
      std::move(y),
      [=](Tape& tt) {
        const Mat& g = tt.grad(out);
        const auto v = tt.val(colvec).col(0).array();
        acc(tt, a, g.array().colwise() / v);
        Mat gy = g.cwiseProduct(tt.val(out));
        acc(tt, colvec, -(gy.rowwise().sum().array() / v).matrix());
      },
      tracked);
}

// ---- elementwise -----------------------------------------------------------

namespace {

template <typename Fwd, typename Back>
Var unary(Tape& t, Var a, Fwd fwd, Back back) {
  Mat y = fwd(t.val(a));
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) { acc(tt, a, back(tt, a, out)); }, tracked);
}

}  // namespace

Var exp(Tape& t, Var a) {
  return unary(
      t, a, [](const Mat& x) { return Mat(x.array().exp()); },
      [](Tape& tt, Var, Var out) {
        return Mat(tt.grad(out).cwiseProduct(tt.val(out)));
      });
}

Var log(Tape& t, Var a) {
  return unary(
      t, a, [](const Mat& x) { return Mat(x.array().log()); },
      [](Tape& tt, Var aa, Var out) {
        return Mat(tt.grad(out).cwiseQuotient(tt.val(aa)));
      });
}

Var sqrt(Tape& t, Var a) {
  return unary(
      t, a, [](const Mat& x) { return Mat(x.array().sqrt()); },
      [](Tape& tt, Var, Var out) {
        // 1/(2 sqrt) with a floor so a zero-norm input yields zero grad, not inf
        Mat denom = tt.val(out).array().max(1e-150).matrix() * 2.0;
        return Mat(tt.grad(out).cwiseQuotient(denom));
      });
}

Var square(Tape& t, Var a) {
  return unary(
      t, a, [](const Mat& x) { return Mat(x.array().square()); },
      [](Tape& tt, Var aa, Var out) {
        return Mat(2.0 * tt.grad(out).cwiseProduct(tt.val(aa)));
      });
}

Var pow_const(Tape& t, Var a, double p) {
  return unary(
      t, a, [p](const Mat& x) { return Mat(x.array().pow(p)); },
      [p](Tape& tt, Var aa, Var out) -> Mat {
        if (p == 0.0) return Mat::Zero(tt.val(out).rows(), tt.val(out).cols());
        Mat d = p * tt.val(aa).array().pow(p - 1.0);
        return Mat(tt.grad(out).cwiseProduct(d));
      });
}

Var tanh(Tape& t, Var a) {
  return unary(
      t, a, [](const Mat& x) { return Mat(x.array().tanh()); },
      [](Tape& tt, Var, Var out) {
        Mat d = 1.0 - tt.val(out).array().square();
        return Mat(tt.grad(out).cwiseProduct(d));
      });
}

Var sigmoid(Tape& t, Var a) {
  return unary(
      t, a,
      [](const Mat& x) {
        return Mat(x.unaryExpr([](double v) { return ktele::sigmoid(v); }));
      },
      [](Tape& tt, Var, Var out) {
        const Mat& y = tt.val(out);
        Mat d = y.array() * (1.0 - y.array());
        return Mat(tt.grad(out).cwiseProduct(d));
      });
}

Var relu(Tape& t, Var a) {
  return unary(
      t, a, [](const Mat& x) { return Mat(x.array().max(0.0)); },
      [](Tape& tt, Var aa, Var out) {
        Mat d = (tt.val(aa).array() > 0.0).cast<double>();
        return Mat(tt.grad(out).cwiseProduct(d));
      });
}

Var gelu(Tape& t, Var a) {
  return unary(
      t, a,
      [](const Mat& x) {
        return Mat(x.unaryExpr([](double v) { return ktele::gelu(v); }));
      },
      [](Tape& tt, Var aa, Var out) {
        Mat d = tt.val(aa).unaryExpr([](double v) { return ktele::gelu_grad(v); });
        return Mat(tt.grad(out).cwiseProduct(d));
      });
}

Var softplus(Tape& t, Var a) {
  return unary(
      t, a,
      [](const Mat& x) {
        return Mat(x.unaryExpr([](double v) { return stable_softplus(v); }));
      },
      [](Tape& tt, Var aa, Var out) {
        Mat d = tt.val(aa).unaryExpr([](double v) { return ktele::sigmoid(v); });
        return Mat(tt.grad(out).cwiseProduct(d));
      });
}

// ---- row-structured ops ----------------------------------------------------

Var softmax_rows(Tape& t, Var a) {
  Mat y = ktele::softmax_rows(t.val(a));
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& y2 = tt.val(out);
                     const Mat& g = tt.grad(out);
                     Mat gx(y2.rows(), y2.cols());
                     for (Index i = 0; i < y2.rows(); ++i) {
                       const double dot = g.row(i).dot(y2.row(i));
                       gx.row(i) = (g.row(i).array() - dot) * y2.row(i).array();
                     }
                     acc(tt, a, gx);
                   },
                   tracked);
}

Var log_softmax_rows(Tape& t, Var a) {
  const Mat& x = t.val(a);
  Mat y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    y.row(i) = x.row(i).array() - log_sum_exp(x.row(i));
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     Mat sm = tt.val(out).array().exp();
                     Mat gx = g - (sm.array().colwise() * g.rowwise().sum().array()).matrix();
                     acc(tt, a, gx);
                   },
                   tracked);
}

Var layer_norm_rows(Tape& t, Var a, double eps) {
  const Mat& x = t.val(a);
  const Index n = x.cols();
  Mat y(x.rows(), n);
  Vec inv(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().sum() / double(n);
    inv(i) = 1.0 / std::sqrt(var + eps);
    y.row(i) = (x.row(i).array() - mu) * inv(i);
  }
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& xhat = tt.val(out);
                     const Mat& g = tt.grad(out);
                     Mat gx(xhat.rows(), xhat.cols());
                     const double nn = double(xhat.cols());
                     for (Index i = 0; i < xhat.rows(); ++i) {
                       const double gmean = g.row(i).mean();
                       const double gxdot = g.row(i).dot(xhat.row(i)) / nn;
                       gx.row(i) =
                           inv(i) * (g.row(i).array() - gmean - xhat.row(i).array() * gxdot);
                     }
                     acc(tt, a, gx);
                   },
                   tracked);
}

// ---- reductions ------------------------------------------------------------

Var sum_all(Tape& t, Var a) {
  Mat y(1, 1);
  y(0, 0) = t.val(a).sum();
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const double g = tt.grad(out)(0, 0);
                     acc(tt, a, Mat::Constant(tt.val(a).rows(), tt.val(a).cols(), g));
                   },
                   tracked);
}

Var mean_all(Tape& t, Var a) {
  const double n = double(t.val(a).size());
  return scale(t, sum_all(t, a), 1.0 / n);
}

Var row_sum(Tape& t, Var a) {
  Mat y = t.val(a).rowwise().sum();
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     acc(tt, a, g.replicate(1, tt.val(a).cols()));
                   },
                   tracked);
}

// ---- structural ops --------------------------------------------------------

Var gather_rows(Tape& t, Var a, std::vector<Index> rows) {
  const Mat& x = t.val(a);
  Mat y(Index(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) y.row(Index(k)) = x.row(rows[k]);
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=, rows = std::move(rows)](Tape& tt) {
                     if (!tt.tracked(a)) return;
                     const Mat& g = tt.grad(out);
                     Mat& ga = tt.grad(a);
                     for (std::size_t k = 0; k < rows.size(); ++k)
                       ga.row(rows[k]) += g.row(Index(k));
                   },
                   tracked);
}

Var overwrite_rows(Tape& t, Var base, Var rows, std::vector<Index> where) {
  Mat y = t.val(base);
  const Mat& r = t.val(rows);
  for (std::size_t k = 0; k < where.size(); ++k) y.row(where[k]) = r.row(Index(k));
  bool tracked = any_tracked(t, {base, rows});
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=, where = std::move(where)](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     if (tt.tracked(base)) {
                       Mat gb = g;
                       for (Index w : where) gb.row(w).setZero();
                       tt.grad(base) += gb;
                     }
                     if (tt.tracked(rows)) {
                       Mat& gr = tt.grad(rows);
                       for (std::size_t k = 0; k < where.size(); ++k)
                         gr.row(Index(k)) += g.row(where[k]);
                     }
                   },
                   tracked);
}

Var slice_rows(Tape& t, Var a, Index first, Index count) {
  Mat y = t.val(a).middleRows(first, count);
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     if (!tt.tracked(a)) return;
                     tt.grad(a).middleRows(first, count) += tt.grad(out);
                   },
                   tracked);
}

Var slice_cols(Tape& t, Var a, Index first, Index count) {
  Mat y = t.val(a).middleCols(first, count);
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=](Tape& tt) {
                     if (!tt.tracked(a)) return;
                     tt.grad(a).middleCols(first, count) += tt.grad(out);
                   },
                   tracked);
}

Var concat_rows(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  Index rows = 0;
  const Index cols = t.val(parts[0]).cols();
  for (Var p : parts) rows += t.val(p).rows();
  Mat y(rows, cols);
  Index at = 0;
  for (Var p : parts) {
    y.middleRows(at, t.val(p).rows()) = t.val(p);
    at += t.val(p).rows();
  }
  bool tracked = false;
  for (Var p : parts) tracked = tracked || t.tracked(p);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=, parts = parts](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     Index row = 0;
                     for (Var p : parts) {
                       const Index r = tt.val(p).rows();
                       acc(tt, p, g.middleRows(row, r));
                       row += r;
                     }
                   },
                   tracked);
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  Index cols = 0;
  const Index rows = t.val(parts[0]).rows();
  for (Var p : parts) cols += t.val(p).cols();
  Mat y(rows, cols);
  Index at = 0;
  for (Var p : parts) {
    y.middleCols(at, t.val(p).cols()) = t.val(p);
    at += t.val(p).cols();
  }
  bool tracked = false;
  for (Var p : parts) tracked = tracked || t.tracked(p);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=, parts = parts](Tape& tt) {
                     const Mat& g = tt.grad(out);
                     Index col = 0;
                     for (Var p : parts) {
                       const Index c = tt.val(p).cols();
                       acc(tt, p, g.middleCols(col, c));
                       col += c;
                     }
                   },
                   tracked);
}

Var gather_coeffs(Tape& t, Var a, std::vector<std::pair<Index, Index>> at) {
  const Mat& x = t.val(a);
  Mat y(Index(at.size()), 1);
  for (std::size_t k = 0; k < at.size(); ++k) y(Index(k), 0) = x(at[k].first, at[k].second);
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=, at = std::move(at)](Tape& tt) {
                     if (!tt.tracked(a)) return;
                     const Mat& g = tt.grad(out);
                     Mat& ga = tt.grad(a);
                     for (std::size_t k = 0; k < at.size(); ++k)
                       ga(at[k].first, at[k].second) += g(Index(k), 0);
                   },
                   tracked);
}

Var dropout(Tape& t, Var a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
  const Mat& x = t.val(a);
  Mat mask(x.rows(), x.cols());
  const double keep = 1.0 - rate;
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i)
      mask(i, j) = rng.uniform01() < rate ? 0.0 : 1.0 / keep;
  Mat y = x.cwiseProduct(mask);
  bool tracked = t.tracked(a);
  Var out{int(t.size())};
  return t.emplace(std::move(y),
                   [=, mask = std::move(mask)](Tape& tt) {
                     acc(tt, a, tt.grad(out).cwiseProduct(mask));
                   },
                   tracked);
}

// ---- composites ------------------------------------------------------------

Var l2_normalize_rows(Tape& t, Var a) {
  Var norms = sqrt(t, row_sum(t, square(t, a)));
  return div_colvec(t, a, norms);
}

Var cross_entropy_rows(Tape& t, Var logits, const std::vector<Index>& targets) {
  if (std::size_t(t.val(logits).rows()) != targets.size())
    throw std::invalid_argument("cross_entropy_rows: target count mismatch");
  Var ls = log_softmax_rows(t, logits);
  std::vector<std::pair<Index, Index>> at;
  at.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) at.emplace_back(Index(i), targets[i]);
  return neg(t, mean_all(t, gather_coeffs(t, ls, std::move(at))));
}

Var bce_with_logits(Tape& t, Var logits, const Vec& labels) {
  if (t.val(logits).cols() != 1 || t.val(logits).rows() != labels.size())
    throw std::invalid_argument("bce_with_logits: shape mismatch");
  Var sp = softplus(t, logits);
  Var yz = cmul(t, logits, t.constant(labels));
  return mean_all(t, sub(t, sp, yz));
}

Var focal_bce_with_logits(Tape& t, Var logits, const Vec& labels, double gamma) {
  if (t.val(logits).cols() != 1 || t.val(logits).rows() != labels.size())
    throw std::invalid_argument("focal_bce_with_logits: shape mismatch");
  // -s*z with s = +-1; softplus(-s z) is the plain BCE, sigmoid(-s z) = 1 - p_t.
  Vec minus_sign = (1.0 - 2.0 * labels.array()).matrix();
  Var moduland = cmul(t, logits, t.constant(minus_sign));
  Var base = softplus(t, moduland);
  if (gamma == 0.0) return mean_all(t, base);
  Var weight = pow_const(t, sigmoid(t, moduland), gamma);
  return mean_all(t, cmul(t, weight, base));
}

Var frobenius_norm(Tape& t, Var a) { return sqrt(t, sum_all(t, square(t, a))); }

}  // namespace ktele::ad
