#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ktele/core/random.hpp"
#include "ktele/core/types.hpp"

namespace ktele::ad {

// Reverse-mode autodiff over dense Eigen matrices. A Tape is built per forward
// pass; backward() runs the recorded closures in reverse and accumulates
// gradients of bound Params into their persistent .grad buffers.

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m, v;  // Adam moments, lazily sized

  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Mat::Zero(value.rows(), value.cols());
  }
};

class ParamStore {
 public:
  Param& create(const std::string& name, Index rows, Index cols);
  Param& create_normal(const std::string& name, Index rows, Index cols, double stddev, Rng& rng);
  Param& create_constant(const std::string& name, Index rows, Index cols, double fill);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  void zero_grads();
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  // Deterministic (name-ordered) iteration.
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // All params whose name starts with the given prefix.
  std::vector<Param*> with_prefix(const std::string& prefix);

 private:
  std::map<std::string, std::unique_ptr<Param>> params_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  Var constant(Mat value);               // no gradient tracked
  Var leaf(Mat value);                   // gradient tracked, discarded with the tape
  Var param(Param& p);                   // gradient accumulated into p.grad

  const Mat& val(Var v) const { return nodes_[std::size_t(v.id)].value; }
  double scalar(Var v) const { return val(v)(0, 0); }
  Mat& grad(Var v) { return nodes_[std::size_t(v.id)].grad; }

  // Seeds d(root)/d(root) = 1 and propagates; root must be 1x1.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  // Internal: op constructors use these.
  Var emplace(Mat value, std::function<void(Tape&)> back, bool needs_grad);
  bool tracked(Var v) const { return nodes_[std::size_t(v.id)].needs_grad; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> back;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---- graph ops -------------------------------------------------------------

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var neg(Tape& t, Var a);
Var matmul(Tape& t, Var a, Var b);
Var transpose(Tape& t, Var a);
Var cmul(Tape& t, Var a, Var b);  // elementwise
Var cdiv(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);
Var add_const(Tape& t, Var a, double c);
Var add_rowvec(Tape& t, Var a, Var rowvec);   // broadcast 1 x d over rows
Var mul_rowvec(Tape& t, Var a, Var rowvec);
Var mul_colvec(Tape& t, Var a, Var colvec);   // broadcast n x 1 over cols
Var div_colvec(Tape& t, Var a, Var colvec);

Var exp(Tape& t, Var a);
Var log(Tape& t, Var a);
Var sqrt(Tape& t, Var a);
Var square(Tape& t, Var a);
Var pow_const(Tape& t, Var a, double p);
Var tanh(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var gelu(Tape& t, Var a);
Var softplus(Tape& t, Var a);

Var softmax_rows(Tape& t, Var a);
Var log_softmax_rows(Tape& t, Var a);
Var layer_norm_rows(Tape& t, Var a, double eps = 1e-5);

Var sum_all(Tape& t, Var a);    // 1x1
Var mean_all(Tape& t, Var a);   // 1x1
Var row_sum(Tape& t, Var a);    // n x 1

Var gather_rows(Tape& t, Var a, std::vector<Index> rows);
Var overwrite_rows(Tape& t, Var base, Var rows, std::vector<Index> where);
Var slice_rows(Tape& t, Var a, Index first, Index count);
Var slice_cols(Tape& t, Var a, Index first, Index count);
Var concat_rows(Tape& t, const std::vector<Var>& parts);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var gather_coeffs(Tape& t, Var a, std::vector<std::pair<Index, Index>> at);  // k x 1

// Inverted dropout; identity when rate == 0. Mask drawn from rng at build time.
Var dropout(Tape& t, Var a, double rate, Rng& rng);

// ---- composites ------------------------------------------------------------

// Rows scaled to unit L2 norm.
Var l2_normalize_rows(Tape& t, Var a);
// Mean cross-entropy of rows of `logits` against integer targets.
Var cross_entropy_rows(Tape& t, Var logits, const std::vector<Index>& targets);
// Mean of softplus(z) - y .* z  (binary CE with logits), labels in {0,1}.
Var bce_with_logits(Tape& t, Var logits, const Vec& labels);
// Mean focal BCE: (1 - p_t)^gamma * BCE; gamma = 0 reduces to bce_with_logits.
Var focal_bce_with_logits(Tape& t, Var logits, const Vec& labels, double gamma);
// || a ||_2 of the whole matrix as a 1x1 var.
Var frobenius_norm(Tape& t, Var a);

}  // namespace ktele::ad
