#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace ktele {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Mat = Matrix<double>;
using Vec = Vector<double>;
using RowVec = RowVector<double>;

using Index = Eigen::Index;

// Numerically stable row-wise softmax of any dense expression.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& m) {
  using S = typename Derived::Scalar;
  Matrix<S> out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const S mx = m.row(i).maxCoeff();
    out.row(i) = (m.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  const S mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

template <typename Scalar>
Scalar stable_softplus(Scalar x) {
  // log(1 + e^x) without overflow on either tail.
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// Exact GELU, x * Phi(x).
template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar phi = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * Scalar(M_PI));
  return Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2))) + x * phi;
}

template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                         const Eigen::MatrixBase<DerivedB>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace ktele
