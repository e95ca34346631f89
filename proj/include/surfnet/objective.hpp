#pragma once

// f(x) = 1/2 ||A G(x) - A y||^2 and its first-order information.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>

#include "surfnet/errors.hpp"
#include "surfnet/network.hpp"
#include "surfnet/rng.hpp"

namespace surfnet {

enum class MeasurementKind { Identity, Gaussian };

/// Identity is a tag and never materialized.
template <typename Scalar>
struct MeasurementMatrix {
  MeasurementKind kind = MeasurementKind::Identity;
  Matrix<Scalar> A;
  Index m = 0;
  Index n = 0;

  static MeasurementMatrix identity(Index n) {
    MeasurementMatrix mm;
    mm.kind = MeasurementKind::Identity;
    mm.m = n;
    mm.n = n;
    return mm;
  }

  /// Entries i.i.d. N(0, 1/m), row-major draw order from (seed, 0, "measurement").
  static MeasurementMatrix gaussian(Index m, Index n, std::uint64_t seed) {
    if (m < 1 || n < 1) throw InvalidConfig("measurement matrix needs m, n >= 1");
    MeasurementMatrix mm;
    mm.kind = MeasurementKind::Gaussian;
    mm.m = m;
    mm.n = n;
    mm.A.resize(m, n);
    auto rng = CounterRng::stream(seed, 0, "measurement");
    const double sd = 1.0 / std::sqrt(static_cast<double>(m));
    for (Index r = 0; r < m; ++r)
      for (Index c = 0; c < n; ++c) mm.A(r, c) = static_cast<Scalar>(rng.normal(0.0, sd));
    return mm;
  }

  static MeasurementMatrix dense(Matrix<Scalar> a) {
    MeasurementMatrix mm;
    mm.kind = MeasurementKind::Gaussian;
    mm.m = a.rows();
    mm.n = a.cols();
    mm.A = std::move(a);
    return mm;
  }

  bool is_identity() const { return kind == MeasurementKind::Identity; }

  template <typename Derived>
  Vector<Scalar> apply(const Eigen::MatrixBase<Derived>& v) const {
    if (v.size() != n) throw DimensionMismatch("measurement input has wrong length");
    if (is_identity()) return v;
    return A * v;
  }

  template <typename Derived>
  Vector<Scalar> apply_transpose(const Eigen::MatrixBase<Derived>& v) const {
    if (v.size() != m) throw DimensionMismatch("measurement residual has wrong length");
    if (is_identity()) return v;
    return A.transpose() * v;
  }

  /// Dense copy of A (the identity is materialized here).
  Matrix<Scalar> to_dense() const {
    if (is_identity()) return Matrix<Scalar>::Identity(n, n);
    return A;
  }
};

using MeasurementMatrixd = MeasurementMatrix<double>;

/// Holds a non-owning pointer to the network; the params must outlive it.
template <typename Scalar>
class Objective {
 public:
  Objective(const NetworkParams<Scalar>& params, MeasurementMatrix<Scalar> A,
            Vector<Scalar> y)
      : params_(&params), A_(std::move(A)), y_(std::move(y)) {
    if (y_.size() != params.dims.n)
      throw DimensionMismatch("target has length " + std::to_string(y_.size()) +
                              ", network output is " + std::to_string(params.dims.n));
    if (A_.n != params.dims.n)
      throw DimensionMismatch("measurement matrix width does not match network output");
    Ay_ = A_.apply(y_);
  }

  const NetworkParams<Scalar>& params() const { return *params_; }
  const MeasurementMatrix<Scalar>& measurement() const { return A_; }
  const Vector<Scalar>& target() const { return y_; }
  const Vector<Scalar>& measured_target() const { return Ay_; }
  Index input_dim() const { return params_->dims.k; }

  template <typename Derived>
  Scalar value(const Eigen::MatrixBase<Derived>& x) const {
    return value_of_output(evaluate(*params_, x));
  }

  Scalar value_of_output(const Vector<Scalar>& g) const {
    return Scalar(0.5) * (A_.apply(g) - Ay_).squaredNorm();
  }

  /// J^T A^T (A G(x) - A y) with J the Jacobian of the piece holding x
  /// (zero preactivations count as inactive).
  template <typename Derived>
  Vector<Scalar> gradient(const Eigen::MatrixBase<Derived>& x) const {
    const auto layers = forward(*params_, x);
    return backprop(layers, pattern_of(layers));
  }

  /// Value and gradient from one forward pass.
  template <typename Derived>
  std::pair<Scalar, Vector<Scalar>> value_and_gradient(
      const Eigen::MatrixBase<Derived>& x) const {
    const auto layers = forward(*params_, x);
    return {value_of_output(layers.output), backprop(layers, pattern_of(layers))};
  }

  /// Gradient of the quadratic attached to `pattern`, evaluated at x (x need
  /// not lie in that pattern's region).
  template <typename Derived>
  Vector<Scalar> piece_gradient(const ActivationPattern& pattern,
                                const Eigen::MatrixBase<Derived>& x) const {
    return backprop(masked_layers(*params_, pattern, x), pattern);
  }

  /// One-sided derivative lim_{t->0+} (f(x + t v) - f(x)) / t, using the
  /// piece entered from x along v. The piece is read off at x + eps v with
  /// eps = 1e-9 (1 + ||x||).
  template <typename D1, typename D2>
  Scalar directional_derivative(const Eigen::MatrixBase<D1>& x,
                                const Eigen::MatrixBase<D2>& v) const {
    const Scalar vn = v.norm();
    if (!(vn > Scalar(0))) throw InvalidConfig("direction vector must be nonzero");
    if (v.size() != x.size()) throw DimensionMismatch("direction has wrong length");
    const Scalar eps = Scalar(1e-9) * (Scalar(1) + x.norm());
    const Vector<Scalar> probe = x + (eps / vn) * v;
    const auto pattern = activation_pattern(*params_, probe);
    return piece_gradient(pattern, x).dot(v);
  }

 private:
  Vector<Scalar> backprop(const LayerOutputs<Scalar>& layers,
                          const ActivationPattern& pattern) const {
    Vector<Scalar> g = A_.apply_transpose(A_.apply(layers.output) - Ay_);
    g = params_->V.transpose() * g;
    for (std::size_t i = params_->W.size(); i-- > 0;) {
      for (Index j = 0; j < g.size(); ++j)
        if (!pattern.masks[i][static_cast<std::size_t>(j)]) g(j) = Scalar(0);
      g = params_->W[i].transpose() * g;
    }
    return g;
  }

  const NetworkParams<Scalar>* params_;
  MeasurementMatrix<Scalar> A_;
  Vector<Scalar> y_;
  Vector<Scalar> Ay_;
};

using Objectived = Objective<double>;

}  // namespace surfnet
