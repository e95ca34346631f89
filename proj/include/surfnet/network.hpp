#pragma once

// Fully connected ReLU generators
//
//   G(x, theta) = V relu(W_d ... relu(W_1 x + b_1) ... + b_d)
//
// Dense Eigen types templated on the scalar. Everything here is a free
// function over an immutable NetworkParams value.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "surfnet/errors.hpp"
#include "surfnet/rng.hpp"

namespace surfnet {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Layer sizes: input k = n_0, intermediate widths n_1..n_d, output n.
struct NetworkDims {
  Index k = 0;
  std::vector<Index> widths;
  Index n = 0;

  Index depth() const { return static_cast<Index>(widths.size()); }

  /// n_i with the convention n_0 = k.
  Index width(Index i) const {
    return i == 0 ? k : widths[static_cast<std::size_t>(i - 1)];
  }

  Index total_units() const {
    Index total = 0;
    for (Index w : widths) total += w;
    return total;
  }

  void validate() const {
    if (widths.empty()) throw InvalidConfig("network needs at least one layer");
    if (k < 1 || n < 1) throw InvalidConfig("network dimensions must be >= 1");
    for (Index w : widths)
      if (w < 1) throw InvalidConfig("layer widths must be >= 1");
  }

  /// k < n_1 < ... < n_d <= n. Advisory only.
  bool is_expansive() const {
    Index prev = k;
    for (Index w : widths) {
      if (w <= prev) return false;
      prev = w;
    }
    return prev <= n;
  }

  friend bool operator==(const NetworkDims&, const NetworkDims&) = default;
};

/// theta = (V, W_1..W_d, b_1..b_d).
template <typename Scalar>
struct NetworkParams {
  NetworkDims dims;
  Matrix<Scalar> V;
  std::vector<Matrix<Scalar>> W;
  std::vector<Vector<Scalar>> b;

  Index depth() const { return dims.depth(); }

  static NetworkParams zeros(const NetworkDims& dims) {
    dims.validate();
    NetworkParams p;
    p.dims = dims;
    p.V = Matrix<Scalar>::Zero(dims.n, dims.widths.back());
    for (Index i = 1; i <= dims.depth(); ++i) {
      p.W.push_back(Matrix<Scalar>::Zero(dims.width(i), dims.width(i - 1)));
      p.b.push_back(Vector<Scalar>::Zero(dims.width(i)));
    }
    return p;
  }

  void validate() const {
    dims.validate();
    const auto d = static_cast<std::size_t>(dims.depth());
    if (W.size() != d || b.size() != d)
      throw DimensionMismatch("parameter layer count does not match dims");
    if (V.rows() != dims.n || V.cols() != dims.widths.back())
      throw DimensionMismatch("V has wrong shape");
    for (std::size_t i = 0; i < d; ++i) {
      const auto li = static_cast<Index>(i) + 1;
      if (W[i].rows() != dims.width(li) || W[i].cols() != dims.width(li - 1))
        throw DimensionMismatch("W_" + std::to_string(li) + " has wrong shape");
      if (b[i].size() != dims.width(li))
        throw DimensionMismatch("b_" + std::to_string(li) + " has wrong shape");
    }
    bool finite = V.allFinite();
    for (std::size_t i = 0; i < d; ++i)
      finite = finite && W[i].allFinite() && b[i].allFinite();
    if (!finite) throw NonFiniteEncountered("network parameters are not finite");
  }

  Index parameter_count() const {
    Index count = V.size();
    for (std::size_t i = 0; i < W.size(); ++i) count += W[i].size() + b[i].size();
    return count;
  }

  friend bool operator==(const NetworkParams& a, const NetworkParams& c) {
    if (!(a.dims == c.dims) || a.V != c.V) return false;
    for (std::size_t i = 0; i < a.W.size(); ++i)
      if (a.W[i] != c.W[i] || a.b[i] != c.b[i]) return false;
    return true;
  }
};

using NetworkParamsd = NetworkParams<double>;

/// Visits every parameter entry in canonical order: V, then (W_i, b_i) for
/// i = 1..d; matrices row-major. Serialization and flat-vector arithmetic
/// both rely on this order.
template <typename Params, typename Fn>
void for_each_parameter(Params& p, Fn&& fn) {
  auto visit_matrix = [&](auto& m) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) fn(m(r, c));
  };
  visit_matrix(p.V);
  for (std::size_t i = 0; i < p.W.size(); ++i) {
    visit_matrix(p.W[i]);
    for (Index r = 0; r < p.b[i].size(); ++r) fn(p.b[i](r));
  }
}

template <typename Scalar>
Vector<Scalar> flatten(const NetworkParams<Scalar>& p) {
  Vector<Scalar> flat(p.parameter_count());
  Index at = 0;
  for_each_parameter(p, [&](const Scalar& v) { flat(at++) = v; });
  return flat;
}

template <typename Scalar>
NetworkParams<Scalar> unflatten(const NetworkDims& dims,
                                std::span<const Scalar> flat) {
  auto p = NetworkParams<Scalar>::zeros(dims);
  if (static_cast<Index>(flat.size()) != p.parameter_count())
    throw DimensionMismatch("flat parameter vector has wrong length");
  std::size_t at = 0;
  for_each_parameter(p, [&](Scalar& v) { v = flat[at++]; });
  return p;
}

template <typename Scalar>
NetworkParams<Scalar> unflatten(const NetworkDims& dims, const Vector<Scalar>& flat) {
  return unflatten(dims, std::span<const Scalar>(flat.data(), static_cast<std::size_t>(flat.size())));
}

/// V ~ N(0, 1/n), W_i and b_i ~ N(0, 1/n_i), all independent. Entries are
/// drawn in canonical parameter order from the stream (seed, 0, "network.init").
template <typename Scalar = double>
NetworkParams<Scalar> init_gaussian(const NetworkDims& dims, std::uint64_t seed) {
  auto p = NetworkParams<Scalar>::zeros(dims);
  auto rng = CounterRng::stream(seed, 0, "network.init");
  const double sd_v = 1.0 / std::sqrt(static_cast<double>(dims.n));
  for (Index r = 0; r < p.V.rows(); ++r)
    for (Index c = 0; c < p.V.cols(); ++c)
      p.V(r, c) = static_cast<Scalar>(rng.normal(0.0, sd_v));
  for (std::size_t i = 0; i < p.W.size(); ++i) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(p.W[i].rows()));
    for (Index r = 0; r < p.W[i].rows(); ++r)
      for (Index c = 0; c < p.W[i].cols(); ++c)
        p.W[i](r, c) = static_cast<Scalar>(rng.normal(0.0, sd));
    for (Index r = 0; r < p.b[i].size(); ++r)
      p.b[i](r) = static_cast<Scalar>(rng.normal(0.0, sd));
  }
  return p;
}

/// Per-layer values for one input: x[0] = input, z[i-1] = W_i x[i-1] + b_i,
/// x[i] = relu(z[i-1]), output = V x[d].
template <typename Scalar>
struct LayerOutputs {
  std::vector<Vector<Scalar>> x;
  std::vector<Vector<Scalar>> z;
  Vector<Scalar> output;
};

/// On/off bit per intermediate unit; bit (i, j) is set iff z_{i,j} > 0.
/// Layers are 0-based here (masks[0] is the first hidden layer).
struct ActivationPattern {
  std::vector<std::vector<bool>> masks;

  bool active(std::size_t layer, std::size_t unit) const {
    return masks[layer][unit];
  }

  std::size_t active_count() const {
    std::size_t count = 0;
    for (const auto& m : masks)
      for (bool bit : m) count += bit ? 1 : 0;
    return count;
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      if (i) s += '|';
      for (bool bit : masks[i]) s += bit ? '1' : '0';
    }
    return s;
  }

  friend bool operator==(const ActivationPattern&,
                         const ActivationPattern&) = default;
};

namespace detail {

template <typename Scalar, typename Derived>
void check_input(const NetworkParams<Scalar>& p,
                 const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != p.dims.k)
    throw DimensionMismatch("input has length " + std::to_string(x.size()) +
                            ", network expects " + std::to_string(p.dims.k));
}

inline void check_pattern(const NetworkDims& dims,
                          const ActivationPattern& pattern) {
  if (static_cast<Index>(pattern.masks.size()) != dims.depth())
    throw DimensionMismatch("pattern layer count does not match network");
  for (Index i = 1; i <= dims.depth(); ++i)
    if (static_cast<Index>(pattern.masks[static_cast<std::size_t>(i - 1)].size()) !=
        dims.width(i))
      throw DimensionMismatch("pattern layer width does not match network");
}

}  // namespace detail

template <typename Scalar, typename Derived>
LayerOutputs<Scalar> forward(const NetworkParams<Scalar>& p,
                             const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(p, x);
  LayerOutputs<Scalar> out;
  out.x.reserve(p.W.size() + 1);
  out.z.reserve(p.W.size());
  out.x.emplace_back(x);
  for (std::size_t i = 0; i < p.W.size(); ++i) {
    out.z.emplace_back(p.W[i] * out.x.back() + p.b[i]);
    out.x.emplace_back(out.z.back().cwiseMax(Scalar(0)));
  }
  out.output = p.V * out.x.back();
  return out;
}

template <typename Scalar, typename Derived>
Vector<Scalar> evaluate(const NetworkParams<Scalar>& p,
                        const Eigen::MatrixBase<Derived>& x) {
  return forward(p, x).output;
}

template <typename Scalar>
ActivationPattern pattern_of(const LayerOutputs<Scalar>& layers) {
  ActivationPattern pattern;
  pattern.masks.reserve(layers.z.size());
  for (const auto& z : layers.z) {
    std::vector<bool> mask(static_cast<std::size_t>(z.size()));
    for (Index j = 0; j < z.size(); ++j)
      mask[static_cast<std::size_t>(j)] = z(j) > Scalar(0);
    pattern.masks.push_back(std::move(mask));
  }
  return pattern;
}

/// Boundary convention: a preactivation of exactly zero is inactive.
template <typename Scalar, typename Derived>
ActivationPattern activation_pattern(const NetworkParams<Scalar>& p,
                                     const Eigen::MatrixBase<Derived>& x) {
  return pattern_of(forward(p, x));
}

/// Forward pass of the affine map selected by `pattern`: units are kept or
/// zeroed by the mask instead of by the sign of their preactivation. With the
/// input's own pattern this reproduces forward() bit for bit.
template <typename Scalar, typename Derived>
LayerOutputs<Scalar> masked_layers(const NetworkParams<Scalar>& p,
                                   const ActivationPattern& pattern,
                                   const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(p, x);
  detail::check_pattern(p.dims, pattern);
  LayerOutputs<Scalar> out;
  out.x.emplace_back(x);
  for (std::size_t i = 0; i < p.W.size(); ++i) {
    out.z.emplace_back(p.W[i] * out.x.back() + p.b[i]);
    Vector<Scalar> xi = out.z.back();
    for (Index j = 0; j < xi.size(); ++j)
      if (!pattern.masks[i][static_cast<std::size_t>(j)]) xi(j) = Scalar(0);
    out.x.push_back(std::move(xi));
  }
  out.output = p.V * out.x.back();
  return out;
}

template <typename Scalar, typename Derived>
Vector<Scalar> masked_forward(const NetworkParams<Scalar>& p,
                              const ActivationPattern& pattern,
                              const Eigen::MatrixBase<Derived>& x) {
  return masked_layers(p, pattern, x).output;
}

/// z_i(x) = P_i x + q_i for every x in the region of a fixed pattern.
template <typename Scalar>
struct PreactivationMaps {
  std::vector<Matrix<Scalar>> P;
  std::vector<Vector<Scalar>> q;
};

template <typename Scalar>
PreactivationMaps<Scalar> preactivation_maps(const NetworkParams<Scalar>& p,
                                             const ActivationPattern& pattern) {
  detail::check_pattern(p.dims, pattern);
  PreactivationMaps<Scalar> maps;
  Matrix<Scalar> M = Matrix<Scalar>::Identity(p.dims.k, p.dims.k);
  Vector<Scalar> o = Vector<Scalar>::Zero(p.dims.k);
  for (std::size_t i = 0; i < p.W.size(); ++i) {
    Matrix<Scalar> P = p.W[i] * M;
    Vector<Scalar> q = p.W[i] * o + p.b[i];
    M = P;
    o = q;
    for (Index j = 0; j < P.rows(); ++j) {
      if (!pattern.masks[i][static_cast<std::size_t>(j)]) {
        M.row(j).setZero();
        o(j) = Scalar(0);
      }
    }
    maps.P.push_back(std::move(P));
    maps.q.push_back(std::move(q));
  }
  return maps;
}

/// G restricted to a pattern's region: G(x) = J x + offset.
template <typename Scalar>
struct AffineMap {
  Matrix<Scalar> J;
  Vector<Scalar> offset;
};

template <typename Scalar>
AffineMap<Scalar> piece_affine_map(const NetworkParams<Scalar>& p,
                                   const ActivationPattern& pattern) {
  const auto maps = preactivation_maps(p, pattern);
  Matrix<Scalar> M = maps.P.back();
  Vector<Scalar> o = maps.q.back();
  const auto& last = pattern.masks.back();
  for (Index j = 0; j < M.rows(); ++j) {
    if (!last[static_cast<std::size_t>(j)]) {
      M.row(j).setZero();
      o(j) = Scalar(0);
    }
  }
  return {p.V * M, p.V * o};
}

/// Largest singular value by power iteration on M^T M.
template <typename Derived>
typename Derived::Scalar operator_norm(const Eigen::MatrixBase<Derived>& m,
                                       int max_iters = 100,
                                       double tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) return Scalar(0);
  Vector<Scalar> v(m.cols());
  for (Index j = 0; j < v.size(); ++j)
    v(j) = Scalar(1) + Scalar(0.1) * static_cast<Scalar>(j % 7);
  v.normalize();
  Scalar sigma(0);
  for (int it = 0; it < max_iters; ++it) {
    Vector<Scalar> u = m * v;
    const Scalar next = u.norm();
    if (next == Scalar(0)) return Scalar(0);
    Vector<Scalar> w = m.transpose() * u;
    const Scalar wn = w.norm();
    if (wn == Scalar(0)) return next;
    v = w / wn;
    if (std::abs(next - sigma) <= tol * std::max(Scalar(1), next)) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return (m * v).norm();
}

/// max_i ||W_i||_op.
template <typename Scalar>
Scalar max_layer_norm(const NetworkParams<Scalar>& p) {
  Scalar best(0);
  for (const auto& w : p.W) best = std::max(best, operator_norm(w));
  return best;
}

/// Entrywise (1 - t) a + t c.
template <typename Scalar>
NetworkParams<Scalar> lerp(const NetworkParams<Scalar>& a,
                           const NetworkParams<Scalar>& c, Scalar t) {
  if (!(a.dims == c.dims))
    throw DimensionMismatch("cannot interpolate networks of different shape");
  NetworkParams<Scalar> out = a;
  // a + t (c - a) keeps equal endpoints (and t = 0) exact.
  out.V = a.V + t * (c.V - a.V);
  for (std::size_t i = 0; i < a.W.size(); ++i) {
    out.W[i] = a.W[i] + t * (c.W[i] - a.W[i]);
    out.b[i] = a.b[i] + t * (c.b[i] - a.b[i]);
  }
  return out;
}

}  // namespace surfnet
