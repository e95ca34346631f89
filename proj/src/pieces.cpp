#include "surfnet/pieces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "surfnet/errors.hpp"
#include "surfnet/log.hpp"

namespace surfnet {

bool SlackSet::contains(UnitIndex u) const {
  return std::find(entries.begin(), entries.end(), u) != entries.end();
}

SlackSet slack_set(const NetworkParamsd& params, const VectorXd& x, double tau) {
  if (!(tau >= 0.0)) throw InvalidConfig("slack threshold must be >= 0");
  const auto layers = forward(params, x);
  SlackSet s;
  s.tau = tau;
  for (std::size_t i = 0; i < layers.z.size(); ++i)
    for (Index j = 0; j < layers.z[i].size(); ++j)
      if (std::abs(layers.z[i](j)) <= tau)
        s.entries.push_back({static_cast<Index>(i), j});
  return s;
}

double Polytope::max_violation(const VectorXd& x) const {
  if (size() == 0) return -std::numeric_limits<double>::infinity();
  return (normals * x - bounds).maxCoeff();
}

LinearPiece build_piece(const NetworkParamsd& params, const ActivationPattern& pattern) {
  const auto maps = preactivation_maps(params, pattern);
  const Index k = params.dims.k;
  std::vector<VectorXd> rows;
  std::vector<double> bounds;
  for (std::size_t i = 0; i < maps.P.size(); ++i) {
    for (Index j = 0; j < maps.P[i].rows(); ++j) {
      const double sign = pattern.masks[i][static_cast<std::size_t>(j)] ? 1.0 : -1.0;
      // s (p x + q) >= 0  <=>  -s p x <= s q
      VectorXd a = -sign * maps.P[i].row(j).transpose();
      double c = sign * maps.q[i](j);
      const double norm = a.norm();
      if (norm <= 1e-13 * (1.0 + std::abs(c))) {
        if (c < -1e-12)
          throw InfeasiblePiece("pattern " + pattern.to_string() +
                                " fixes unit (" + std::to_string(i) + ", " +
                                std::to_string(j) + ") to the wrong sign");
        continue;
      }
      rows.push_back(a / norm);
      bounds.push_back(c / norm);
    }
  }
  LinearPiece piece;
  piece.pattern = pattern;
  piece.polytope.dim = k;
  piece.polytope.normals.resize(static_cast<Index>(rows.size()), k);
  piece.polytope.bounds.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    piece.polytope.normals.row(static_cast<Index>(r)) = rows[r].transpose();
    piece.polytope.bounds(static_cast<Index>(r)) = bounds[r];
  }
  piece.map = piece_affine_map(params, pattern);
  return piece;
}

namespace {

struct FaceSolution {
  VectorXd x;
  VectorXd lambda;
};

// Projection of x0 onto { a_i x = c_i, i in active }: x = x0 - A^T lambda.
std::optional<FaceSolution> solve_face(const Polytope& poly, const VectorXd& x0,
                                       const std::vector<Index>& active) {
  if (active.empty()) return FaceSolution{x0, VectorXd()};
  const auto m = static_cast<Index>(active.size());
  MatrixXd A(m, poly.dim);
  VectorXd c(m);
  for (Index r = 0; r < m; ++r) {
    A.row(r) = poly.normals.row(active[static_cast<std::size_t>(r)]);
    c(r) = poly.bounds(active[static_cast<std::size_t>(r)]);
  }
  const MatrixXd gram = A * A.transpose();
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(gram);
  VectorXd lambda = cod.solve(A * x0 - c);
  VectorXd x = x0 - A.transpose() * lambda;
  const double scale = 1.0 + x0.lpNorm<Eigen::Infinity>() + c.lpNorm<Eigen::Infinity>();
  if ((A * x - c).lpNorm<Eigen::Infinity>() > 1e-9 * scale) return std::nullopt;
  return FaceSolution{std::move(x), std::move(lambda)};
}

double feasibility_slack(const VectorXd& x0) { return 1e-12 * (1.0 + x0.norm()); }

std::optional<VectorXd> project_direct(const Polytope& poly, const VectorXd& x0) {
  const Index m = poly.size();
  const double tol = feasibility_slack(x0);
  std::optional<VectorXd> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<Index> active;
    for (Index i = 0; i < m; ++i)
      if (mask & (1u << i)) active.push_back(i);
    const auto sol = solve_face(poly, x0, active);
    if (!sol) continue;
    if (sol->lambda.size() > 0 && sol->lambda.minCoeff() < -tol) continue;
    if (poly.max_violation(sol->x) > tol) continue;
    const double dist = (sol->x - x0).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = sol->x;
    }
  }
  return best;
}

// Primal active-set iteration warm-started from a guess of the active set.
std::optional<VectorXd> polish_active_set(const Polytope& poly, const VectorXd& x0,
                                          const VectorXd& guess) {
  const double tol = feasibility_slack(x0);
  std::vector<Index> active;
  for (Index i = 0; i < poly.size(); ++i)
    if (poly.normals.row(i).dot(guess) - poly.bounds(i) >= -1e-7) active.push_back(i);
  for (int round = 0; round < 4 * static_cast<int>(poly.size()) + 8; ++round) {
    const auto sol = solve_face(poly, x0, active);
    if (!sol) return std::nullopt;
    const VectorXd slack = poly.normals * sol->x - poly.bounds;
    Index worst = -1;
    double worst_v = tol;
    for (Index i = 0; i < poly.size(); ++i) {
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      if (slack(i) > worst_v) {
        worst_v = slack(i);
        worst = i;
      }
    }
    if (worst >= 0) {
      active.push_back(worst);
      continue;
    }
    if (sol->lambda.size() > 0) {
      Index most_negative;
      const double lmin = sol->lambda.minCoeff(&most_negative);
      if (lmin < -tol) {
        active.erase(active.begin() + most_negative);
        continue;
      }
    }
    return sol->x;
  }
  return std::nullopt;
}

ProjectionResult dykstra(const Polytope& poly, const VectorXd& x0,
                         const ProjectionOptions& opts) {
  const Index m = poly.size();
  VectorXd x = x0;
  MatrixXd increments = MatrixXd::Zero(poly.dim, m);
  ProjectionResult result;
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    const VectorXd before = x;
    for (Index i = 0; i < m; ++i) {
      const VectorXd y = x + increments.col(i);
      const double excess = poly.normals.row(i).dot(y) - poly.bounds(i);
      x = excess > 0.0 ? VectorXd(y - excess * poly.normals.row(i).transpose()) : y;
      increments.col(i) = y - x;
    }
    result.sweeps = sweep;
    if ((x - before).norm() <= opts.tol && poly.max_violation(x) <= opts.tol) {
      result.converged = true;
      break;
    }
  }
  result.x = std::move(x);
  result.max_violation = std::max(0.0, poly.max_violation(result.x));
  return result;
}

}  // namespace

ProjectionResult project(const Polytope& poly, const VectorXd& x0,
                         const ProjectionOptions& opts) {
  if (x0.size() != poly.dim) throw DimensionMismatch("point and polytope dimensions differ");
  ProjectionResult result;
  if (poly.size() == 0 || poly.max_violation(x0) <= 0.0) {
    result.x = x0;
    result.converged = true;
    result.max_violation = 0.0;
    return result;
  }
  if (poly.size() <= opts.direct_max) {
    if (auto x = project_direct(poly, x0)) {
      result.x = std::move(*x);
      result.converged = true;
      result.max_violation = std::max(0.0, poly.max_violation(result.x));
      return result;
    }
  }
  result = dykstra(poly, x0, opts);
  if (result.max_violation <= 1e-7) {
    if (auto x = polish_active_set(poly, x0, result.x)) {
      result.x = std::move(*x);
      result.max_violation = std::max(0.0, poly.max_violation(result.x));
      result.converged = true;
    }
  }
  return result;
}

VectorXd project_onto_piece(const LinearPiece& piece, const VectorXd& x0,
                            const ProjectionOptions& opts) {
  auto result = project(piece.polytope, x0, opts);
  if (result.max_violation > 1e-7)
    throw InfeasiblePiece("piece " + piece.pattern.to_string() +
                          " is empty (violation " + std::to_string(result.max_violation) + ")");
  return result.x;
}

VectorXd nonnegative_least_squares(const MatrixXd& M, const VectorXd& r, int max_iters) {
  const Index n = M.cols();
  VectorXd x = VectorXd::Zero(n);
  if (n == 0) return x;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-12 * (1.0 + M.norm() * r.norm());

  auto solve_passive = [&]() {
    std::vector<Index> idx;
    for (Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    VectorXd z = VectorXd::Zero(n);
    if (idx.empty()) return z;
    MatrixXd sub(M.rows(), static_cast<Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Index>(c)) = M.col(idx[c]);
    const VectorXd zs = sub.completeOrthogonalDecomposition().solve(r);
    for (std::size_t c = 0; c < idx.size(); ++c) z(idx[c]) = zs(static_cast<Index>(c));
    return z;
  };

  for (int outer = 0; outer < max_iters; ++outer) {
    const VectorXd w = M.transpose() * (r - M * x);
    Index best = -1;
    double best_w = tol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    for (int inner = 0; inner < max_iters; ++inner) {
      VectorXd z = solve_passive();
      bool all_positive = true;
      for (Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) all_positive = false;
      if (all_positive) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          const double denom = x(j) - z(j);
          if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
        }
      }
      x += alpha * (z - x);
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && std::abs(x(j)) <= 1e-15) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
  }
  return x;
}

double projection_kkt_residual(const Polytope& poly, const VectorXd& x0,
                               const VectorXd& x_star, double active_tol) {
  const double violation = std::max(0.0, poly.max_violation(x_star));
  std::vector<Index> active;
  for (Index i = 0; i < poly.size(); ++i)
    if (poly.normals.row(i).dot(x_star) - poly.bounds(i) >= -active_tol) active.push_back(i);
  const VectorXd r = x0 - x_star;
  if (active.empty()) return std::max(violation, r.norm());
  MatrixXd M(poly.dim, static_cast<Index>(active.size()));
  for (std::size_t c = 0; c < active.size(); ++c)
    M.col(static_cast<Index>(c)) = poly.normals.row(active[c]).transpose();
  const VectorXd lambda = nonnegative_least_squares(M, r);
  return std::max(violation, (M * lambda - r).norm());
}

PieceFamily enumerate_pieces(const NetworkParamsd& params, const VectorXd& x,
                             double tau, const PieceOptions& opts) {
  PieceFamily family;
  family.anchor = x;
  family.slack = slack_set(params, x, tau);
  const std::size_t s = family.slack.size();
  if (s > opts.slack_budget) throw SlackBudgetExceeded(s, opts.slack_budget);
  if (s >= opts.warn_at)
    warn("slack set has " + std::to_string(s) + " entries; enumerating " +
         std::to_string(std::size_t{1} << s) + " candidate pieces");

  const ActivationPattern anchor = activation_pattern(params, x);
  family.candidates = std::size_t{1} << s;
  for (std::size_t flips = 0; flips < family.candidates; ++flips) {
    ActivationPattern pattern = anchor;
    for (std::size_t b = 0; b < s; ++b) {
      if (flips & (std::size_t{1} << b)) {
        const auto& u = family.slack.entries[b];
        auto& mask = pattern.masks[static_cast<std::size_t>(u.layer)];
        const auto j = static_cast<std::size_t>(u.unit);
        mask[j] = !mask[j];
      }
    }
    LinearPiece piece;
    try {
      piece = build_piece(params, pattern);
    } catch (const InfeasiblePiece&) {
      continue;
    }
    if (flips != 0) {
      const auto proj = project(piece.polytope, x, opts.projection);
      if (proj.max_violation > opts.feasibility_tol) continue;
    }
    family.pieces.push_back(std::move(piece));
    family.flip_masks.push_back(flips);
  }
  return family;
}

std::vector<SlackProfileRow> slack_size_profile(const NetworkParamsd& params,
                                                std::span<const VectorXd> xs,
                                                std::span<const double> taus) {
  std::vector<SlackProfileRow> rows;
  rows.reserve(taus.size());
  for (double tau : taus) rows.push_back({tau, 0, 0.0, xs.size()});
  for (const auto& x : xs) {
    const auto layers = forward(params, x);
    for (auto& row : rows) {
      std::size_t count = 0;
      for (const auto& z : layers.z)
        for (Index j = 0; j < z.size(); ++j)
          if (std::abs(z(j)) <= row.tau) ++count;
      row.max_size = std::max(row.max_size, count);
      row.mean_size += static_cast<double>(count);
    }
  }
  if (!xs.empty())
    for (auto& row : rows) row.mean_size /= static_cast<double>(xs.size());
  return rows;
}

}  // namespace surfnet
