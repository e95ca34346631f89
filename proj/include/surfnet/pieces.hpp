#pragma once

// Linear pieces of a ReLU generator: slack sets, the polytope attached to an
// activation pattern, enumeration of neighbouring pieces and Euclidean
// projection onto a piece.

#include <cstddef>
#include <span>
#include <vector>

#include "surfnet/network.hpp"

namespace surfnet {

/// (layer, unit), both 0-based.
struct UnitIndex {
  Index layer = 0;
  Index unit = 0;
  friend bool operator==(const UnitIndex&, const UnitIndex&) = default;
  friend auto operator<=>(const UnitIndex&, const UnitIndex&) = default;
};

/// Units whose preactivation at the anchor input has magnitude <= tau.
struct SlackSet {
  std::vector<UnitIndex> entries;
  double tau = 0.0;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool contains(UnitIndex u) const;
};

SlackSet slack_set(const NetworkParamsd& params, const VectorXd& x, double tau);

/// { x : normals.row(i) x <= bounds(i) } with unit-norm rows.
struct Polytope {
  MatrixXd normals;
  VectorXd bounds;
  Index dim = 0;

  Index size() const { return normals.rows(); }
  /// max_i (a_i x - c_i), or -inf for an empty constraint list.
  double max_violation(const VectorXd& x) const;
  bool contains(const VectorXd& x, double tol = 0.0) const {
    return max_violation(x) <= tol;
  }
};

/// Region where the network follows a fixed activation pattern, together with
/// the affine map G(x) = J x + offset valid on it.
struct LinearPiece {
  ActivationPattern pattern;
  Polytope polytope;
  AffineMap<double> map;
};

/// Builds the closed polytope of `pattern`: s_ij (p_ij x + q_ij) >= 0 for every
/// unit, s_ij = +1 on active units and -1 otherwise. Rows whose composed
/// weight vanishes are constant; a violated constant row means the pattern is
/// unrealizable and raises InfeasiblePiece.
LinearPiece build_piece(const NetworkParamsd& params, const ActivationPattern& pattern);

struct ProjectionOptions {
  double tol = 1e-10;
  int max_sweeps = 10000;
  /// Exhaustive active-set solve at or below this many constraints.
  Index direct_max = 3;
};

struct ProjectionResult {
  VectorXd x;
  double max_violation = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// Euclidean projection onto a polytope. Small systems are solved exactly by
/// active-set enumeration; larger ones by Dykstra's cyclic projections followed
/// by an active-set polish. Never throws on an empty polytope: the caller reads
/// `max_violation`.
ProjectionResult project(const Polytope& poly, const VectorXd& x0,
                         const ProjectionOptions& opts = {});

/// Projection that enforces feasibility: throws InfeasiblePiece when the
/// projected point still violates a constraint by more than 1e-7.
VectorXd project_onto_piece(const LinearPiece& piece, const VectorXd& x0,
                            const ProjectionOptions& opts = {});

/// Largest KKT defect of x_star as the projection of x0: feasibility violation
/// and the distance of x0 - x_star from the cone spanned by constraints that
/// are tight at x_star (within active_tol).
double projection_kkt_residual(const Polytope& poly, const VectorXd& x0,
                               const VectorXd& x_star, double active_tol = 1e-8);

/// min ||M lambda - r|| subject to lambda >= 0 (Lawson-Hanson).
VectorXd nonnegative_least_squares(const MatrixXd& M, const VectorXd& r,
                                   int max_iters = 500);

struct PieceOptions {
  std::size_t slack_budget = 20;
  std::size_t warn_at = 12;
  double feasibility_tol = 1e-7;
  ProjectionOptions projection;
};

/// Anchor piece first, then the remaining sign assignments on the slack set
/// in increasing bitmask order (bit b flips entry b of the slack set).
struct PieceFamily {
  VectorXd anchor;
  SlackSet slack;
  std::vector<LinearPiece> pieces;
  /// Bitmask of flipped slack entries for each retained piece.
  std::vector<std::size_t> flip_masks;
  std::size_t candidates = 0;
};

PieceFamily enumerate_pieces(const NetworkParamsd& params, const VectorXd& x,
                             double tau, const PieceOptions& opts = {});

struct SlackProfileRow {
  double tau = 0.0;
  std::size_t max_size = 0;
  double mean_size = 0.0;
  std::size_t samples = 0;
};

std::vector<SlackProfileRow> slack_size_profile(const NetworkParamsd& params,
                                                std::span<const VectorXd> xs,
                                                std::span<const double> taus);

}  // namespace surfnet
