#include "surfnet/descent.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>

#include "surfnet/errors.hpp"

namespace surfnet {

void DescentConfig::validate() const {
  if (!(step_size > 0.0)) throw InvalidConfig("step size must be > 0");
  if (max_iters < 0) throw InvalidConfig("max_iters must be >= 0");
  if (grad_tol && !(*grad_tol > 0.0)) throw InvalidConfig("grad_tol must be > 0");
  if (!(step_tol > 0.0)) throw InvalidConfig("step_tol must be > 0");
  if (kind == OptimizerKind::Adam) {
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
      throw InvalidConfig("Adam betas must lie in [0, 1)");
    if (!(adam.eps > 0.0)) throw InvalidConfig("Adam eps must be > 0");
  }
}

double DescentConfig::resolved_grad_tol(const Objectived& obj) const {
  return grad_tol ? *grad_tol : 1e-8 * (1.0 + obj.measured_target().norm());
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::GradTol: return "grad_tol";
    case StopReason::StepTol: return "step_tol";
    case StopReason::MaxIters: return "max_iters";
  }
  return "unknown";
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "gd";
}

namespace {

void require_finite(double f, const VectorXd& g, int iteration) {
  if (!std::isfinite(f) || !g.allFinite())
    throw NonFiniteEncountered("objective or gradient became non-finite at iteration " +
                               std::to_string(iteration));
}

DescentResult run_gradient_descent(const Objectived& obj, const VectorXd& x_init,
                                   const DescentConfig& cfg) {
  const double gtol = cfg.resolved_grad_tol(obj);
  DescentResult res;
  VectorXd x = x_init;
  auto [f, g] = obj.value_and_gradient(x);
  require_finite(f, g, 0);
  if (cfg.record_path) res.path.push_back(x);

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (g.norm() <= gtol) {
      res.stop_reason = StopReason::GradTol;
      res.converged = true;
      break;
    }
    const double g2 = g.squaredNorm();
    double eta = cfg.step_size;
    VectorXd x_new = x - eta * g;
    double f_new = obj.value(x_new);
    bool accepted = !cfg.backtracking;
    if (cfg.backtracking) {
      for (int halving = 0; halving < 60; ++halving) {
        if (std::isfinite(f_new) && f_new <= f - cfg.armijo_c * eta * g2) {
          accepted = true;
          break;
        }
        eta *= 0.5;
        x_new = x - eta * g;
        f_new = obj.value(x_new);
      }
    }
    if (!accepted) {
      // No sufficient decrease at any representable step: x sits on a kink
      // or at the precision floor.
      res.stop_reason = StopReason::StepTol;
      res.converged = true;
      break;
    }
    const double step = (x_new - x).norm();
    x = std::move(x_new);
    std::tie(f, g) = obj.value_and_gradient(x);
    res.iterations = it + 1;
    require_finite(f, g, res.iterations);
    if (cfg.record_path) res.path.push_back(x);
    if (step <= cfg.step_tol) {
      res.stop_reason = StopReason::StepTol;
      res.converged = true;
      break;
    }
  }
  res.x_final = std::move(x);
  res.f_final = f;
  return res;
}

DescentResult run_adam(const Objectived& obj, const VectorXd& x_init,
                       const DescentConfig& cfg) {
  const double gtol = cfg.resolved_grad_tol(obj);
  const auto& ap = cfg.adam;
  DescentResult res;
  VectorXd x = x_init;
  auto [f, g] = obj.value_and_gradient(x);
  require_finite(f, g, 0);
  if (cfg.record_path) res.path.push_back(x);
  VectorXd best_x = x;
  double best_f = f;
  VectorXd m = VectorXd::Zero(x.size());
  VectorXd v = VectorXd::Zero(x.size());
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (g.norm() <= gtol) {
      res.stop_reason = StopReason::GradTol;
      res.converged = true;
      break;
    }
    beta1_t *= ap.beta1;
    beta2_t *= ap.beta2;
    m = ap.beta1 * m + (1.0 - ap.beta1) * g;
    v = ap.beta2 * v + (1.0 - ap.beta2) * g.cwiseProduct(g);
    const VectorXd m_hat = m / (1.0 - beta1_t);
    const VectorXd v_hat = v / (1.0 - beta2_t);
    const VectorXd step =
        cfg.step_size * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + ap.eps).matrix());
    x -= step;
    std::tie(f, g) = obj.value_and_gradient(x);
    res.iterations = it + 1;
    require_finite(f, g, res.iterations);
    if (cfg.record_path) res.path.push_back(x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
    if (step.norm() <= cfg.step_tol) {
      res.stop_reason = StopReason::StepTol;
      res.converged = true;
      break;
    }
  }
  res.x_final = std::move(best_x);
  res.f_final = best_f;
  return res;
}

// Quadratic model of f on one piece: q(x) = 1/2 ||Jm x + r0||^2.
struct PieceQuadratic {
  MatrixXd Jm;
  VectorXd r0;

  double value(const VectorXd& x) const { return 0.5 * (Jm * x + r0).squaredNorm(); }
  VectorXd gradient(const VectorXd& x) const { return Jm.transpose() * (Jm * x + r0); }
};

// Exact minimizer of q on the face of the active-set guess at x, iterated as
// a primal active-set method. Returns nothing if the iteration does not settle
// on a feasible KKT point no worse than x.
std::optional<VectorXd> refine_on_face(const PieceQuadratic& q, const Polytope& poly,
                                       const VectorXd& x) {
  const Index k = x.size();
  const double scale = 1.0 + x.norm();
  std::vector<Index> active;
  for (Index i = 0; i < poly.size(); ++i)
    if (poly.normals.row(i).dot(x) - poly.bounds(i) >= -1e-9 * scale) active.push_back(i);

  const MatrixXd H = q.Jm.transpose() * q.Jm;
  const VectorXd grad = q.gradient(x);
  const double q_start = q.value(x);
  for (int round = 0; round < 2 * static_cast<int>(poly.size()) + 6; ++round) {
    const auto m = static_cast<Index>(active.size());
    MatrixXd kkt = MatrixXd::Zero(k + m, k + m);
    VectorXd rhs(k + m);
    kkt.topLeftCorner(k, k) = H;
    rhs.head(k) = -grad;
    for (Index r = 0; r < m; ++r) {
      const Index c = active[static_cast<std::size_t>(r)];
      kkt.block(k + r, 0, 1, k) = poly.normals.row(c);
      kkt.block(0, k + r, k, 1) = poly.normals.row(c).transpose();
      rhs(k + r) = poly.bounds(c) - poly.normals.row(c).dot(x);
    }
    const VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) return std::nullopt;
    const VectorXd candidate = x + sol.head(k);
    const VectorXd slack = poly.normals * candidate - poly.bounds;
    Index worst = -1;
    double worst_v = 1e-10 * scale;
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
    if (m > 0) {
      Index most_negative;
      const double mu_min = sol.tail(m).minCoeff(&most_negative);
      if (mu_min < -1e-9 * (1.0 + grad.norm())) {
        active.erase(active.begin() + most_negative);
        continue;
      }
    }
    if (q.value(candidate) <= q_start + 1e-12 * (1.0 + q_start)) return candidate;
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

DescentResult minimize(const Objectived& obj, const VectorXd& x_init,
                       const DescentConfig& cfg) {
  cfg.validate();
  if (x_init.size() != obj.input_dim()) throw DimensionMismatch("initial point has wrong length");
  return cfg.kind == OptimizerKind::Adam ? run_adam(obj, x_init, cfg)
                                         : run_gradient_descent(obj, x_init, cfg);
}

DescentResult minimize_on_piece(const Objectived& obj, const LinearPiece& piece,
                                const VectorXd& x_init, const DescentConfig& cfg) {
  cfg.validate();
  if (x_init.size() != obj.input_dim()) throw DimensionMismatch("initial point has wrong length");
  const auto& A = obj.measurement();
  PieceQuadratic q;
  q.Jm = A.is_identity() ? piece.map.J : MatrixXd(A.A * piece.map.J);
  q.r0 = A.apply(piece.map.offset) - obj.measured_target();

  const double gtol = cfg.resolved_grad_tol(obj);
  DescentResult res;
  VectorXd x = project_onto_piece(piece, x_init);
  if (cfg.record_path) res.path.push_back(x);

  const double sigma = operator_norm(q.Jm, 50);
  const double lambda_max = sigma * sigma;
  if (lambda_max > 0.0) {
    const double eta = 0.9 / lambda_max;
    for (int it = 0; it < cfg.max_iters; ++it) {
      const VectorXd g = q.gradient(x);
      if (!g.allFinite()) throw NonFiniteEncountered("piece gradient became non-finite");
      VectorXd x_new = project(piece.polytope, VectorXd(x - eta * g)).x;
      const double step = (x_new - x).norm();
      x = std::move(x_new);
      res.iterations = it + 1;
      if (cfg.record_path) res.path.push_back(x);
      if (step <= cfg.step_tol) {
        res.stop_reason = StopReason::StepTol;
        res.converged = true;
        break;
      }
      if (step / eta <= gtol) {
        res.stop_reason = StopReason::GradTol;
        res.converged = true;
        break;
      }
    }
    if (auto refined = refine_on_face(q, piece.polytope, x)) {
      x = std::move(*refined);
      if (cfg.record_path) res.path.push_back(x);
    }
  } else {
    res.converged = true;
    res.stop_reason = StopReason::GradTol;
  }
  res.x_final = std::move(x);
  res.f_final = obj.value(res.x_final);
  if (!std::isfinite(res.f_final)) throw NonFiniteEncountered("objective became non-finite");
  return res;
}

}  // namespace surfnet
