#pragma once

// Inner-loop optimizers over the latent input: gradient descent, Adam, and
// projected gradient descent on a single linear piece.

#include <optional>
#include <string_view>
#include <vector>

#include "surfnet/objective.hpp"
#include "surfnet/pieces.hpp"

namespace surfnet {

enum class OptimizerKind { GradientDescent, Adam };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct DescentConfig {
  OptimizerKind kind = OptimizerKind::GradientDescent;
  /// eta for GD, the learning rate for Adam.
  double step_size = 0.5;
  int max_iters = 5000;
  /// Unset means 1e-8 (1 + ||A y||).
  std::optional<double> grad_tol;
  double step_tol = 1e-10;
  /// Armijo backtracking (GD only): halve eta until
  /// f(x - eta g) <= f(x) - c eta ||g||^2.
  bool backtracking = true;
  double armijo_c = 1e-4;
  AdamParams adam;
  bool record_path = false;

  static DescentConfig gradient_descent(double eta = 0.5) {
    DescentConfig cfg;
    cfg.kind = OptimizerKind::GradientDescent;
    cfg.step_size = eta;
    return cfg;
  }

  static DescentConfig adam_optimizer(double lr = 0.01) {
    DescentConfig cfg;
    cfg.kind = OptimizerKind::Adam;
    cfg.step_size = lr;
    cfg.backtracking = false;
    return cfg;
  }

  void validate() const;
  double resolved_grad_tol(const Objectived& obj) const;
};

enum class StopReason { GradTol, StepTol, MaxIters };

std::string_view to_string(StopReason reason);
std::string_view to_string(OptimizerKind kind);

struct DescentResult {
  VectorXd x_final;
  double f_final = 0.0;
  int iterations = 0;
  bool converged = false;
  StopReason stop_reason = StopReason::MaxIters;
  /// Iterates including the start, filled when record_path is set.
  std::vector<VectorXd> path;
};

/// Unconstrained descent on f. Adam reports the best iterate it visited, so
/// the result is never worse than the start.
DescentResult minimize(const Objectived& obj, const VectorXd& x_init,
                       const DescentConfig& cfg);

/// Projected gradient descent on q(x) = 1/2 ||A (J x + offset) - A y||^2 over
/// the piece's polytope with eta = 0.9 / lambda_max(J^T A^T A J), followed by
/// an exact solve on the face the iterates settled on.
DescentResult minimize_on_piece(const Objectived& obj, const LinearPiece& piece,
                                const VectorXd& x_init, const DescentConfig& cfg);

}  // namespace surfnet
