#include "surfnet/surfing.hpp"

#include <limits>
#include <string>

#include "surfnet/errors.hpp"
#include "surfnet/log.hpp"
#include "surfnet/rng.hpp"

namespace surfnet {

void SurfConfig::validate_projected() const {
  if (!(tau > 0.0)) throw InvalidConfig("projected surfing needs tau > 0");
  descent.validate();
}

VectorXd initial_point(InitPolicy policy, Index k, double box, std::uint64_t seed) {
  VectorXd x = VectorXd::Zero(k);
  if (policy == InitPolicy::Uniform) {
    if (!(box > 0.0)) throw InvalidConfig("init box must be > 0");
    auto rng = CounterRng::stream(seed, 0, "surf.init");
    for (Index c = 0; c < k; ++c) x(c) = rng.uniform(-box, box);
  }
  return x;
}

namespace {

void check_disc(const FlowDiscretization& disc) {
  if (disc.snapshots.empty()) throw InvalidConfig("flow discretization has no snapshots");
}

std::string at_snapshot(std::size_t t, const std::string& what) {
  return "snapshot " + std::to_string(t) + ": " + what;
}

}  // namespace

SurfResult surf_simple(const FlowDiscretization& disc, const VectorXd& y,
                       const MeasurementMatrixd& A, const SurfConfig& cfg,
                       const std::optional<VectorXd>& start) {
  check_disc(disc);
  DescentConfig dcfg = cfg.descent;
  dcfg.record_path = cfg.record_trajectory;
  VectorXd x = start ? *start
                     : initial_point(cfg.init, disc.snapshots.front().dims.k, cfg.init_box,
                                     cfg.init_seed);
  SurfResult out;
  for (std::size_t t = 0; t < disc.snapshots.size(); ++t) {
    const Objectived obj(disc.snapshots[t], A, y);
    DescentResult r;
    try {
      r = minimize(obj, x, dcfg);
    } catch (const NonFiniteEncountered& e) {
      throw NonFiniteEncountered(at_snapshot(t, e.what()));
    }
    x = r.x_final;
    out.x.push_back(x);
    out.f.push_back(r.f_final);
    out.total_inner_iterations += static_cast<std::size_t>(r.iterations);
    if (cfg.record_trajectory) out.trajectory.push_back(std::move(r.path));
  }
  return out;
}

SurfResult surf_projected(const FlowDiscretization& disc, const VectorXd& y,
                          const MeasurementMatrixd& A, const SurfConfig& cfg,
                          const std::optional<VectorXd>& x0) {
  check_disc(disc);
  cfg.validate_projected();
  DescentConfig dcfg = cfg.descent;
  dcfg.record_path = cfg.record_trajectory;

  SurfResult out;
  auto note = [&](std::string msg) {
    warn(msg);
    out.warnings.push_back(std::move(msg));
  };

  VectorXd x;
  {
    const Objectived obj0(disc.snapshots.front(), A, y);
    if (x0) {
      x = *x0;
    } else {
      const auto r = minimize(
          obj0, initial_point(cfg.init, obj0.input_dim(), cfg.init_box, cfg.init_seed), dcfg);
      x = r.x_final;
      out.total_inner_iterations += static_cast<std::size_t>(r.iterations);
      if (cfg.record_trajectory) out.trajectory.push_back(r.path);
    }
    out.x.push_back(x);
    out.f.push_back(obj0.value(x));
    out.pieces_examined.push_back(0);
    out.slack_sizes.push_back(0);
    out.chosen_piece.push_back(0);
    if (cfg.record_trajectory && x0) out.trajectory.push_back({x});
  }

  for (std::size_t t = 1; t < disc.snapshots.size(); ++t) {
    const auto& theta = disc.snapshots[t];
    const Objectived obj(theta, A, y);
    std::vector<LinearPiece> pieces;
    std::size_t slack = 0;
    try {
      auto family = enumerate_pieces(theta, x, cfg.tau, cfg.pieces);
      slack = family.slack.size();
      pieces = std::move(family.pieces);
    } catch (const SlackBudgetExceeded& e) {
      note(at_snapshot(t, std::string(e.what()) + "; using the anchor piece only"));
      slack = e.slack_size();
    }
    if (pieces.empty()) pieces.push_back(build_piece(theta, activation_pattern(theta, x)));

    std::optional<DescentResult> best;
    std::size_t best_index = 0;
    std::size_t examined = 0;
    for (std::size_t g = 0; g < pieces.size(); ++g) {
      DescentResult r;
      try {
        r = minimize_on_piece(obj, pieces[g], x, dcfg);
      } catch (const InfeasiblePiece& e) {
        note(at_snapshot(t, std::string("skipping piece: ") + e.what()));
        continue;
      } catch (const NonFiniteEncountered& e) {
        throw NonFiniteEncountered(at_snapshot(t, e.what()));
      }
      ++examined;
      out.total_inner_iterations += static_cast<std::size_t>(r.iterations);
      if (!best || r.f_final < best->f_final) {
        best = std::move(r);
        best_index = g;
      }
    }
    if (!best) {
      note(at_snapshot(t, "no piece could be minimized; keeping the previous iterate"));
      best = DescentResult{x, obj.value(x), 0, false, StopReason::MaxIters, {}};
    }
    x = best->x_final;
    out.x.push_back(x);
    out.f.push_back(best->f_final);
    out.pieces_examined.push_back(examined);
    out.slack_sizes.push_back(slack);
    out.chosen_piece.push_back(best_index);
    if (cfg.record_trajectory) out.trajectory.push_back(std::move(best->path));
  }
  return out;
}

DescentResult direct_descent_baseline(const NetworkParamsd& final_params, const VectorXd& y,
                                      const MeasurementMatrixd& A, const SurfConfig& cfg,
                                      std::size_t n_restarts) {
  if (n_restarts == 0) throw InvalidConfig("direct descent needs at least one restart");
  const Objectived obj(final_params, A, y);
  std::optional<DescentResult> best;
  for (std::size_t r = 0; r < n_restarts; ++r) {
    const std::uint64_t seed =
        r == 0 ? cfg.init_seed : CounterRng::derive_key(cfg.init_seed, r, "restart");
    auto res = minimize(obj, initial_point(cfg.init, obj.input_dim(), cfg.init_box, seed),
                        cfg.descent);
    if (!best || res.f_final < best->f_final) best = std::move(res);
  }
  return *best;
}

}  // namespace surfnet
