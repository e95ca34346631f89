#include "surfnet/landscape.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "surfnet/errors.hpp"
#include "surfnet/rng.hpp"

namespace surfnet {

LandscapeReport verify_descent_direction(const NetworkParamsd& params, const VectorXd& y,
                                         const MeasurementMatrixd& A,
                                         std::vector<double> radii, std::size_t n_samples,
                                         std::uint64_t seed, double threshold) {
  if (n_samples == 0) throw InvalidConfig("need at least one sample per radius");
  std::sort(radii.begin(), radii.end());
  const Objectived obj(params, A, y);
  LandscapeReport report;
  report.radii = radii;
  report.threshold = threshold;
  report.n_samples = n_samples;
  report.seed = seed;
  report.y_norm = y.norm();
  const Index k = params.dims.k;

  for (std::size_t r = 0; r < radii.size(); ++r) {
    auto rng = CounterRng::stream(seed, r, "landscape.sphere");
    const double radius = radii[r] * (1.0 + report.y_norm);
    std::size_t negative = 0;
    for (std::size_t i = 0; i < n_samples; ++i) {
      VectorXd g(k);
      double norm = 0.0;
      while (!(norm > 0.0)) {
        for (Index c = 0; c < k; ++c) g(c) = rng.normal();
        norm = g.norm();
      }
      const VectorXd x = (radius / norm) * g;
      const VectorXd toward_origin = -x / x.norm();
      if (obj.directional_derivative(x, toward_origin) < 0.0) ++negative;
    }
    report.fractions.push_back(static_cast<double>(negative) / static_cast<double>(n_samples));
  }
  for (std::size_t r = radii.size(); r-- > 0;) {
    if (report.fractions[r] < threshold) break;
    report.ball_estimate = radii[r];
  }
  return report;
}

std::size_t OracleConfig::grid_points(Index k) const {
  const double per_axis = std::floor(2.0 * box / resolution) + 1.0;
  const double total = std::pow(per_axis, static_cast<double>(k));
  if (total > static_cast<double>(std::numeric_limits<std::size_t>::max()))
    return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(total);
}

namespace {

struct Candidate {
  VectorXd x;
  double f;
};

// Exact minimizers of the quadratic on each pattern near x (every sign choice
// of the units whose kink lies within `radius`) restricted to each face of up
// to k of those units. Only improvements in the true objective are kept.
Candidate refine_once(const Objectived& obj, Candidate start, double radius) {
  const auto& params = obj.params();
  const Index k = params.dims.k;
  const auto layers = forward(params, start.x);
  const ActivationPattern base = pattern_of(layers);
  const auto base_maps = preactivation_maps(params, base);
  std::vector<std::pair<double, std::pair<std::size_t, Index>>> near;
  for (std::size_t i = 0; i < layers.z.size(); ++i)
    for (Index j = 0; j < layers.z[i].size(); ++j) {
      const double slope = base_maps.P[i].row(j).norm();
      const double dist = std::abs(layers.z[i](j)) / std::max(slope, 1e-300);
      if (dist <= radius || std::abs(layers.z[i](j)) <= 1e-12) near.push_back({dist, {i, j}});
    }
  std::sort(near.begin(), near.end());
  if (near.size() > 6) near.resize(6);

  const auto& A = obj.measurement();
  const double max_step = std::max(0.05, 4.0 * radius);
  Candidate best = start;
  const std::size_t nz = near.size();
  for (std::size_t signs = 0; signs < (std::size_t{1} << nz); ++signs) {
    ActivationPattern pattern = base;
    for (std::size_t b = 0; b < nz; ++b) {
      const auto [layer, unit] = near[b].second;
      pattern.masks[layer][static_cast<std::size_t>(unit)] = (signs >> b) & 1u;
    }
    const auto maps = preactivation_maps(params, pattern);
    const auto affine = piece_affine_map(params, pattern);
    const MatrixXd Jm = A.is_identity() ? affine.J : MatrixXd(A.A * affine.J);
    const VectorXd r = Jm * start.x + A.apply(affine.offset) - obj.measured_target();
    const MatrixXd H = Jm.transpose() * Jm;
    const VectorXd grad = Jm.transpose() * r;

    for (std::size_t face = 0; face < (std::size_t{1} << nz); ++face) {
      const auto m = static_cast<Index>(std::popcount(face));
      if (m > k) continue;
      MatrixXd kkt = MatrixXd::Zero(k + m, k + m);
      VectorXd rhs(k + m);
      kkt.topLeftCorner(k, k) = H;
      rhs.head(k) = -grad;
      Index row = 0;
      for (std::size_t b = 0; b < nz; ++b) {
        if (!((face >> b) & 1u)) continue;
        const auto [layer, unit] = near[b].second;
        const auto p = maps.P[layer].row(unit);
        kkt.block(k + row, 0, 1, k) = p;
        kkt.block(0, k + row, k, 1) = p.transpose();
        rhs(k + row) = -(p.dot(start.x) + maps.q[layer](unit));
        ++row;
      }
      const VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      const VectorXd x = start.x + sol.head(k);
      if (!x.allFinite() || (x - start.x).norm() > max_step) continue;
      const double f = obj.value(x);
      if (f < best.f) best = {x, f};
    }
  }
  return best;
}

Candidate refine_on_nearby_faces(const Objectived& obj, Candidate c, double radius) {
  for (int round = 0; round < 20; ++round) {
    const auto next = refine_once(obj, c, radius);
    if (!(next.f < c.f)) break;
    c = next;
  }
  return c;
}

}  // namespace

OracleResult brute_force_min(const Objectived& obj, const OracleConfig& cfg) {
  if (!(cfg.box > 0.0) || !(cfg.resolution > 0.0))
    throw InvalidConfig("oracle box and resolution must be > 0");
  const Index k = obj.input_dim();
  const std::size_t total = cfg.grid_points(k);
  if (total > cfg.max_grid_points)
    throw OracleIntractable("oracle grid would have " + std::to_string(total) +
                            " points (cap " + std::to_string(cfg.max_grid_points) + ")");
  const auto per_axis = static_cast<std::size_t>(std::floor(2.0 * cfg.box / cfg.resolution)) + 1;

  auto coord = [&](std::size_t idx) { return -cfg.box + cfg.resolution * static_cast<double>(idx); };
  auto point_of = [&](std::size_t flat) {
    VectorXd x(k);
    for (Index c = 0; c < k; ++c) {
      x(c) = coord(flat % per_axis);
      flat /= per_axis;
    }
    return x;
  };

  std::vector<double> values(total);
  for (std::size_t p = 0; p < total; ++p) values[p] = obj.value(point_of(p));

  // Grid local minima with respect to axis neighbours.
  std::vector<std::size_t> local;
  for (std::size_t p = 0; p < total; ++p) {
    bool is_min = true;
    std::size_t stride = 1;
    for (Index c = 0; c < k && is_min; ++c) {
      const std::size_t idx = (p / stride) % per_axis;
      if (idx > 0 && values[p - stride] < values[p]) is_min = false;
      if (idx + 1 < per_axis && values[p + stride] < values[p]) is_min = false;
      stride *= per_axis;
    }
    if (is_min) local.push_back(p);
  }
  auto by_value = [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  };
  std::sort(local.begin(), local.end(), by_value);
  std::vector<std::size_t> seeds(local.begin(),
                                 local.begin() + static_cast<std::ptrdiff_t>(
                                                     std::min(cfg.polish_count, local.size())));
  if (seeds.size() < cfg.polish_count) {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto take = std::min(cfg.polish_count, total);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      by_value);
    for (std::size_t i = 0; i < take && seeds.size() < cfg.polish_count; ++i)
      if (std::find(seeds.begin(), seeds.end(), order[i]) == seeds.end()) seeds.push_back(order[i]);
  }

  OracleResult result;
  result.grid_points = total;
  for (std::size_t p : seeds) {
    const auto polished = minimize(obj, point_of(p), cfg.polish);
    Candidate c{polished.x_final, polished.f_final};
    const double f_grid = values[p];
    if (f_grid < c.f) c = {point_of(p), f_grid};
    c = refine_on_nearby_faces(obj, c, 2.0 * cfg.resolution);
    result.basins.push_back(c.x);
    result.basin_values.push_back(c.f);
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(result.basin_values.begin(), result.basin_values.end()) -
      result.basin_values.begin());
  result.x_min = result.basins[best];
  result.f_min = result.basin_values[best];
  for (std::size_t i = 0; i < result.basins.size(); ++i) {
    if (i == best) continue;
    if (std::abs(result.basin_values[i] - result.f_min) <= 1e-3 &&
        (result.basins[i] - result.x_min).norm() > 0.1)
      result.near_tie = true;
  }
  return result;
}

}  // namespace surfnet
