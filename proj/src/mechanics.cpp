#include "geosteer/mechanics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "geosteer/errors.hpp"

namespace geosteer::env {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMaxInclinationDeg = 89.0;

}  // namespace

double reward_r1(double x) {
  return 14.654 * x * x * x - 17.778 * x * x + 7.2252 * x;
}

double reward_r2(double y) { return (900.0 * y - 2.0 * y * y) / 1e5; }

double stage_reward_env1(std::span<const double> r1, std::span<const double> r2,
                         double w1, double w2) {
  if (w1 < 0.0 || w1 > 1.0 || w2 < 0.0 || w2 > 1.0 ||
      std::abs(w1 + w2 - 1.0) > 1e-9) {
    throw ConfigError("env.weights: w1 and w2 must lie in [0, 1] and sum to 1");
  }
  if (r1.size() != kPointsPerStage || r2.size() != kPointsPerStage) {
    throw UsageError("stage_reward_env1: expected " +
                     std::to_string(kPointsPerStage) + " sub-point rewards");
  }
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t k = 0; k < r1.size(); ++k) {
    s1 += r1[k];
    s2 += r2[k];
  }
  return w1 * s1 + w2 * s2;
}

void CostParams::validate() const {
  if (!(c_d >= 0.0)) throw ConfigError("env.c_d: must be >= 0");
  if (!(c_st >= 0.0)) throw ConfigError("env.c_st: must be >= 0");
  if (!(v_prod_min >= 0.0)) throw ConfigError("env.v_prod_min: must be >= 0");
  if (!(v_prod_max >= v_prod_min))
    throw ConfigError("env.v_prod_max: must be >= v_prod_min");
}

double stage_reward_env2(bool in_reservoir, bool sidetracked,
                         const CostParams& params, double v_prod) {
  const double value = in_reservoir ? v_prod : 0.0;
  const double cost = params.c_d + (sidetracked ? params.c_st : 0.0);
  return value - cost;
}

std::vector<double> min_curvature_segment(double inclination_deg,
                                          double delta_deg, int n_sub,
                                          double dx) {
  if (n_sub <= 0) throw UsageError("min_curvature_segment: n_sub must be > 0");
  const double end_deg = inclination_deg + delta_deg;
  if (std::abs(inclination_deg) >= kMaxInclinationDeg ||
      std::abs(end_deg) >= kMaxInclinationDeg) {
    throw GeometryError("well path approaches vertical (inclination " +
                        std::to_string(end_deg) + " deg from horizontal)");
  }
  std::vector<double> increments(n_sub);
  const double start = inclination_deg * kDegToRad;
  if (delta_deg == 0.0) {
    std::fill(increments.begin(), increments.end(), dx * std::tan(start));
    return increments;
  }
  // On a circular arc dx = R cos θ dθ, so sin θ grows linearly with x.
  const double s0 = std::sin(start);
  const double s1 = std::sin(end_deg * kDegToRad);
  double prev = start;
  for (int k = 0; k < n_sub; ++k) {
    const double next = std::asin(s0 + (s1 - s0) * (k + 1) / n_sub);
    increments[k] = dx * std::tan(0.5 * (prev + next));
    prev = next;
  }
  return increments;
}

PointScore score_point(double tvd, double top, double thickness,
                       double hq_fraction, double perm_high, double perm_low) {
  PointScore s;
  const double bottom = top + thickness;
  const double hq = top + hq_fraction * thickness;
  s.inside = tvd >= top && tvd <= bottom;
  if (s.inside) {
    s.x = std::min(tvd - top, bottom - tvd) / thickness;
    s.high_quality = tvd <= hq;
    s.y = s.high_quality ? perm_high : perm_low;
  } else {
    s.x = -(tvd < top ? top - tvd : tvd - bottom) / thickness;
    s.y = 0.0;
  }
  s.r1 = reward_r1(s.x);
  s.r2 = reward_r2(s.y);
  return s;
}

EpisodeResult episode_metrics(std::span<const double> tvd,
                              std::span<const double> top,
                              std::span<const double> bottom,
                              std::optional<std::span<const double>> hq) {
  if (top.size() < tvd.size() || bottom.size() < tvd.size() ||
      (hq && hq->size() < tvd.size())) {
    throw UsageError("episode_metrics: boundary arrays shorter than trajectory");
  }
  EpisodeResult result;
  result.trajectory.assign(tvd.begin(), tvd.end());
  if (tvd.empty()) return result;
  int inside = 0;
  int high = 0;
  for (std::size_t i = 0; i < tvd.size(); ++i) {
    if (tvd[i] >= top[i] && tvd[i] <= bottom[i]) {
      ++inside;
      if (hq && tvd[i] <= (*hq)[i]) ++high;
    }
  }
  const double n = static_cast<double>(tvd.size());
  result.reservoir_contact = 100.0 * inside / n;
  if (hq) result.high_quality = 100.0 * high / n;
  return result;
}

EpisodeResult episode_metrics(std::span<const double> tvd,
                              const geomodel::GeoRealization1& truth) {
  std::vector<double> bottom(truth.size());
  std::vector<double> hq(truth.size());
  for (int i = 0; i < truth.size(); ++i) {
    bottom[i] = truth.bottom(i);
    hq[i] = truth.hq_boundary(i);
  }
  return episode_metrics(tvd, truth.top, bottom, std::span<const double>(hq));
}

EpisodeResult episode_metrics(std::span<const double> tvd,
                              const geomodel::GeoRealization2& truth,
                              int first_point) {
  const auto n = tvd.size();
  if (first_point < 0 || first_point + n > truth.upper.size())
    throw UsageError("episode_metrics: trajectory exceeds realization");
  std::span<const double> top(truth.upper.data() + first_point, n);
  std::vector<double> bottom(n);
  for (std::size_t k = 0; k < n; ++k) bottom[k] = top[k] + truth.thickness;
  EpisodeResult result = episode_metrics(tvd, top, bottom);
  result.operating_cost = 0.0;
  return result;
}

}  // namespace geosteer::env
