#include "geosteer/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geosteer/errors.hpp"

namespace geosteer::bayes {
namespace {

constexpr double kOffsetTolerance = 1e-9;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(lo <= X <= hi) for X ~ N(mean, sd²); sd = 0 is a point mass.
double normal_interval(double lo, double hi, double mean, double sd) {
  if (sd <= 0.0) return (mean >= lo && mean <= hi) ? 1.0 : 0.0;
  return normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
}

}  // namespace

BoundaryBelief make_boundary_belief(int horizon, double innovation_sd_top,
                                    double innovation_sd_thickness,
                                    double min_thickness) {
  if (horizon < 0) throw UsageError("make_boundary_belief: horizon must be >= 0");
  BoundaryBelief b;
  b.innovation_sd_top = innovation_sd_top;
  b.innovation_sd_thickness = innovation_sd_thickness;
  b.min_thickness = min_thickness;
  b.mean_top.assign(horizon + 1, 0.0);
  b.mean_thickness.assign(horizon + 1, 0.0);
  b.var_top.resize(horizon + 1);
  b.var_thickness.resize(horizon + 1);
  for (int k = 0; k <= horizon; ++k) {
    b.var_top[k] = k * innovation_sd_top * innovation_sd_top;
    b.var_thickness[k] = k * innovation_sd_thickness * innovation_sd_thickness;
  }
  return b;
}

BoundaryBelief condition_on_measurement(const BoundaryBelief& belief,
                                        double measured_top,
                                        double measured_thickness) {
  BoundaryBelief post = make_boundary_belief(
      belief.horizon(), belief.innovation_sd_top,
      belief.innovation_sd_thickness, belief.min_thickness);
  std::fill(post.mean_top.begin(), post.mean_top.end(), measured_top);
  std::fill(post.mean_thickness.begin(), post.mean_thickness.end(),
            measured_thickness);
  return post;
}

BoundaryPaths sample_boundary_paths(const BoundaryBelief& belief,
                                    int mc_samples, Rng& rng) {
  if (mc_samples < 1) throw UsageError("expected_stage_reward: mc_samples must be >= 1");
  if (belief.horizon() < env::kPointsPerStage - 1)
    throw UsageError("expected_stage_reward: belief horizon shorter than a stage");
  constexpr int n = env::kPointsPerStage;
  BoundaryPaths paths(mc_samples, std::vector<double>(2 * n));
  for (auto& path : paths) {
    double e_top = 0.0;
    double e_h = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k > 0) {
        e_top += normal(rng, 0.0, std::sqrt(belief.var_top[k] - belief.var_top[k - 1]));
        e_h += normal(rng, 0.0,
                      std::sqrt(belief.var_thickness[k] - belief.var_thickness[k - 1]));
      }
      path[k] = belief.mean_top[k] + e_top;
      path[n + k] = std::max(belief.mean_thickness[k] + e_h, belief.min_thickness);
    }
  }
  return paths;
}

double expected_stage_reward(const BoundaryPaths& paths,
                             const env::Env1Scenario& scenario, double tvd,
                             double inclination_deg, double delta_deg,
                             const StageGeometry& geometry) {
  constexpr int n = env::kPointsPerStage;
  const auto steps =
      env::min_curvature_segment(inclination_deg, delta_deg, n, geometry.dx);
  std::vector<double> z(n);
  z[0] = tvd;
  for (int k = 1; k < n; ++k) z[k] = z[k - 1] + steps[k - 1];

  double total = 0.0;
  std::vector<double> r1(n), r2(n);
  for (const auto& path : paths) {
    for (int k = 0; k < n; ++k) {
      const auto s = env::score_point(z[k], path[k], path[n + k], geometry.hq_fraction,
                                      geometry.perm_high, scenario.perm_low);
      r1[k] = s.r1;
      r2[k] = s.r2;
    }
    total += env::stage_reward_env1(r1, r2, scenario.w1, scenario.w2);
  }
  return total / static_cast<double>(paths.size());
}

double expected_stage_reward(const BoundaryBelief& belief,
                             const env::Env1Scenario& scenario, double tvd,
                             double inclination_deg, double delta_deg,
                             const StageGeometry& geometry, int mc_samples,
                             Rng& rng) {
  const auto paths = sample_boundary_paths(belief, mc_samples, rng);
  return expected_stage_reward(paths, scenario, tvd, inclination_deg, delta_deg,
                               geometry);
}

FaultBelief::FaultBelief(const geomodel::Env2Prior& prior)
    : trend_(prior.base_trend),
      thickness_(prior.thickness),
      spacing_(prior.spacing),
      extra_offset_(prior.base_trend.size(), 0.0) {
  for (const auto& spec : prior.faults) {
    FaultHypotheses h;
    for (double loc : spec.candidate_locations)
      h.candidates.push_back(static_cast<int>(std::lround(loc / spacing_)));
    h.weights.assign(h.candidates.size(), 1.0 / h.candidates.size());
    h.displacement_mean = spec.displacement_mean;
    h.displacement_sd = spec.displacement_sd;
    faults_.push_back(std::move(h));
  }
}

double FaultBelief::known_upper(int point) const {
  double upper = trend_.at(point);
  for (const auto& f : faults_)
    if (f.resolved && f.point <= point) upper += f.displacement;
  for (int j = 0; j <= point; ++j) upper += extra_offset_[j];
  return upper;
}

void FaultBelief::condition(int point, double measured_upper) {
  const double offset = measured_upper - known_upper(point);
  const bool moved = std::abs(offset) > kOffsetTolerance;
  bool explained = !moved;
  for (auto& f : faults_) {
    if (f.resolved) continue;
    const auto it = std::find(f.candidates.begin(), f.candidates.end(), point);
    if (it == f.candidates.end()) continue;
    if (moved && !explained) {
      f.resolved = true;
      f.point = point;
      f.displacement = offset;
      f.candidates = {point};
      f.weights = {1.0};
      explained = true;
      continue;
    }
    const auto idx = static_cast<std::size_t>(it - f.candidates.begin());
    f.candidates.erase(f.candidates.begin() + idx);
    f.weights.erase(f.weights.begin() + idx);
    const double sum = std::accumulate(f.weights.begin(), f.weights.end(), 0.0);
    if (f.candidates.empty() || sum <= 0.0) {
      // Every candidate passed without an offset: a zero displacement.
      f.resolved = true;
      f.point = point;
      f.displacement = 0.0;
      f.candidates = {point};
      f.weights = {1.0};
    } else {
      for (double& w : f.weights) w /= sum;
    }
  }
  if (!explained) extra_offset_.at(point) += offset;
}

double FaultBelief::prob_inside(int point, double tvd) const {
  const double base = known_upper(point - 1) + trend_.at(point) - trend_.at(point - 1);
  // Faults that may break exactly at `point`.
  std::vector<const FaultHypotheses*> active;
  std::vector<double> p_here;
  for (const auto& f : faults_) {
    if (f.resolved) continue;
    for (std::size_t c = 0; c < f.candidates.size(); ++c) {
      if (f.candidates[c] == point) {
        active.push_back(&f);
        p_here.push_back(f.weights[c]);
      }
    }
  }
  // Inside iff tvd - h <= upper <= tvd.
  const double lo = tvd - thickness_;
  const double hi = tvd;
  double prob = 0.0;
  const std::size_t m = active.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    double weight = 1.0;
    double mean = base;
    double var = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      if (mask & (std::size_t{1} << a)) {
        weight *= p_here[a];
        mean += active[a]->displacement_mean;
        var += active[a]->displacement_sd * active[a]->displacement_sd;
      } else {
        weight *= 1.0 - p_here[a];
      }
    }
    if (weight == 0.0) continue;
    prob += weight * normal_interval(lo, hi, mean, std::sqrt(var));
  }
  return prob;
}

NextFault FaultBelief::next_fault(int point) const {
  NextFault next;
  for (const auto& f : faults_) {
    if (f.resolved) continue;
    const int last = *std::max_element(f.candidates.begin(), f.candidates.end());
    if (last <= point) continue;
    const int first = *std::min_element(f.candidates.begin(), f.candidates.end());
    if (!next.exists || first * spacing_ < next.start_m) {
      next.exists = true;
      next.start_m = first * spacing_;
      next.end_m = last * spacing_;
      next.displacement_mean = f.displacement_mean;
    }
  }
  return next;
}

nlohmann::json FaultBelief::to_json() const {
  nlohmann::json j;
  j["thickness"] = thickness_;
  j["spacing"] = spacing_;
  auto& arr = j["faults"] = nlohmann::json::array();
  for (const auto& f : faults_) {
    arr.push_back({{"candidates", f.candidates},
                   {"weights", f.weights},
                   {"displacement_mean", f.displacement_mean},
                   {"displacement_sd", f.displacement_sd},
                   {"resolved", f.resolved},
                   {"point", f.point},
                   {"displacement", f.displacement}});
  }
  return j;
}

nlohmann::json to_json(const BoundaryBelief& belief) {
  return {{"innovation_sd_top", belief.innovation_sd_top},
          {"innovation_sd_thickness", belief.innovation_sd_thickness},
          {"mean_top", belief.mean_top},
          {"mean_thickness", belief.mean_thickness},
          {"var_top", belief.var_top},
          {"var_thickness", belief.var_thickness}};
}

}  // namespace geosteer::bayes
