#pragma once

#include <optional>
#include <span>
#include <vector>

#include "geosteer/geomodel.hpp"

// Reward functions, well-path geometry and per-point scoring shared by the
// environments, the Bayesian look-ahead and the baselines.
namespace geosteer::env {

// Proximity reward. x is the distance to the nearest boundary divided by the
// local thickness; negative values mean the well is outside by |x|·h.
double reward_r1(double x);

// Quality reward for the permeability (mD) of the zone the well is in.
double reward_r2(double y);

// Weighted stage reward over exactly `kPointsPerStage` sub-point rewards.
// Throws ConfigError if w1 + w2 != 1 or either weight is outside [0, 1].
double stage_reward_env1(std::span<const double> r1, std::span<const double> r2,
                         double w1, double w2);

struct CostParams {
  double c_d = 0.0625;      // drilling cost per stage
  double c_st = 2.567;      // sidetrack cost
  double v_prod_min = 0.5;  // training range of the production value
  double v_prod_max = 4.0;

  void validate() const;
};

// Value of the stage (v_prod if the well ends it inside the reservoir) minus
// drilling cost and, for a sidetrack, the sidetrack cost.
double stage_reward_env2(bool in_reservoir, bool sidetracked,
                         const CostParams& params, double v_prod);

// TVD increments (m) of the `n_sub` horizontal steps of width `dx` along a
// circular arc whose inclination (degrees below horizontal) turns from
// `inclination_deg` to `inclination_deg + delta_deg`. Step k drops
// dx·tan(θ_k/2 + θ_{k+1}/2) where sin θ is linear in horizontal distance.
// Throws GeometryError if the arc approaches vertical.
std::vector<double> min_curvature_segment(double inclination_deg,
                                          double delta_deg, int n_sub,
                                          double dx);

inline constexpr int kPointsPerStage = 10;

struct Env1Scenario {
  double w1 = 0.67;
  double w2 = 0.33;
  double perm_low = 100.0;
};

struct PointScore {
  bool inside = false;
  bool high_quality = false;
  double x = 0.0;  // signed normalized distance to the nearest boundary
  double y = 0.0;  // permeability of the zone containing the well
  double r1 = 0.0;
  double r2 = 0.0;
};

// Scores a well at `tvd` against a boundary description at one point.
PointScore score_point(double tvd, double top, double thickness,
                       double hq_fraction, double perm_high, double perm_low);

struct EpisodeResult {
  double total_reward = 0.0;
  double reservoir_contact = 0.0;            // percent
  std::optional<double> high_quality;        // percent, environment 1
  std::optional<double> operating_cost;      // environment 2
  int sidetracks = 0;
  std::vector<double> stage_rewards;
  std::vector<double> trajectory;            // TVD per point
};

// Percent of points with top <= tvd <= bottom (and <= hq for high quality).
// Rewards and costs are left for the caller to fill in.
EpisodeResult episode_metrics(std::span<const double> tvd,
                              std::span<const double> top,
                              std::span<const double> bottom,
                              std::optional<std::span<const double>> hq = {});

EpisodeResult episode_metrics(std::span<const double> tvd,
                              const geomodel::GeoRealization1& truth);

// Contact over points first_point .. first_point + tvd.size() - 1.
EpisodeResult episode_metrics(std::span<const double> tvd,
                              const geomodel::GeoRealization2& truth,
                              int first_point);

}  // namespace geosteer::env
