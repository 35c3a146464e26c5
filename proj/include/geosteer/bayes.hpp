#pragma once

#include <vector>

#include <json.hpp>

#include "geosteer/geomodel.hpp"
#include "geosteer/mechanics.hpp"
#include "geosteer/random.hpp"

// Beliefs about the boundaries ahead of the sensor.
//
// Environment 1 uses a Gaussian random-walk prior for the top boundary and the
// thickness, conditioned on exact measurements at the sensor: the mean ahead is
// the measured value and the variance grows as k·sd² with distance k (points).
//
// Environment 2 keeps an exact hypothesis table over fault locations; measured
// offsets at candidate points resolve a fault, and a candidate passed without
// an offset is eliminated with the remaining weights renormalized.
namespace geosteer::bayes {

struct BoundaryBelief {
  double innovation_sd_top = 0.0;        // m per point
  double innovation_sd_thickness = 0.0;  // m per point
  double min_thickness = 1e-3;           // floor applied to sampled thickness
  // Index k = 0 is the sensor point, k = 1..horizon the points ahead.
  std::vector<double> mean_top;
  std::vector<double> mean_thickness;
  std::vector<double> var_top;
  std::vector<double> var_thickness;

  int horizon() const { return static_cast<int>(mean_top.size()) - 1; }
};

BoundaryBelief make_boundary_belief(int horizon, double innovation_sd_top,
                                    double innovation_sd_thickness,
                                    double min_thickness = 1e-3);

// Anchors the random walk at an exact measurement at the sensor point.
BoundaryBelief condition_on_measurement(const BoundaryBelief& belief,
                                        double measured_top,
                                        double measured_thickness);

struct StageGeometry {
  double dx = 10.0;
  double hq_fraction = 0.4;
  double perm_high = 200.0;
};

// Monte-Carlo estimate of the stage-1 reward of steering by `delta_deg` from
// `state`, averaging over `mc_samples` boundary paths drawn from the belief.
// The belief's sensor point is the state's current point.
double expected_stage_reward(const BoundaryBelief& belief,
                             const env::Env1Scenario& scenario, double tvd,
                             double inclination_deg, double delta_deg,
                             const StageGeometry& geometry, int mc_samples,
                             Rng& rng);

// Same estimate with a caller-supplied set of boundary paths, so that several
// actions can be compared on common random numbers. Each path holds
// kPointsPerStage tops followed by kPointsPerStage thicknesses.
using BoundaryPaths = std::vector<std::vector<double>>;
BoundaryPaths sample_boundary_paths(const BoundaryBelief& belief,
                                    int mc_samples, Rng& rng);
double expected_stage_reward(const BoundaryPaths& paths,
                             const env::Env1Scenario& scenario, double tvd,
                             double inclination_deg, double delta_deg,
                             const StageGeometry& geometry);

struct FaultHypotheses {
  std::vector<int> candidates;  // grid points still possible
  std::vector<double> weights;  // same length, sums to 1 while unresolved
  double displacement_mean = 0.0;
  double displacement_sd = 0.0;
  bool resolved = false;
  int point = -1;             // where it occurred, once resolved
  double displacement = 0.0;  // measured, once resolved
};

struct NextFault {
  bool exists = false;
  double start_m = 0.0;
  double end_m = 0.0;
  double displacement_mean = 0.0;
};

class FaultBelief {
 public:
  explicit FaultBelief(const geomodel::Env2Prior& prior);

  // Exact measurement of the upper boundary at `point`.
  void condition(int point, double measured_upper);

  // Upper boundary at `point` implied by the trend and resolved offsets.
  double known_upper(int point) const;

  // Probability that a well at `tvd` is inside the reservoir at `point`,
  // given that the belief has been conditioned on every point before it.
  double prob_inside(int point, double tvd) const;

  // Next unresolved fault with a candidate beyond `point`.
  NextFault next_fault(int point) const;

  const std::vector<FaultHypotheses>& faults() const { return faults_; }
  double thickness() const { return thickness_; }
  double spacing() const { return spacing_; }

  nlohmann::json to_json() const;

 private:
  std::vector<double> trend_;
  double thickness_;
  double spacing_;
  std::vector<FaultHypotheses> faults_;
  std::vector<double> extra_offset_;  // offsets not explained by any fault
};

nlohmann::json to_json(const BoundaryBelief& belief);

}  // namespace geosteer::bayes
