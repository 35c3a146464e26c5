#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geosteer/bayes.hpp"
#include "geosteer/geomodel.hpp"
#include "geosteer/mechanics.hpp"

// The two geosteering MDPs.
//
// Environment 1: 100 points, a decision every 10 points changes the inclination
// by an integer number of degrees in [-5, 5]; the path between decisions is a
// minimum-curvature arc. Stage s is scored over points 10s .. 10s+9.
//
// Environment 2: 30 points, a decision at each of the first 29 points either
// moves the well by {-0.5, -0.25, 0, +0.25, +0.5} m TVD or, while outside the
// reservoir, sidetracks to the true mid-reservoir depth of the next point.
namespace geosteer::env {

enum class ObservationMode { kSensor, kPosterior };

std::string to_string(ObservationMode mode);
ObservationMode parse_observation_mode(const std::string& text);

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

struct Env1State {
  int point = 0;
  int stage = 0;
  double tvd = 0.0;
  double inclination = 0.0;  // degrees below horizontal
  Env1Scenario scenario;
};

struct Env1Config {
  double thickness_norm = 25.0;   // divisor for thickness observations
  double inclination_norm = 10.0; // divisor for inclination observations
  double perm_norm = 200.0;
};

class Env1 {
 public:
  static constexpr int kNumActions = 11;
  static constexpr int kObservationSize = 49;
  static constexpr int kHistory = kPointsPerStage;  // points before/after i

  static double action_delta(int action) { return action - 5.0; }

  explicit Env1(Env1Config config = {});

  // Starts an episode at point 0, horizontal, at the true mid-reservoir depth.
  void reset(geomodel::GeoRealization1 truth, Env1Scenario scenario);
  StepResult step(int action);

  bool done() const { return state_.point >= truth_.size(); }
  int num_stages() const { return truth_.size() / kPointsPerStage; }
  const Env1State& state() const { return state_; }
  const geomodel::GeoRealization1& truth() const { return truth_; }
  const Env1Config& config() const { return config_; }
  std::vector<bool> legal_actions() const;

  // TVD of every point visited so far.
  const std::vector<double>& trajectory() const { return trajectory_; }
  const std::vector<double>& point_rewards() const { return point_rewards_; }
  EpisodeResult result() const;

  // Exact measurement at the sensor (current point): top and thickness.
  double measured_top() const;
  double measured_thickness() const;

  // TVDs of points i .. i+kPointsPerStage-1 and of the next stage start for a
  // given action, without stepping.
  std::vector<double> plan_stage(int action) const;

 private:
  Env1Config config_;
  geomodel::GeoRealization1 truth_;
  Env1State state_;
  std::vector<double> trajectory_;
  std::vector<double> point_rewards_;  // weighted per-point reward
  std::vector<double> stage_rewards_;
};

// 49 values: 11 DTUB, 11 DTLB, 11 DTHQ (all ÷ local thickness), 11 thickness
// (÷ thickness_norm), inclination, i ÷ N, perm_low, w1, w2.
// Sensor mode: true values at points i-10 .. i, zero before the first point.
// Posterior mode: sensor value at i, posterior means at i+1 .. i+10 relative to
// the straight-ahead extension of the current inclination.
std::vector<double> observe(const Env1& env, ObservationMode mode,
                            const bayes::BoundaryBelief* posterior = nullptr);

struct Env2State {
  int stage = 0;  // also the current point index
  double tvd = 0.0;
  bool in_reservoir = true;
  double v_prod = 0.0;
  int sidetrack_count = 0;
  double value_sum = 0.0;
  double operating_cost = 0.0;
};

class Env2 {
 public:
  static constexpr int kNumActions = 6;
  static constexpr int kSidetrack = 5;
  static constexpr int kObservationSize = 10;

  static double action_increment(int action);

  Env2(geomodel::Env2Prior prior, CostParams costs = {});

  // Starts at point 0 at the prior mid-reservoir depth.
  void reset(geomodel::GeoRealization2 truth, double v_prod);
  StepResult step(int action);

  int num_stages() const { return prior_.n_points - 1; }
  bool done() const { return state_.stage >= num_stages(); }
  const Env2State& state() const { return state_; }
  const geomodel::GeoRealization2& truth() const { return truth_; }
  const geomodel::Env2Prior& prior() const { return prior_; }
  const CostParams& costs() const { return costs_; }
  const bayes::FaultBelief& fault_belief() const { return belief_; }
  std::vector<bool> legal_actions() const;

  const std::vector<double>& trajectory() const { return trajectory_; }
  const std::vector<double>& stage_rewards() const { return stage_rewards_; }
  EpisodeResult result() const;

  // Well depth minus the true upper boundary at the current point.
  double depth_below_top() const;

 private:
  geomodel::Env2Prior prior_;
  CostParams costs_;
  geomodel::GeoRealization2 truth_;
  Env2State state_;
  bayes::FaultBelief belief_;
  std::vector<double> trajectory_;
  std::vector<double> stage_rewards_;
};

// 10 values: DTUB at j-1 and j, DTLB at j-1 and j (÷ thickness, zero before
// the first point), next-fault start and end (÷ section length) and mean
// displacement (÷ thickness) or (1, 1, 0) when none remains, exit indicator,
// j·spacing ÷ section length, v_prod ÷ v_prod_max.
std::vector<double> observe(const Env2& env);

// One row per point: index, x, tvd, top, bottom, hq (blank for env 2),
// inside flag, cumulative reward.
void write_trajectory(std::ostream& os, const Env1& env);
void write_trajectory(std::ostream& os, const Env2& env);

}  // namespace geosteer::env
