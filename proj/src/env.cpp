#include "geosteer/env.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "geosteer/errors.hpp"

namespace geosteer::env {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_scenario(const Env1Scenario& s) {
  if (s.w1 < 0.0 || s.w2 < 0.0 || std::abs(s.w1 + s.w2 - 1.0) > 1e-9)
    throw ConfigError("env.weights: w1 and w2 must be non-negative and sum to 1");
  if (!(s.perm_low > 0.0)) throw ConfigError("env.perm_low: must be > 0");
}

}  // namespace

std::string to_string(ObservationMode mode) {
  return mode == ObservationMode::kSensor ? "sensor" : "posterior";
}

ObservationMode parse_observation_mode(const std::string& text) {
  if (text == "sensor") return ObservationMode::kSensor;
  if (text == "posterior") return ObservationMode::kPosterior;
  throw ConfigError("observation mode must be 'sensor' or 'posterior', got '" +
                    text + "'");
}

// ---------------------------------------------------------------------------
// Environment 1

Env1::Env1(Env1Config config) : config_(config) {}

void Env1::reset(geomodel::GeoRealization1 truth, Env1Scenario scenario) {
  check_scenario(scenario);
  if (truth.size() < kPointsPerStage || truth.size() % kPointsPerStage != 0)
    throw ConfigError("geomodel.n_points: must be a positive multiple of " +
                      std::to_string(kPointsPerStage));
  truth_ = std::move(truth);
  truth_.perm_low = scenario.perm_low;
  state_ = Env1State{};
  state_.scenario = scenario;
  state_.tvd = truth_.top[0] + 0.5 * truth_.thickness[0];
  trajectory_.clear();
  point_rewards_.clear();
  stage_rewards_.clear();
}

std::vector<double> Env1::plan_stage(int action) const {
  const auto steps = min_curvature_segment(state_.inclination, action_delta(action),
                                           kPointsPerStage, truth_.dx);
  std::vector<double> z(kPointsPerStage + 1);
  z[0] = state_.tvd;
  for (int k = 0; k < kPointsPerStage; ++k) z[k + 1] = z[k] + steps[k];
  return z;
}

StepResult Env1::step(int action) {
  if (done()) throw UsageError("Env1::step called after the episode ended");
  if (action < 0 || action >= kNumActions)
    throw IllegalActionError("env1 action index " + std::to_string(action) +
                             " outside 0..10");
  const auto z = plan_stage(action);
  const auto& sc = state_.scenario;
  std::vector<double> r1(kPointsPerStage), r2(kPointsPerStage);
  for (int k = 0; k < kPointsPerStage; ++k) {
    const int p = state_.point + k;
    const auto s = score_point(z[k], truth_.top[p], truth_.thickness[p],
                               truth_.hq_fraction, truth_.perm_high, sc.perm_low);
    r1[k] = s.r1;
    r2[k] = s.r2;
    trajectory_.push_back(z[k]);
    point_rewards_.push_back(sc.w1 * s.r1 + sc.w2 * s.r2);
  }
  const double reward = stage_reward_env1(r1, r2, sc.w1, sc.w2);
  stage_rewards_.push_back(reward);
  state_.tvd = z[kPointsPerStage];
  state_.inclination += action_delta(action);
  state_.point += kPointsPerStage;
  ++state_.stage;
  return {reward, done()};
}

std::vector<bool> Env1::legal_actions() const {
  return std::vector<bool>(kNumActions, true);
}

double Env1::measured_top() const { return truth_.top.at(state_.point); }
double Env1::measured_thickness() const { return truth_.thickness.at(state_.point); }

EpisodeResult Env1::result() const {
  const auto n = trajectory_.size();
  std::vector<double> bottom(n), hq(n);
  for (std::size_t i = 0; i < n; ++i) {
    bottom[i] = truth_.bottom(static_cast<int>(i));
    hq[i] = truth_.hq_boundary(static_cast<int>(i));
  }
  EpisodeResult r = episode_metrics(
      trajectory_, std::span<const double>(truth_.top.data(), n), bottom,
      std::span<const double>(hq));
  if (!r.high_quality) r.high_quality = 0.0;
  r.stage_rewards = stage_rewards_;
  for (double s : stage_rewards_) r.total_reward += s;
  return r;
}

std::vector<double> observe(const Env1& env, ObservationMode mode,
                            const bayes::BoundaryBelief* posterior) {
  const auto& truth = env.truth();
  const auto& st = env.state();
  const auto& cfg = env.config();
  constexpr int n = Env1::kHistory;
  std::vector<double> obs(Env1::kObservationSize, 0.0);
  auto put = [&](int slot, double top, double thickness, double tvd) {
    obs[slot] = (tvd - top) / thickness;
    obs[(n + 1) + slot] = (top + thickness - tvd) / thickness;
    obs[2 * (n + 1) + slot] = (top + truth.hq_fraction * thickness - tvd) / thickness;
    obs[3 * (n + 1) + slot] = thickness / cfg.thickness_norm;
  };

  if (env.done()) throw UsageError("observe: episode already finished");
  const int i = st.point;
  if (mode == ObservationMode::kSensor) {
    const auto& traj = env.trajectory();
    for (int slot = 0; slot <= n; ++slot) {
      const int p = i - n + slot;
      if (p < 0) continue;
      const double tvd = p == i ? st.tvd : traj[p];
      put(slot, truth.top[p], truth.thickness[p], tvd);
    }
  } else {
    if (posterior == nullptr)
      throw UsageError("observe: posterior mode requires a boundary posterior");
    if (posterior->horizon() < n)
      throw UsageError("observe: posterior horizon shorter than the look-ahead");
    put(0, truth.top[i], truth.thickness[i], st.tvd);
    const double slope = std::tan(st.inclination * kDegToRad);
    for (int k = 1; k <= n; ++k) {
      const double tvd = st.tvd + k * truth.dx * slope;
      put(k, posterior->mean_top[k], posterior->mean_thickness[k], tvd);
    }
  }
  const int tail = 4 * (n + 1);
  obs[tail + 0] = st.inclination / cfg.inclination_norm;
  obs[tail + 1] = static_cast<double>(i) / truth.size();
  obs[tail + 2] = st.scenario.perm_low / cfg.perm_norm;
  obs[tail + 3] = st.scenario.w1;
  obs[tail + 4] = st.scenario.w2;
  return obs;
}

// ---------------------------------------------------------------------------
// Environment 2

double Env2::action_increment(int action) {
  static constexpr double kIncrements[] = {-0.5, -0.25, 0.0, 0.25, 0.5};
  if (action < 0 || action > 4)
    throw IllegalActionError("env2 steering index " + std::to_string(action) +
                             " outside 0..4");
  return kIncrements[action];
}

Env2::Env2(geomodel::Env2Prior prior, CostParams costs)
    : prior_(std::move(prior)), costs_(costs), belief_(prior_) {
  prior_.validate();
  costs_.validate();
}

void Env2::reset(geomodel::GeoRealization2 truth, double v_prod) {
  if (truth.size() != prior_.n_points)
    throw UsageError("Env2::reset: realization length does not match the prior");
  if (!(v_prod >= 0.0)) throw ConfigError("env.v_prod: must be >= 0");
  truth_ = std::move(truth);
  belief_ = bayes::FaultBelief(prior_);
  state_ = Env2State{};
  state_.v_prod = v_prod;
  state_.tvd = prior_.base_trend[0] + 0.5 * prior_.thickness;
  state_.in_reservoir =
      state_.tvd >= truth_.upper[0] && state_.tvd <= truth_.lower(0);
  belief_.condition(0, truth_.upper[0]);
  trajectory_.assign(1, state_.tvd);
  stage_rewards_.clear();
}

std::vector<bool> Env2::legal_actions() const {
  std::vector<bool> mask(kNumActions, true);
  mask[kSidetrack] = !state_.in_reservoir;
  return mask;
}

StepResult Env2::step(int action) {
  if (done()) throw UsageError("Env2::step called after the episode ended");
  if (action < 0 || action >= kNumActions)
    throw IllegalActionError("env2 action index " + std::to_string(action) +
                             " outside 0..5");
  const int next = state_.stage + 1;
  const bool sidetrack = action == kSidetrack;
  if (sidetrack) {
    if (state_.in_reservoir)
      throw IllegalActionError("sidetrack is not available inside the reservoir");
    state_.tvd = 0.5 * (truth_.upper[next] + truth_.lower(next));
    ++state_.sidetrack_count;
  } else {
    state_.tvd += action_increment(action);
  }
  state_.in_reservoir =
      state_.tvd >= truth_.upper[next] && state_.tvd <= truth_.lower(next);
  const double reward =
      stage_reward_env2(state_.in_reservoir, sidetrack, costs_, state_.v_prod);
  state_.value_sum += state_.in_reservoir ? state_.v_prod : 0.0;
  state_.operating_cost += costs_.c_d + (sidetrack ? costs_.c_st : 0.0);
  state_.stage = next;
  belief_.condition(next, truth_.upper[next]);
  trajectory_.push_back(state_.tvd);
  stage_rewards_.push_back(reward);
  return {reward, done()};
}

double Env2::depth_below_top() const {
  return state_.tvd - truth_.upper[state_.stage];
}

EpisodeResult Env2::result() const {
  // Points reached by decisions: 1 .. stage.
  std::span<const double> decided(trajectory_.data() + 1, trajectory_.size() - 1);
  EpisodeResult r = episode_metrics(decided, truth_, 1);
  r.trajectory = trajectory_;
  r.operating_cost = state_.operating_cost;
  r.total_reward = state_.value_sum - state_.operating_cost;
  r.sidetracks = state_.sidetrack_count;
  r.stage_rewards = stage_rewards_;
  return r;
}

std::vector<double> observe(const Env2& env) {
  const auto& st = env.state();
  const auto& truth = env.truth();
  const auto& prior = env.prior();
  const double h = truth.thickness;
  const double length = prior.total_length();
  const int j = st.stage;
  std::vector<double> obs(Env2::kObservationSize, 0.0);
  obs[1] = (st.tvd - truth.upper[j]) / h;
  obs[3] = (truth.lower(j) - st.tvd) / h;
  if (j > 0) {
    const double prev = env.trajectory()[j - 1];
    obs[0] = (prev - truth.upper[j - 1]) / h;
    obs[2] = (truth.lower(j - 1) - prev) / h;
  }
  const auto next = env.fault_belief().next_fault(j);
  if (next.exists) {
    obs[4] = next.start_m / length;
    obs[5] = next.end_m / length;
    obs[6] = next.displacement_mean / h;
  } else {
    obs[4] = 1.0;
    obs[5] = 1.0;
    obs[6] = 0.0;
  }
  obs[7] = st.in_reservoir ? 0.0 : 1.0;
  obs[8] = j * prior.spacing / length;
  obs[9] = st.v_prod / env.costs().v_prod_max;
  return obs;
}

void write_trajectory(std::ostream& os, const Env1& env) {
  const auto& t = env.truth();
  const auto& z = env.trajectory();
  const auto& pr = env.point_rewards();
  os << "index,x_m,tvd_m,top_m,bottom_m,hq_m,inside,cumulative_reward\n";
  os << std::fixed << std::setprecision(6);
  double cum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const int p = static_cast<int>(i);
    cum += pr[i];
    const bool inside = z[i] >= t.top[p] && z[i] <= t.bottom(p);
    os << p << ',' << p * t.dx << ',' << z[i] << ',' << t.top[p] << ','
       << t.bottom(p) << ',' << t.hq_boundary(p) << ',' << (inside ? 1 : 0) << ','
       << cum << '\n';
  }
}

void write_trajectory(std::ostream& os, const Env2& env) {
  const auto& t = env.truth();
  const auto& z = env.trajectory();
  const auto& sr = env.stage_rewards();
  os << "index,x_m,tvd_m,top_m,bottom_m,hq_m,inside,cumulative_reward\n";
  os << std::fixed << std::setprecision(6);
  double cum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const int p = static_cast<int>(j);
    if (j > 0) cum += sr[j - 1];
    const bool inside = z[j] >= t.upper[p] && z[j] <= t.lower(p);
    os << p << ',' << p * t.spacing << ',' << z[j] << ',' << t.upper[p] << ','
       << t.lower(p) << ",," << (inside ? 1 : 0) << ',' << cum << '\n';
  }
}

}  // namespace geosteer::env
