#include "geosteer/agents.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "geosteer/errors.hpp"
#include "geosteer/hash.hpp"

namespace geosteer::agents {
namespace {

constexpr double kTieTolerance = 1e-9;

// Environment-2 actions ordered by |move|, then index; sidetrack last.
constexpr int kEnv2Preference[] = {2, 1, 3, 0, 4, env::Env2::kSidetrack};

int env1_preference(int rank) {
  // 5, 4, 6, 3, 7, ...
  const int offset = (rank + 1) / 2;
  return rank % 2 == 1 ? 5 - offset : 5 + offset;
}

std::vector<int> candidate_points(const geomodel::FaultSpec& spec, double spacing) {
  std::vector<int> pts;
  for (double loc : spec.candidate_locations)
    pts.push_back(static_cast<int>(std::lround(loc / spacing)));
  std::sort(pts.begin(), pts.end());
  return pts;
}

// Fault whose candidate window [first, last) contains stage j, or -1.
std::vector<int> open_faults(const geomodel::Env2Prior& prior) {
  std::vector<int> open(prior.n_points, -1);
  for (std::size_t f = 0; f < prior.faults.size(); ++f) {
    const auto pts = candidate_points(prior.faults[f], prior.spacing);
    if (pts.empty()) continue;
    for (int j = pts.front(); j < pts.back() && j < prior.n_points; ++j)
      open[j] = static_cast<int>(f);
  }
  return open;
}

int open_flag(const std::vector<int>& open, const env::Env2& env) {
  const int j = env.state().stage;
  if (j >= static_cast<int>(open.size()) || open[j] < 0) return 0;
  return env.fault_belief().faults().at(open[j]).resolved ? 1 : 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("agent.buffer_capacity: must be > 0");
  data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Experience e) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(e));
  } else {
    data_[next_] = std::move(e);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (data_.empty()) throw UsageError("ReplayBuffer: cannot sample from an empty buffer");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = uniform_index(rng, data_.size());
  return idx;
}

// ---------------------------------------------------------------------------
// Q-table

QTable::QTable(int num_actions, double alpha, double gamma)
    : num_actions_(num_actions), alpha_(alpha), gamma_(gamma) {
  if (num_actions <= 0) throw ConfigError("QTable: num_actions must be > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("QTable: alpha must be in [0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma: must be in [0, 1]");
}

std::vector<double>& QTable::row(Key s) {
  auto it = table_.find(s);
  if (it == table_.end()) it = table_.emplace(s, std::vector<double>(num_actions_, 0.0)).first;
  return it->second;
}

const std::vector<double>* QTable::find(Key s) const {
  const auto it = table_.find(s);
  return it == table_.end() ? nullptr : &it->second;
}

double QTable::value(Key s, int a) const {
  const auto* r = find(s);
  return r ? r->at(a) : 0.0;
}

double QTable::max_value(Key s, const std::vector<bool>* legal) const {
  const auto* r = find(s);
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < num_actions_; ++a) {
    if (legal && !(*legal)[a]) continue;
    best = std::max(best, r ? (*r)[a] : 0.0);
  }
  if (best == -std::numeric_limits<double>::infinity())
    throw UsageError("QTable::max_value: no legal action");
  return best;
}

void qlearning_update(QTable& table, QTable::Key s, int a, double r,
                      QTable::Key s_next, bool done,
                      const std::vector<bool>* legal_next) {
  if (a < 0 || a >= table.num_actions()) throw UsageError("qlearning_update: action out of range");
  const double next = done ? 0.0 : table.max_value(s_next, legal_next);
  auto& q = table.row(s)[a];
  q += table.alpha() * (r + table.gamma() * next - q);
}

int qtable_greedy(const QTable& table, QTable::Key s, const std::vector<bool>& legal) {
  const auto* r = table.find(s);
  int best = -1;
  double best_q = 0.0;
  for (int a = 0; a < table.num_actions(); ++a) {
    if (!legal.at(a)) continue;
    const double q = r ? (*r)[a] : 0.0;
    if (best < 0 || q > best_q) {
      best = a;
      best_q = q;
    }
  }
  if (best < 0) throw UsageError("qtable_greedy: no legal action");
  return best;
}

QTable::Key env2_table_key(const env::Env2& env) {
  const auto& st = env.state();
  const auto& costs = env.costs();
  const double h = env.prior().thickness;
  const int cell = std::clamp(static_cast<int>(std::floor(env.depth_below_top() / (h / 10.0))), -6, 15) + 6;
  const int out = st.in_reservoir ? 0 : 1;
  const int flag = open_flag(open_faults(env.prior()), env);
  const double span = costs.v_prod_max - costs.v_prod_min;
  const double frac = span > 0.0 ? (st.v_prod - costs.v_prod_min) / span : 0.0;
  const int vb = std::clamp(static_cast<int>(std::floor(frac * 4.0)), 0, 3);
  return ((((static_cast<QTable::Key>(st.stage) * 22 + cell) * 2 + out) * 2 + flag) * 4) + vb;
}

// ---------------------------------------------------------------------------
// Greedy

bayes::BoundaryBelief greedy_belief(const env::Env1& env, const GreedyConfig& config) {
  const auto prior = bayes::make_boundary_belief(env::Env1::kHistory,
                                                 config.innovation_sd_top,
                                                 config.innovation_sd_thickness);
  return bayes::condition_on_measurement(prior, env.measured_top(),
                                         env.measured_thickness());
}

std::vector<double> greedy_action_values(const env::Env1& env,
                                         const bayes::BoundaryBelief& belief,
                                         const GreedyConfig& config, Rng& rng) {
  const auto& st = env.state();
  const auto& truth = env.truth();
  const bayes::StageGeometry geom{truth.dx, truth.hq_fraction, truth.perm_high};
  const auto paths = bayes::sample_boundary_paths(belief, config.mc_samples, rng);
  std::vector<double> values(env::Env1::kNumActions);
  for (int a = 0; a < env::Env1::kNumActions; ++a) {
    values[a] = bayes::expected_stage_reward(paths, st.scenario, st.tvd, st.inclination,
                                             env::Env1::action_delta(a), geom);
  }
  return values;
}

int greedy_select(const env::Env1& env, const GreedyConfig& config, Rng& rng) {
  const auto values = greedy_action_values(env, greedy_belief(env, config), config, rng);
  int best = env1_preference(0);
  for (int rank = 1; rank < env::Env1::kNumActions; ++rank) {
    const int a = env1_preference(rank);
    if (values[a] > values[best]) best = a;
  }
  return best;
}

int greedy_select(const env::Env2& env) {
  const auto& st = env.state();
  const auto& costs = env.costs();
  if (!st.in_reservoir && st.v_prod > costs.c_st) return env::Env2::kSidetrack;
  const int next = st.stage + 1;
  int best = -1;
  double best_value = 0.0;
  for (int a : kEnv2Preference) {
    if (a == env::Env2::kSidetrack) continue;
    const double p = env.fault_belief().prob_inside(next, st.tvd + env::Env2::action_increment(a));
    const double value = p * st.v_prod - costs.c_d;
    if (best < 0 || value > best_value + kTieTolerance) {
      best = a;
      best_value = value;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// DSDP

void DsdpConfig::validate() const {
  if (!(bin_width > 0.0)) throw ConfigError("agent.dsdp_bin_width: must be > 0");
  const double ratio = 0.25 / bin_width;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw ConfigError("agent.dsdp_bin_width: must divide the 0.25 m steering increment");
  if (!(depth_span > 0.0)) throw ConfigError("agent.dsdp_depth_span: must be > 0");
  if (mc_samples < 1) throw ConfigError("agent.dsdp_mc_samples: must be >= 1");
}

int DsdpPolicy::bin_of(double depth_below_top) const {
  const int b = static_cast<int>(std::lround((depth_below_top - depth_min) / bin_width));
  return std::clamp(b, 0, n_bins - 1);
}

bool DsdpPolicy::bin_inside(int bin) const {
  const double d = bin_depth(bin);
  return d >= -kTieTolerance && d <= thickness + kTieTolerance;
}

int DsdpPolicy::bin_of(double depth_below_top, bool inside) const {
  const int b = bin_of(depth_below_top);
  if (bin_inside(b) == inside) return b;
  for (int step = 1; step < n_bins; ++step) {
    const int lo = b - step, hi = b + step;
    const double dlo = lo >= 0 ? std::abs(bin_depth(lo) - depth_below_top) : 1e300;
    const double dhi = hi < n_bins ? std::abs(bin_depth(hi) - depth_below_top) : 1e300;
    const int first = dlo <= dhi ? lo : hi, second = dlo <= dhi ? hi : lo;
    if (first >= 0 && first < n_bins && bin_inside(first) == inside) return first;
    if (second >= 0 && second < n_bins && bin_inside(second) == inside) return second;
  }
  return b;
}

int DsdpPolicy::action(int stage, int flag, double depth_below_top, bool inside) const {
  stage = std::clamp(stage, 0, n_stages - 1);
  return actions.at(index(stage, flag, bin_of(depth_below_top, inside)));
}

int DsdpPolicy::action(int stage, int flag, double depth_below_top) const {
  stage = std::clamp(stage, 0, n_stages - 1);
  return actions.at(index(stage, flag, bin_of(depth_below_top)));
}

double DsdpPolicy::value(int stage, int flag, double depth_below_top) const {
  stage = std::clamp(stage, 0, n_stages - 1);
  return values.at(index(stage, flag, bin_of(depth_below_top)));
}

double DsdpPolicy::root_value() const { return value(0, 0, 0.5 * thickness); }

DsdpPolicy dsdp_solve(const geomodel::Env2Prior& prior, const env::CostParams& costs,
                      double v_prod, const DsdpConfig& config) {
  prior.validate();
  costs.validate();
  config.validate();
  const double bw = config.bin_width;
  const double h = prior.thickness;

  // Fault windows may not overlap or touch.
  std::vector<std::vector<int>> cands;
  for (const auto& spec : prior.faults) cands.push_back(candidate_points(spec, prior.spacing));
  for (std::size_t f = 0; f < cands.size(); ++f) {
    for (std::size_t g = 0; g < cands.size(); ++g) {
      if (f == g || cands[f].empty() || cands[g].empty()) continue;
      if (cands[f].front() <= cands[g].front() && cands[g].front() <= cands[f].back())
        throw ConfigError("geomodel.faults: candidate windows must not overlap for dsdp");
    }
  }

  DsdpPolicy pol;
  pol.v_prod = v_prod;
  pol.bin_width = bw;
  pol.thickness = h;
  pol.n_stages = prior.n_points - 1;
  const int half = static_cast<int>(std::lround(config.depth_span / bw));
  pol.n_bins = 2 * half + 1;
  pol.depth_min = 0.5 * h - half * bw;
  pol.open_fault = open_faults(prior);
  pol.open_fault.resize(pol.n_stages);
  pol.actions.assign(static_cast<std::size_t>(pol.n_stages) * 2 * pol.n_bins, 0);
  pol.values.assign(pol.actions.size(), 0.0);

  // Displacement histograms in bin units.
  std::vector<std::map<int, double>> shift_hist(prior.faults.size());
  for (std::size_t f = 0; f < prior.faults.size(); ++f) {
    Rng rng = make_rng(config.seed, stream::kDsdp, f);
    const auto& spec = prior.faults[f];
    for (int s = 0; s < config.mc_samples; ++s) {
      const double d = normal(rng, spec.displacement_mean, spec.displacement_sd);
      shift_hist[f][static_cast<int>(std::lround(d / bw))] += 1.0 / config.mc_samples;
    }
  }

  // Hazard of fault f breaking at point p given it has not broken before.
  auto hazard = [&](std::size_t f, int p) {
    const auto& c = cands[f];
    if (std::find(c.begin(), c.end(), p) == c.end()) return 0.0;
    const auto remaining = std::count_if(c.begin(), c.end(), [&](int q) { return q >= p; });
    return 1.0 / static_cast<double>(remaining);
  };

  auto inside = [&](int bin) { return pol.bin_inside(bin); };
  const int mid_bin = half;

  std::vector<double> next_value(2 * pol.n_bins, 0.0);  // V_{j+1}[flag][bin]
  for (int j = pol.n_stages - 1; j >= 0; --j) {
    const int p = j + 1;
    const int trend_shift =
        static_cast<int>(std::lround((prior.base_trend[p] - prior.base_trend[j]) / bw));
    const int next_open = p < pol.n_stages ? pol.open_fault[p] : -1;
    // Fault that may break at point p, with probability depending on flag.
    int breaking = -1;
    for (std::size_t f = 0; f < cands.size(); ++f)
      if (hazard(f, p) > 0.0) breaking = static_cast<int>(f);

    auto v_next = [&](int flag, int bin) { return next_value[flag * pol.n_bins + bin]; };

    std::vector<double> cur(2 * pol.n_bins, 0.0);
    for (int flag = 0; flag < 2; ++flag) {
      const int open = pol.open_fault[j];
      if (flag == 1 && open < 0) continue;
      // Outcomes for point p: (probability, shift histogram or none, next flag).
      double p_break = 0.0;
      if (breaking >= 0 && !(flag == 1 && open == breaking)) p_break = hazard(breaking, p);
      const int flag_if_break = (breaking >= 0 && next_open == breaking) ? 1 : 0;
      const int flag_no_break =
          (next_open >= 0 && next_open == open && flag == 1) ? 1 : 0;

      for (int bin = 0; bin < pol.n_bins; ++bin) {
        const bool outside_now = !inside(bin);
        double best = -std::numeric_limits<double>::infinity();
        int best_a = -1;
        for (int a : kEnv2Preference) {
          const bool sidetrack = a == env::Env2::kSidetrack;
          if (sidetrack && !outside_now) continue;
          double q = 0.0;
          const double cost = costs.c_d + (sidetrack ? costs.c_st : 0.0);
          auto score = [&](int nb, int nflag) {
            return (inside(nb) ? v_prod : 0.0) - cost + v_next(nflag, nb);
          };
          const int base = sidetrack
                               ? mid_bin
                               : bin + static_cast<int>(std::lround(
                                           env::Env2::action_increment(a) / bw)) -
                                     trend_shift;
          if (sidetrack) {
            q = p_break * score(mid_bin, flag_if_break) +
                (1.0 - p_break) * score(mid_bin, flag_no_break);
          } else {
            if (p_break > 0.0) {
              for (const auto& [shift, prob] : shift_hist[breaking]) {
                const int nb = std::clamp(base - shift, 0, pol.n_bins - 1);
                q += p_break * prob * score(nb, flag_if_break);
              }
            }
            if (p_break < 1.0)
              q += (1.0 - p_break) * score(std::clamp(base, 0, pol.n_bins - 1), flag_no_break);
          }
          if (best_a < 0 || q > best + kTieTolerance) {
            best = q;
            best_a = a;
          }
        }
        cur[flag * pol.n_bins + bin] = best;
        pol.actions[pol.index(j, flag, bin)] = best_a;
        pol.values[pol.index(j, flag, bin)] = best;
      }
    }
    next_value = std::move(cur);
  }
  return pol;
}

int dsdp_flag(const DsdpPolicy& policy, const env::Env2& env) {
  return open_flag(policy.open_fault, env);
}

int dsdp_act(const DsdpPolicy& policy, const env::Env2& env) {
  const int a = policy.action(env.state().stage, dsdp_flag(policy, env), env.depth_below_top(),
                              env.state().in_reservoir);
  if (a == env::Env2::kSidetrack && env.state().in_reservoir) return 2;
  return a;
}

void write_policy(std::ostream& os, const DsdpPolicy& p) {
  os << "dsdp-policy 1\n" << std::setprecision(17);
  os << "v_prod " << p.v_prod << "\nbin_width " << p.bin_width << "\ndepth_min "
     << p.depth_min << "\nn_bins " << p.n_bins << "\nn_stages " << p.n_stages
     << "\nthickness " << p.thickness << "\nopen_fault";
  for (int f : p.open_fault) os << ' ' << f;
  os << '\n';
  for (int flag = 0; flag < 2; ++flag) {
    for (int j = 0; j < p.n_stages; ++j) {
      os << "actions " << flag << ' ' << j;
      for (int b = 0; b < p.n_bins; ++b) os << ' ' << p.actions[p.index(j, flag, b)];
      os << '\n';
    }
  }
  for (int flag = 0; flag < 2; ++flag) {
    for (int j = 0; j < p.n_stages; ++j) {
      os << "values " << flag << ' ' << j;
      for (int b = 0; b < p.n_bins; ++b) os << ' ' << p.values[p.index(j, flag, b)];
      os << '\n';
    }
  }
}

DsdpPolicy read_policy(std::istream& is) {
  auto expect = [&](const std::string& word) {
    std::string w;
    if (!(is >> w) || w != word) throw UsageError("dsdp policy file: expected '" + word + "'");
  };
  expect("dsdp-policy");
  int version = 0;
  is >> version;
  if (version != 1) throw UsageError("dsdp policy file: unsupported version");
  DsdpPolicy p;
  expect("v_prod");
  is >> p.v_prod;
  expect("bin_width");
  is >> p.bin_width;
  expect("depth_min");
  is >> p.depth_min;
  expect("n_bins");
  is >> p.n_bins;
  expect("n_stages");
  is >> p.n_stages;
  expect("thickness");
  is >> p.thickness;
  if (!is || p.n_bins <= 0 || p.n_stages <= 0) throw UsageError("dsdp policy file: bad header");
  expect("open_fault");
  p.open_fault.resize(p.n_stages);
  for (int& f : p.open_fault) is >> f;
  p.actions.resize(static_cast<std::size_t>(p.n_stages) * 2 * p.n_bins);
  p.values.resize(p.actions.size());
  for (int flag = 0; flag < 2; ++flag) {
    for (int j = 0; j < p.n_stages; ++j) {
      expect("actions");
      int fl, st;
      is >> fl >> st;
      for (int b = 0; b < p.n_bins; ++b) is >> p.actions[p.index(j, flag, b)];
    }
  }
  for (int flag = 0; flag < 2; ++flag) {
    for (int j = 0; j < p.n_stages; ++j) {
      expect("values");
      int fl, st;
      is >> fl >> st;
      for (int b = 0; b < p.n_bins; ++b) is >> p.values[p.index(j, flag, b)];
    }
  }
  if (!is) throw UsageError("dsdp policy file: truncated");
  return p;
}

// ---------------------------------------------------------------------------
// DQN

void DqnConfig::validate() const {
  if (buffer_capacity == 0) throw ConfigError("agent.buffer_capacity: must be > 0");
  if (batch_size == 0) throw ConfigError("agent.batch_size: must be > 0");
  if (target_sync_interval <= 0) throw ConfigError("agent.target_sync_interval: must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma: must be in [0, 1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) ||
      !(epsilon_end >= 0.0 && epsilon_end <= 1.0))
    throw ConfigError("agent.epsilon: must be in [0, 1]");
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0))
    throw ConfigError("agent.epsilon_decay_fraction: must be in (0, 1]");
  if (train_every < 1) throw ConfigError("agent.train_every: must be >= 1");
  if (!(reward_scale > 0.0)) throw ConfigError("agent.reward_scale: must be > 0");
  if (!(optimizer.learning_rate > 0.0)) throw ConfigError("agent.learning_rate: must be > 0");
}

double epsilon_at(const DqnConfig& c, int episode, int total_episodes) {
  const double horizon = c.epsilon_decay_fraction * std::max(total_episodes, 1);
  const double t = std::min(1.0, episode / horizon);
  return c.epsilon_start + t * (c.epsilon_end - c.epsilon_start);
}

int dqn_select_action(const neural::QNetwork& net, std::span<const double> observation,
                      double epsilon, const std::vector<bool>& legal, Rng& rng) {
  std::vector<int> allowed;
  for (std::size_t a = 0; a < legal.size(); ++a)
    if (legal[a]) allowed.push_back(static_cast<int>(a));
  if (allowed.empty()) throw UsageError("dqn_select_action: no legal action");
  if (static_cast<int>(legal.size()) != net.output_size())
    throw UsageError("dqn_select_action: mask length differs from the action count");
  if (epsilon > 0.0 && uniform(rng, 0.0, 1.0) < epsilon)
    return allowed[uniform_index(rng, allowed.size())];
  const auto q = net.forward(observation);
  int best = allowed.front();
  for (int a : allowed)
    if (q[a] > q[best]) best = a;
  return best;
}

std::vector<double> dqn_targets(const neural::QNetwork& target_net,
                                const ReplayBuffer& buffer,
                                std::span<const std::size_t> indices, double gamma) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Eigen::MatrixXd next(target_net.input_size(), n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& e = buffer[indices[b]];
    if (e.done) {
      next.col(b).setZero();
    } else {
      next.col(b) = Eigen::Map<const Eigen::VectorXd>(e.s_next.data(),
                                                      static_cast<Eigen::Index>(e.s_next.size()));
    }
  }
  const Eigen::MatrixXd q_next = target_net.forward_batch(next);
  std::vector<double> targets(indices.size());
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& e = buffer[indices[b]];
    double best = 0.0;
    if (!e.done) {
      best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index a = 0; a < q_next.rows(); ++a) {
        if (!e.legal_next.empty() && !e.legal_next[a]) continue;
        best = std::max(best, q_next(a, b));
      }
      if (best == -std::numeric_limits<double>::infinity())
        throw UsageError("dqn_targets: transition with no legal next action");
    }
    targets[b] = e.r + gamma * best;
  }
  return targets;
}

std::optional<double> dqn_train_step(neural::QNetwork& net,
                                     const neural::QNetwork& target_net,
                                     const ReplayBuffer& buffer,
                                     std::size_t batch_size, double gamma,
                                     neural::Optimizer& optimizer, Rng& rng) {
  if (buffer.size() < batch_size || batch_size == 0) return std::nullopt;
  const auto idx = buffer.sample_indices(batch_size, rng);
  const auto targets = dqn_targets(target_net, buffer, idx, gamma);
  Eigen::MatrixXd inputs(net.input_size(), static_cast<Eigen::Index>(batch_size));
  std::vector<int> actions(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const auto& e = buffer[idx[b]];
    inputs.col(static_cast<Eigen::Index>(b)) =
        Eigen::Map<const Eigen::VectorXd>(e.s.data(), static_cast<Eigen::Index>(e.s.size()));
    actions[b] = e.a;
  }
  auto lg = neural::loss_and_gradients(net, inputs, actions, targets);
  optimizer.apply(net, lg.gradients);
  return lg.loss;
}

bool target_sync(const neural::QNetwork& net, neural::QNetwork& target_net,
                 std::int64_t step, std::int64_t interval) {
  if (interval <= 0) throw ConfigError("agent.target_sync_interval: must be > 0");
  if (step % interval != 0) return false;
  target_net = neural::clone_weights(net);
  return true;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  nlohmann::json meta = {
      {"env", ckpt.meta.env_id},
      {"observation_mode", env::to_string(ckpt.meta.observation_mode)},
      {"observation_size", ckpt.meta.observation_size},
      {"action_count", ckpt.meta.action_count},
      {"seed", ckpt.meta.seed},
      {"episodes", ckpt.meta.episodes},
      {"normalization", ckpt.meta.normalization.is_null() ? nlohmann::json::object()
                                                          : ckpt.meta.normalization},
      {"layers", ckpt.net.dims()}};
  os << "geosteer-checkpoint 1\n" << meta.dump() << '\n';
  neural::save(os, ckpt.net);
}

Checkpoint load_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "geosteer-checkpoint 1")
    throw UsageError("not a geosteer checkpoint");
  if (!std::getline(is, line)) throw UsageError("checkpoint metadata missing");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("checkpoint metadata unreadable: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.meta.env_id = meta.at("env").get<std::string>();
    ckpt.meta.observation_mode =
        env::parse_observation_mode(meta.at("observation_mode").get<std::string>());
    ckpt.meta.observation_size = meta.at("observation_size").get<int>();
    ckpt.meta.action_count = meta.at("action_count").get<int>();
    ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.meta.episodes = meta.at("episodes").get<int>();
    ckpt.meta.normalization = meta.value("normalization", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("checkpoint metadata incomplete: ") + e.what());
  }
  ckpt.net = neural::load(is, meta.at("layers").get<std::vector<int>>());
  if (ckpt.net.input_size() != ckpt.meta.observation_size ||
      ckpt.net.output_size() != ckpt.meta.action_count)
    throw UsageError("checkpoint network does not match its metadata");
  return ckpt;
}

// ---------------------------------------------------------------------------
// Agents

int Agent::act(const env::Env1&, Rng&) {
  throw UsageError("agent '" + name() + "' does not support environment 1");
}

int Agent::act(const env::Env2&, Rng&) {
  throw UsageError("agent '" + name() + "' does not support environment 2");
}

void Agent::prepare_env2(const geomodel::Env2Prior&, const env::CostParams&, double) {}

int GreedyAgent::act(const env::Env1& env, Rng& rng) { return greedy_select(env, config_, rng); }

int GreedyAgent::act(const env::Env2& env, Rng&) { return greedy_select(env); }

namespace {

std::mutex& policy_cache_mutex() {
  static std::mutex m;
  return m;
}

std::string policy_cache_name(const geomodel::Env2Prior& prior, const env::CostParams& costs,
                              double v_prod, const DsdpConfig& config) {
  std::ostringstream key;
  key << std::setprecision(17) << v_prod << '|' << costs.c_d << '|' << costs.c_st << '|'
      << config.bin_width << '|' << config.depth_span << '|' << config.mc_samples << '|'
      << config.seed << '|' << prior.n_points << '|' << prior.spacing << '|' << prior.thickness;
  for (double t : prior.base_trend) key << '|' << t;
  for (const auto& f : prior.faults) {
    key << "|f" << f.displacement_mean << ',' << f.displacement_sd;
    for (double c : f.candidate_locations) key << ',' << c;
  }
  Fnv1a h;
  h.add(key.str());
  std::ostringstream name;
  name << "dsdp_" << std::hex << std::setw(16) << std::setfill('0') << h.value() << ".txt";
  return name.str();
}

}  // namespace

void DsdpAgent::prepare_env2(const geomodel::Env2Prior& prior, const env::CostParams& costs,
                             double v_prod) {
  if (cache_dir_.empty()) {
    policy_ = std::make_shared<DsdpPolicy>(dsdp_solve(prior, costs, v_prod, config_));
    return;
  }
  namespace fs = std::filesystem;
  const fs::path path = fs::path(cache_dir_) / policy_cache_name(prior, costs, v_prod, config_);
  std::lock_guard lock(policy_cache_mutex());
  if (fs::exists(path)) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open policy cache");
    policy_ = std::make_shared<DsdpPolicy>(read_policy(in));
    return;
  }
  auto pol = std::make_shared<DsdpPolicy>(dsdp_solve(prior, costs, v_prod, config_));
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot write policy cache");
  write_policy(out, *pol);
  policy_ = std::move(pol);
}

int DsdpAgent::act(const env::Env2& env, Rng&) {
  if (!policy_) throw UsageError("dsdp agent used before prepare_env2");
  if (std::abs(policy_->v_prod - env.state().v_prod) > 1e-12)
    throw UsageError("dsdp policy was solved for a different production value");
  return dsdp_act(*policy_, env);
}

DqnAgent::DqnAgent(Checkpoint checkpoint, GreedyConfig belief_config)
    : ckpt_(std::move(checkpoint)), belief_config_(belief_config) {}

std::string DqnAgent::name() const {
  return "dqn-" + env::to_string(ckpt_.meta.observation_mode);
}

std::vector<double> env1_observation(const env::Env1& env, env::ObservationMode mode,
                                     const GreedyConfig& belief_config) {
  if (mode == env::ObservationMode::kSensor) return env::observe(env, mode);
  const auto belief = greedy_belief(env, belief_config);
  return env::observe(env, mode, &belief);
}

int DqnAgent::act(const env::Env1& env, Rng& rng) {
  if (ckpt_.meta.env_id != "ex1") throw UsageError("checkpoint was trained on " + ckpt_.meta.env_id);
  const auto obs = env1_observation(env, ckpt_.meta.observation_mode, belief_config_);
  return dqn_select_action(ckpt_.net, obs, 0.0, env.legal_actions(), rng);
}

int DqnAgent::act(const env::Env2& env, Rng& rng) {
  if (ckpt_.meta.env_id != "ex2") throw UsageError("checkpoint was trained on " + ckpt_.meta.env_id);
  return dqn_select_action(ckpt_.net, env::observe(env), 0.0, env.legal_actions(), rng);
}

int QTableAgent::act(const env::Env2& env, Rng&) {
  return qtable_greedy(table_, env2_table_key(env), env.legal_actions());
}

}  // namespace geosteer::agents
