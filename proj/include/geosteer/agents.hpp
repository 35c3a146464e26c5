#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "geosteer/env.hpp"
#include "geosteer/neural.hpp"
#include "geosteer/random.hpp"

namespace geosteer::agents {

// ---------------------------------------------------------------------------
// Experience replay

struct Experience {
  std::vector<double> s;
  int a = 0;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
  std::vector<bool> legal_next;
};

// Fixed-capacity ring buffer; sampling is uniform with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Experience e);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& operator[](std::size_t i) const { return data_.at(i); }
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> data_;
};

// ---------------------------------------------------------------------------
// Tabular Q-learning

class QTable {
 public:
  using Key = std::int64_t;

  QTable(int num_actions, double alpha, double gamma);

  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  void set_alpha(double alpha) { alpha_ = alpha; }
  int num_actions() const { return num_actions_; }

  // Row of Q-values for a state, created as zeros on first access.
  std::vector<double>& row(Key s);
  const std::vector<double>* find(Key s) const;
  double value(Key s, int a) const;
  // Max over legal actions (all when `legal` is null); 0 for unseen states.
  double max_value(Key s, const std::vector<bool>* legal = nullptr) const;
  std::size_t size() const { return table_.size(); }

 private:
  int num_actions_;
  double alpha_;
  double gamma_;
  std::unordered_map<Key, std::vector<double>> table_;
};

// Q(s,a) ← Q(s,a) + α [r + γ max_a' Q(s',a') − Q(s,a)]; the max term is 0 when
// `done`.
void qlearning_update(QTable& table, QTable::Key s, int a, double r,
                      QTable::Key s_next, bool done,
                      const std::vector<bool>* legal_next = nullptr);

// Argmax over legal actions, ties to the lowest index.
int qtable_greedy(const QTable& table, QTable::Key s, const std::vector<bool>& legal);

// Coarse environment-2 state key: stage, depth below top in 0.5 m cells,
// exit flag, whether the open fault window has already produced its fault and
// a production-value bucket.
QTable::Key env2_table_key(const env::Env2& env);

// ---------------------------------------------------------------------------
// Greedy

struct GreedyConfig {
  int mc_samples = 100;
  double innovation_sd_top = 0.4;
  double innovation_sd_thickness = 0.2;
};

// Environment 1: argmax over the 11 inclination changes of the expected stage
// reward under the random-walk belief anchored at the sensor. Actions are
// compared on common boundary samples; ties go to the smaller |change|.
int greedy_select(const env::Env1& env, const GreedyConfig& config, Rng& rng);
// Expected stage reward of every action, on common boundary samples.
std::vector<double> greedy_action_values(const env::Env1& env,
                                         const bayes::BoundaryBelief& belief,
                                         const GreedyConfig& config, Rng& rng);
bayes::BoundaryBelief greedy_belief(const env::Env1& env, const GreedyConfig& config);

// Environment 2: the sidetrack node is decided first on its immediate
// reward (sidetrack iff the well is outside and v_prod > c_ST); otherwise the
// steering move maximizing P(inside next point)·v_prod − c_d, ties to the
// smaller |move|.
int greedy_select(const env::Env2& env);

// ---------------------------------------------------------------------------
// Discretized stochastic dynamic programming (environment 2)

struct DsdpConfig {
  double bin_width = 0.25;   // m
  double depth_span = 8.0;   // m either side of the mid-reservoir depth
  int mc_samples = 500;      // displacement samples per fault
  std::uint64_t seed = 2024;

  void validate() const;
};

// Backward-induction policy over (stage, open-fault flag, depth below top).
// The flag records whether the fault whose candidate window contains the
// current point has already broken.
struct DsdpPolicy {
  double v_prod = 0.0;
  double bin_width = 0.25;
  double depth_min = 0.0;  // depth below top of bin 0
  int n_bins = 0;
  int n_stages = 0;
  double thickness = 0.0;
  std::vector<int> open_fault;  // per stage, -1 when no window is open
  std::vector<int> actions;     // [stage][flag][bin]
  std::vector<double> values;   // [stage][flag][bin]

  int index(int stage, int flag, int bin) const {
    return (stage * 2 + flag) * n_bins + bin;
  }
  int bin_of(double depth_below_top) const;  // nearest bin, clamped
  // Nearest bin whose inside/outside status matches `inside`.
  int bin_of(double depth_below_top, bool inside) const;
  double bin_depth(int bin) const { return depth_min + bin * bin_width; }
  bool bin_inside(int bin) const;
  int action(int stage, int flag, double depth_below_top) const;
  int action(int stage, int flag, double depth_below_top, bool inside) const;
  double value(int stage, int flag, double depth_below_top) const;
  double root_value() const;  // stage 0, mid-reservoir
};

DsdpPolicy dsdp_solve(const geomodel::Env2Prior& prior, const env::CostParams& costs,
                      double v_prod, const DsdpConfig& config);

// Open-fault flag of the environment's current stage.
int dsdp_flag(const DsdpPolicy& policy, const env::Env2& env);
int dsdp_act(const DsdpPolicy& policy, const env::Env2& env);

// Stage × bin text table, one block per flag.
void write_policy(std::ostream& os, const DsdpPolicy& policy);
DsdpPolicy read_policy(std::istream& is);

// ---------------------------------------------------------------------------
// Deep Q-network

struct DqnConfig {
  std::size_t buffer_capacity = 50000;
  std::size_t batch_size = 64;
  std::int64_t target_sync_interval = 500;  // train steps
  double gamma = 1.0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.8;  // of the episodes
  std::size_t warmup = 1000;            // transitions before training
  int train_every = 1;                  // environment steps per train step
  double reward_scale = 1.0;
  // Environment 2: divide each episode's rewards by its production value.
  bool normalize_by_v_prod = false;
  neural::OptimizerConfig optimizer;

  void validate() const;
};

double epsilon_at(const DqnConfig& config, int episode, int total_episodes);

// ε-greedy over legal actions; illegal Q-values count as −∞, ties go to the
// lowest index. Throws UsageError when no action is legal.
int dqn_select_action(const neural::QNetwork& net, std::span<const double> observation,
                      double epsilon, const std::vector<bool>& legal, Rng& rng);

// Targets r for terminal transitions, else r + γ max over legal next actions
// of the target network.
std::vector<double> dqn_targets(const neural::QNetwork& target_net,
                                const ReplayBuffer& buffer,
                                std::span<const std::size_t> indices, double gamma);

// One minibatch update of the online network. Returns nullopt (no update)
// while the buffer holds fewer than `batch_size` transitions.
std::optional<double> dqn_train_step(neural::QNetwork& net,
                                     const neural::QNetwork& target_net,
                                     const ReplayBuffer& buffer,
                                     std::size_t batch_size, double gamma,
                                     neural::Optimizer& optimizer, Rng& rng);

// Copies the online weights into the target iff step % interval == 0.
// Returns whether a copy happened.
bool target_sync(const neural::QNetwork& net, neural::QNetwork& target_net,
                 std::int64_t step, std::int64_t interval);

// ---------------------------------------------------------------------------
// Checkpoints

struct CheckpointMeta {
  std::string env_id;  // "ex1" or "ex2"
  env::ObservationMode observation_mode = env::ObservationMode::kSensor;
  int observation_size = 0;
  int action_count = 0;
  std::uint64_t seed = 0;
  int episodes = 0;
  nlohmann::json normalization;
};

struct Checkpoint {
  CheckpointMeta meta;
  neural::QNetwork net;
};

// Text header ("geosteer-checkpoint 1", JSON metadata line) then the weights.
void save_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& is);

// ---------------------------------------------------------------------------
// Common agent interface

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual int act(const env::Env1& env, Rng& rng);
  virtual int act(const env::Env2& env, Rng& rng);
  // Environment 2 agents that depend on v_prod are re-prepared per scenario.
  virtual void prepare_env2(const geomodel::Env2Prior& prior,
                            const env::CostParams& costs, double v_prod);
};

class GreedyAgent : public Agent {
 public:
  explicit GreedyAgent(GreedyConfig config = {}) : config_(config) {}
  std::string name() const override { return "greedy"; }
  int act(const env::Env1& env, Rng& rng) override;
  int act(const env::Env2& env, Rng& rng) override;

 private:
  GreedyConfig config_;
};

// Solves (or fetches from `cache_dir`) a policy per production value.
class DsdpAgent : public Agent {
 public:
  explicit DsdpAgent(DsdpConfig config = {}, std::string cache_dir = "")
      : config_(config), cache_dir_(std::move(cache_dir)) {}
  std::string name() const override { return "dsdp"; }
  int act(const env::Env2& env, Rng& rng) override;
  void prepare_env2(const geomodel::Env2Prior& prior, const env::CostParams& costs,
                    double v_prod) override;
  const DsdpPolicy& policy() const { return *policy_; }

 private:
  DsdpConfig config_;
  std::string cache_dir_;
  std::shared_ptr<const DsdpPolicy> policy_;
};

class DqnAgent : public Agent {
 public:
  // `belief_template` is only used for environment 1 in posterior mode.
  DqnAgent(Checkpoint checkpoint, GreedyConfig belief_config = {});
  std::string name() const override;
  int act(const env::Env1& env, Rng& rng) override;
  int act(const env::Env2& env, Rng& rng) override;
  const Checkpoint& checkpoint() const { return ckpt_; }

 private:
  Checkpoint ckpt_;
  GreedyConfig belief_config_;
};

class QTableAgent : public Agent {
 public:
  explicit QTableAgent(QTable table) : table_(std::move(table)) {}
  std::string name() const override { return "qtable"; }
  int act(const env::Env2& env, Rng& rng) override;
  const QTable& table() const { return table_; }

 private:
  QTable table_;
};

// Observation for a DQN agent on environment 1.
std::vector<double> env1_observation(const env::Env1& env, env::ObservationMode mode,
                                     const GreedyConfig& belief_config);

}  // namespace geosteer::agents
