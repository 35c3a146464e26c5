#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geosteer/agents.hpp"
#include "geosteer/env.hpp"
#include "geosteer/geomodel.hpp"

// Experiment orchestration: configuration, multi-seed training, paired
// evaluation, robust summaries and file exports.
namespace geosteer::harness {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kMovingAverageWindow = 100;

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string env = "ex2";          // ex1 | ex2
  std::string agent = "dqn-sensor"; // greedy | dsdp | dqn-sensor | dqn-posterior | qtable
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::optional<int> episodes;      // defaults: 3000 (ex1), 8000 (ex2)
  int eval_realizations = 1000;
  std::uint64_t eval_seed = 1000003;
  std::string output_dir = "out";
  std::string cache_dir;            // DSDP policy cache; empty = <output>/cache
  int threads = 1;

  geomodel::ForwardFnParams1 geo1;
  int env2_n_points = 30;
  double env2_spacing = 30.0;
  double env2_top_depth = 1000.0;
  double env2_dip = 0.25;           // m per point
  double env2_thickness = 5.0;
  std::vector<geomodel::FaultSpec> faults = geomodel::default_env2_prior().faults;

  std::vector<env::Env1Scenario> scenarios = {{0.67, 0.33, 100.0}, {0.41, 0.59, 20.0}};
  std::vector<double> v_prod_eval = {0.5, 2.0, 4.0};
  env::CostParams costs;
  env::Env1Config env1;

  int greedy_mc_samples = 100;
  std::optional<double> belief_sd_top;        // default: geomodel boundary_step_sd
  std::optional<double> belief_sd_thickness;  // default: geomodel thickness_sd
  agents::DsdpConfig dsdp;
  agents::DqnConfig dqn;
  double ex1_learning_rate = 3e-4;
  double ex2_learning_rate = 1e-3;
  double ex1_reward_scale = 0.1;
  double ex2_reward_scale = 1.0;
  bool ex2_normalize_by_v_prod = true;
  double qtable_alpha = 0.1;

  int effective_episodes() const;
  bool is_env1() const { return env == "ex1"; }
  geomodel::Env2Prior env2_prior() const;
  agents::GreedyConfig greedy_config() const;
  agents::DqnConfig dqn_config() const;  // with the environment's reward handling
  std::string effective_cache_dir() const;

  // Throws ConfigError naming the first offending key.
  void validate() const;
};

// Flat "key = value" text with [harness], [geomodel], [env] and [agent]
// sections; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
// Canonical text form, readable by parse_config.
void write_config(std::ostream& os, const ExperimentConfig& config);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// ---------------------------------------------------------------------------
// Training

struct EpisodeRecord {
  int index = 0;
  double reward = 0.0;
  double contact = 0.0;
  std::optional<double> high_quality;
  std::optional<double> operating_cost;
  int sidetracks = 0;
  std::uint64_t realization_hash = 0;
};

struct TrainingCurve {
  std::vector<EpisodeRecord> episodes;

  // Trailing mean over `window` episodes, defined from episode window-1 on.
  std::vector<double> moving_average_reward(int window = kMovingAverageWindow) const;
  std::vector<double> moving_average_contact(int window = kMovingAverageWindow) const;
};

struct TrainedAgent {
  std::uint64_t seed = 0;
  agents::Checkpoint checkpoint;          // DQN agents
  std::optional<agents::QTable> table;    // tabular agent
  TrainingCurve curve;
  double seconds = 0.0;
};

bool is_learning_agent(const std::string& agent);
env::ObservationMode agent_observation_mode(const std::string& agent);

TrainedAgent train_agent(const ExperimentConfig& config, std::uint64_t seed);
// Results in seed order; seeds run on up to config.threads workers.
std::vector<TrainedAgent> train_multi_seed(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Evaluation

struct ScenarioReport {
  std::string label;
  std::optional<env::Env1Scenario> env1_scenario;
  std::optional<double> v_prod;
  double mean_reward = 0.0;
  double mean_contact = 0.0;
  std::optional<double> mean_high_quality;
  std::optional<double> mean_operating_cost;
  double mean_sidetracks = 0.0;
  std::vector<EpisodeRecord> episodes;
  double seconds = 0.0;  // wall clock, not exported with the report
};

struct EvalReport {
  std::string agent;
  std::string env;
  std::optional<std::uint64_t> seed;  // training seed for learned agents
  std::vector<ScenarioReport> scenarios;
};

std::string scenario_label(const env::Env1Scenario& s);
std::string scenario_label(double v_prod);

// Realization k of an evaluation run, identical for every agent.
geomodel::GeoRealization1 eval_realization_env1(const ExperimentConfig& config,
                                                std::uint64_t eval_seed, int k);
geomodel::GeoRealization2 eval_realization_env2(const ExperimentConfig& config,
                                                std::uint64_t eval_seed, int k);

EvalReport evaluate(agents::Agent& agent, const ExperimentConfig& config,
                    std::uint64_t eval_seed);

// Builds the configured non-learning agent (greedy, dsdp) or wraps a trained one.
std::unique_ptr<agents::Agent> make_agent(const ExperimentConfig& config,
                                          const TrainedAgent* trained = nullptr);

// Runs one episode of `agent` on a realization; returns the environment so
// callers can inspect or plot the trajectory.
env::Env1 rollout_env1(agents::Agent& agent, const ExperimentConfig& config,
                       geomodel::GeoRealization1 truth, const env::Env1Scenario& scenario,
                       Rng& rng);
env::Env2 rollout_env2(agents::Agent& agent, const ExperimentConfig& config,
                       geomodel::GeoRealization2 truth, double v_prod, Rng& rng);

// ---------------------------------------------------------------------------
// Summaries

// Median of per-seed means; even counts average the two central values.
double rl_robust(std::vector<double> per_seed_means);

struct ComparisonRow {
  std::string method;
  std::string scenario;
  double reward = 0.0;
  double contact = 0.0;
  std::optional<double> high_quality;
  std::optional<double> operating_cost;
  double sidetracks = 0.0;
  std::vector<double> per_seed_rewards;  // empty for single-policy agents
};

struct ComparisonTable {
  std::string env;
  std::vector<ComparisonRow> rows;
};

// Single-policy agents: plain means per scenario.
std::vector<ComparisonRow> summarize(const EvalReport& report);
// Learned agents: per scenario, the median over seeds of each mean metric.
std::vector<ComparisonRow> summarize_seeds(const std::vector<EvalReport>& reports);

const ComparisonRow* find_row(const ComparisonTable& table, const std::string& method,
                              const std::string& scenario);

// ---------------------------------------------------------------------------
// Exports (deterministic: fixed column order, 6 decimals)

void write_table_csv(std::ostream& os, const ComparisonTable& table);
nlohmann::json table_json(const ComparisonTable& table);
void write_table_json(std::ostream& os, const ComparisonTable& table);
ComparisonTable read_table_csv(std::istream& is);

void write_episodes_csv(std::ostream& os, const EvalReport& report);
void write_curves_csv(std::ostream& os, const std::vector<TrainedAgent>& trained);

void write_trajectory_svg(std::ostream& os, const env::Env1& env, const std::string& title);
void write_trajectory_svg(std::ostream& os, const env::Env2& env, const std::string& title);
void write_curves_svg(std::ostream& os, const std::vector<TrainedAgent>& trained,
                      const std::string& title);

// Writes `content` to `path`, creating parent directories; IoError on failure.
void write_file(const std::filesystem::path& path, const std::string& content);

void save_checkpoint_file(const std::filesystem::path& path, const agents::Checkpoint& ckpt);
agents::Checkpoint load_checkpoint_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Pipelines shared by the command-line tool and the tests

// One method under comparison: a single policy, or one learned policy per seed.
struct AgentGroup {
  std::string method;
  bool learned = false;
  std::vector<std::shared_ptr<agents::Agent>> agents;
};

// Evaluates every group on the same realization sequence and returns one row
// per (method, scenario). Throws UsageError if the realization fingerprints
// seen by any two agents differ.
ComparisonTable compare(std::vector<AgentGroup>& groups, const ExperimentConfig& config,
                        std::uint64_t eval_seed, std::vector<EvalReport>* reports = nullptr);

// Baselines for the configured environment: greedy, plus dsdp on ex2.
std::vector<AgentGroup> baseline_groups(const ExperimentConfig& config);
AgentGroup learned_group(const ExperimentConfig& config, const std::vector<TrainedAgent>& trained);

// checkpoint_<seed>.bin per seed (DQN agents), curves.csv and curves.svg.
void write_training_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                            const std::vector<TrainedAgent>& trained);
// Loads checkpoint_<seed>.bin for every configured seed.
std::vector<TrainedAgent> load_trained(const std::filesystem::path& dir,
                                       const ExperimentConfig& config);

// report.csv and report.json.
void write_report_files(const std::filesystem::path& dir, const ComparisonTable& table);

// trajectory_<id>.svg of `agent` on evaluation realization `k` for every
// configured scenario; returns the written paths.
std::vector<std::filesystem::path> write_trajectory_plots(const std::filesystem::path& dir,
                                                          agents::Agent& agent,
                                                          const ExperimentConfig& config,
                                                          std::uint64_t eval_seed, int k);

// ---------------------------------------------------------------------------
// Logging

// Configures the stderr logger from GEOSTEER_LOG_LEVEL (trace, debug, info,
// warn, error, off; default warn).
void init_logging();

}  // namespace geosteer::harness
