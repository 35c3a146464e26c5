// Command-line driver: train, evaluate and compare geosteering agents.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "geosteer/errors.hpp"
#include "geosteer/harness.hpp"

namespace fs = std::filesystem;
using namespace geosteer;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string env;
  std::string agent;
  std::string seeds;
  int episodes = -1;
  int eval_n = -1;
  std::string out;
  std::string eval_seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Experiment config file")->check(CLI::ExistingFile);
  cmd->add_option("--env", o.env, "Environment: ex1 or ex2");
  cmd->add_option("--agent", o.agent, "greedy, dsdp, dqn-sensor, dqn-posterior or qtable");
  cmd->add_option("--seeds", o.seeds, "Training seeds, e.g. 1,2,3 or 1-51");
  cmd->add_option("--episodes", o.episodes, "Training episodes per seed");
  cmd->add_option("--eval-n", o.eval_n, "Evaluation realizations per scenario");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--eval-seed", o.eval_seed, "Seed of the evaluation realizations");
}

harness::ExperimentConfig resolve(const CommonOptions& o) {
  harness::ExperimentConfig c;
  if (!o.config_path.empty()) c = harness::load_config(o.config_path);
  if (!o.env.empty()) c.env = o.env;
  if (!o.agent.empty()) c.agent = o.agent;
  if (!o.seeds.empty()) c.seeds = harness::parse_seed_list(o.seeds);
  if (o.episodes >= 0) c.episodes = o.episodes;
  if (o.eval_n >= 0) c.eval_realizations = o.eval_n;
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.eval_seed.empty()) c.eval_seed = harness::parse_seed_list(o.eval_seed).at(0);
  c.validate();
  return c;
}

std::vector<harness::TrainedAgent> trained_or_load(const harness::ExperimentConfig& c) {
  const fs::path dir = c.output_dir;
  if (c.agent != "qtable") {
    bool all_present = true;
    for (auto s : c.seeds)
      all_present = all_present && fs::exists(dir / ("checkpoint_" + std::to_string(s) + ".bin"));
    if (all_present) {
      spdlog::info("using existing checkpoints in {}", dir.string());
      return harness::load_trained(dir, c);
    }
  }
  auto trained = harness::train_multi_seed(c);
  harness::write_training_outputs(dir, c, trained);
  return trained;
}

int run_train(const CommonOptions& o) {
  const auto c = resolve(o);
  if (!harness::is_learning_agent(c.agent))
    throw UsageError("agent '" + c.agent + "' is not trained; use evaluate");
  const auto trained = harness::train_multi_seed(c);
  harness::write_training_outputs(c.output_dir, c, trained);
  for (const auto& t : trained)
    spdlog::info("seed {} trained in {:.1f} s", t.seed, t.seconds);
  return 0;
}

int run_evaluate(const CommonOptions& o) {
  const auto c = resolve(o);
  std::vector<harness::AgentGroup> groups;
  if (harness::is_learning_agent(c.agent)) {
    groups.push_back(harness::learned_group(c, trained_or_load(c)));
  } else {
    groups.push_back({c.agent, false, {std::shared_ptr<agents::Agent>(harness::make_agent(c))}});
  }
  std::vector<harness::EvalReport> reports;
  const auto table = harness::compare(groups, c, c.eval_seed, &reports);
  harness::write_report_files(c.output_dir, table);
  std::ostringstream episodes;
  bool first = true;
  for (const auto& r : reports) {
    std::ostringstream one;
    harness::write_episodes_csv(one, r);
    auto text = one.str();
    if (!first) text.erase(0, text.find('\n') + 1);
    episodes << text;
    first = false;
  }
  harness::write_file(fs::path(c.output_dir) / "episodes.csv", episodes.str());
  return 0;
}

int run_compare(const CommonOptions& o) {
  const auto c = resolve(o);
  auto groups = harness::baseline_groups(c);
  if (harness::is_learning_agent(c.agent))
    groups.push_back(harness::learned_group(c, trained_or_load(c)));
  const auto table = harness::compare(groups, c, c.eval_seed);
  harness::write_report_files(c.output_dir, table);
  return 0;
}

int run_dsdp_solve(const CommonOptions& o) {
  auto c = resolve(o);
  if (c.is_env1()) throw UsageError("dsdp-solve is only available for ex2");
  const auto prior = c.env2_prior();
  for (double v : c.v_prod_eval) {
    const auto policy = agents::dsdp_solve(prior, c.costs, v, c.dsdp);
    std::ostringstream os;
    agents::write_policy(os, policy);
    harness::write_file(fs::path(c.output_dir) / ("dsdp_policy_" + harness::scenario_label(v).substr(7) + ".txt"),
                        os.str());
    spdlog::info("v_prod {}: root value {:.6f}", v, policy.root_value());
  }
  return 0;
}

int run_plot(const CommonOptions& o, int realization) {
  const auto c = resolve(o);
  std::unique_ptr<agents::Agent> agent;
  std::vector<harness::TrainedAgent> trained;
  if (harness::is_learning_agent(c.agent)) {
    trained = trained_or_load(c);
    agent = harness::make_agent(c, &trained.front());
  } else {
    agent = harness::make_agent(c);
  }
  harness::write_trajectory_plots(c.output_dir, *agent, c, c.eval_seed, realization);
  return 0;
}

// Renders report.csv as a fixed-width text table in report.txt.
int run_report(const CommonOptions& o) {
  const auto c = resolve(o);
  const fs::path csv = fs::path(c.output_dir) / "report.csv";
  std::ifstream in(csv);
  if (!in) throw IoError(csv.string(), "cannot open report");
  const auto table = harness::read_table_csv(in);
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %-34s %12s %10s %10s %10s\n", "method", "scenario",
                "reward", "contact%", "hq%", "cost");
  os << line;
  for (const auto& r : table.rows) {
    std::snprintf(line, sizeof line, "%-14s %-34s %12.3f %10.2f %10s %10s\n", r.method.c_str(),
                  r.scenario.c_str(), r.reward, r.contact,
                  r.high_quality ? std::to_string(*r.high_quality).substr(0, 6).c_str() : "-",
                  r.operating_cost ? std::to_string(*r.operating_cost).substr(0, 6).c_str() : "-");
    os << line;
  }
  harness::write_file(fs::path(c.output_dir) / "report.txt", os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  harness::init_logging();
  CLI::App app{"Geosteering decision workbench"};
  app.require_subcommand(1);

  CommonOptions opts;
  int realization = 0;
  auto* train = app.add_subcommand("train", "Train a learning agent for every seed");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate one agent on fresh realizations");
  auto* compare = app.add_subcommand("compare", "Evaluate baselines and the configured agent");
  auto* dsdp = app.add_subcommand("dsdp-solve", "Solve and write DSDP policies");
  auto* plot = app.add_subcommand("plot", "Write trajectory plots for one realization");
  auto* report = app.add_subcommand("report", "Render report.csv as a text table");
  for (auto* cmd : {train, evaluate, compare, dsdp, plot, report}) add_common(cmd, opts);
  plot->add_option("--realization", realization, "Evaluation realization index");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return run_train(opts);
    if (*evaluate) return run_evaluate(opts);
    if (*compare) return run_compare(opts);
    if (*dsdp) return run_dsdp_solve(opts);
    if (*plot) return run_plot(opts, realization);
    if (*report) return run_report(opts);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const IoError& e) {
    spdlog::error("i/o error: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
