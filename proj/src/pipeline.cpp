#include <cctype>
#include <sstream>

#include <spdlog/spdlog.h>

#include "geosteer/errors.hpp"
#include "geosteer/harness.hpp"

namespace geosteer::harness {
namespace {

std::string checkpoint_name(std::uint64_t seed) {
  return "checkpoint_" + std::to_string(seed) + ".bin";
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.') out += c;
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

}  // namespace

ComparisonTable compare(std::vector<AgentGroup>& groups, const ExperimentConfig& config,
                        std::uint64_t eval_seed, std::vector<EvalReport>* reports) {
  config.validate();
  ComparisonTable table;
  table.env = config.env;
  std::vector<EvalReport> all;
  for (auto& g : groups) {
    if (g.agents.empty()) throw UsageError("compare: method '" + g.method + "' has no agents");
    std::vector<EvalReport> group_reports;
    for (auto& agent : g.agents) {
      auto rep = evaluate(*agent, config, eval_seed);
      rep.agent = g.method;
      spdlog::info("evaluated {}{} on {}", g.method,
                   rep.seed ? " seed " + std::to_string(*rep.seed) : std::string(), config.env);
      if (!all.empty()) {
        const auto& ref = all.front();
        for (std::size_t s = 0; s < rep.scenarios.size(); ++s) {
          const auto& a = rep.scenarios[s].episodes;
          const auto& b = ref.scenarios.at(s).episodes;
          for (std::size_t k = 0; k < a.size(); ++k)
            if (a[k].realization_hash != b.at(k).realization_hash)
              throw UsageError("compare: agents saw different realizations");
        }
      }
      all.push_back(rep);
      group_reports.push_back(std::move(rep));
    }
    const auto rows = g.learned ? summarize_seeds(group_reports) : summarize(group_reports.front());
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  }
  if (reports) *reports = std::move(all);
  return table;
}

std::vector<AgentGroup> baseline_groups(const ExperimentConfig& config) {
  std::vector<AgentGroup> groups;
  groups.push_back({"greedy", false, {std::make_shared<agents::GreedyAgent>(config.greedy_config())}});
  if (!config.is_env1()) {
    groups.push_back({"dsdp", false,
                      {std::make_shared<agents::DsdpAgent>(config.dsdp, config.effective_cache_dir())}});
  }
  return groups;
}

AgentGroup learned_group(const ExperimentConfig& config, const std::vector<TrainedAgent>& trained) {
  AgentGroup g;
  g.method = config.agent;
  g.learned = true;
  for (const auto& t : trained) g.agents.push_back(std::shared_ptr<agents::Agent>(make_agent(config, &t)));
  return g;
}

void write_training_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                            const std::vector<TrainedAgent>& trained) {
  if (config.agent != "qtable") {
    for (const auto& t : trained) save_checkpoint_file(dir / checkpoint_name(t.seed), t.checkpoint);
  }
  std::ostringstream curves;
  write_curves_csv(curves, trained);
  write_file(dir / "curves.csv", curves.str());
  std::ostringstream svg;
  write_curves_svg(svg, trained, config.env + " " + config.agent + " training");
  write_file(dir / "curves.svg", svg.str());
}

std::vector<TrainedAgent> load_trained(const std::filesystem::path& dir,
                                       const ExperimentConfig& config) {
  std::vector<TrainedAgent> out;
  for (auto seed : config.seeds) {
    TrainedAgent t;
    t.seed = seed;
    t.checkpoint = load_checkpoint_file(dir / checkpoint_name(seed));
    if (t.checkpoint.meta.env_id != config.env)
      throw UsageError("checkpoint for seed " + std::to_string(seed) + " was trained on " +
                       t.checkpoint.meta.env_id);
    if (t.checkpoint.meta.observation_mode != agent_observation_mode(config.agent))
      throw UsageError("checkpoint for seed " + std::to_string(seed) +
                       " uses a different observation mode");
    out.push_back(std::move(t));
  }
  return out;
}

void write_report_files(const std::filesystem::path& dir, const ComparisonTable& table) {
  std::ostringstream csv;
  write_table_csv(csv, table);
  write_file(dir / "report.csv", csv.str());
  std::ostringstream json;
  write_table_json(json, table);
  write_file(dir / "report.json", json.str());
}

std::vector<std::filesystem::path> write_trajectory_plots(const std::filesystem::path& dir,
                                                          agents::Agent& agent,
                                                          const ExperimentConfig& config,
                                                          std::uint64_t eval_seed, int k) {
  std::vector<std::filesystem::path> paths;
  Rng rng = make_rng(eval_seed, stream::kEvalAgent, static_cast<std::uint64_t>(k));
  if (config.is_env1()) {
    for (const auto& sc : config.scenarios) {
      auto truth = eval_realization_env1(config, eval_seed, k);
      Rng r = rng;
      const auto env = rollout_env1(agent, config, std::move(truth), sc, r);
      const std::string id = slug(agent.name() + "_" + scenario_label(sc) + "_" + std::to_string(k));
      std::ostringstream svg;
      write_trajectory_svg(svg, env, agent.name() + ", " + scenario_label(sc) + ", realization " +
                                         std::to_string(k));
      paths.push_back(dir / ("trajectory_" + id + ".svg"));
      write_file(paths.back(), svg.str());
    }
  } else {
    for (double v : config.v_prod_eval) {
      agent.prepare_env2(config.env2_prior(), config.costs, v);
      auto truth = eval_realization_env2(config, eval_seed, k);
      Rng r = rng;
      const auto env = rollout_env2(agent, config, std::move(truth), v, r);
      const std::string id = slug(agent.name() + "_" + scenario_label(v) + "_" + std::to_string(k));
      std::ostringstream svg;
      write_trajectory_svg(svg, env, agent.name() + ", " + scenario_label(v) + ", realization " +
                                         std::to_string(k));
      paths.push_back(dir / ("trajectory_" + id + ".svg"));
      write_file(paths.back(), svg.str());
    }
  }
  return paths;
}

}  // namespace geosteer::harness
