#include <algorithm>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "geosteer/errors.hpp"
#include "geosteer/harness.hpp"

namespace geosteer::harness {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

EpisodeRecord record_of(int index, const env::EpisodeResult& r, std::uint64_t hash) {
  EpisodeRecord rec;
  rec.index = index;
  rec.reward = r.total_reward;
  rec.contact = r.reservoir_contact;
  rec.high_quality = r.high_quality;
  rec.operating_cost = r.operating_cost;
  rec.sidetracks = r.sidetracks;
  rec.realization_hash = hash;
  return rec;
}

std::vector<double> trailing_mean(const std::vector<EpisodeRecord>& eps, int window,
                                  double EpisodeRecord::*field) {
  std::vector<double> out;
  if (window < 1 || static_cast<int>(eps.size()) < window) return out;
  double sum = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    sum += eps[i].*field;
    if (i >= static_cast<std::size_t>(window)) sum -= eps[i - window].*field;
    if (i + 1 >= static_cast<std::size_t>(window)) out.push_back(sum / window);
  }
  return out;
}

// Scenario and realization of training episode `ep`, both from its own stream.
struct Env1Episode {
  env::Env1Scenario scenario;
  geomodel::GeoRealization1 truth;
};

Env1Episode training_episode_env1(const ExperimentConfig& config, std::uint64_t seed, int ep) {
  Rng rng = make_rng(seed, stream::kTrainRealization, static_cast<std::uint64_t>(ep));
  Env1Episode out;
  out.scenario = config.scenarios[uniform_index(rng, config.scenarios.size())];
  auto params = config.geo1;
  params.perm_low = out.scenario.perm_low;
  out.truth = geomodel::sample_realization_env1(params, rng);
  return out;
}

struct Env2Episode {
  double v_prod = 0.0;
  geomodel::GeoRealization2 truth;
};

Env2Episode training_episode_env2(const ExperimentConfig& config,
                                  const geomodel::Env2Prior& prior, std::uint64_t seed, int ep) {
  Rng rng = make_rng(seed, stream::kTrainRealization, static_cast<std::uint64_t>(ep));
  Env2Episode out;
  out.v_prod = uniform(rng, config.costs.v_prod_min, config.costs.v_prod_max);
  out.truth = geomodel::sample_realization_env2(prior, rng);
  return out;
}

nlohmann::json normalization_json(const ExperimentConfig& config) {
  if (config.is_env1()) {
    return {{"distance", "local thickness"},
            {"thickness", config.env1.thickness_norm},
            {"inclination_deg", config.env1.inclination_norm},
            {"point_index", config.geo1.n_points},
            {"permeability", config.env1.perm_norm}};
  }
  const auto prior = config.env2_prior();
  return {{"distance", "reservoir thickness"},
          {"fault_position_m", prior.total_length()},
          {"v_prod", config.costs.v_prod_max}};
}

TrainedAgent train_dqn(const ExperimentConfig& config, std::uint64_t seed) {
  const auto start = Clock::now();
  const auto dqn = config.dqn_config();
  const bool ex1 = config.is_env1();
  const auto mode = agent_observation_mode(config.agent);
  const int obs_size = ex1 ? env::Env1::kObservationSize : env::Env2::kObservationSize;
  const int n_actions = ex1 ? env::Env1::kNumActions : env::Env2::kNumActions;
  const int episodes = config.effective_episodes();
  const auto greedy = config.greedy_config();
  const auto prior = config.env2_prior();

  Rng init_rng = make_rng(seed, stream::kNetworkInit);
  Rng agent_rng = make_rng(seed, stream::kTrainAgent);
  auto net = neural::QNetwork::he_uniform(neural::default_architecture(obs_size, n_actions), init_rng);
  auto target = neural::clone_weights(net);
  neural::Optimizer optimizer(dqn.optimizer, net);
  agents::ReplayBuffer buffer(dqn.buffer_capacity);

  TrainedAgent out;
  out.seed = seed;
  std::int64_t env_steps = 0;
  std::int64_t train_steps = 0;

  env::Env1 env1(config.env1);
  env::Env2 env2(prior, config.costs);

  for (int ep = 0; ep < episodes; ++ep) {
    const double eps = agents::epsilon_at(dqn, ep, episodes);
    double scale = dqn.reward_scale;
    std::uint64_t hash = 0;
    auto observe_now = [&]() {
      return ex1 ? agents::env1_observation(env1, mode, greedy) : env::observe(env2);
    };
    if (ex1) {
      auto e = training_episode_env1(config, seed, ep);
      hash = geomodel::realization_hash(e.truth);
      env1.reset(std::move(e.truth), e.scenario);
    } else {
      auto e = training_episode_env2(config, prior, seed, ep);
      hash = geomodel::realization_hash(e.truth);
      env2.reset(std::move(e.truth), e.v_prod);
      if (dqn.normalize_by_v_prod && e.v_prod > 0.0) scale /= e.v_prod;
    }
    auto obs = observe_now();
    auto legal = ex1 ? env1.legal_actions() : env2.legal_actions();
    bool done = false;
    while (!done) {
      const int a = agents::dqn_select_action(net, obs, eps, legal, agent_rng);
      const auto step = ex1 ? env1.step(a) : env2.step(a);
      done = step.done;
      agents::Experience x;
      x.s = std::move(obs);
      x.a = a;
      x.r = step.reward * scale;
      x.done = done;
      if (!done) {
        obs = observe_now();
        legal = ex1 ? env1.legal_actions() : env2.legal_actions();
        x.s_next = obs;
        x.legal_next = legal;
      } else {
        x.s_next.assign(obs_size, 0.0);
        x.legal_next.assign(n_actions, true);
      }
      buffer.push(std::move(x));
      ++env_steps;
      if (buffer.size() >= std::max(dqn.warmup, dqn.batch_size) &&
          env_steps % dqn.train_every == 0) {
        agents::dqn_train_step(net, target, buffer, dqn.batch_size, dqn.gamma, optimizer,
                               agent_rng);
        ++train_steps;
        agents::target_sync(net, target, train_steps, dqn.target_sync_interval);
      }
    }
    const auto result = ex1 ? env1.result() : env2.result();
    out.curve.episodes.push_back(record_of(ep, result, hash));
    if ((ep + 1) % 500 == 0) {
      const auto ma = out.curve.moving_average_contact();
      spdlog::info("seed {} episode {}/{} eps {:.3f} contact(ma) {:.2f}", seed, ep + 1, episodes,
                   eps, ma.empty() ? 0.0 : ma.back());
    }
  }
  if (!net.all_finite()) throw UsageError("training diverged: non-finite network weights");

  out.checkpoint.net = std::move(net);
  out.checkpoint.meta.env_id = config.env;
  out.checkpoint.meta.observation_mode = mode;
  out.checkpoint.meta.observation_size = obs_size;
  out.checkpoint.meta.action_count = n_actions;
  out.checkpoint.meta.seed = seed;
  out.checkpoint.meta.episodes = episodes;
  out.checkpoint.meta.normalization = normalization_json(config);
  out.seconds = seconds_since(start);
  return out;
}

TrainedAgent train_qtable(const ExperimentConfig& config, std::uint64_t seed) {
  const auto start = Clock::now();
  const auto dqn = config.dqn_config();
  const auto prior = config.env2_prior();
  const int episodes = config.effective_episodes();
  Rng agent_rng = make_rng(seed, stream::kTrainAgent);
  agents::QTable table(env::Env2::kNumActions, config.qtable_alpha, dqn.gamma);
  env::Env2 env(prior, config.costs);
  TrainedAgent out;
  out.seed = seed;
  for (int ep = 0; ep < episodes; ++ep) {
    const double eps = agents::epsilon_at(dqn, ep, episodes);
    auto e = training_episode_env2(config, prior, seed, ep);
    const auto hash = geomodel::realization_hash(e.truth);
    double scale = dqn.reward_scale;
    if (dqn.normalize_by_v_prod && e.v_prod > 0.0) scale /= e.v_prod;
    env.reset(std::move(e.truth), e.v_prod);
    while (!env.done()) {
      const auto key = agents::env2_table_key(env);
      const auto legal = env.legal_actions();
      int a = 0;
      if (uniform(agent_rng, 0.0, 1.0) < eps) {
        std::vector<int> allowed;
        for (int i = 0; i < env::Env2::kNumActions; ++i)
          if (legal[i]) allowed.push_back(i);
        a = allowed[uniform_index(agent_rng, allowed.size())];
      } else {
        a = agents::qtable_greedy(table, key, legal);
      }
      const auto step = env.step(a);
      if (step.done) {
        agents::qlearning_update(table, key, a, step.reward * scale, key, true);
      } else {
        const auto next_legal = env.legal_actions();
        agents::qlearning_update(table, key, a, step.reward * scale, agents::env2_table_key(env),
                                 false, &next_legal);
      }
    }
    out.curve.episodes.push_back(record_of(ep, env.result(), hash));
  }
  out.table = std::move(table);
  out.checkpoint.meta.env_id = config.env;
  out.checkpoint.meta.seed = seed;
  out.checkpoint.meta.episodes = episodes;
  out.seconds = seconds_since(start);
  return out;
}

}  // namespace

std::vector<double> TrainingCurve::moving_average_reward(int window) const {
  return trailing_mean(episodes, window, &EpisodeRecord::reward);
}

std::vector<double> TrainingCurve::moving_average_contact(int window) const {
  return trailing_mean(episodes, window, &EpisodeRecord::contact);
}

bool is_learning_agent(const std::string& agent) {
  return agent == "dqn-sensor" || agent == "dqn-posterior" || agent == "qtable";
}

env::ObservationMode agent_observation_mode(const std::string& agent) {
  return agent == "dqn-posterior" ? env::ObservationMode::kPosterior
                                  : env::ObservationMode::kSensor;
}

TrainedAgent train_agent(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  if (!is_learning_agent(config.agent))
    throw UsageError("train: agent '" + config.agent + "' has nothing to train");
  return config.agent == "qtable" ? train_qtable(config, seed) : train_dqn(config, seed);
}

std::vector<TrainedAgent> train_multi_seed(const ExperimentConfig& config) {
  config.validate();
  const std::size_t n = config.seeds.size();
  std::vector<std::optional<TrainedAgent>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex next_mutex;
  std::size_t next = 0;
  auto worker = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(next_mutex);
        if (next >= n) return;
        i = next++;
      }
      try {
        results[i] = train_agent(config, config.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw UsageError("training failed for seed " + std::to_string(config.seeds[i]) + ": " +
                       e.what());
    }
  }
  std::vector<TrainedAgent> out;
  out.reserve(n);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

geomodel::GeoRealization1 eval_realization_env1(const ExperimentConfig& config,
                                                std::uint64_t eval_seed, int k) {
  Rng rng = make_rng(eval_seed, stream::kEvalRealization, static_cast<std::uint64_t>(k));
  return geomodel::sample_realization_env1(config.geo1, rng);
}

geomodel::GeoRealization2 eval_realization_env2(const ExperimentConfig& config,
                                                std::uint64_t eval_seed, int k) {
  Rng rng = make_rng(eval_seed, stream::kEvalRealization, static_cast<std::uint64_t>(k));
  return geomodel::sample_realization_env2(config.env2_prior(), rng);
}

env::Env1 rollout_env1(agents::Agent& agent, const ExperimentConfig& config,
                       geomodel::GeoRealization1 truth, const env::Env1Scenario& scenario,
                       Rng& rng) {
  env::Env1 env(config.env1);
  env.reset(std::move(truth), scenario);
  while (!env.done()) {
    const int a = agent.act(env, rng);
    if (a < 0 || a >= env::Env1::kNumActions || !env.legal_actions()[a])
      throw IllegalActionError(agent.name() + " returned illegal action " + std::to_string(a));
    env.step(a);
  }
  return env;
}

env::Env2 rollout_env2(agents::Agent& agent, const ExperimentConfig& config,
                       geomodel::GeoRealization2 truth, double v_prod, Rng& rng) {
  env::Env2 env(config.env2_prior(), config.costs);
  env.reset(std::move(truth), v_prod);
  while (!env.done()) {
    const int a = agent.act(env, rng);
    if (a < 0 || a >= env::Env2::kNumActions || !env.legal_actions()[a])
      throw IllegalActionError(agent.name() + " returned illegal action " + std::to_string(a));
    env.step(a);
  }
  return env;
}

std::string scenario_label(const env::Env1Scenario& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "w1=%g w2=%g perm_low=%g", s.w1, s.w2, s.perm_low);
  return buf;
}

std::string scenario_label(double v_prod) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "v_prod=%g", v_prod);
  return buf;
}

namespace {

void finish_scenario(ScenarioReport& s) {
  const double n = static_cast<double>(s.episodes.size());
  double reward = 0.0, contact = 0.0, hq = 0.0, cost = 0.0, st = 0.0;
  for (const auto& e : s.episodes) {
    reward += e.reward;
    contact += e.contact;
    hq += e.high_quality.value_or(0.0);
    cost += e.operating_cost.value_or(0.0);
    st += e.sidetracks;
  }
  s.mean_reward = reward / n;
  s.mean_contact = contact / n;
  s.mean_sidetracks = st / n;
  if (s.env1_scenario) s.mean_high_quality = hq / n;
  if (s.v_prod) s.mean_operating_cost = cost / n;
}

}  // namespace

EvalReport evaluate(agents::Agent& agent, const ExperimentConfig& config,
                    std::uint64_t eval_seed) {
  config.validate();
  EvalReport report;
  report.agent = agent.name();
  report.env = config.env;
  if (auto* dqn = dynamic_cast<agents::DqnAgent*>(&agent)) {
    if (dqn->checkpoint().meta.env_id != config.env)
      throw UsageError("checkpoint trained on " + dqn->checkpoint().meta.env_id +
                       " cannot be evaluated on " + config.env);
    report.seed = dqn->checkpoint().meta.seed;
  }
  const int n = config.eval_realizations;
  if (config.is_env1()) {
    for (const auto& sc : config.scenarios) {
      const auto start = Clock::now();
      ScenarioReport s;
      s.label = scenario_label(sc);
      s.env1_scenario = sc;
      for (int k = 0; k < n; ++k) {
        auto truth = eval_realization_env1(config, eval_seed, k);
        truth.perm_low = sc.perm_low;
        const auto hash = geomodel::realization_hash(truth);
        Rng rng = make_rng(eval_seed, stream::kEvalAgent, static_cast<std::uint64_t>(k));
        const auto env = rollout_env1(agent, config, std::move(truth), sc, rng);
        s.episodes.push_back(record_of(k, env.result(), hash));
      }
      finish_scenario(s);
      s.seconds = seconds_since(start);
      report.scenarios.push_back(std::move(s));
    }
  } else {
    const auto prior = config.env2_prior();
    for (double v : config.v_prod_eval) {
      const auto start = Clock::now();
      agent.prepare_env2(prior, config.costs, v);
      ScenarioReport s;
      s.label = scenario_label(v);
      s.v_prod = v;
      for (int k = 0; k < n; ++k) {
        auto truth = eval_realization_env2(config, eval_seed, k);
        const auto hash = geomodel::realization_hash(truth);
        Rng rng = make_rng(eval_seed, stream::kEvalAgent, static_cast<std::uint64_t>(k));
        const auto env = rollout_env2(agent, config, std::move(truth), v, rng);
        s.episodes.push_back(record_of(k, env.result(), hash));
      }
      finish_scenario(s);
      s.seconds = seconds_since(start);
      report.scenarios.push_back(std::move(s));
    }
  }
  return report;
}

std::unique_ptr<agents::Agent> make_agent(const ExperimentConfig& config,
                                          const TrainedAgent* trained) {
  if (config.agent == "greedy") return std::make_unique<agents::GreedyAgent>(config.greedy_config());
  if (config.agent == "dsdp")
    return std::make_unique<agents::DsdpAgent>(config.dsdp, config.effective_cache_dir());
  if (trained == nullptr) throw UsageError("agent '" + config.agent + "' needs a trained model");
  if (config.agent == "qtable") {
    if (!trained->table) throw UsageError("qtable agent without a table");
    return std::make_unique<agents::QTableAgent>(*trained->table);
  }
  const auto& meta = trained->checkpoint.meta;
  if (meta.env_id != config.env)
    throw UsageError("checkpoint for " + meta.env_id + " used with environment " + config.env);
  if (meta.observation_mode != agent_observation_mode(config.agent))
    throw UsageError("checkpoint observation mode does not match agent " + config.agent);
  return std::make_unique<agents::DqnAgent>(trained->checkpoint, config.greedy_config());
}

// ---------------------------------------------------------------------------
// Summaries

double rl_robust(std::vector<double> means) {
  if (means.empty()) throw UsageError("rl_robust: no seed means");
  std::sort(means.begin(), means.end());
  const std::size_t n = means.size();
  if (n % 2 == 1) return means[n / 2];
  return 0.5 * (means[n / 2 - 1] + means[n / 2]);
}

std::vector<ComparisonRow> summarize(const EvalReport& report) {
  std::vector<ComparisonRow> rows;
  for (const auto& s : report.scenarios) {
    ComparisonRow r;
    r.method = report.agent;
    r.scenario = s.label;
    r.reward = s.mean_reward;
    r.contact = s.mean_contact;
    r.high_quality = s.mean_high_quality;
    r.operating_cost = s.mean_operating_cost;
    r.sidetracks = s.mean_sidetracks;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ComparisonRow> summarize_seeds(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw UsageError("summarize_seeds: no reports");
  std::vector<ComparisonRow> rows;
  const auto& first = reports.front();
  for (std::size_t s = 0; s < first.scenarios.size(); ++s) {
    std::vector<double> reward, contact, hq, cost, st;
    for (const auto& rep : reports) {
      if (rep.scenarios.size() != first.scenarios.size() ||
          rep.scenarios[s].label != first.scenarios[s].label)
        throw UsageError("summarize_seeds: reports cover different scenarios");
      const auto& sc = rep.scenarios[s];
      reward.push_back(sc.mean_reward);
      contact.push_back(sc.mean_contact);
      if (sc.mean_high_quality) hq.push_back(*sc.mean_high_quality);
      if (sc.mean_operating_cost) cost.push_back(*sc.mean_operating_cost);
      st.push_back(sc.mean_sidetracks);
    }
    ComparisonRow r;
    r.method = first.agent;
    r.scenario = first.scenarios[s].label;
    r.per_seed_rewards = reward;
    r.reward = rl_robust(reward);
    r.contact = rl_robust(contact);
    if (!hq.empty()) r.high_quality = rl_robust(hq);
    if (!cost.empty()) r.operating_cost = rl_robust(cost);
    r.sidetracks = rl_robust(st);
    rows.push_back(std::move(r));
  }
  return rows;
}

const ComparisonRow* find_row(const ComparisonTable& table, const std::string& method,
                              const std::string& scenario) {
  for (const auto& r : table.rows)
    if (r.method == method && r.scenario == scenario) return &r;
  return nullptr;
}

}  // namespace geosteer::harness
