#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

#include "geosteer/errors.hpp"
#include "geosteer/harness.hpp"

namespace geosteer::harness {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& p : split(v, ',')) out.push_back(to_double(key, p));
  return out;
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + num(v[i]);
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    auto dbl = [&m](const std::string& k, auto member) {
      m[k] = [member](ExperimentConfig& c, const std::string& key, const std::string& v) {
        member(c) = to_double(key, v);
      };
    };
    auto integer = [&m](const std::string& k, auto member) {
      m[k] = [member](ExperimentConfig& c, const std::string& key, const std::string& v) {
        member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_int(key, v));
      };
    };
    // harness
    m["harness.env"] = [](auto& c, auto&, auto& v) { c.env = v; };
    m["harness.agent"] = [](auto& c, auto&, auto& v) { c.agent = v; };
    m["harness.seeds"] = [](auto& c, auto&, auto& v) { c.seeds = parse_seed_list(v); };
    m["harness.episodes"] = [](auto& c, auto& k, auto& v) {
      c.episodes = static_cast<int>(to_int(k, v));
    };
    integer("harness.eval_realizations", [](ExperimentConfig& c) -> int& { return c.eval_realizations; });
    m["harness.eval_seed"] = [](auto& c, auto& k, auto& v) { c.eval_seed = to_uint(k, v); };
    m["harness.output"] = [](auto& c, auto&, auto& v) { c.output_dir = v; };
    m["harness.cache_dir"] = [](auto& c, auto&, auto& v) { c.cache_dir = v; };
    integer("harness.threads", [](ExperimentConfig& c) -> int& { return c.threads; });
    // geomodel, environment 1
    integer("geomodel.n_points", [](ExperimentConfig& c) -> int& { return c.geo1.n_points; });
    dbl("geomodel.dx", [](ExperimentConfig& c) -> double& { return c.geo1.dx; });
    dbl("geomodel.mean_top_depth", [](ExperimentConfig& c) -> double& { return c.geo1.mean_top_depth; });
    dbl("geomodel.boundary_step_sd", [](ExperimentConfig& c) -> double& { return c.geo1.boundary_step_sd; });
    integer("geomodel.smoothing_window", [](ExperimentConfig& c) -> int& { return c.geo1.smoothing_window; });
    dbl("geomodel.thickness_mean", [](ExperimentConfig& c) -> double& { return c.geo1.thickness_mean; });
    dbl("geomodel.thickness_sd", [](ExperimentConfig& c) -> double& { return c.geo1.thickness_sd; });
    dbl("geomodel.thickness_min", [](ExperimentConfig& c) -> double& { return c.geo1.thickness_min; });
    dbl("geomodel.hq_fraction", [](ExperimentConfig& c) -> double& { return c.geo1.hq_fraction; });
    dbl("geomodel.perm_high", [](ExperimentConfig& c) -> double& { return c.geo1.perm_high; });
    // geomodel, environment 2
    integer("geomodel.env2_n_points", [](ExperimentConfig& c) -> int& { return c.env2_n_points; });
    dbl("geomodel.env2_spacing", [](ExperimentConfig& c) -> double& { return c.env2_spacing; });
    dbl("geomodel.env2_top_depth", [](ExperimentConfig& c) -> double& { return c.env2_top_depth; });
    dbl("geomodel.env2_dip", [](ExperimentConfig& c) -> double& { return c.env2_dip; });
    dbl("geomodel.env2_thickness", [](ExperimentConfig& c) -> double& { return c.env2_thickness; });
    m["geomodel.faults"] = [](auto& c, auto& k, auto& v) {
      const auto n = to_int(k, v);
      if (n < 0 || n > 64) throw ConfigError(k + ": must be in [0, 64]");
      c.faults.resize(static_cast<std::size_t>(n));
    };
    // env
    m["env.scenarios"] = [](auto& c, auto& k, auto& v) {
      c.scenarios.clear();
      for (const auto& item : split(v, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 3) throw ConfigError(k + ": expected w1:w2:perm_low entries");
        c.scenarios.push_back({to_double(k, parts[0]), to_double(k, parts[1]), to_double(k, parts[2])});
      }
    };
    m["env.v_prod_eval"] = [](auto& c, auto& k, auto& v) { c.v_prod_eval = to_doubles(k, v); };
    dbl("env.c_d", [](ExperimentConfig& c) -> double& { return c.costs.c_d; });
    dbl("env.c_st", [](ExperimentConfig& c) -> double& { return c.costs.c_st; });
    dbl("env.v_prod_min", [](ExperimentConfig& c) -> double& { return c.costs.v_prod_min; });
    dbl("env.v_prod_max", [](ExperimentConfig& c) -> double& { return c.costs.v_prod_max; });
    dbl("env.thickness_norm", [](ExperimentConfig& c) -> double& { return c.env1.thickness_norm; });
    dbl("env.inclination_norm", [](ExperimentConfig& c) -> double& { return c.env1.inclination_norm; });
    dbl("env.perm_norm", [](ExperimentConfig& c) -> double& { return c.env1.perm_norm; });
    // agent
    integer("agent.greedy_mc_samples", [](ExperimentConfig& c) -> int& { return c.greedy_mc_samples; });
    m["agent.belief_sd_top"] = [](auto& c, auto& k, auto& v) { c.belief_sd_top = to_double(k, v); };
    m["agent.belief_sd_thickness"] = [](auto& c, auto& k, auto& v) {
      c.belief_sd_thickness = to_double(k, v);
    };
    dbl("agent.dsdp_bin_width", [](ExperimentConfig& c) -> double& { return c.dsdp.bin_width; });
    dbl("agent.dsdp_depth_span", [](ExperimentConfig& c) -> double& { return c.dsdp.depth_span; });
    integer("agent.dsdp_mc_samples", [](ExperimentConfig& c) -> int& { return c.dsdp.mc_samples; });
    m["agent.dsdp_seed"] = [](auto& c, auto& k, auto& v) { c.dsdp.seed = to_uint(k, v); };
    m["agent.buffer_capacity"] = [](auto& c, auto& k, auto& v) {
      c.dqn.buffer_capacity = static_cast<std::size_t>(to_uint(k, v));
    };
    m["agent.batch_size"] = [](auto& c, auto& k, auto& v) {
      c.dqn.batch_size = static_cast<std::size_t>(to_uint(k, v));
    };
    m["agent.target_sync_interval"] = [](auto& c, auto& k, auto& v) {
      c.dqn.target_sync_interval = to_int(k, v);
    };
    dbl("agent.gamma", [](ExperimentConfig& c) -> double& { return c.dqn.gamma; });
    dbl("agent.epsilon_start", [](ExperimentConfig& c) -> double& { return c.dqn.epsilon_start; });
    dbl("agent.epsilon_end", [](ExperimentConfig& c) -> double& { return c.dqn.epsilon_end; });
    dbl("agent.epsilon_decay_fraction",
        [](ExperimentConfig& c) -> double& { return c.dqn.epsilon_decay_fraction; });
    m["agent.warmup"] = [](auto& c, auto& k, auto& v) {
      c.dqn.warmup = static_cast<std::size_t>(to_uint(k, v));
    };
    integer("agent.train_every", [](ExperimentConfig& c) -> int& { return c.dqn.train_every; });
    dbl("agent.ex1_learning_rate", [](ExperimentConfig& c) -> double& { return c.ex1_learning_rate; });
    dbl("agent.ex2_learning_rate", [](ExperimentConfig& c) -> double& { return c.ex2_learning_rate; });
    dbl("agent.max_grad_norm", [](ExperimentConfig& c) -> double& { return c.dqn.optimizer.max_grad_norm; });
    m["agent.optimizer"] = [](auto& c, auto& k, auto& v) {
      if (v == "adam") c.dqn.optimizer.kind = neural::OptimizerKind::kAdam;
      else if (v == "sgd") c.dqn.optimizer.kind = neural::OptimizerKind::kSgd;
      else throw ConfigError(k + ": expected adam or sgd, got '" + v + "'");
    };
    dbl("agent.ex1_reward_scale", [](ExperimentConfig& c) -> double& { return c.ex1_reward_scale; });
    dbl("agent.ex2_reward_scale", [](ExperimentConfig& c) -> double& { return c.ex2_reward_scale; });
    m["agent.ex2_normalize_by_v_prod"] = [](auto& c, auto& k, auto& v) {
      c.ex2_normalize_by_v_prod = to_bool(k, v);
    };
    dbl("agent.qtable_alpha", [](ExperimentConfig& c) -> double& { return c.qtable_alpha; });
    return m;
  }();
  return table;
}

void set_fault_key(ExperimentConfig& c, const std::string& key, std::size_t index,
                   const std::string& field, const std::string& value) {
  if (index == 0) throw ConfigError(key + ": faults are numbered from 1");
  if (index > c.faults.size()) c.faults.resize(index);
  auto& f = c.faults[index - 1];
  if (field == "locations") f.candidate_locations = to_doubles(key, value);
  else if (field == "mean") f.displacement_mean = to_double(key, value);
  else f.displacement_sd = to_double(key, value);
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(text, ',')) {
    const auto dash = part.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = to_uint("harness.seeds", trim(part.substr(0, dash)));
      const auto hi = to_uint("harness.seeds", trim(part.substr(dash + 1)));
      if (hi < lo || hi - lo > 100000) throw ConfigError("harness.seeds: bad range '" + part + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(to_uint("harness.seeds", part));
    }
  }
  return seeds;
}

int ExperimentConfig::effective_episodes() const {
  if (episodes) return *episodes;
  return is_env1() ? 3000 : 8000;
}

geomodel::Env2Prior ExperimentConfig::env2_prior() const {
  geomodel::Env2Prior p;
  p.n_points = env2_n_points;
  p.spacing = env2_spacing;
  p.thickness = env2_thickness;
  p.base_trend.resize(std::max(env2_n_points, 0));
  for (int j = 0; j < env2_n_points; ++j) p.base_trend[j] = env2_top_depth + env2_dip * j;
  p.faults = faults;
  return p;
}

agents::GreedyConfig ExperimentConfig::greedy_config() const {
  agents::GreedyConfig g;
  g.mc_samples = greedy_mc_samples;
  g.innovation_sd_top = belief_sd_top.value_or(geo1.boundary_step_sd);
  g.innovation_sd_thickness = belief_sd_thickness.value_or(geo1.thickness_sd);
  return g;
}

agents::DqnConfig ExperimentConfig::dqn_config() const {
  agents::DqnConfig d = dqn;
  if (is_env1()) {
    d.reward_scale = ex1_reward_scale;
    d.optimizer.learning_rate = ex1_learning_rate;
    d.normalize_by_v_prod = false;
  } else {
    d.reward_scale = ex2_reward_scale;
    d.optimizer.learning_rate = ex2_learning_rate;
    d.normalize_by_v_prod = ex2_normalize_by_v_prod;
  }
  return d;
}

std::string ExperimentConfig::effective_cache_dir() const {
  if (!cache_dir.empty()) return cache_dir;
  return (std::filesystem::path(output_dir) / "cache").string();
}

void ExperimentConfig::validate() const {
  if (env != "ex1" && env != "ex2")
    throw ConfigError("harness.env: must be ex1 or ex2, got '" + env + "'");
  static const std::set<std::string> kAgents = {"greedy", "dsdp", "dqn-sensor",
                                                "dqn-posterior", "qtable"};
  if (!kAgents.count(agent)) throw ConfigError("harness.agent: unknown agent '" + agent + "'");
  if (is_env1() && (agent == "dsdp" || agent == "qtable"))
    throw ConfigError("harness.agent: " + agent + " is only available for ex2");
  if (!is_env1() && agent == "dqn-posterior")
    throw ConfigError("harness.agent: dqn-posterior is only available for ex1");
  if (seeds.empty()) throw ConfigError("harness.seeds: must not be empty");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ConfigError("harness.seeds: seeds must be distinct");
  if (effective_episodes() < 0) throw ConfigError("harness.episodes: must be >= 0");
  if (eval_realizations < 1) throw ConfigError("harness.eval_realizations: must be >= 1");
  if (threads < 1) throw ConfigError("harness.threads: must be >= 1");
  geo1.validate();
  if (geo1.n_points % env::kPointsPerStage != 0)
    throw ConfigError("geomodel.n_points: must be a multiple of 10");
  env2_prior().validate();
  costs.validate();
  if (scenarios.empty()) throw ConfigError("env.scenarios: must not be empty");
  for (const auto& s : scenarios) {
    if (s.w1 < 0.0 || s.w2 < 0.0 || std::abs(s.w1 + s.w2 - 1.0) > 1e-9)
      throw ConfigError("env.scenarios: weights must be non-negative and sum to 1");
    if (!(s.perm_low > 0.0) || s.perm_low > geo1.perm_high)
      throw ConfigError("env.scenarios: perm_low must be in (0, perm_high]");
  }
  if (v_prod_eval.empty()) throw ConfigError("env.v_prod_eval: must not be empty");
  for (double v : v_prod_eval)
    if (!(v >= 0.0)) throw ConfigError("env.v_prod_eval: values must be >= 0");
  if (!(env1.thickness_norm > 0.0)) throw ConfigError("env.thickness_norm: must be > 0");
  if (!(env1.inclination_norm > 0.0)) throw ConfigError("env.inclination_norm: must be > 0");
  if (!(env1.perm_norm > 0.0)) throw ConfigError("env.perm_norm: must be > 0");
  if (greedy_mc_samples < 1) throw ConfigError("agent.greedy_mc_samples: must be >= 1");
  const auto g = greedy_config();
  if (!(g.innovation_sd_top >= 0.0)) throw ConfigError("agent.belief_sd_top: must be >= 0");
  if (!(g.innovation_sd_thickness >= 0.0))
    throw ConfigError("agent.belief_sd_thickness: must be >= 0");
  dsdp.validate();
  dqn_config().validate();
  if (!(ex1_learning_rate > 0.0)) throw ConfigError("agent.ex1_learning_rate: must be > 0");
  if (!(ex2_learning_rate > 0.0)) throw ConfigError("agent.ex2_learning_rate: must be > 0");
  if (!(ex1_reward_scale > 0.0)) throw ConfigError("agent.ex1_reward_scale: must be > 0");
  if (!(ex2_reward_scale > 0.0)) throw ConfigError("agent.ex2_reward_scale: must be > 0");
  if (!(qtable_alpha > 0.0 && qtable_alpha <= 1.0))
    throw ConfigError("agent.qtable_alpha: must be in (0, 1]");
}

ExperimentConfig parse_config(std::istream& is, ExperimentConfig config) {
  static const std::regex kFaultKey(R"(fault([0-9]+)_(locations|mean|sd))");
  static const std::set<std::string> kSections = {"harness", "geomodel", "env", "agent"};
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!kSections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    std::smatch match;
    if (section == "geomodel" && std::regex_match(key, match, kFaultKey)) {
      set_fault_key(config, full, std::stoul(match[1].str()), match[2].str(), value);
      continue;
    }
    const auto it = setters().find(full);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + full + "'");
    it->second(config, full, value);
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open config file");
  return parse_config(in, std::move(base));
}

void write_config(std::ostream& os, const ExperimentConfig& c) {
  os << "[harness]\nenv = " << c.env << "\nagent = " << c.agent << "\nseeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? ", " : "") << c.seeds[i];
  os << "\nepisodes = " << c.effective_episodes() << "\neval_realizations = " << c.eval_realizations
     << "\neval_seed = " << c.eval_seed << "\noutput = " << c.output_dir << "\n";
  if (!c.cache_dir.empty()) os << "cache_dir = " << c.cache_dir << "\n";
  os << "threads = " << c.threads << "\n\n[geomodel]\n";
  const auto& g = c.geo1;
  os << "n_points = " << g.n_points << "\ndx = " << num(g.dx) << "\nmean_top_depth = "
     << num(g.mean_top_depth) << "\nboundary_step_sd = " << num(g.boundary_step_sd)
     << "\nsmoothing_window = " << g.smoothing_window << "\nthickness_mean = " << num(g.thickness_mean)
     << "\nthickness_sd = " << num(g.thickness_sd) << "\nthickness_min = " << num(g.thickness_min)
     << "\nhq_fraction = " << num(g.hq_fraction) << "\nperm_high = " << num(g.perm_high)
     << "\nenv2_n_points = " << c.env2_n_points << "\nenv2_spacing = " << num(c.env2_spacing)
     << "\nenv2_top_depth = " << num(c.env2_top_depth) << "\nenv2_dip = " << num(c.env2_dip)
     << "\nenv2_thickness = " << num(c.env2_thickness) << "\nfaults = " << c.faults.size() << "\n";
  for (std::size_t f = 0; f < c.faults.size(); ++f) {
    os << "fault" << f + 1 << "_locations = " << join(c.faults[f].candidate_locations) << "\n"
       << "fault" << f + 1 << "_mean = " << num(c.faults[f].displacement_mean) << "\n"
       << "fault" << f + 1 << "_sd = " << num(c.faults[f].displacement_sd) << "\n";
  }
  os << "\n[env]\nscenarios = ";
  for (std::size_t i = 0; i < c.scenarios.size(); ++i)
    os << (i ? ", " : "") << num(c.scenarios[i].w1) << ':' << num(c.scenarios[i].w2) << ':'
       << num(c.scenarios[i].perm_low);
  os << "\nv_prod_eval = " << join(c.v_prod_eval) << "\nc_d = " << num(c.costs.c_d)
     << "\nc_st = " << num(c.costs.c_st) << "\nv_prod_min = " << num(c.costs.v_prod_min)
     << "\nv_prod_max = " << num(c.costs.v_prod_max) << "\nthickness_norm = " << num(c.env1.thickness_norm)
     << "\ninclination_norm = " << num(c.env1.inclination_norm) << "\nperm_norm = " << num(c.env1.perm_norm)
     << "\n\n[agent]\n";
  const auto gr = c.greedy_config();
  os << "greedy_mc_samples = " << c.greedy_mc_samples << "\nbelief_sd_top = "
     << num(gr.innovation_sd_top) << "\nbelief_sd_thickness = " << num(gr.innovation_sd_thickness)
     << "\ndsdp_bin_width = " << num(c.dsdp.bin_width) << "\ndsdp_depth_span = " << num(c.dsdp.depth_span)
     << "\ndsdp_mc_samples = " << c.dsdp.mc_samples << "\ndsdp_seed = " << c.dsdp.seed
     << "\nbuffer_capacity = " << c.dqn.buffer_capacity << "\nbatch_size = " << c.dqn.batch_size
     << "\ntarget_sync_interval = " << c.dqn.target_sync_interval << "\ngamma = " << num(c.dqn.gamma)
     << "\nepsilon_start = " << num(c.dqn.epsilon_start) << "\nepsilon_end = " << num(c.dqn.epsilon_end)
     << "\nepsilon_decay_fraction = " << num(c.dqn.epsilon_decay_fraction)
     << "\nwarmup = " << c.dqn.warmup << "\ntrain_every = " << c.dqn.train_every
     << "\noptimizer = " << (c.dqn.optimizer.kind == neural::OptimizerKind::kAdam ? "adam" : "sgd")
     << "\nex1_learning_rate = " << num(c.ex1_learning_rate)
     << "\nex2_learning_rate = " << num(c.ex2_learning_rate)
     << "\nmax_grad_norm = " << num(c.dqn.optimizer.max_grad_norm)
     << "\nex1_reward_scale = " << num(c.ex1_reward_scale)
     << "\nex2_reward_scale = " << num(c.ex2_reward_scale)
     << "\nex2_normalize_by_v_prod = " << (c.ex2_normalize_by_v_prod ? "true" : "false")
     << "\nqtable_alpha = " << num(c.qtable_alpha) << "\n";
}

}  // namespace geosteer::harness
