#include "qflow/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qflow/errors.hpp"
#include "qflow/report_io.hpp"

namespace qflow {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a real number");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an integer");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an unsigned integer");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<int>(parse_long(key, item)));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string default_output_root() {
  const char* env = std::getenv("QFLOW_OUTDIR");
  return env && *env ? env : "runs";
}

void apply_key(RunConfig& c, const std::string& key, const std::string& value) {
  TrainConfig& t = c.train;
  AnalysisConfig& a = c.analysis;

  if (key == "run.outdir") t.outdir = value;
  else if (key == "run.seed") t.seed = parse_u64(key, value);
  else if (key == "run.total_env_steps") t.total_env_steps = parse_long(key, value);
  else if (key == "run.parallel_envs") t.parallel_envs = static_cast<int>(parse_long(key, value));
  else if (key == "run.eval_every") t.eval_every = parse_long(key, value);
  else if (key == "run.eval_episodes") t.eval_episodes = static_cast<int>(parse_long(key, value));
  else if (key == "run.warmup_transitions") t.warmup_transitions = static_cast<std::size_t>(parse_long(key, value));
  else if (key == "run.emit_svg") t.emit_svg = parse_bool(key, value);
  else if (key == "run.exploration_mode") {
    if (value == "flow") t.exploration_mode = ExplorationMode::kFlow;
    else if (value == "gaussian") t.exploration_mode = ExplorationMode::kGaussian;
    else throw ConfigError("config key 'run.exploration_mode': expected flow or gaussian, got '" + value + "'");
  }
  else if (key == "env.kind") {
    if (value == "chain") t.env.kind = EnvConfig::Kind::kChain;
    else if (value == "redundant") t.env.kind = EnvConfig::Kind::kRedundant;
    else throw ConfigError("config key 'env.kind': expected chain or redundant, got '" + value + "'");
  }
  else if (key == "env.num_actuators") {
    const int n = static_cast<int>(parse_long(key, value));
    t.env.chain.num_joints = n;
    t.env.redundant.num_actuators = n;
  }
  else if (key == "env.horizon") {
    const int h = static_cast<int>(parse_long(key, value));
    t.env.chain.episode_horizon = h;
    t.env.redundant.episode_horizon = h;
  }
  else if (key == "env.chain_length") t.env.chain.total_length = parse_double(key, value);
  else if (key == "env.angle_rate") t.env.chain.angle_rate = parse_double(key, value);
  else if (key == "env.goal_x") c.goal_x = parse_double(key, value);
  else if (key == "env.goal_y") c.goal_y = parse_double(key, value);
  else if (key == "env.goal_random") {
    const bool b = parse_bool(key, value);
    t.env.chain.goal_random = b;
    t.env.redundant.goal_random = b;
  }
  else if (key == "env.dof") t.env.redundant.dof = static_cast<int>(parse_long(key, value));
  else if (key == "env.action_cost") t.env.redundant.action_cost = parse_double(key, value);
  else if (key == "env.mixing_seed") t.env.redundant.mixing_seed = parse_u64(key, value);
  else if (key == "train.discount") t.discount = parse_double(key, value);
  else if (key == "train.batch_size") t.batch_size = static_cast<int>(parse_long(key, value));
  else if (key == "train.buffer_capacity") t.buffer_capacity = static_cast<std::size_t>(parse_long(key, value));
  else if (key == "train.learning_rate") t.learning_rate = parse_double(key, value);
  else if (key == "train.critic_hidden") t.critic_hidden = static_cast<int>(parse_long(key, value));
  else if (key == "train.critic_layers") t.critic_layers = static_cast<int>(parse_long(key, value));
  else if (key == "train.policy_hidden") t.policy_hidden = static_cast<int>(parse_long(key, value));
  else if (key == "train.policy_layers") t.policy_layers = static_cast<int>(parse_long(key, value));
  else if (key == "train.flow_hidden") t.flow_hidden = static_cast<int>(parse_long(key, value));
  else if (key == "train.flow_layers") t.flow_layers = static_cast<int>(parse_long(key, value));
  else if (key == "train.bn_decay") t.bn_decay = parse_double(key, value);
  else if (key == "train.bn_epsilon") t.bn_epsilon = parse_double(key, value);
  else if (key == "train.superiority_shared_source") t.superiority_shared_source = parse_bool(key, value);
  else if (key == "flow.ascent_steps") t.flow.ascent_steps = static_cast<int>(parse_long(key, value));
  else if (key == "flow.eta") t.flow.eta = parse_double(key, value);
  else if (key == "flow.ode_steps") t.flow.ode_steps = static_cast<int>(parse_long(key, value));
  else if (key == "flow.ode_dt") t.flow.ode_dt = parse_double(key, value);
  else if (key == "analysis.dims") a.dims = parse_int_list(key, value);
  else if (key == "analysis.sigma") a.sigma = parse_double(key, value);
  else if (key == "analysis.chain_length") a.chain_length = parse_double(key, value);
  else if (key == "analysis.samples") a.samples = parse_long(key, value);
  else if (key == "analysis.perturbation") {
    if (value == "link") a.perturbation = PerturbationModel::kLink;
    else if (value == "joint") a.perturbation = PerturbationModel::kJoint;
    else throw ConfigError("config key 'analysis.perturbation': expected link or joint, got '" + value + "'");
  }
  else if (key == "analysis.monotonicity_mode") {
    if (value != "quadratic" && value != "random-net" && value != "checkpoint")
      throw ConfigError("config key 'analysis.monotonicity_mode': expected quadratic, random-net or checkpoint");
    a.monotonicity_mode = value;
  }
  else if (key == "analysis.grid_points") a.grid_points = static_cast<int>(parse_long(key, value));
  else if (key == "analysis.states") a.states = static_cast<int>(parse_long(key, value));
  else if (key == "analysis.action_samples") a.action_samples = static_cast<int>(parse_long(key, value));
  else if (key == "analysis.eta") a.eta = parse_double(key, value);
  else if (key == "analysis.ascent_steps") a.ascent_steps = static_cast<int>(parse_long(key, value));
  else if (key == "analysis.critic_hidden") a.critic_hidden = static_cast<int>(parse_long(key, value));
  else if (key == "analysis.critic_layers") a.critic_layers = static_cast<int>(parse_long(key, value));
  else if (key == "analysis.quad_target") a.quad_target = parse_double(key, value);
  else if (key == "analysis.state_dim") a.state_dim = static_cast<int>(parse_long(key, value));
  else if (key == "analysis.action_dim") a.action_dim = static_cast<int>(parse_long(key, value));
  else if (key == "analysis.states_per_point") a.states_per_point = static_cast<int>(parse_long(key, value));
  else if (key == "analysis.samples_per_state") a.samples_per_state = static_cast<int>(parse_long(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_override(RunConfig& config, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + item + "' is not of the form key=value");
  apply_key(config, trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
}

void RunConfig::finalize() {
  // Per-kind goal defaults; explicit keys override both kinds' configs.
  if (goal_x) {
    train.env.chain.goal[0] = *goal_x;
    if (!train.env.redundant.goal.empty()) train.env.redundant.goal[0] = *goal_x;
  }
  if (goal_y) {
    train.env.chain.goal[1] = *goal_y;
    if (train.env.redundant.dof >= 2) {
      train.env.redundant.goal.resize(std::max<std::size_t>(train.env.redundant.goal.size(), 2), 0.0);
      train.env.redundant.goal[1] = *goal_y;
    }
  }
  if (train.outdir.empty()) train.outdir = default_output_root() + "/run";
  train.validate();
  if (analysis.grid_points < 2) throw ConfigError("analysis.grid_points must be >= 2");
  if (analysis.sigma <= 0.0) throw ConfigError("analysis.sigma must be positive");
  if (analysis.samples < 2) throw ConfigError("analysis.samples must be >= 2");
  if (analysis.states < 1 || analysis.action_samples < 1)
    throw ConfigError("analysis.states and analysis.action_samples must be >= 1");
  if (analysis.ascent_steps < 0) throw ConfigError("analysis.ascent_steps must be >= 0");
  if (analysis.samples_per_state < 2) throw ConfigError("analysis.samples_per_state must be >= 2");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::stringstream ss(text);
  std::string line;
  int line_number = 0;
  while (std::getline(ss, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_number) + " is not 'key = value': " + stripped);
    apply_key(config, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return config;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  RunConfig config = parse_config_text(text);
  for (const auto& item : overrides) apply_override(config, item);
  config.finalize();
  return config;
}

std::string snapshot_text(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const AnalysisConfig& a = c.analysis;
  std::ostringstream out;
  const auto put = [&out](const std::string& key, const std::string& value) {
    out << key << " = " << value << "\n";
  };

  put("run.outdir", t.outdir);
  put("run.seed", std::to_string(t.seed));
  put("run.total_env_steps", std::to_string(t.total_env_steps));
  put("run.parallel_envs", std::to_string(t.parallel_envs));
  put("run.eval_every", std::to_string(t.eval_every));
  put("run.eval_episodes", std::to_string(t.eval_episodes));
  put("run.warmup_transitions", std::to_string(t.warmup_transitions));
  put("run.emit_svg", bool_text(t.emit_svg));
  put("run.exploration_mode", t.exploration_mode == ExplorationMode::kFlow ? "flow" : "gaussian");
  put("env.kind", t.env.kind == EnvConfig::Kind::kChain ? "chain" : "redundant");
  put("env.num_actuators", std::to_string(t.env.kind == EnvConfig::Kind::kChain
                                              ? t.env.chain.num_joints
                                              : t.env.redundant.num_actuators));
  put("env.horizon", std::to_string(t.env.kind == EnvConfig::Kind::kChain
                                        ? t.env.chain.episode_horizon
                                        : t.env.redundant.episode_horizon));
  put("env.chain_length", format_double(t.env.chain.total_length));
  put("env.angle_rate", format_double(t.env.chain.angle_rate));
  put("env.goal_x", format_double(t.env.kind == EnvConfig::Kind::kChain ? t.env.chain.goal[0]
                                                                        : t.env.redundant.goal[0]));
  put("env.goal_y", format_double(t.env.kind == EnvConfig::Kind::kChain
                                      ? t.env.chain.goal[1]
                                      : (t.env.redundant.goal.size() > 1 ? t.env.redundant.goal[1] : 0.0)));
  put("env.goal_random", bool_text(t.env.chain.goal_random));
  put("env.dof", std::to_string(t.env.redundant.dof));
  put("env.action_cost", format_double(t.env.redundant.action_cost));
  put("env.mixing_seed", std::to_string(t.env.redundant.mixing_seed));
  put("train.discount", format_double(t.discount));
  put("train.batch_size", std::to_string(t.batch_size));
  put("train.buffer_capacity", std::to_string(t.buffer_capacity));
  put("train.learning_rate", format_double(t.learning_rate));
  put("train.critic_hidden", std::to_string(t.critic_hidden));
  put("train.critic_layers", std::to_string(t.critic_layers));
  put("train.policy_hidden", std::to_string(t.policy_hidden));
  put("train.policy_layers", std::to_string(t.policy_layers));
  put("train.flow_hidden", std::to_string(t.flow_hidden));
  put("train.flow_layers", std::to_string(t.flow_layers));
  put("train.bn_decay", format_double(t.bn_decay));
  put("train.bn_epsilon", format_double(t.bn_epsilon));
  put("train.superiority_shared_source", bool_text(t.superiority_shared_source));
  put("flow.ascent_steps", std::to_string(t.flow.ascent_steps));
  put("flow.eta", format_double(t.flow.eta));
  put("flow.ode_steps", std::to_string(t.flow.ode_steps));
  put("flow.ode_dt", format_double(t.flow.ode_dt));
  {
    std::string dims;
    for (std::size_t i = 0; i < a.dims.size(); ++i) {
      if (i) dims += ",";
      dims += std::to_string(a.dims[i]);
    }
    put("analysis.dims", dims);
  }
  put("analysis.sigma", format_double(a.sigma));
  put("analysis.chain_length", format_double(a.chain_length));
  put("analysis.samples", std::to_string(a.samples));
  put("analysis.perturbation", a.perturbation == PerturbationModel::kLink ? "link" : "joint");
  put("analysis.monotonicity_mode", a.monotonicity_mode);
  put("analysis.grid_points", std::to_string(a.grid_points));
  put("analysis.states", std::to_string(a.states));
  put("analysis.action_samples", std::to_string(a.action_samples));
  put("analysis.eta", format_double(a.eta));
  put("analysis.ascent_steps", std::to_string(a.ascent_steps));
  put("analysis.critic_hidden", std::to_string(a.critic_hidden));
  put("analysis.critic_layers", std::to_string(a.critic_layers));
  put("analysis.quad_target", format_double(a.quad_target));
  put("analysis.state_dim", std::to_string(a.state_dim));
  put("analysis.action_dim", std::to_string(a.action_dim));
  put("analysis.states_per_point", std::to_string(a.states_per_point));
  put("analysis.samples_per_state", std::to_string(a.samples_per_state));
  return out.str();
}

}  // namespace qflow
