#include "qflow/envs.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <stdexcept>

#include "qflow/errors.hpp"

namespace qflow {

namespace {

constexpr double kIntegrationDt = 0.05;
constexpr double kVelocityDamping = 0.4;

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

void check_action_length(std::span<const double> action, int expected, const char* env_name) {
  if (static_cast<int>(action.size()) != expected)
    throw std::invalid_argument(std::string(env_name) + ": action length " +
                                std::to_string(action.size()) + " does not match |A|=" +
                                std::to_string(expected));
  for (double a : action)
    if (!std::isfinite(a)) throw NumericError(std::string(env_name) + ": non-finite action");
}

}  // namespace

std::unique_ptr<Env> make_env(const EnvConfig& config) {
  switch (config.kind) {
    case EnvConfig::Kind::kChain: return std::make_unique<ChainEnv>(config.chain);
    case EnvConfig::Kind::kRedundant: return std::make_unique<RedundantEnv>(config.redundant);
  }
  throw ConfigError("unknown environment kind");
}

std::array<double, 2> forward_kinematics(std::span<const double> angles, const ChainConfig& config) {
  if (static_cast<int>(angles.size()) != config.num_joints)
    throw std::invalid_argument("forward_kinematics: angle count does not match num_joints");
  const double link = config.total_length / config.num_joints;
  double theta = 0.0, x = 0.0, y = 0.0;
  for (double phi : angles) {
    theta += phi;
    x += link * std::cos(theta);
    y += link * std::sin(theta);
  }
  return {x, y};
}

ChainEnv::ChainEnv(const ChainConfig& config) : config_(config) {
  if (config_.num_joints < 1) throw ConfigError("chain env: num_joints must be >= 1");
  if (config_.total_length <= 0.0) throw ConfigError("chain env: total_length must be positive");
  if (config_.episode_horizon < 1) throw ConfigError("chain env: episode_horizon must be >= 1");
  if (config_.angle_rate <= 0.0) throw ConfigError("chain env: angle_rate must be positive");
}

std::vector<double> ChainEnv::reset(std::uint64_t seed) {
  angles_.assign(config_.num_joints, 0.0);
  goal_ = config_.goal;
  if (config_.goal_random) {
    Rng rng(Rng::derive(seed, 0x60a1));
    // Uniform over the disk of radius 0.9 L, which the chain can reach.
    const double radius = 0.9 * config_.total_length * std::sqrt(rng.uniform01());
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    goal_ = {radius * std::cos(angle), radius * std::sin(angle)};
  }
  steps_taken_ = 0;
  ready_ = true;
  return observation();
}

StepResult ChainEnv::step(std::span<const double> action) {
  if (!ready_) throw std::logic_error("chain env: step before reset");
  check_action_length(action, config_.num_joints, "chain env");
  for (int i = 0; i < config_.num_joints; ++i)
    angles_[i] += config_.angle_rate * clamp_unit(action[i]);

  const auto ee = forward_kinematics(angles_, config_);
  const double distance = std::hypot(ee[0] - goal_[0], ee[1] - goal_[1]);
  steps_taken_ += 1;

  StepResult result;
  result.next_observation = observation();
  result.reward = -distance;
  result.terminal = steps_taken_ >= config_.episode_horizon;
  result.info["distance"] = distance;
  result.info["ee_x"] = ee[0];
  result.info["ee_y"] = ee[1];
  return result;
}

std::vector<double> ChainEnv::observation() const {
  std::vector<double> obs;
  obs.reserve(observation_dim());
  double theta = 0.0;
  for (double phi : angles_) {
    theta += phi;
    obs.push_back(std::sin(theta));
    obs.push_back(std::cos(theta));
  }
  obs.push_back(goal_[0]);
  obs.push_back(goal_[1]);
  const auto ee = forward_kinematics(angles_, config_);
  obs.push_back(ee[0]);
  obs.push_back(ee[1]);
  return obs;
}

RedundantEnv::RedundantEnv(const RedundantConfig& config) : config_(config) {
  if (config_.dof < 1) throw ConfigError("redundant env: dof must be >= 1");
  if (config_.num_actuators < config_.dof)
    throw ConfigError("redundant env: need num_actuators >= dof (over-actuation)");
  if (config_.episode_horizon < 1) throw ConfigError("redundant env: episode_horizon must be >= 1");
  if (config_.action_cost < 0.0) throw ConfigError("redundant env: action_cost must be >= 0");
  if (static_cast<int>(config_.goal.size()) != config_.dof) {
    // Pad or trim the default goal to the configured dof.
    config_.goal.resize(config_.dof, 0.0);
  }

  mixing_ = DenseArray(config_.dof, config_.num_actuators);
  Rng rng(Rng::derive(config_.mixing_seed, 0x3a7d));
  for (int c = 0; c < config_.num_actuators; ++c) {
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (int r = 0; r < config_.dof; ++r) {
        mixing_.at(r, c) = rng.normal();
        norm_sq += mixing_.at(r, c) * mixing_.at(r, c);
      }
    } while (norm_sq < 1e-12);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (int r = 0; r < config_.dof; ++r) mixing_.at(r, c) *= inv;
  }
}

std::vector<double> RedundantEnv::reset(std::uint64_t seed) {
  position_.assign(config_.dof, 0.0);
  velocity_.assign(config_.dof, 0.0);
  goal_ = config_.goal;
  if (config_.goal_random) {
    Rng rng(Rng::derive(seed, 0x60a2));
    for (int d = 0; d < config_.dof; ++d) goal_[d] = rng.uniform(-3.0, 3.0);
  }
  steps_taken_ = 0;
  ready_ = true;
  return observation();
}

StepResult RedundantEnv::step(std::span<const double> action) {
  if (!ready_) throw std::logic_error("redundant env: step before reset");
  check_action_length(action, config_.num_actuators, "redundant env");

  std::vector<double> clamped(action.begin(), action.end());
  double action_norm_sq = 0.0;
  for (double& a : clamped) {
    a = clamp_unit(a);
    action_norm_sq += a * a;
  }

  std::vector<double> force(config_.dof, 0.0);
  for (int r = 0; r < config_.dof; ++r) {
    const double* row = mixing_.data() + static_cast<std::size_t>(r) * config_.num_actuators;
    double f = 0.0;
    for (int c = 0; c < config_.num_actuators; ++c) f += row[c] * clamped[c];
    force[r] = f;
  }

  double dist_sq = 0.0;
  for (int d = 0; d < config_.dof; ++d) {
    velocity_[d] = (1.0 - kVelocityDamping) * velocity_[d] + kIntegrationDt * force[d];
    position_[d] += kIntegrationDt * velocity_[d];
    const double delta = position_[d] - goal_[d];
    dist_sq += delta * delta;
  }
  steps_taken_ += 1;

  StepResult result;
  result.next_observation = observation();
  result.reward = -dist_sq - config_.action_cost * action_norm_sq;
  result.terminal = steps_taken_ >= config_.episode_horizon;
  result.info["distance"] = std::sqrt(dist_sq);
  result.info["action_norm"] = std::sqrt(action_norm_sq);
  return result;
}

std::vector<double> RedundantEnv::observation() const {
  std::vector<double> obs;
  obs.reserve(observation_dim());
  obs.insert(obs.end(), position_.begin(), position_.end());
  obs.insert(obs.end(), velocity_.begin(), velocity_.end());
  obs.insert(obs.end(), goal_.begin(), goal_.end());
  return obs;
}

}  // namespace qflow
