#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qflow/dense_array.hpp"
#include "qflow/rng.hpp"

namespace qflow {

struct StepResult {
  std::vector<double> next_observation;
  double reward = 0.0;
  bool terminal = false;
  std::map<std::string, double> info;
};

// Planar kinematic chain: |A| revolute joints, link length L/|A|, actions are
// bounded joint-angle increments. Observation: (sin, cos of each absolute
// link orientation, goal, end-effector position).
struct ChainConfig {
  int num_joints = 8;
  double total_length = 1.0;
  std::array<double, 2> goal{0.5, 0.5};
  bool goal_random = false;
  int episode_horizon = 200;
  double angle_rate = 0.1;  // max joint-angle change per step, radians
};

// Over-actuated point mass: |A| actuators mixed through a fixed unit-column
// dof x |A| matrix into a force on a damped double integrator. Observation:
// (position, velocity, goal).
struct RedundantConfig {
  int num_actuators = 32;
  int dof = 2;
  double action_cost = 0.01;
  std::vector<double> goal{3.0, 0.0};
  bool goal_random = false;
  int episode_horizon = 200;
  std::uint64_t mixing_seed = 7;
};

// End-effector position for cumulative revolute joints:
// x = sum_i l_i (cos T_i, sin T_i), T_i = sum_{j<=i} phi_j, l_i = L/|A|.
std::array<double, 2> forward_kinematics(std::span<const double> angles, const ChainConfig& config);

class Env {
 public:
  virtual ~Env() = default;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  // Clamps every action component into [-1, 1] before execution.
  virtual StepResult step(std::span<const double> action) = 0;
  virtual int observation_dim() const = 0;
  virtual int action_dim() const = 0;
};

class ChainEnv final : public Env {
 public:
  explicit ChainEnv(const ChainConfig& config);
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  int observation_dim() const override { return 2 * config_.num_joints + 4; }
  int action_dim() const override { return config_.num_joints; }

  const std::vector<double>& joint_angles() const { return angles_; }
  const std::array<double, 2>& goal() const { return goal_; }

 private:
  std::vector<double> observation() const;

  ChainConfig config_;
  std::vector<double> angles_;
  std::array<double, 2> goal_{};
  int steps_taken_ = 0;
  bool ready_ = false;
};

struct EnvConfig {
  enum class Kind { kChain, kRedundant };
  Kind kind = Kind::kChain;
  ChainConfig chain;
  RedundantConfig redundant;
};

std::unique_ptr<Env> make_env(const EnvConfig& config);

class RedundantEnv final : public Env {
 public:
  explicit RedundantEnv(const RedundantConfig& config);
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  int observation_dim() const override { return 3 * config_.dof; }
  int action_dim() const override { return config_.num_actuators; }

  const DenseArray& mixing_matrix() const { return mixing_; }
  const std::vector<double>& position() const { return position_; }

 private:
  std::vector<double> observation() const;

  RedundantConfig config_;
  DenseArray mixing_;  // dof x |A|, unit columns
  std::vector<double> position_, velocity_, goal_;
  int steps_taken_ = 0;
  bool ready_ = false;
};

}  // namespace qflow
