#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qflow/critic.hpp"
#include "qflow/envs.hpp"
#include "qflow/flow_policy.hpp"
#include "qflow/replay_buffer.hpp"
#include "qflow/source_policy.hpp"

namespace qflow {

enum class ExplorationMode { kFlow, kGaussian };

struct TrainConfig {
  EnvConfig env;
  int parallel_envs = 8;
  long total_env_steps = 100000;
  int batch_size = 256;
  std::size_t buffer_capacity = 1000000;
  std::size_t warmup_transitions = 5000;
  double discount = 0.99;
  double learning_rate = 3e-4;
  int critic_hidden = 256;
  int critic_layers = 3;
  int policy_hidden = 256;
  int policy_layers = 3;
  int flow_hidden = 256;
  int flow_layers = 3;
  double bn_decay = 0.99;
  double bn_epsilon = 1e-5;
  FlowConfig flow;
  long eval_every = 5000;
  int eval_episodes = 5;
  ExplorationMode exploration_mode = ExplorationMode::kFlow;
  bool superiority_shared_source = false;
  std::uint64_t seed = 0;
  std::string outdir;                 // empty: keep everything in memory
  bool emit_svg = false;
  std::string resolved_config_text;   // echoed into checkpoints

  void validate() const;
};

struct TrainRecord {
  long env_steps = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double flow_loss = 0.0;
  double superiority_ratio = 0.0;
  double clamp_rate = 0.0;
  double wall_seconds = 0.0;
  // Mean q(a1) - q(a0) of the flow-matching targets at this record; valid
  // only in flow mode after warmup.
  double value_gain = 0.0;
  bool value_gain_valid = false;
};

struct TrainReport {
  std::vector<TrainRecord> records;
  long env_steps = 0;
  long critic_updates = 0;
  long actor_updates = 0;
  long flow_updates = 0;
  long actions_flow = 0;
  long actions_gaussian = 0;
  long transitions_pushed = 0;
};

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
  int episodes = 0;
};

// Deterministic evaluation: episodes roll out with deterministic flow
// sampling (source mean transported by the field, final clamp).
EvalStats evaluate(const GaussianSourcePolicy& source, const VelocityField& field,
                   const EnvConfig& env_config, const FlowConfig& flow_config, int episodes,
                   std::uint64_t seed);

// Fraction of states whose flow action strictly beats an (independently
// drawn, unless shared_source) source action under q. Always in [0, 1].
double flow_superiority_ratio(const QFunction& critic, const GaussianSourcePolicy& source,
                              const VelocityField& field, const FlowConfig& flow_config,
                              const DenseArray& states, Rng& rng, bool shared_source);

// Runs the full training loop: synchronous parallel rollout with the
// configured behavior policy, replay storage, and one critic / one actor /
// one flow-matching update per parallel sampling step after warmup.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  TrainReport run();

  const TwinCritic& critic() const { return *critic_; }
  const GaussianSourcePolicy& source_policy() const { return *source_; }
  const VelocityField& velocity_field() const { return *field_; }
  const TrainConfig& config() const { return config_; }

 private:
  void write_checkpoint(long step) const;

  TrainConfig config_;
  int state_dim_ = 0;
  int action_dim_ = 0;
  std::unique_ptr<TwinCritic> critic_;
  std::unique_ptr<GaussianSourcePolicy> source_;
  std::unique_ptr<VelocityField> field_;
};

}  // namespace qflow
