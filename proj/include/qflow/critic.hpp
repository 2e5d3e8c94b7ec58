#pragma once

#include <vector>

#include "qflow/adam.hpp"
#include "qflow/nn.hpp"
#include "qflow/replay_buffer.hpp"

namespace qflow {

// Anything that can score state-action pairs and expose the action-gradient
// of that score. Implemented by TwinCritic and by analytic adapters.
class QFunction {
 public:
  virtual ~QFunction() = default;
  // Minimum-head values in eval mode; pure.
  virtual std::vector<double> q_values(const DenseArray& states, const DenseArray& actions) const = 0;
  // Gradient of the minimum head w.r.t. the actions (ties resolve to the
  // first head). Deterministic; mutates no parameters or statistics.
  virtual DenseArray action_gradients(const DenseArray& states, const DenseArray& actions) = 0;
};

// Two independently parameterized batch-normalized Q-networks trained by
// Bellman regression against the elementwise-minimum target. There is no
// target network: current and next state-action pairs pass through batch
// norm as one concatenated batch and the regression target is a constant.
class TwinCritic final : public QFunction {
 public:
  struct Options {
    int hidden = 256;
    int hidden_layers = 3;
    double discount = 0.99;
    double learning_rate = 3e-4;
    double bn_decay = 0.99;
    double bn_epsilon = 1e-5;
  };

  TwinCritic(int state_dim, int action_dim, const Options& options, Rng& init_rng);
  // Rebuild from checkpointed networks.
  TwinCritic(MlpNetwork q1, MlpNetwork q2, int state_dim, int action_dim, const Options& options);

  std::vector<double> q_values(const DenseArray& states, const DenseArray& actions) const override;
  DenseArray action_gradients(const DenseArray& states, const DenseArray& actions) override;

  // Elementwise minimum of both heads. Train mode runs each head's batch
  // norm in train mode (one running-statistics update per head).
  std::vector<double> q_min(const DenseArray& states, const DenseArray& actions, Mode mode);

  // One Bellman regression step on both heads; next_actions are behavior
  // policy samples for batch.next_states. Returns the mean head loss.
  double update(const TransitionBatch& batch, const DenseArray& next_actions);

  double discount() const { return options_.discount; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  MlpNetwork& q1() { return q1_; }
  MlpNetwork& q2() { return q2_; }
  const MlpNetwork& q1() const { return q1_; }
  const MlpNetwork& q2() const { return q2_; }

  // Names of every parameter array this critic owns (structural check
  // surface: exactly the two heads, no third parameter copy).
  std::vector<std::string> owned_parameter_names() const;

  long updates_performed() const { return updates_; }

 private:
  int state_dim_ = 0;
  int action_dim_ = 0;
  Options options_;
  MlpNetwork q1_, q2_;
  AdamState adam1_, adam2_;
  long updates_ = 0;
};

}  // namespace qflow
