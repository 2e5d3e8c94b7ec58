#pragma once

#include <utility>

#include "qflow/adam.hpp"
#include "qflow/critic.hpp"
#include "qflow/nn.hpp"
#include "qflow/rng.hpp"

namespace qflow {

// State-conditioned diagonal Gaussian with tanh squashing. The trunk emits
// [mean | log-std]; log-std is hard-clamped into [log_std_min, log_std_max].
// Samples are reparameterized: a = tanh(mu + sigma * xi).
class GaussianSourcePolicy {
 public:
  struct Options {
    int hidden = 256;
    int hidden_layers = 3;
    double learning_rate = 3e-4;
    double log_std_min = -5.0;
    double log_std_max = 2.0;
  };

  GaussianSourcePolicy(int state_dim, int action_dim, const Options& options, Rng& init_rng);
  GaussianSourcePolicy(MlpNetwork trunk, int action_dim, const Options& options);

  int state_dim() const { return trunk_.input_dim(); }
  int action_dim() const { return action_dim_; }

  // Stochastic batch sample; pure given the rng stream.
  DenseArray sample(const DenseArray& states, Rng& rng) const;
  // Deterministic reparameterized path with caller-supplied standard-normal
  // noise (the sigma -> 0 limit is noise = 0).
  DenseArray sample_with_noise(const DenseArray& states, const DenseArray& noise) const;
  // tanh(mu(s)); no randomness.
  DenseArray mean_action(const DenseArray& states) const;

  std::pair<DenseArray, DenseArray> mean_and_log_std(const DenseArray& states) const;

  // One Adam step on the trunk minimizing -mean q_min(s, sample(s)).
  // The critic is used in eval mode and left untouched. Returns the loss.
  double update(QFunction& critic, const DenseArray& states, Rng& rng);

  // Loss (and optionally trunk parameter gradients) for a fixed noise draw.
  // With grads == nullptr this is a pure evaluation, usable for
  // finite-difference checks under common random numbers.
  double loss_with_noise(QFunction& critic, const DenseArray& states, const DenseArray& noise,
                         std::vector<DenseArray>* grads);

  MlpNetwork& trunk() { return trunk_; }
  const MlpNetwork& trunk() const { return trunk_; }
  const Options& options() const { return options_; }

 private:
  int action_dim_ = 0;
  Options options_;
  MlpNetwork trunk_;
  AdamState adam_;
};

}  // namespace qflow
