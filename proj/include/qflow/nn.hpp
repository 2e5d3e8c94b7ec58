#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qflow/dense_array.hpp"
#include "qflow/rng.hpp"

namespace qflow {

enum class Activation { kRelu, kTanh, kIdentity };
enum class Mode { kTrain, kEval };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Batch normalization over the batch dimension with running statistics.
// Normalization uses the population (biased) batch variance; running
// statistics follow running = decay * running + (1 - decay) * batch_stat.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(int dim, double decay, double epsilon);

  int dim() const { return gamma_.cols(); }
  double decay() const { return decay_; }
  double epsilon() const { return epsilon_; }

  // Train mode updates running statistics and caches batch quantities for
  // backward; eval mode normalizes with the stored statistics.
  DenseArray forward(const DenseArray& x, Mode mode);
  // Pure eval-mode normalization; touches no state.
  DenseArray evaluate(const DenseArray& x) const;
  // Consumes the cache from the last forward.
  DenseArray backward(const DenseArray& upstream, DenseArray& dgamma, DenseArray& dbeta);

  DenseArray& gamma() { return gamma_; }
  DenseArray& beta() { return beta_; }
  DenseArray& running_mean() { return running_mean_; }
  DenseArray& running_var() { return running_var_; }
  const DenseArray& running_mean() const { return running_mean_; }
  const DenseArray& running_var() const { return running_var_; }

 private:
  DenseArray gamma_, beta_;                // trainable, 1 x dim
  DenseArray running_mean_, running_var_;  // statistics, 1 x dim
  double decay_ = 0.99;
  double epsilon_ = 1e-5;

  // backward cache
  bool has_cache_ = false;
  Mode cached_mode_ = Mode::kEval;
  DenseArray xhat_;
  std::vector<double> inv_std_;
};

// Fixed-topology dense network: optional input batch norm, then a chain of
// linear layers each with optional batch norm (before the activation).
class MlpNetwork {
 public:
  struct LayerSpec {
    int out_dim = 0;
    Activation activation = Activation::kIdentity;
    bool batch_norm = false;
  };

  struct Options {
    bool input_batch_norm = false;
    double bn_decay = 0.99;
    double bn_epsilon = 1e-5;
    bool zero_init_final = false;  // final layer starts as the zero map
  };

  MlpNetwork() = default;
  MlpNetwork(int input_dim, std::vector<LayerSpec> layers, const Options& options, Rng& init_rng);

  int input_dim() const { return input_dim_; }
  int output_dim() const;

  // Pure eval-mode pass; safe to call concurrently, leaves no cache.
  DenseArray evaluate(const DenseArray& input) const;

  // Caching pass for a subsequent backward. Train mode updates batch-norm
  // running statistics. Only one cached forward may be outstanding.
  const DenseArray& forward(const DenseArray& input, Mode mode);

  struct Gradients {
    std::vector<DenseArray> params;  // same order as parameters()
    DenseArray inputs;
  };
  // Both consume the cached forward; calling without one is an error.
  Gradients backward(const DenseArray& upstream);
  DenseArray backward_inputs(const DenseArray& upstream);

  std::vector<DenseArray*> parameters();
  std::vector<const DenseArray*> parameters() const;

  // Persistent state (parameters plus batch-norm running statistics),
  // in the fixed order declared by the checkpoint manifest.
  std::vector<std::pair<std::string, DenseArray*>> named_state();
  std::vector<std::pair<std::string, const DenseArray*>> named_state() const;

  const Options& options() const { return options_; }
  const std::vector<LayerSpec>& layer_specs() const { return specs_; }

 private:
  struct Layer {
    DenseArray weight;  // in x out
    DenseArray bias;    // 1 x out
    std::optional<BatchNorm> bn;
    Activation activation = Activation::kIdentity;
  };

  DenseArray run(const DenseArray& input, Mode mode, bool cache);
  Gradients backprop(const DenseArray& upstream, bool want_param_grads);

  int input_dim_ = 0;
  std::vector<LayerSpec> specs_;
  Options options_;
  std::optional<BatchNorm> input_bn_;
  std::vector<Layer> layers_;

  // backward cache
  bool has_cache_ = false;
  std::vector<DenseArray> cached_inputs_;  // input to each linear layer
  std::vector<DenseArray> cached_post_;    // post-activation output of each layer
  DenseArray cached_net_input_;
  DenseArray cached_output_;
};

// Architecture builders used across the project. Hidden layers are relu; the
// critic applies batch norm to the concatenated input and after every hidden
// linear layer, policies and velocity fields use no normalization.
MlpNetwork make_critic_net(int state_dim, int action_dim, int hidden, int hidden_layers,
                           double bn_decay, double bn_epsilon, Rng& init_rng);
MlpNetwork make_policy_trunk(int state_dim, int action_dim, int hidden, int hidden_layers, Rng& init_rng);
MlpNetwork make_velocity_net(int state_dim, int action_dim, int hidden, int hidden_layers, Rng& init_rng);

}  // namespace qflow
