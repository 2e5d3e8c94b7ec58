#include "qflow/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "qflow/errors.hpp"

namespace qflow {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation tag: " + name);
}

BatchNorm::BatchNorm(int dim, double decay, double epsilon)
    : gamma_(1, dim, 1.0), beta_(1, dim, 0.0), running_mean_(1, dim, 0.0),
      running_var_(1, dim, 1.0), decay_(decay), epsilon_(epsilon) {
  if (decay <= 0.0 || decay >= 1.0) throw ConfigError("batch-norm decay must lie in (0,1)");
  if (epsilon <= 0.0) throw ConfigError("batch-norm epsilon must be positive");
}

DenseArray BatchNorm::forward(const DenseArray& x, Mode mode) {
  const int d = dim();
  const int b = x.rows();
  if (x.cols() != d) throw std::invalid_argument("BatchNorm::forward: feature dim mismatch");

  xhat_ = DenseArray(b, d);
  inv_std_.assign(d, 0.0);

  if (mode == Mode::kTrain) {
    if (b < 1) throw std::invalid_argument("BatchNorm: empty batch in train mode");
    for (int c = 0; c < d; ++c) {
      double mean = 0.0;
      for (int r = 0; r < b; ++r) mean += x.at(r, c);
      mean /= b;
      double var = 0.0;
      for (int r = 0; r < b; ++r) {
        const double dx = x.at(r, c) - mean;
        var += dx * dx;
      }
      var /= b;
      inv_std_[c] = 1.0 / std::sqrt(var + epsilon_);
      for (int r = 0; r < b; ++r) xhat_.at(r, c) = (x.at(r, c) - mean) * inv_std_[c];
      running_mean_.at(0, c) = decay_ * running_mean_.at(0, c) + (1.0 - decay_) * mean;
      running_var_.at(0, c) = decay_ * running_var_.at(0, c) + (1.0 - decay_) * var;
    }
  } else {
    for (int c = 0; c < d; ++c) {
      inv_std_[c] = 1.0 / std::sqrt(running_var_.at(0, c) + epsilon_);
      const double mean = running_mean_.at(0, c);
      for (int r = 0; r < b; ++r) xhat_.at(r, c) = (x.at(r, c) - mean) * inv_std_[c];
    }
  }

  has_cache_ = true;
  cached_mode_ = mode;

  DenseArray y(b, d);
  for (int r = 0; r < b; ++r)
    for (int c = 0; c < d; ++c) y.at(r, c) = gamma_.at(0, c) * xhat_.at(r, c) + beta_.at(0, c);
  return y;
}

DenseArray BatchNorm::evaluate(const DenseArray& x) const {
  const int d = dim();
  if (x.cols() != d) throw std::invalid_argument("BatchNorm::evaluate: feature dim mismatch");
  DenseArray y(x.rows(), d);
  for (int c = 0; c < d; ++c) {
    const double inv = 1.0 / std::sqrt(running_var_.at(0, c) + epsilon_);
    const double mean = running_mean_.at(0, c);
    const double g = gamma_.at(0, c);
    const double sh = beta_.at(0, c);
    for (int r = 0; r < x.rows(); ++r) y.at(r, c) = g * (x.at(r, c) - mean) * inv + sh;
  }
  return y;
}

DenseArray BatchNorm::backward(const DenseArray& upstream, DenseArray& dgamma, DenseArray& dbeta) {
  if (!has_cache_) throw std::logic_error("BatchNorm::backward without cached forward");
  const int d = dim();
  const int b = upstream.rows();
  if (upstream.cols() != d || xhat_.rows() != b)
    throw std::invalid_argument("BatchNorm::backward: shape mismatch with cache");

  dgamma = DenseArray(1, d);
  dbeta = DenseArray(1, d);
  DenseArray dx(b, d);

  for (int c = 0; c < d; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int r = 0; r < b; ++r) {
      sum_dy += upstream.at(r, c);
      sum_dy_xhat += upstream.at(r, c) * xhat_.at(r, c);
    }
    dgamma.at(0, c) = sum_dy_xhat;
    dbeta.at(0, c) = sum_dy;
    const double g = gamma_.at(0, c);
    if (cached_mode_ == Mode::kTrain) {
      // dx through the batch statistics (population variance).
      for (int r = 0; r < b; ++r) {
        const double dxhat = upstream.at(r, c) * g;
        dx.at(r, c) = inv_std_[c] * (dxhat - (g / b) * sum_dy - (g / b) * sum_dy_xhat * xhat_.at(r, c));
      }
    } else {
      const double scale = g * inv_std_[c];
      for (int r = 0; r < b; ++r) dx.at(r, c) = upstream.at(r, c) * scale;
    }
  }
  has_cache_ = false;
  return dx;
}

namespace {

void apply_activation(DenseArray& z, Activation act) {
  double* p = z.data();
  switch (act) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < z.size(); ++i)
        if (p[i] < 0.0) p[i] = 0.0;
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::tanh(p[i]);
      break;
    case Activation::kIdentity:
      break;
  }
}

// d(activation)/dz expressed through the post-activation value.
void apply_activation_grad(DenseArray& upstream, const DenseArray& post, Activation act) {
  double* pu = upstream.data();
  const double* pp = post.data();
  switch (act) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < upstream.size(); ++i)
        if (pp[i] <= 0.0) pu[i] = 0.0;
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < upstream.size(); ++i) pu[i] *= 1.0 - pp[i] * pp[i];
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace

MlpNetwork::MlpNetwork(int input_dim, std::vector<LayerSpec> layers, const Options& options, Rng& init_rng)
    : input_dim_(input_dim), specs_(std::move(layers)), options_(options) {
  if (input_dim <= 0) throw ConfigError("network input dimension must be positive");
  if (specs_.empty()) throw ConfigError("network needs at least one layer");

  if (options_.input_batch_norm)
    input_bn_.emplace(input_dim, options_.bn_decay, options_.bn_epsilon);

  int in = input_dim;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& spec = specs_[i];
    if (spec.out_dim <= 0) throw ConfigError("layer output dimension must be positive");
    Layer layer;
    layer.weight = DenseArray(in, spec.out_dim);
    layer.bias = DenseArray(1, spec.out_dim);
    const bool zero = options_.zero_init_final && i + 1 == specs_.size();
    if (!zero) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (std::size_t k = 0; k < layer.weight.size(); ++k)
        layer.weight.data()[k] = init_rng.uniform(-bound, bound);
      for (std::size_t k = 0; k < layer.bias.size(); ++k)
        layer.bias.data()[k] = init_rng.uniform(-bound, bound);
    }
    if (spec.batch_norm) layer.bn.emplace(spec.out_dim, options_.bn_decay, options_.bn_epsilon);
    layer.activation = spec.activation;
    layers_.push_back(std::move(layer));
    in = spec.out_dim;
  }
}

int MlpNetwork::output_dim() const { return specs_.empty() ? 0 : specs_.back().out_dim; }

DenseArray MlpNetwork::run(const DenseArray& input, Mode mode, bool cache) {
  if (input.cols() != input_dim_)
    throw std::invalid_argument("forward: input has " + std::to_string(input.cols()) +
                                " columns, network expects " + std::to_string(input_dim_));
  if (cache) {
    cached_inputs_.clear();
    cached_post_.clear();
    cached_net_input_ = input;
  }

  DenseArray x = input_bn_ ? input_bn_->forward(input, mode) : input;
  for (auto& layer : layers_) {
    if (cache) cached_inputs_.push_back(x);
    DenseArray z = linalg::matmul(x, layer.weight);
    linalg::add_row_broadcast(z, layer.bias);
    if (layer.bn) z = layer.bn->forward(z, mode);
    apply_activation(z, layer.activation);
    if (cache) cached_post_.push_back(z);
    x = std::move(z);
  }
  x.require_finite("network forward output");
  if (cache) {
    cached_output_ = x;
    has_cache_ = true;
  }
  return x;
}

DenseArray MlpNetwork::evaluate(const DenseArray& input) const {
  if (input.cols() != input_dim_)
    throw std::invalid_argument("evaluate: input has " + std::to_string(input.cols()) +
                                " columns, network expects " + std::to_string(input_dim_));
  DenseArray x = input_bn_ ? input_bn_->evaluate(input) : input;
  for (const auto& layer : layers_) {
    DenseArray z = linalg::matmul(x, layer.weight);
    linalg::add_row_broadcast(z, layer.bias);
    if (layer.bn) z = layer.bn->evaluate(z);
    apply_activation(z, layer.activation);
    x = std::move(z);
  }
  x.require_finite("network evaluate output");
  return x;
}

const DenseArray& MlpNetwork::forward(const DenseArray& input, Mode mode) {
  run(input, mode, /*cache=*/true);
  return cached_output_;
}

MlpNetwork::Gradients MlpNetwork::backprop(const DenseArray& upstream, bool want_param_grads) {
  if (!has_cache_) throw std::logic_error("backward called without a cached forward");
  if (upstream.rows() != cached_output_.rows() || upstream.cols() != cached_output_.cols())
    throw std::invalid_argument("backward: upstream gradient shape mismatch");

  Gradients out;
  // Collect in reverse, then flip to parameters() order.
  std::vector<DenseArray> rev;
  DenseArray grad = upstream;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    auto& layer = layers_[i];
    apply_activation_grad(grad, cached_post_[i], layer.activation);
    DenseArray dgamma, dbeta;
    if (layer.bn) grad = layer.bn->backward(grad, dgamma, dbeta);
    if (want_param_grads) {
      if (layer.bn) {
        rev.push_back(std::move(dbeta));
        rev.push_back(std::move(dgamma));
      }
      rev.push_back(linalg::column_sums(grad));                              // dbias
      rev.push_back(linalg::matmul_transpose_a(cached_inputs_[i], grad));    // dweight
    }
    grad = linalg::matmul_transpose_b(grad, layer.weight);  // dX = dZ W^T
  }
  if (input_bn_) {
    DenseArray dgamma, dbeta;
    grad = input_bn_->backward(grad, dgamma, dbeta);
    if (want_param_grads) {
      rev.push_back(std::move(dbeta));
      rev.push_back(std::move(dgamma));
    }
  }
  grad.require_finite("network input gradients");
  out.inputs = std::move(grad);
  out.params.assign(std::make_move_iterator(rev.rbegin()), std::make_move_iterator(rev.rend()));
  for (const auto& g : out.params) g.require_finite("network parameter gradients");

  has_cache_ = false;
  cached_inputs_.clear();
  cached_post_.clear();
  return out;
}

MlpNetwork::Gradients MlpNetwork::backward(const DenseArray& upstream) {
  return backprop(upstream, /*want_param_grads=*/true);
}

DenseArray MlpNetwork::backward_inputs(const DenseArray& upstream) {
  return backprop(upstream, /*want_param_grads=*/false).inputs;
}

std::vector<DenseArray*> MlpNetwork::parameters() {
  std::vector<DenseArray*> out;
  if (input_bn_) {
    out.push_back(&input_bn_->gamma());
    out.push_back(&input_bn_->beta());
  }
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
    if (layer.bn) {
      out.push_back(&layer.bn->gamma());
      out.push_back(&layer.bn->beta());
    }
  }
  return out;
}

std::vector<const DenseArray*> MlpNetwork::parameters() const {
  auto mutable_params = const_cast<MlpNetwork*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::vector<std::pair<std::string, DenseArray*>> MlpNetwork::named_state() {
  std::vector<std::pair<std::string, DenseArray*>> out;
  if (input_bn_) {
    out.emplace_back("input_bn.gamma", &input_bn_->gamma());
    out.emplace_back("input_bn.beta", &input_bn_->beta());
    out.emplace_back("input_bn.running_mean", &input_bn_->running_mean());
    out.emplace_back("input_bn.running_var", &input_bn_->running_var());
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    out.emplace_back(prefix + "weight", &layers_[i].weight);
    out.emplace_back(prefix + "bias", &layers_[i].bias);
    if (layers_[i].bn) {
      out.emplace_back(prefix + "bn.gamma", &layers_[i].bn->gamma());
      out.emplace_back(prefix + "bn.beta", &layers_[i].bn->beta());
      out.emplace_back(prefix + "bn.running_mean", &layers_[i].bn->running_mean());
      out.emplace_back(prefix + "bn.running_var", &layers_[i].bn->running_var());
    }
  }
  return out;
}

std::vector<std::pair<std::string, const DenseArray*>> MlpNetwork::named_state() const {
  auto mutable_state = const_cast<MlpNetwork*>(this)->named_state();
  std::vector<std::pair<std::string, const DenseArray*>> out;
  out.reserve(mutable_state.size());
  for (auto& [name, ptr] : mutable_state) out.emplace_back(name, ptr);
  return out;
}

MlpNetwork make_critic_net(int state_dim, int action_dim, int hidden, int hidden_layers,
                           double bn_decay, double bn_epsilon, Rng& init_rng) {
  std::vector<MlpNetwork::LayerSpec> specs;
  for (int i = 0; i < hidden_layers; ++i)
    specs.push_back({hidden, Activation::kRelu, /*batch_norm=*/true});
  specs.push_back({1, Activation::kIdentity, false});
  MlpNetwork::Options opt;
  opt.input_batch_norm = true;
  opt.bn_decay = bn_decay;
  opt.bn_epsilon = bn_epsilon;
  return MlpNetwork(state_dim + action_dim, std::move(specs), opt, init_rng);
}

MlpNetwork make_policy_trunk(int state_dim, int action_dim, int hidden, int hidden_layers, Rng& init_rng) {
  std::vector<MlpNetwork::LayerSpec> specs;
  for (int i = 0; i < hidden_layers; ++i)
    specs.push_back({hidden, Activation::kRelu, false});
  specs.push_back({2 * action_dim, Activation::kIdentity, false});
  return MlpNetwork(state_dim, std::move(specs), MlpNetwork::Options{}, init_rng);
}

MlpNetwork make_velocity_net(int state_dim, int action_dim, int hidden, int hidden_layers, Rng& init_rng) {
  std::vector<MlpNetwork::LayerSpec> specs;
  for (int i = 0; i < hidden_layers; ++i)
    specs.push_back({hidden, Activation::kRelu, false});
  specs.push_back({action_dim, Activation::kIdentity, false});
  MlpNetwork::Options opt;
  opt.zero_init_final = true;  // flow starts as the identity transport
  return MlpNetwork(1 + state_dim + action_dim, std::move(specs), opt, init_rng);
}

}  // namespace qflow
