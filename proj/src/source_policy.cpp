#include "qflow/source_policy.hpp"

#include <cmath>
#include <stdexcept>

#include "qflow/errors.hpp"

namespace qflow {

namespace {
// Keep squashed actions strictly inside (-1, 1) even when tanh saturates to
// +-1 in double precision.
constexpr double kSquashMargin = 1e-12;

double squash(double pre) {
  const double a = std::tanh(pre);
  if (a >= 1.0 - kSquashMargin) return 1.0 - kSquashMargin;
  if (a <= -1.0 + kSquashMargin) return -1.0 + kSquashMargin;
  return a;
}
}  // namespace

GaussianSourcePolicy::GaussianSourcePolicy(int state_dim, int action_dim, const Options& options,
                                           Rng& init_rng)
    : action_dim_(action_dim), options_(options),
      trunk_(make_policy_trunk(state_dim, action_dim, options.hidden, options.hidden_layers, init_rng)) {
  if (action_dim < 1) throw ConfigError("source policy: action_dim must be >= 1");
  adam_ = AdamState::for_parameters(trunk_.parameters(), options.learning_rate);
}

GaussianSourcePolicy::GaussianSourcePolicy(MlpNetwork trunk, int action_dim, const Options& options)
    : action_dim_(action_dim), options_(options), trunk_(std::move(trunk)) {
  if (trunk_.output_dim() != 2 * action_dim)
    throw ConfigError("source policy: trunk output dim must equal 2*|A|");
  adam_ = AdamState::for_parameters(trunk_.parameters(), options.learning_rate);
}

std::pair<DenseArray, DenseArray> GaussianSourcePolicy::mean_and_log_std(const DenseArray& states) const {
  const DenseArray head = trunk_.evaluate(states);
  DenseArray mean = linalg::columns(head, 0, action_dim_);
  DenseArray log_std = linalg::columns(head, action_dim_, 2 * action_dim_);
  for (std::size_t i = 0; i < log_std.size(); ++i) {
    double& v = log_std.data()[i];
    v = std::clamp(v, options_.log_std_min, options_.log_std_max);
  }
  return {std::move(mean), std::move(log_std)};
}

DenseArray GaussianSourcePolicy::sample(const DenseArray& states, Rng& rng) const {
  DenseArray noise(states.rows(), action_dim_);
  for (std::size_t i = 0; i < noise.size(); ++i) noise.data()[i] = rng.normal();
  return sample_with_noise(states, noise);
}

DenseArray GaussianSourcePolicy::sample_with_noise(const DenseArray& states, const DenseArray& noise) const {
  if (noise.rows() != states.rows() || noise.cols() != action_dim_)
    throw std::invalid_argument("source policy: noise shape mismatch");
  auto [mean, log_std] = mean_and_log_std(states);
  DenseArray actions(states.rows(), action_dim_);
  for (int r = 0; r < states.rows(); ++r)
    for (int c = 0; c < action_dim_; ++c) {
      const double pre = mean.at(r, c) + std::exp(log_std.at(r, c)) * noise.at(r, c);
      actions.at(r, c) = squash(pre);
    }
  return actions;
}

DenseArray GaussianSourcePolicy::mean_action(const DenseArray& states) const {
  auto [mean, log_std] = mean_and_log_std(states);
  DenseArray actions(states.rows(), action_dim_);
  for (std::size_t i = 0; i < actions.size(); ++i) actions.data()[i] = squash(mean.data()[i]);
  return actions;
}

double GaussianSourcePolicy::loss_with_noise(QFunction& critic, const DenseArray& states,
                                             const DenseArray& noise, std::vector<DenseArray>* grads) {
  if (noise.rows() != states.rows() || noise.cols() != action_dim_)
    throw std::invalid_argument("source policy: noise shape mismatch");
  const int b = states.rows();

  // Forward through the trunk (cached only when gradients are requested).
  const DenseArray head = grads ? trunk_.forward(states, Mode::kEval) : trunk_.evaluate(states);

  DenseArray pre(b, action_dim_);          // mu + sigma * xi
  DenseArray tanh_pre(b, action_dim_);
  DenseArray actions(b, action_dim_);
  DenseArray sigma(b, action_dim_);
  DenseArray in_bounds(b, action_dim_);    // log-std clamp gradient mask
  for (int r = 0; r < b; ++r)
    for (int c = 0; c < action_dim_; ++c) {
      const double mu = head.at(r, c);
      const double raw = head.at(r, action_dim_ + c);
      const double clamped = std::clamp(raw, options_.log_std_min, options_.log_std_max);
      in_bounds.at(r, c) = (raw > options_.log_std_min && raw < options_.log_std_max) ? 1.0 : 0.0;
      sigma.at(r, c) = std::exp(clamped);
      pre.at(r, c) = mu + sigma.at(r, c) * noise.at(r, c);
      tanh_pre.at(r, c) = std::tanh(pre.at(r, c));
      actions.at(r, c) = squash(pre.at(r, c));
    }

  const std::vector<double> q = critic.q_values(states, actions);
  double loss = 0.0;
  for (double v : q) loss -= v;
  loss /= b;
  if (!std::isfinite(loss)) throw NumericError("source policy update: non-finite loss");
  if (!grads) return loss;

  // dL/da = -(1/b) * grad_a q_min, then back through tanh and the trunk.
  DenseArray dq = critic.action_gradients(states, actions);
  DenseArray upstream(b, 2 * action_dim_);
  for (int r = 0; r < b; ++r)
    for (int c = 0; c < action_dim_; ++c) {
      const double da = -dq.at(r, c) / b;
      const double t = tanh_pre.at(r, c);
      const double dpre = da * (1.0 - t * t);
      upstream.at(r, c) = dpre;  // d mu
      upstream.at(r, action_dim_ + c) =
          dpre * noise.at(r, c) * sigma.at(r, c) * in_bounds.at(r, c);  // d raw log-std
    }

  *grads = trunk_.backward(upstream).params;
  return loss;
}

double GaussianSourcePolicy::update(QFunction& critic, const DenseArray& states, Rng& rng) {
  DenseArray noise(states.rows(), action_dim_);
  for (std::size_t i = 0; i < noise.size(); ++i) noise.data()[i] = rng.normal();
  std::vector<DenseArray> grads;
  const double loss = loss_with_noise(critic, states, noise, &grads);
  adam_update(trunk_.parameters(), grads, adam_);
  return loss;
}

}  // namespace qflow
