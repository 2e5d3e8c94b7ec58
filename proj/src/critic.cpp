#include "qflow/critic.hpp"

#include <cmath>
#include <stdexcept>

#include "qflow/errors.hpp"

namespace qflow {

TwinCritic::TwinCritic(int state_dim, int action_dim, const Options& options, Rng& init_rng)
    : state_dim_(state_dim), action_dim_(action_dim), options_(options),
      q1_(make_critic_net(state_dim, action_dim, options.hidden, options.hidden_layers,
                          options.bn_decay, options.bn_epsilon, init_rng)),
      q2_(make_critic_net(state_dim, action_dim, options.hidden, options.hidden_layers,
                          options.bn_decay, options.bn_epsilon, init_rng)) {
  if (options.discount <= 0.0 || options.discount >= 1.0)
    throw ConfigError("critic: discount must lie in (0,1)");
  adam1_ = AdamState::for_parameters(q1_.parameters(), options.learning_rate);
  adam2_ = AdamState::for_parameters(q2_.parameters(), options.learning_rate);
}

TwinCritic::TwinCritic(MlpNetwork q1, MlpNetwork q2, int state_dim, int action_dim,
                       const Options& options)
    : state_dim_(state_dim), action_dim_(action_dim), options_(options),
      q1_(std::move(q1)), q2_(std::move(q2)) {
  if (q1_.input_dim() != q2_.input_dim() || q1_.output_dim() != 1 || q2_.output_dim() != 1)
    throw ConfigError("critic: checkpointed heads have incompatible shapes");
  if (q1_.input_dim() != state_dim + action_dim)
    throw ConfigError("critic: checkpointed input dim does not match |S|+|A|");
  adam1_ = AdamState::for_parameters(q1_.parameters(), options.learning_rate);
  adam2_ = AdamState::for_parameters(q2_.parameters(), options.learning_rate);
}

namespace {

DenseArray join_state_action(const DenseArray& states, const DenseArray& actions) {
  if (states.rows() != actions.rows())
    throw std::invalid_argument("critic: state/action batch sizes differ");
  return linalg::hstack(states, actions);
}

}  // namespace

std::vector<double> TwinCritic::q_values(const DenseArray& states, const DenseArray& actions) const {
  const DenseArray input = join_state_action(states, actions);
  const DenseArray v1 = q1_.evaluate(input);
  const DenseArray v2 = q2_.evaluate(input);
  std::vector<double> out(static_cast<std::size_t>(input.rows()));
  for (int r = 0; r < input.rows(); ++r) out[r] = std::min(v1.at(r, 0), v2.at(r, 0));
  return out;
}

std::vector<double> TwinCritic::q_min(const DenseArray& states, const DenseArray& actions, Mode mode) {
  if (mode == Mode::kEval) return q_values(states, actions);
  const DenseArray input = join_state_action(states, actions);
  const DenseArray v1 = q1_.forward(input, Mode::kTrain);
  const DenseArray v2 = q2_.forward(input, Mode::kTrain);
  std::vector<double> out(static_cast<std::size_t>(input.rows()));
  for (int r = 0; r < input.rows(); ++r) out[r] = std::min(v1.at(r, 0), v2.at(r, 0));
  return out;
}

DenseArray TwinCritic::action_gradients(const DenseArray& states, const DenseArray& actions) {
  const DenseArray input = join_state_action(states, actions);
  const int batch = input.rows();
  const DenseArray v1 = q1_.forward(input, Mode::kEval);
  const DenseArray v2 = q2_.forward(input, Mode::kEval);

  // Select the minimum head per row; ties go to head 1.
  DenseArray up1(batch, 1), up2(batch, 1);
  for (int r = 0; r < batch; ++r) {
    const bool head1 = v1.at(r, 0) <= v2.at(r, 0);
    up1.at(r, 0) = head1 ? 1.0 : 0.0;
    up2.at(r, 0) = head1 ? 0.0 : 1.0;
  }

  DenseArray g1 = q1_.backward_inputs(up1);
  DenseArray g2 = q2_.backward_inputs(up2);
  linalg::add_inplace(g1, g2);
  const int state_cols = input.cols() - actions.cols();
  return linalg::columns(g1, state_cols, input.cols());
}

double TwinCritic::update(const TransitionBatch& batch, const DenseArray& next_actions) {
  const int b = batch.size();
  if (next_actions.rows() != b)
    throw std::invalid_argument("critic update: next_actions batch size mismatch");

  // Current and next pairs share one batch-norm batch; the prediction rows
  // come first, the bootstrap rows second.
  const DenseArray current = join_state_action(batch.states, batch.actions);
  const DenseArray next = join_state_action(batch.next_states, next_actions);
  const DenseArray joint = linalg::vstack(current, next);

  const DenseArray out1 = q1_.forward(joint, Mode::kTrain);
  const DenseArray out2 = q2_.forward(joint, Mode::kTrain);

  // Regression target from the minimum head, treated as a constant.
  std::vector<double> target(static_cast<std::size_t>(b));
  for (int r = 0; r < b; ++r) {
    const double next_q = std::min(out1.at(b + r, 0), out2.at(b + r, 0));
    const double mask = batch.terminal[r] ? 0.0 : 1.0;
    target[r] = batch.rewards[r] + options_.discount * mask * next_q;
  }

  double mse1 = 0.0, mse2 = 0.0;
  DenseArray up1(2 * b, 1), up2(2 * b, 1);
  for (int r = 0; r < b; ++r) {
    const double e1 = out1.at(r, 0) - target[r];
    const double e2 = out2.at(r, 0) - target[r];
    mse1 += e1 * e1;
    mse2 += e2 * e2;
    up1.at(r, 0) = 2.0 * e1 / b;
    up2.at(r, 0) = 2.0 * e2 / b;
  }
  mse1 /= b;
  mse2 /= b;
  const double loss = 0.5 * (mse1 + mse2);
  if (!std::isfinite(loss)) throw NumericError("critic update: non-finite loss, update aborted");

  auto grads1 = q1_.backward(up1);
  auto grads2 = q2_.backward(up2);
  adam_update(q1_.parameters(), grads1.params, adam1_);
  adam_update(q2_.parameters(), grads2.params, adam2_);
  updates_ += 1;
  return loss;
}

std::vector<std::string> TwinCritic::owned_parameter_names() const {
  std::vector<std::string> names;
  for (const auto& [name, array] : q1_.named_state()) names.push_back("q1." + name);
  for (const auto& [name, array] : q2_.named_state()) names.push_back("q2." + name);
  return names;
}

}  // namespace qflow
