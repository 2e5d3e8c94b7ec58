#include "qflow/flow_policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qflow/errors.hpp"

namespace qflow {

void FlowConfig::validate() const {
  if (ascent_steps < 1) throw ConfigError("flow config: ascent_steps must be >= 1");
  if (eta <= 0.0) throw ConfigError("flow config: eta must be positive");
  if (ode_steps < 1) throw ConfigError("flow config: ode_steps must be >= 1");
  if (ode_dt <= 0.0) throw ConfigError("flow config: ode_dt must be positive");
  if (ode_steps * ode_dt != 1.0)
    throw ConfigError("flow config: ode_steps * ode_dt must equal 1.0 exactly");
}

FlowMatchSample FlowMatchSample::make(double t, std::span<const double> state,
                                      std::span<const double> a0, std::span<const double> a1) {
  if (a0.size() != a1.size()) throw std::invalid_argument("flow-match sample: endpoint dims differ");
  FlowMatchSample s;
  s.t = t;
  s.state.assign(state.begin(), state.end());
  s.a0.assign(a0.begin(), a0.end());
  s.a1.assign(a1.begin(), a1.end());
  s.at.resize(a0.size());
  s.target_velocity.resize(a0.size());
  for (std::size_t i = 0; i < a0.size(); ++i) {
    s.at[i] = (1.0 - t) * a0[i] + t * a1[i];
    s.target_velocity[i] = a1[i] - a0[i];
  }
  return s;
}

DenseArray ot_interpolate(std::span<const double> t, const DenseArray& a0, const DenseArray& a1) {
  if (!a0.same_shape(a1)) throw std::invalid_argument("ot_interpolate: endpoint shapes differ");
  if (static_cast<int>(t.size()) != a0.rows())
    throw std::invalid_argument("ot_interpolate: one t per row required");
  DenseArray at(a0.rows(), a0.cols());
  for (int r = 0; r < a0.rows(); ++r)
    for (int c = 0; c < a0.cols(); ++c)
      at.at(r, c) = (1.0 - t[r]) * a0.at(r, c) + t[r] * a1.at(r, c);
  return at;
}

VelocityField::VelocityField(int state_dim, int action_dim, const Options& options, Rng& init_rng)
    : state_dim_(state_dim), action_dim_(action_dim), options_(options),
      net_(make_velocity_net(state_dim, action_dim, options.hidden, options.hidden_layers, init_rng)) {
  adam_ = AdamState::for_parameters(net_.parameters(), options.learning_rate);
}

VelocityField::VelocityField(MlpNetwork net, int state_dim, int action_dim, const Options& options)
    : state_dim_(state_dim), action_dim_(action_dim), options_(options), net_(std::move(net)) {
  if (net_.input_dim() != 1 + state_dim + action_dim || net_.output_dim() != action_dim)
    throw ConfigError("velocity field: checkpointed net has incompatible shape");
  adam_ = AdamState::for_parameters(net_.parameters(), options.learning_rate);
}

DenseArray VelocityField::assemble_input(std::span<const double> t, const DenseArray& states,
                                         const DenseArray& actions) const {
  const int b = states.rows();
  if (actions.rows() != b || static_cast<int>(t.size()) != b)
    throw std::invalid_argument("velocity field: batch sizes differ");
  if (states.cols() != state_dim_ || actions.cols() != action_dim_)
    throw std::invalid_argument("velocity field: feature dims differ from construction");
  DenseArray input(b, 1 + state_dim_ + action_dim_);
  for (int r = 0; r < b; ++r) {
    auto dst = input.row(r);
    dst[0] = t[r];
    auto s = states.row(r);
    std::copy(s.begin(), s.end(), dst.begin() + 1);
    auto a = actions.row(r);
    std::copy(a.begin(), a.end(), dst.begin() + 1 + state_dim_);
  }
  return input;
}

DenseArray VelocityField::evaluate(double t, const DenseArray& states, const DenseArray& actions) const {
  std::vector<double> ts(static_cast<std::size_t>(states.rows()), t);
  return net_.evaluate(assemble_input(ts, states, actions));
}

DenseArray VelocityField::evaluate(std::span<const double> t, const DenseArray& states,
                                   const DenseArray& actions) const {
  return net_.evaluate(assemble_input(t, states, actions));
}

double VelocityField::cfm_loss(std::span<const double> t, const DenseArray& states,
                               const DenseArray& a0, const DenseArray& a1) const {
  const DenseArray at = ot_interpolate(t, a0, a1);
  const DenseArray v = net_.evaluate(assemble_input(t, states, at));
  double loss = 0.0;
  for (int r = 0; r < v.rows(); ++r)
    for (int c = 0; c < v.cols(); ++c) {
      const double e = v.at(r, c) - (a1.at(r, c) - a0.at(r, c));
      loss += e * e;
    }
  return loss / v.rows();
}

double VelocityField::cfm_update(const DenseArray& states, const DenseArray& a0, const DenseArray& a1,
                                 Rng& rng) {
  const int b = states.rows();
  if (a0.rows() != b || a1.rows() != b)
    throw std::invalid_argument("cfm_update: batch sizes differ");

  std::vector<double> t(static_cast<std::size_t>(b));
  for (double& v : t) v = rng.uniform01();

  const DenseArray at = ot_interpolate(t, a0, a1);
  const DenseArray v = net_.forward(assemble_input(t, states, at), Mode::kEval);

  double loss = 0.0;
  DenseArray upstream(b, action_dim_);
  for (int r = 0; r < b; ++r)
    for (int c = 0; c < action_dim_; ++c) {
      const double e = v.at(r, c) - (a1.at(r, c) - a0.at(r, c));
      loss += e * e;
      upstream.at(r, c) = 2.0 * e / b;
    }
  loss /= b;
  if (!std::isfinite(loss)) throw NumericError("flow-matching update: non-finite loss");

  auto grads = net_.backward(upstream);
  adam_update(net_.parameters(), grads.params, adam_);
  return loss;
}

DenseArray integrate_flow(const VelocityFn& velocity, const DenseArray& states, DenseArray a0,
                          int ode_steps, double ode_dt, ClampStats* stats) {
  DenseArray a = std::move(a0);
  for (int k = 0; k < ode_steps; ++k) {
    const double t = k * ode_dt;
    const DenseArray v = velocity(t, states, a);
    if (!v.same_shape(a)) throw std::invalid_argument("integrate_flow: velocity shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += ode_dt * v.data()[i];
  }
  long clamped = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double& x = a.data()[i];
    if (x > 1.0) {
      x = 1.0;
      ++clamped;
    } else if (x < -1.0) {
      x = -1.0;
      ++clamped;
    }
  }
  if (stats) {
    stats->components += static_cast<long>(a.size());
    stats->clamped += clamped;
  }
  a.require_finite("flow-integrated actions");
  return a;
}

DenseArray sample_flow_actions(const VelocityField& field, const GaussianSourcePolicy& source,
                               const DenseArray& states, const FlowConfig& config, Rng& rng,
                               bool deterministic, ClampStats* stats) {
  DenseArray a0 = deterministic ? source.mean_action(states) : source.sample(states, rng);
  const VelocityFn fn = [&field](double t, const DenseArray& s, const DenseArray& a) {
    return field.evaluate(t, s, a);
  };
  return integrate_flow(fn, states, std::move(a0), config.ode_steps, config.ode_dt, stats);
}

double capped_step_scale(double eta, double grad_norm, int action_dim) {
  const double diameter = 2.0 * std::sqrt(static_cast<double>(action_dim));
  if (grad_norm <= 0.0) return eta;
  return std::min(eta, diameter / grad_norm);
}

void ascend(QFunction& q, const DenseArray& states, DenseArray& actions, int steps, double eta) {
  const int b = actions.rows();
  const int dim = actions.cols();
  const double bound = 2.0 * std::sqrt(static_cast<double>(dim)) + 1e-12;
  for (int n = 0; n < steps; ++n) {
    const DenseArray grads = q.action_gradients(states, actions);
    for (int r = 0; r < b; ++r) {
      const double norm = std::sqrt(linalg::squared_norm(grads.row(r)));
      const double scale = capped_step_scale(eta, norm, dim);
      if (scale * norm > bound)
        throw NumericError("capped ascent exceeded the action-box displacement bound");
      for (int c = 0; c < dim; ++c) {
        double x = actions.at(r, c) + scale * grads.at(r, c);
        actions.at(r, c) = std::clamp(x, -1.0, 1.0);
      }
    }
  }
}

AscentTargets construct_targets(QFunction& q, const GaussianSourcePolicy& source,
                                const DenseArray& states, int ascent_steps, double eta, Rng& rng,
                                bool compute_value_gain) {
  AscentTargets out;
  out.a0 = source.sample(states, rng);
  out.a1 = out.a0;
  ascend(q, states, out.a1, ascent_steps, eta);
  if (compute_value_gain) {
    const auto q0 = q.q_values(states, out.a0);
    const auto q1 = q.q_values(states, out.a1);
    double gain = 0.0;
    for (std::size_t i = 0; i < q0.size(); ++i) gain += q1[i] - q0[i];
    out.value_gain = gain / static_cast<double>(q0.size());
    out.value_gain_valid = true;
  }
  return out;
}

AdvantageCurve advantage_curve(QFunction& q, const GaussianSourcePolicy& source,
                               const DenseArray& states, std::span<const double> t_grid,
                               int samples_per_state, int ascent_steps, double eta, Rng& rng) {
  if (t_grid.empty()) throw std::invalid_argument("advantage_curve: empty t grid");
  for (std::size_t k = 1; k < t_grid.size(); ++k)
    if (t_grid[k] < t_grid[k - 1]) throw std::invalid_argument("advantage_curve: t grid must ascend");
  if (t_grid.front() < 0.0 || t_grid.back() > 1.0)
    throw std::invalid_argument("advantage_curve: t grid must lie in [0,1]");

  // Replicate each state samples_per_state times; one common a0 draw serves
  // every grid point, so per-sample trajectories are nested across budgets.
  const int b = states.rows();
  const long total = static_cast<long>(b) * samples_per_state;
  DenseArray rep_states(static_cast<int>(total), states.cols());
  for (int r = 0; r < b; ++r)
    for (int k = 0; k < samples_per_state; ++k) {
      auto dst = rep_states.row(r * samples_per_state + k);
      auto src = states.row(r);
      std::copy(src.begin(), src.end(), dst.begin());
    }

  DenseArray actions = source.sample(rep_states, rng);

  std::vector<int> budgets(t_grid.size());
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    // Nudge absorbs representation error in grid values like 7/20.
    budgets[k] = static_cast<int>(std::floor(t_grid[k] * ascent_steps + 1e-9));
    budgets[k] = std::min(budgets[k], ascent_steps);
  }

  // Walk the ascent once, recording q at each requested budget.
  std::vector<std::vector<double>> q_at_budget(t_grid.size());
  int done = 0;
  std::vector<double> current_q = q.q_values(rep_states, actions);
  for (std::size_t k = 0; k < t_grid.size(); ++k)
    if (budgets[k] == 0) q_at_budget[k] = current_q;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    while (done < budgets[k]) {
      ascend(q, rep_states, actions, 1, eta);
      ++done;
    }
    if (budgets[k] > 0) {
      if (q_at_budget[k].empty()) {
        // Reuse the evaluation when consecutive grid points share a budget.
        bool reused = false;
        for (std::size_t j = 0; j < k; ++j)
          if (budgets[j] == budgets[k] && !q_at_budget[j].empty()) {
            q_at_budget[k] = q_at_budget[j];
            reused = true;
            break;
          }
        if (!reused) q_at_budget[k] = q.q_values(rep_states, actions);
      }
    }
  }

  AdvantageCurve curve;
  curve.t_grid.assign(t_grid.begin(), t_grid.end());
  curve.f.resize(t_grid.size());
  curve.increment_se.assign(t_grid.size(), 0.0);

  // F(t) relative to the t = 0 (budget 0) expectation.
  double base_mean = 0.0;
  for (double v : current_q) base_mean += v;
  base_mean /= static_cast<double>(total);

  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    double mean = 0.0;
    for (double v : q_at_budget[k]) mean += v;
    mean /= static_cast<double>(total);
    curve.f[k] = mean - base_mean;
    if (k > 0) {
      // Standard error of the mean increment under common random numbers.
      double inc_mean = 0.0;
      for (long i = 0; i < total; ++i) inc_mean += q_at_budget[k][i] - q_at_budget[k - 1][i];
      inc_mean /= static_cast<double>(total);
      double var = 0.0;
      for (long i = 0; i < total; ++i) {
        const double d = (q_at_budget[k][i] - q_at_budget[k - 1][i]) - inc_mean;
        var += d * d;
      }
      var /= std::max<long>(1, total - 1);
      curve.increment_se[k] = std::sqrt(var / static_cast<double>(total));
    }
  }
  return curve;
}

}  // namespace qflow
