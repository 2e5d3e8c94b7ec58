#include "qflow/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qflow/errors.hpp"
#include "qflow/envs.hpp"

namespace qflow {

QuadraticCritic::QuadraticCritic(std::vector<double> target) : target_(std::move(target)) {
  if (target_.empty()) throw std::invalid_argument("quadratic critic: empty target");
}

std::vector<double> QuadraticCritic::q_values(const DenseArray&, const DenseArray& actions) const {
  if (actions.cols() != static_cast<int>(target_.size()))
    throw std::invalid_argument("quadratic critic: action dim mismatch");
  std::vector<double> out(static_cast<std::size_t>(actions.rows()));
  for (int r = 0; r < actions.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < actions.cols(); ++c) {
      const double d = actions.at(r, c) - target_[c];
      s += d * d;
    }
    out[r] = -0.5 * s;
  }
  return out;
}

DenseArray QuadraticCritic::action_gradients(const DenseArray&, const DenseArray& actions) {
  if (actions.cols() != static_cast<int>(target_.size()))
    throw std::invalid_argument("quadratic critic: action dim mismatch");
  DenseArray g(actions.rows(), actions.cols());
  for (int r = 0; r < actions.rows(); ++r)
    for (int c = 0; c < actions.cols(); ++c) g.at(r, c) = target_[c] - actions.at(r, c);
  return g;
}

VarianceScalingResult variance_scaling_experiment(const std::vector<int>& dims, double sigma,
                                                  double total_length, long samples,
                                                  std::uint64_t seed, PerturbationModel model) {
  if (dims.empty()) throw ConfigError("variance experiment: empty dim list");
  for (std::size_t i = 1; i < dims.size(); ++i)
    if (dims[i] <= dims[i - 1]) throw ConfigError("variance experiment: dims must strictly increase");
  if (samples < 2) throw ConfigError("variance experiment: need at least 2 samples");

  VarianceScalingResult result;
  result.dims = dims;

  for (std::size_t di = 0; di < dims.size(); ++di) {
    const int n = dims[di];
    ChainConfig chain;
    chain.num_joints = n;
    chain.total_length = total_length;

    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(n)));
    std::vector<double> angles(n);

    // Streaming mean/variance of the end-effector position.
    double mean_x = 0.0, mean_y = 0.0, m2_x = 0.0, m2_y = 0.0;
    for (long k = 0; k < samples; ++k) {
      if (model == PerturbationModel::kLink) {
        // i.i.d. absolute link orientations: relative angles are differences.
        double previous = 0.0;
        for (int j = 0; j < n; ++j) {
          const double orientation = sigma * rng.normal();
          angles[j] = orientation - previous;
          previous = orientation;
        }
      } else {
        for (int j = 0; j < n; ++j) angles[j] = sigma * rng.normal();
      }
      const auto ee = forward_kinematics(angles, chain);
      const double count = static_cast<double>(k + 1);
      const double dx = ee[0] - mean_x;
      mean_x += dx / count;
      m2_x += dx * (ee[0] - mean_x);
      const double dy = ee[1] - mean_y;
      mean_y += dy / count;
      m2_y += dy * (ee[1] - mean_y);
    }
    const double variance = (m2_x + m2_y) / static_cast<double>(samples - 1);
    result.empirical_variance.push_back(variance);
    result.theoretical.push_back(sigma * sigma * total_length * total_length / n);
  }

  // Least-squares slope of log Var against log |A|.
  const std::size_t m = dims.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = std::log(static_cast<double>(dims[i]));
    const double y = std::log(std::max(result.empirical_variance[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = m * sxx - sx * sx;
  result.loglog_slope = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
  return result;
}

namespace {

std::vector<double> uniform_grid(int points) {
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) grid[i] = static_cast<double>(i) / (points - 1);
  return grid;
}

MonotonicityResult check_curve(QFunction& critic, const GaussianSourcePolicy& source,
                               const DenseArray& states, const MonotonicityOptions& options,
                               const std::string& mode, bool exact_tolerance, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0xad7a));
  const auto grid = uniform_grid(options.grid_points);
  MonotonicityResult result;
  result.mode = mode;
  result.curve = advantage_curve(critic, source, states, grid, options.samples_per_state,
                                 options.ascent_steps, options.eta, rng);
  result.tolerance.assign(grid.size(), 0.0);
  result.pass = true;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double tol =
        exact_tolerance ? options.quadratic_tolerance : 2.0 * result.curve.increment_se[k];
    result.tolerance[k] = tol;
    if (result.curve.f[k] < result.curve.f[k - 1] - tol) result.pass = false;
  }
  return result;
}

}  // namespace

MonotonicityResult monotonicity_quadratic(const MonotonicityOptions& options, int action_dim,
                                          double quad_target, std::uint64_t seed) {
  QuadraticCritic critic(std::vector<double>(action_dim, quad_target));
  // A fixed random source policy over a tiny synthetic state.
  const int state_dim = 4;
  Rng init(Rng::derive(seed, 0x0facade));
  GaussianSourcePolicy::Options popt;
  popt.hidden = 32;
  popt.hidden_layers = 2;
  GaussianSourcePolicy source(state_dim, action_dim, popt, init);

  DenseArray states(options.states, state_dim);
  Rng state_rng(Rng::derive(seed, 0x57a7e));
  for (std::size_t i = 0; i < states.size(); ++i) states.data()[i] = state_rng.normal();

  return check_curve(critic, source, states, options, "quadratic", /*exact_tolerance=*/true, seed);
}

MonotonicityResult monotonicity_with_critic(QFunction& critic, const std::string& mode_name,
                                            const MonotonicityOptions& options, int state_dim,
                                            int action_dim, std::uint64_t seed) {
  Rng init(Rng::derive(seed, 0x0facade));
  GaussianSourcePolicy::Options popt;
  popt.hidden = 32;
  popt.hidden_layers = 2;
  GaussianSourcePolicy source(state_dim, action_dim, popt, init);

  DenseArray states(options.states, state_dim);
  Rng state_rng(Rng::derive(seed, 0x57a7e));
  for (std::size_t i = 0; i < states.size(); ++i) states.data()[i] = state_rng.normal();

  return check_curve(critic, source, states, options, mode_name, /*exact_tolerance=*/false, seed);
}

MonotonicityResult monotonicity_random_net(const MonotonicityOptions& options, int state_dim,
                                           int action_dim, std::uint64_t seed) {
  Rng init(Rng::derive(seed, 0xc0ffee));
  TwinCritic::Options copt;
  copt.hidden = options.critic_hidden;
  copt.hidden_layers = options.critic_layers;
  TwinCritic critic(state_dim, action_dim, copt, init);
  return monotonicity_with_critic(critic, "random-net", options, state_dim, action_dim, seed);
}

CorrelationResult correlation_experiment(const GaussianSourcePolicy& source,
                                         const VelocityField& field, const FlowConfig& flow_config,
                                         const DenseArray& probe_states, int samples_per_state,
                                         std::uint64_t seed) {
  if (probe_states.rows() < 1) throw std::invalid_argument("correlation experiment: no probe states");
  if (samples_per_state < 2)
    throw std::invalid_argument("correlation experiment: need at least 2 samples per state");
  const int action_dim = source.action_dim();

  CorrelationResult result;
  result.per_dimension_std.assign(action_dim, 0.0);
  result.correlation = DenseArray(action_dim, action_dim);
  std::vector<bool> degenerate(action_dim, false);

  Rng rng(Rng::derive(seed, 0xc077));
  DenseArray one_state(samples_per_state, probe_states.cols());

  for (int p = 0; p < probe_states.rows(); ++p) {
    for (int r = 0; r < samples_per_state; ++r) {
      auto src = probe_states.row(p);
      std::copy(src.begin(), src.end(), one_state.row(r).begin());
    }
    const DenseArray actions =
        sample_flow_actions(field, source, one_state, flow_config, rng, /*deterministic=*/false);

    // Per-state mean/covariance, accumulated into the running averages.
    std::vector<double> mean(action_dim, 0.0);
    for (int r = 0; r < samples_per_state; ++r)
      for (int c = 0; c < action_dim; ++c) mean[c] += actions.at(r, c);
    for (double& v : mean) v /= samples_per_state;

    DenseArray cov(action_dim, action_dim);
    for (int r = 0; r < samples_per_state; ++r)
      for (int i = 0; i < action_dim; ++i) {
        const double di = actions.at(r, i) - mean[i];
        for (int j = i; j < action_dim; ++j)
          cov.at(i, j) += di * (actions.at(r, j) - mean[j]);
      }
    for (int i = 0; i < action_dim; ++i)
      for (int j = i; j < action_dim; ++j) {
        cov.at(i, j) /= (samples_per_state - 1);
        cov.at(j, i) = cov.at(i, j);
      }

    // Actions live in [-1, 1]; spreads at rounding scale are degenerate.
    constexpr double kDegenerateStd = 1e-12;
    std::vector<bool> flat(action_dim, false);
    for (int i = 0; i < action_dim; ++i) {
      const double sd = std::sqrt(std::max(cov.at(i, i), 0.0));
      result.per_dimension_std[i] += sd / probe_states.rows();
      if (sd <= kDegenerateStd) {
        flat[i] = true;
        degenerate[i] = true;
      }
    }
    for (int i = 0; i < action_dim; ++i)
      for (int j = 0; j < action_dim; ++j) {
        double corr;
        if (i == j) {
          corr = 1.0;
        } else if (flat[i] || flat[j]) {
          corr = 0.0;  // zero-variance dimension, flagged in the result
        } else {
          corr = cov.at(i, j) / std::sqrt(cov.at(i, i) * cov.at(j, j));
        }
        result.correlation.at(i, j) += corr / probe_states.rows();
      }
  }

  for (int i = 0; i < action_dim; ++i) {
    result.correlation.at(i, i) = 1.0;
    if (degenerate[i]) result.degenerate_dims.push_back(i);
  }

  // Smallest eigenvalue of the averaged matrix (PSD check surface).
  Eigen::MatrixXd sym(action_dim, action_dim);
  for (int i = 0; i < action_dim; ++i)
    for (int j = 0; j < action_dim; ++j) sym(i, j) = result.correlation.at(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  result.min_eigenvalue = solver.eigenvalues().minCoeff();
  return result;
}

DenseArray collect_probe_states(const GaussianSourcePolicy& source, const VelocityField& field,
                                const EnvConfig& env_config, const FlowConfig& flow_config,
                                int states_per_point, std::uint64_t seed) {
  if (states_per_point < 1) throw std::invalid_argument("collect_probe_states: need >= 1 state");
  auto env = make_env(env_config);
  Rng unused_rng(0);
  std::vector<double> obs = env->reset(Rng::derive(seed, 0));
  DenseArray probes(states_per_point, static_cast<int>(obs.size()));

  for (int i = 0; i < states_per_point; ++i) {
    std::copy(obs.begin(), obs.end(), probes.row(i).begin());
    const DenseArray state = DenseArray::row_vector(obs);
    const DenseArray action =
        sample_flow_actions(field, source, state, flow_config, unused_rng, /*deterministic=*/true);
    StepResult result = env->step(action.row(0));
    if (result.terminal) {
      obs = env->reset(Rng::derive(seed, static_cast<std::uint64_t>(i) + 1));
    } else {
      obs = std::move(result.next_observation);
    }
  }
  return probes;
}

}  // namespace qflow
