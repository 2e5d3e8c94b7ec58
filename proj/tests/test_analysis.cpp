#include <doctest.h>

#include <cmath>

#include "qflow/analysis.hpp"
#include "qflow/rng.hpp"

using namespace qflow;

namespace {

GaussianSourcePolicy isotropic_policy(int state_dim, int action_dim) {
  Rng rng(1);
  GaussianSourcePolicy::Options opt;
  opt.hidden = 8;
  opt.hidden_layers = 1;
  GaussianSourcePolicy policy(state_dim, action_dim, opt, rng);
  for (DenseArray* p : policy.trunk().parameters()) p->fill(0.0);
  return policy;  // mu = 0, sigma = 1 everywhere
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("single link variance approaches sigma^2 L^2 to first order") {
  const double sigma = 0.05;
  const auto result = variance_scaling_experiment({1, 2}, sigma, 1.0, 1000000, 7);
  CHECK(std::abs(result.empirical_variance[0] - sigma * sigma) / (sigma * sigma) < 0.05);
}

TEST_CASE("ten joints at sigma 0.1 land within 20 percent of the 1e-3 prediction") {
  const auto result = variance_scaling_experiment({5, 10}, 0.1, 1.0, 400000, 8);
  CHECK(result.theoretical[1] == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(std::abs(result.empirical_variance[1] - 1e-3) / 1e-3 < 0.20);
}

TEST_CASE("zero noise gives exactly zero variance") {
  // sigma = 0 is outside the config validator's domain but the experiment
  // function itself must degrade gracefully for the property test.
  const auto result = variance_scaling_experiment({2, 4}, 0.0, 1.0, 1000, 9);
  for (double v : result.empirical_variance) CHECK(v == 0.0);
}

TEST_CASE("the scaling law slope sits near -1 across the dim sweep") {
  const auto result =
      variance_scaling_experiment({2, 4, 8, 16, 32, 64}, 0.05, 1.0, 120000, 10);
  CHECK(result.loglog_slope >= -1.2);
  CHECK(result.loglog_slope <= -0.8);
  for (std::size_t i = 0; i < result.dims.size(); ++i) {
    const double rel = std::abs(result.empirical_variance[i] - result.theoretical[i]) /
                       result.theoretical[i];
    CHECK(rel < 0.20);
  }
}

TEST_CASE("joint-angle perturbation of the cumulative chain grows with dimension") {
  // The coupled-chain reading shows why the link-orientation model is the
  // one the scaling law describes.
  const auto result = variance_scaling_experiment({2, 4, 8, 16}, 0.05, 1.0, 60000, 11,
                                                  PerturbationModel::kJoint);
  CHECK(result.loglog_slope > 0.5);
}

TEST_CASE("quadratic monotonicity is exact within 1e-6") {
  MonotonicityOptions options;
  options.states = 8;
  options.samples_per_state = 32;
  const auto result = monotonicity_quadratic(options, 2, 0.5, 42);
  CHECK(result.pass);
  CHECK(result.mode == "quadratic");
  for (std::size_t k = 1; k < result.curve.f.size(); ++k)
    CHECK(result.curve.f[k] >= result.curve.f[k - 1] - 1e-6);
}

TEST_CASE("zero critic advantage curve is identically zero and passes") {
  struct ZeroCritic final : QFunction {
    std::vector<double> q_values(const DenseArray& s, const DenseArray&) const override {
      return std::vector<double>(s.rows(), 0.0);
    }
    DenseArray action_gradients(const DenseArray&, const DenseArray& a) override {
      return DenseArray(a.rows(), a.cols(), 0.0);
    }
  } zero;
  MonotonicityOptions options;
  options.states = 4;
  options.samples_per_state = 8;
  const auto result = monotonicity_with_critic(zero, "zero", options, 3, 2, 5);
  CHECK(result.pass);
  for (double f : result.curve.f) CHECK(f == 0.0);
}

TEST_CASE("random smooth critic passes at the statistical tolerance") {
  MonotonicityOptions options;
  options.states = 16;
  options.samples_per_state = 64;
  options.ascent_steps = 100;
  options.eta = 0.001;
  options.critic_hidden = 32;
  options.critic_layers = 2;
  const auto result = monotonicity_random_net(options, 6, 4, 77);
  CHECK(result.pass);
}

TEST_CASE("isotropic source with a zero field shows no spurious correlations") {
  GaussianSourcePolicy policy = isotropic_policy(3, 4);
  Rng rng(2);
  VelocityField::Options vopt;
  vopt.hidden = 8;
  vopt.hidden_layers = 1;
  VelocityField field(3, 4, vopt, rng);  // zero-initialized final layer
  FlowConfig cfg;

  DenseArray probes(3, 3);
  Rng prng(3);
  for (std::size_t i = 0; i < probes.size(); ++i) probes.data()[i] = prng.normal();

  const int samples = 4000;
  const auto result = correlation_experiment(policy, field, cfg, probes, samples, 4);

  // diagonal exactly one
  for (int i = 0; i < 4; ++i) CHECK(result.correlation.at(i, i) == 1.0);
  // off-diagonals within five standard errors of zero under independence
  // (per-state SE ~ 1/sqrt(n), averaged over 3 states)
  const double se = 1.0 / std::sqrt(static_cast<double>(samples) * probes.rows());
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) CHECK(std::abs(result.correlation.at(i, j)) <= 5.0 * se);
  // symmetric PSD within tolerance
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(result.correlation.at(i, j) == doctest::Approx(result.correlation.at(j, i)).epsilon(1e-12));
  CHECK(result.min_eigenvalue >= -1e-8);
}

TEST_CASE("a field copying dimension 0 into dimension 1 yields near-perfect correlation") {
  GaussianSourcePolicy policy = isotropic_policy(2, 2);
  FlowConfig cfg;

  // Oracle transport: overwrite dim 1 with dim 0 as t integrates, by using a
  // velocity that moves a1 toward a0 quickly. Implemented directly as a
  // sampler stub through integrate_flow.
  DenseArray probes(2, 2, 0.0);
  Rng rng(5);
  const int samples = 3000;

  DenseArray all_states(samples, 2, 0.0);
  DenseArray a0 = policy.sample(all_states, rng);
  const VelocityFn copier = [](double, const DenseArray&, const DenseArray& a) {
    DenseArray v(a.rows(), a.cols(), 0.0);
    for (int r = 0; r < a.rows(); ++r) v.at(r, 1) = 20.0 * (a.at(r, 0) - a.at(r, 1));
    return v;
  };
  const DenseArray out = integrate_flow(copier, all_states, a0, 20, 0.05);

  double m0 = 0.0, m1 = 0.0;
  for (int r = 0; r < samples; ++r) {
    m0 += out.at(r, 0);
    m1 += out.at(r, 1);
  }
  m0 /= samples;
  m1 /= samples;
  double c01 = 0.0, v0 = 0.0, v1 = 0.0;
  for (int r = 0; r < samples; ++r) {
    const double d0 = out.at(r, 0) - m0;
    const double d1 = out.at(r, 1) - m1;
    c01 += d0 * d1;
    v0 += d0 * d0;
    v1 += d1 * d1;
  }
  const double corr = c01 / std::sqrt(v0 * v1);
  CHECK(std::abs(corr - 1.0) < 0.01);
}

TEST_CASE("zero-variance dimensions are reported as flagged zeros, not NaN") {
  GaussianSourcePolicy policy = isotropic_policy(2, 3);
  // freeze dimension 2 by pinning its log-std to the floor and mean to zero:
  // simplest honest construction is a deterministic transport that zeroes it.
  Rng rng(6);
  VelocityField::Options vopt;
  vopt.hidden = 8;
  vopt.hidden_layers = 1;
  VelocityField field(2, 3, vopt, rng);
  FlowConfig cfg;

  // Use one probe state and overwrite sampled actions via a stub: emulate by
  // a direct correlation_experiment call on a policy whose third dim is
  // squashed to a constant through saturation.
  auto params = policy.trunk().parameters();
  // final layer bias: mean head dim 2 -> +60 (tanh saturates to ~1 exactly),
  // log-std head dim 2 -> -60 (clamped to the floor, sigma ~ 6.7e-3)
  DenseArray* bias = params.back();
  bias->at(0, 2) = 60.0;
  bias->at(0, 3 + 2) = -60.0;

  DenseArray probes(1, 2, 0.0);
  const auto result = correlation_experiment(policy, field, cfg, probes, 2000, 7);
  REQUIRE(result.degenerate_dims.size() == 1);
  CHECK(result.degenerate_dims[0] == 2);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::isfinite(result.correlation.at(2, j)));
    if (j != 2) CHECK(result.correlation.at(2, j) == 0.0);
  }
}

TEST_CASE("correlation matrices from probe rollouts stay symmetric psd") {
  EnvConfig env;
  env.kind = EnvConfig::Kind::kChain;
  env.chain.num_joints = 4;  // observation dim 2*4 + 4 = 12
  FlowConfig cfg;

  Rng policy_rng(9), field_rng(10);
  GaussianSourcePolicy::Options popt;
  popt.hidden = 8;
  popt.hidden_layers = 1;
  GaussianSourcePolicy policy(12, 4, popt, policy_rng);
  VelocityField::Options vopt;
  vopt.hidden = 8;
  vopt.hidden_layers = 1;
  VelocityField field(12, 4, vopt, field_rng);

  const DenseArray probes = collect_probe_states(policy, field, env, cfg, 5, 11);
  CHECK(probes.rows() == 5);
  CHECK(probes.cols() == 12);

  const auto result = correlation_experiment(policy, field, cfg, probes, 500, 12);
  CHECK(result.min_eigenvalue >= -1e-8);
  for (int i = 0; i < 4; ++i) CHECK(result.correlation.at(i, i) == 1.0);
}

}  // TEST_SUITE
