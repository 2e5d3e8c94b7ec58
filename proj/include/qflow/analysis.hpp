#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qflow/critic.hpp"
#include "qflow/envs.hpp"
#include "qflow/flow_policy.hpp"
#include "qflow/source_policy.hpp"

namespace qflow {

// Analytic concave adapter Q(s, a) = -0.5 ||a - target||^2 with exact
// action gradient target - a. State-independent.
class QuadraticCritic final : public QFunction {
 public:
  explicit QuadraticCritic(std::vector<double> target);
  std::vector<double> q_values(const DenseArray& states, const DenseArray& actions) const override;
  DenseArray action_gradients(const DenseArray& states, const DenseArray& actions) override;

 private:
  std::vector<double> target_;
};

struct VarianceScalingResult {
  std::vector<int> dims;
  std::vector<double> empirical_variance;   // trace of end-effector sample covariance
  std::vector<double> theoretical;          // sigma^2 L^2 / |A|
  double loglog_slope = 0.0;
};

// Which angles receive the i.i.d. perturbation. kLink perturbs each link's
// absolute orientation (the regime in which the 1/|A| law is first-order
// exact); kJoint perturbs the relative joint angles of the cumulative chain,
// where the coupling makes end-effector variance grow with |A| instead.
enum class PerturbationModel { kLink, kJoint };

VarianceScalingResult variance_scaling_experiment(const std::vector<int>& dims, double sigma,
                                                  double total_length, long samples,
                                                  std::uint64_t seed,
                                                  PerturbationModel model = PerturbationModel::kLink);

struct MonotonicityResult {
  AdvantageCurve curve;
  std::vector<double> tolerance;  // per grid point, matched against decreases
  bool pass = false;
  std::string mode;
};

struct MonotonicityOptions {
  int grid_points = 21;
  int states = 64;
  int samples_per_state = 256;
  int ascent_steps = 20;
  double eta = 0.01;
  double quadratic_tolerance = 1e-6;
  // random-net critic topology
  int critic_hidden = 64;
  int critic_layers = 3;
};

// Advantage-curve nondecrease check against a quadratic adapter (exact
// tolerance) or any supplied critic (2-standard-error tolerance).
MonotonicityResult monotonicity_quadratic(const MonotonicityOptions& options, int action_dim,
                                          double quad_target, std::uint64_t seed);
MonotonicityResult monotonicity_with_critic(QFunction& critic, const std::string& mode_name,
                                            const MonotonicityOptions& options, int state_dim,
                                            int action_dim, std::uint64_t seed);
// Randomly initialized smooth critic network.
MonotonicityResult monotonicity_random_net(const MonotonicityOptions& options, int state_dim,
                                           int action_dim, std::uint64_t seed);

struct CorrelationResult {
  std::vector<double> per_dimension_std;
  DenseArray correlation;             // |A| x |A|, averaged over probe states
  std::vector<int> degenerate_dims;   // zero-variance dimensions, reported as 0 correlation
  double min_eigenvalue = 0.0;
};

// Samples exploration actions at probe states and reports per-dimension
// standard deviations and the mean Pearson correlation matrix.
CorrelationResult correlation_experiment(const GaussianSourcePolicy& source,
                                         const VelocityField& field, const FlowConfig& flow_config,
                                         const DenseArray& probe_states, int samples_per_state,
                                         std::uint64_t seed);

// Probe states from a short deterministic rollout of the supplied policies.
DenseArray collect_probe_states(const GaussianSourcePolicy& source, const VelocityField& field,
                                const EnvConfig& env_config, const FlowConfig& flow_config,
                                int states_per_point, std::uint64_t seed);

}  // namespace qflow
