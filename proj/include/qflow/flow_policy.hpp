#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qflow/adam.hpp"
#include "qflow/critic.hpp"
#include "qflow/nn.hpp"
#include "qflow/rng.hpp"
#include "qflow/source_policy.hpp"

namespace qflow {

// Flow schedule. ode_steps * ode_dt must equal 1 exactly so the Euler
// integration covers [0, 1].
struct FlowConfig {
  int ascent_steps = 20;  // N
  double eta = 0.01;      // initial ascent step size
  int ode_steps = 20;
  double ode_dt = 0.05;

  void validate() const;
};

// One conditional flow-matching training point on the straight-line
// (optimal-transport) path between a0 and a1.
struct FlowMatchSample {
  double t = 0.0;
  std::vector<double> state;
  std::vector<double> a0;
  std::vector<double> a1;
  std::vector<double> at;               // (1-t) a0 + t a1
  std::vector<double> target_velocity;  // a1 - a0

  static FlowMatchSample make(double t, std::span<const double> state, std::span<const double> a0,
                              std::span<const double> a1);
};

// Rowwise straight-line interpolation (1 - t_r) a0_r + t_r a1_r.
DenseArray ot_interpolate(std::span<const double> t, const DenseArray& a0, const DenseArray& a1);

// Time- and state-conditioned velocity network over inputs [t, s, a]. The
// final layer starts at zero so the induced flow is initially the identity.
class VelocityField {
 public:
  struct Options {
    int hidden = 256;
    int hidden_layers = 3;
    double learning_rate = 3e-4;
  };

  VelocityField(int state_dim, int action_dim, const Options& options, Rng& init_rng);
  VelocityField(MlpNetwork net, int state_dim, int action_dim, const Options& options);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

  // v_w(t, s, a) for a batch sharing one t; pure.
  DenseArray evaluate(double t, const DenseArray& states, const DenseArray& actions) const;
  // Per-row t variant; pure.
  DenseArray evaluate(std::span<const double> t, const DenseArray& states, const DenseArray& actions) const;

  // Conditional flow-matching loss for given per-row times; pure.
  double cfm_loss(std::span<const double> t, const DenseArray& states, const DenseArray& a0,
                  const DenseArray& a1) const;

  // Draws t ~ U[0,1] per row, regresses v_w(t, s, a_t) onto a1 - a0, and
  // applies one Adam step. Returns the loss.
  double cfm_update(const DenseArray& states, const DenseArray& a0, const DenseArray& a1, Rng& rng);

  MlpNetwork& net() { return net_; }
  const MlpNetwork& net() const { return net_; }

 private:
  DenseArray assemble_input(std::span<const double> t, const DenseArray& states,
                            const DenseArray& actions) const;

  int state_dim_ = 0;
  int action_dim_ = 0;
  Options options_;
  MlpNetwork net_;
  AdamState adam_;
};

using VelocityFn = std::function<DenseArray(double t, const DenseArray& states, const DenseArray& actions)>;

struct ClampStats {
  long components = 0;
  long clamped = 0;
  double rate() const { return components > 0 ? static_cast<double>(clamped) / components : 0.0; }
};

// Euler integration of da/dt = v(t, s, a) over [0, 1]; the velocity is
// evaluated at the start of each step. The final action is clamped into
// [-1, 1] per component.
DenseArray integrate_flow(const VelocityFn& velocity, const DenseArray& states, DenseArray a0,
                          int ode_steps, double ode_dt, ClampStats* stats = nullptr);

// Behavior-policy sample: a0 from the source policy (its mean when
// deterministic), transported along the learned field.
DenseArray sample_flow_actions(const VelocityField& field, const GaussianSourcePolicy& source,
                               const DenseArray& states, const FlowConfig& config, Rng& rng,
                               bool deterministic, ClampStats* stats = nullptr);

// Truncated ascent step size: min(eta, 2 sqrt(|A|) / ||g||). A zero gradient
// keeps the nominal eta (the step is zero regardless).
double capped_step_scale(double eta, double grad_norm, int action_dim);

// In-place capped gradient ascent on q's minimum head; each iterate is
// clamped into the action box. Throws NumericError if a step ever exceeds
// the 2 sqrt(|A|) displacement bound.
void ascend(QFunction& q, const DenseArray& states, DenseArray& actions, int steps, double eta);

struct AscentTargets {
  DenseArray a0;
  DenseArray a1;
  // mean q(a1) - mean q(a0); filled only when requested.
  double value_gain = 0.0;
  bool value_gain_valid = false;
};

// Exploration-target construction: sample a0 from the source, run N capped
// ascent steps on the critic, and return both endpoints as the conditional
// flow-matching pair.
AscentTargets construct_targets(QFunction& q, const GaussianSourcePolicy& source,
                                const DenseArray& states, int ascent_steps, double eta, Rng& rng,
                                bool compute_value_gain = false);

struct AdvantageCurve {
  std::vector<double> t_grid;
  std::vector<double> f;             // F(t) estimates, F(0) = 0 by construction
  std::vector<double> increment_se;  // standard error of F(t_k) - F(t_{k-1})
};

// Monte Carlo estimate of the advantage F(t) of the partially transported
// policy over the source, averaged over the state batch. Transport uses the
// production capped-ascent path with per-t step budget floor(t * N); draws
// are shared across the grid (common random numbers).
AdvantageCurve advantage_curve(QFunction& q, const GaussianSourcePolicy& source,
                               const DenseArray& states, std::span<const double> t_grid,
                               int samples_per_state, int ascent_steps, double eta, Rng& rng);

}  // namespace qflow
