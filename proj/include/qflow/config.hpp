#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qflow/analysis.hpp"
#include "qflow/trainer.hpp"

namespace qflow {

struct AnalysisConfig {
  std::vector<int> dims{2, 4, 8, 16, 32, 64};
  double sigma = 0.05;
  double chain_length = 1.0;
  long samples = 1000000;
  PerturbationModel perturbation = PerturbationModel::kLink;

  std::string monotonicity_mode = "quadratic";  // quadratic | random-net | checkpoint
  int grid_points = 21;
  int states = 64;
  int action_samples = 256;
  double eta = 0.01;
  int ascent_steps = 20;
  int critic_hidden = 64;
  int critic_layers = 3;
  double quad_target = 0.5;
  int state_dim = 8;   // synthetic state dim for quadratic / random-net modes
  int action_dim = 8;  // action dim for quadratic / random-net modes

  int states_per_point = 10;
  int samples_per_state = 1000;
};

struct RunConfig {
  TrainConfig train;
  AnalysisConfig analysis;
  std::optional<double> goal_x;
  std::optional<double> goal_y;

  // Applies cross-field defaults (goal per env kind) and validates.
  void finalize();
};

// Flat dotted-key format: one `section.key = value` per line, `#` comments.
// Unknown keys are errors. Values parse with full validation.
void apply_key(RunConfig& config, const std::string& key, const std::string& value);

// Parses `key=value` items (the --override form).
void apply_override(RunConfig& config, const std::string& item);

RunConfig parse_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

// Canonical resolved snapshot: every key in schema order with its current
// value; re-parsing it reproduces the configuration exactly.
std::string snapshot_text(const RunConfig& config);

// Default output root: $QFLOW_OUTDIR if set, else "runs".
std::string default_output_root();

}  // namespace qflow
