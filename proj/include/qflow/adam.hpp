#pragma once

#include <vector>

#include "qflow/dense_array.hpp"

namespace qflow {

// Adam with bias correction. Moments mirror the parameter list handed to
// for_parameters(); step_count advances by exactly one per update.
struct AdamState {
  std::vector<DenseArray> first_moment;
  std::vector<DenseArray> second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 3e-4;

  static AdamState for_parameters(const std::vector<DenseArray*>& params, double learning_rate);
};

// Applies one bias-corrected Adam step in place. Rejects non-finite
// gradients with NumericError before mutating either params or state.
void adam_update(const std::vector<DenseArray*>& params, const std::vector<DenseArray>& grads,
                 AdamState& state);

}  // namespace qflow
