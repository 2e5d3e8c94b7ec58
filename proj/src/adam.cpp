#include "qflow/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "qflow/errors.hpp"

namespace qflow {

AdamState AdamState::for_parameters(const std::vector<DenseArray*>& params, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const DenseArray* p : params) {
    state.first_moment.emplace_back(p->rows(), p->cols());
    state.second_moment.emplace_back(p->rows(), p->cols());
  }
  return state;
}

void adam_update(const std::vector<DenseArray*>& params, const std::vector<DenseArray>& grads,
                 AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw std::invalid_argument("adam_update: parameter/gradient/moment count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first_moment[i]))
      throw std::invalid_argument("adam_update: shape mismatch at parameter " + std::to_string(i));
    if (!grads[i].all_finite())
      throw NumericError("adam_update: non-finite gradient at parameter " + std::to_string(i) +
                         "; update rejected");
  }

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i]->data();
    const double* g = grads[i].data();
    double* m = state.first_moment[i].data();
    double* v = state.second_moment[i].data();
    const std::size_t n = params[i]->size();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace qflow
