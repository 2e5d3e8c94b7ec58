#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "qflow/dense_array.hpp"
#include "qflow/nn.hpp"

namespace qflow::test {

// Straightforward triple-loop matrix product (no Eigen).
inline DenseArray naive_matmul(const DenseArray& a, const DenseArray& b) {
  DenseArray out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      for (int j = 0; j < b.cols(); ++j) out.at(i, j) += aik * b.at(k, j);
    }
  return out;
}

inline double l2_norm(const DenseArray& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

// Relative error with an absolute floor: blocks whose true gradient is
// exactly zero (e.g. biases ahead of batch norm) otherwise compare finite
// difference rounding noise against itself.
inline double block_rel_error(const DenseArray& analytic, const DenseArray& reference) {
  DenseArray diff = analytic;
  for (std::size_t i = 0; i < diff.size(); ++i) diff.data()[i] -= reference.data()[i];
  return l2_norm(diff) / std::max(l2_norm(reference), 1e-6);
}

// loss(net) = sum(upstream .* net(input)). Central finite differences over
// every parameter element; returns the worst per-block relative error
// against the supplied analytic gradients.
inline double fd_param_rel_error(MlpNetwork& net, const DenseArray& input, Mode mode,
                                 const DenseArray& upstream,
                                 const std::vector<DenseArray>& analytic, double h = 1e-5) {
  const auto loss = [&]() {
    const DenseArray out = net.forward(input, mode);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += upstream.data()[i] * out.data()[i];
    return s;
  };
  auto params = net.parameters();
  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    DenseArray fd(params[b]->rows(), params[b]->cols());
    for (std::size_t i = 0; i < params[b]->size(); ++i) {
      const double saved = params[b]->data()[i];
      params[b]->data()[i] = saved + h;
      const double up = loss();
      params[b]->data()[i] = saved - h;
      const double down = loss();
      params[b]->data()[i] = saved;
      fd.data()[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, block_rel_error(analytic[b], fd));
  }
  return worst;
}

inline double fd_input_rel_error(MlpNetwork& net, const DenseArray& input, Mode mode,
                                 const DenseArray& upstream, const DenseArray& analytic,
                                 double h = 1e-5) {
  const auto loss = [&](const DenseArray& x) {
    const DenseArray out = net.forward(x, mode);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += upstream.data()[i] * out.data()[i];
    return s;
  };
  DenseArray fd(input.rows(), input.cols());
  DenseArray x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = loss(x);
    x.data()[i] = saved - h;
    const double down = loss(x);
    x.data()[i] = saved;
    fd.data()[i] = (up - down) / (2.0 * h);
  }
  return block_rel_error(analytic, fd);
}

// Central finite difference of an arbitrary scalar function of one variable
// held in *slot.
inline double fd_scalar(const std::function<double()>& f, double* slot, double h = 1e-5) {
  const double saved = *slot;
  *slot = saved + h;
  const double up = f();
  *slot = saved - h;
  const double down = f();
  *slot = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace qflow::test
