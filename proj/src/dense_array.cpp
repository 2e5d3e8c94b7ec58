#include "qflow/dense_array.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

#include "qflow/errors.hpp"

namespace qflow {

namespace {
using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EigenRowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;

ConstMap map_of(const DenseArray& a) { return {a.data(), a.rows(), a.cols()}; }
Map map_of(DenseArray& a) { return {a.data(), a.rows(), a.cols()}; }
}  // namespace

DenseArray::DenseArray(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("DenseArray: negative shape");
}

DenseArray::DenseArray(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("DenseArray: data length does not match rows*cols");
}

void DenseArray::fill(double value) {
  for (auto& x : data_) x = value;
}

bool DenseArray::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

void DenseArray::require_finite(const std::string& context) const {
  if (!all_finite()) throw NumericError("non-finite values in " + context);
}

DenseArray DenseArray::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  DenseArray out(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size())
      throw std::invalid_argument("DenseArray::from_rows: ragged rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c) out.at(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  }
  return out;
}

DenseArray DenseArray::row_vector(std::span<const double> values) {
  DenseArray out(1, static_cast<int>(values.size()));
  for (std::size_t c = 0; c < values.size(); ++c) out.at(0, static_cast<int>(c)) = values[c];
  return out;
}

namespace linalg {

DenseArray matmul(const DenseArray& a, const DenseArray& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  DenseArray out(a.rows(), b.cols());
  map_of(out).noalias() = map_of(a) * map_of(b);
  return out;
}

DenseArray matmul_transpose_a(const DenseArray& a, const DenseArray& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_transpose_a: row counts differ");
  DenseArray out(a.cols(), b.cols());
  map_of(out).noalias() = map_of(a).transpose() * map_of(b);
  return out;
}

DenseArray matmul_transpose_b(const DenseArray& a, const DenseArray& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_transpose_b: col counts differ");
  DenseArray out(a.rows(), b.rows());
  map_of(out).noalias() = map_of(a) * map_of(b).transpose();
  return out;
}

void add_inplace(DenseArray& a, const DenseArray& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add_inplace: shape mismatch");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void scale_inplace(DenseArray& a, double s) {
  double* p = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) p[i] *= s;
}

void add_row_broadcast(DenseArray& a, const DenseArray& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_row_broadcast: expected 1 x cols vector");
  for (int r = 0; r < a.rows(); ++r) {
    double* pr = a.data() + static_cast<std::size_t>(r) * a.cols();
    const double* pv = row.data();
    for (int c = 0; c < a.cols(); ++c) pr[c] += pv[c];
  }
}

DenseArray column_sums(const DenseArray& a) {
  DenseArray out(1, a.cols());
  for (int r = 0; r < a.rows(); ++r) {
    const double* pr = a.data() + static_cast<std::size_t>(r) * a.cols();
    for (int c = 0; c < a.cols(); ++c) out.at(0, c) += pr[c];
  }
  return out;
}

DenseArray hstack(const DenseArray& a, const DenseArray& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("hstack: row counts differ");
  DenseArray out(a.rows(), a.cols() + b.cols());
  for (int r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    auto ra = a.row(r);
    auto rb = b.row(r);
    std::copy(ra.begin(), ra.end(), dst.begin());
    std::copy(rb.begin(), rb.end(), dst.begin() + a.cols());
  }
  return out;
}

DenseArray vstack(const DenseArray& a, const DenseArray& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("vstack: col counts differ");
  DenseArray out(a.rows() + b.rows(), a.cols());
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

DenseArray columns(const DenseArray& a, int c0, int c1) {
  if (c0 < 0 || c1 > a.cols() || c0 > c1) throw std::invalid_argument("columns: bad range");
  DenseArray out(a.rows(), c1 - c0);
  for (int r = 0; r < a.rows(); ++r) {
    auto src = a.row(r);
    std::copy(src.begin() + c0, src.begin() + c1, out.row(r).begin());
  }
  return out;
}

DenseArray rows(const DenseArray& a, int r0, int r1) {
  if (r0 < 0 || r1 > a.rows() || r0 > r1) throw std::invalid_argument("rows: bad range");
  DenseArray out(r1 - r0, a.cols());
  std::copy(a.data() + static_cast<std::size_t>(r0) * a.cols(),
            a.data() + static_cast<std::size_t>(r1) * a.cols(), out.data());
  return out;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace linalg
}  // namespace qflow
