#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qflow {

// Row-major 2-D array of doubles, the numeric carrier for batches
// (rows = batch, cols = features) and network parameters.
class DenseArray {
 public:
  DenseArray() = default;
  DenseArray(int rows, int cols, double fill = 0.0);
  DenseArray(int rows, int cols, std::vector<double> data);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int r) const { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }

  void fill(double value);
  bool all_finite() const;
  // Throws NumericError naming `context` if any entry is NaN or infinite.
  void require_finite(const std::string& context) const;

  bool same_shape(const DenseArray& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  static DenseArray from_rows(const std::vector<std::vector<double>>& rows);
  static DenseArray row_vector(std::span<const double> values);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Dense kernels. Matrix products are delegated to Eigen maps over the
// row-major storage; everything else is plain loops.
namespace linalg {

DenseArray matmul(const DenseArray& a, const DenseArray& b);              // A B
DenseArray matmul_transpose_a(const DenseArray& a, const DenseArray& b);  // A^T B
DenseArray matmul_transpose_b(const DenseArray& a, const DenseArray& b);  // A B^T

void add_inplace(DenseArray& a, const DenseArray& b);
void scale_inplace(DenseArray& a, double s);
// Adds a 1 x cols row vector to every row of a.
void add_row_broadcast(DenseArray& a, const DenseArray& row);
// Per-column sums of a, returned as 1 x cols.
DenseArray column_sums(const DenseArray& a);
// Concatenates horizontally: [a | b].
DenseArray hstack(const DenseArray& a, const DenseArray& b);
// Concatenates vertically.
DenseArray vstack(const DenseArray& a, const DenseArray& b);
// Column slice [c0, c1).
DenseArray columns(const DenseArray& a, int c0, int c1);
// Row slice [r0, r1).
DenseArray rows(const DenseArray& a, int r0, int r1);
double squared_norm(std::span<const double> v);

}  // namespace linalg
}  // namespace qflow
