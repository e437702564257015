#pragma once
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "aglv/errors.hpp"

namespace aglv {

// Row-major dense matrix of 64-bit floats. The one container used for
// observations, latents, feature maps and kernel matrices alike.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeMismatch("from_rows: ragged initializer");
      std::size_t j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  static DenseMatrix column(std::span<const double> v) {
    DenseMatrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
  }

  static DenseMatrix scalar(double v) {
    DenseMatrix m(1, 1);
    m(0, 0) = v;
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
  std::span<const double> row_span(std::size_t r) const { return {row_ptr(r), cols_}; }

  bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
  double scalar_value() const { return data_[0]; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool bitwise_equal(const DenseMatrix& o) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op);
void require_finite(const DenseMatrix& a, const char* what);

// Elementwise arithmetic; every function allocates its result.
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix neg(const DenseMatrix& a);
DenseMatrix cwise_mul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix cwise_div(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double c);
DenseMatrix add_constant(const DenseMatrix& a, double c);
DenseMatrix cwise_exp(const DenseMatrix& a);
DenseMatrix cwise_log(const DenseMatrix& a);
DenseMatrix cwise_sqrt(const DenseMatrix& a);
DenseMatrix cwise_sin(const DenseMatrix& a);
DenseMatrix cwise_cos(const DenseMatrix& a);
DenseMatrix cwise_square(const DenseMatrix& a);

DenseMatrix transpose(const DenseMatrix& a);
double sum(const DenseMatrix& a);
double trace(const DenseMatrix& a);
double frobenius_norm(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);

// a * b, OpenMP-parallel over output rows. Each output element is produced by
// exactly one thread with a fixed-order inner sum, so the result is
// bit-identical to serial::matmul for any thread count.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// a * a^T (symmetric result), parallel over rows.
DenseMatrix gram(const DenseMatrix& a);
// a^T * a (symmetric result), serial; the R x R case in the low-rank path.
DenseMatrix gram_t(const DenseMatrix& a);

DenseMatrix gather_rows(const DenseMatrix& a, std::span<const std::size_t> rows);
DenseMatrix slice_rows_copy(const DenseMatrix& a, std::size_t row0, std::size_t count);
DenseMatrix hcat(const std::vector<const DenseMatrix*>& blocks);

std::vector<double> get_col(const DenseMatrix& a, std::size_t j);

namespace serial {
// Reference implementations with plain loops, kept for the bit-identity tests
// and the benchmark. They share the per-row inner kernels with the parallel
// versions above.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix gram(const DenseMatrix& a);
}  // namespace serial

}  // namespace aglv
