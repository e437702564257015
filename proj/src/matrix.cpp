#include "aglv/matrix.hpp"

#include <cmath>
#include <cstring>

namespace aglv {

bool DenseMatrix::bitwise_equal(const DenseMatrix& o) const {
  if (!same_shape(o)) return false;
  return std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(double)) == 0;
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeMismatch(std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
}

void require_finite(const DenseMatrix& a, const char* what) {
  if (!a.all_finite()) throw NonFiniteInput(std::string(what) + ": non-finite entry");
}

namespace {

template <class F>
DenseMatrix map2(const DenseMatrix& a, const DenseMatrix& b, const char* op, F f) {
  require_same_shape(a, b, op);
  DenseMatrix r(a.rows(), a.cols());
  const double* pa = a.data();
  const double* pb = b.data();
  double* pr = r.data();
  for (std::size_t i = 0; i < a.size(); ++i) pr[i] = f(pa[i], pb[i]);
  return r;
}

template <class F>
DenseMatrix map1(const DenseMatrix& a, F f) {
  DenseMatrix r(a.rows(), a.cols());
  const double* pa = a.data();
  double* pr = r.data();
  for (std::size_t i = 0; i < a.size(); ++i) pr[i] = f(pa[i]);
  return r;
}

}  // namespace

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  return map2(a, b, "add", [](double x, double y) { return x + y; });
}
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  return map2(a, b, "sub", [](double x, double y) { return x - y; });
}
DenseMatrix neg(const DenseMatrix& a) {
  return map1(a, [](double x) { return -x; });
}
DenseMatrix cwise_mul(const DenseMatrix& a, const DenseMatrix& b) {
  return map2(a, b, "cwise_mul", [](double x, double y) { return x * y; });
}
DenseMatrix cwise_div(const DenseMatrix& a, const DenseMatrix& b) {
  return map2(a, b, "cwise_div", [](double x, double y) { return x / y; });
}
DenseMatrix scale(const DenseMatrix& a, double c) {
  return map1(a, [c](double x) { return x * c; });
}
DenseMatrix add_constant(const DenseMatrix& a, double c) {
  return map1(a, [c](double x) { return x + c; });
}
DenseMatrix cwise_exp(const DenseMatrix& a) {
  return map1(a, [](double x) { return std::exp(x); });
}
DenseMatrix cwise_log(const DenseMatrix& a) {
  return map1(a, [](double x) { return std::log(x); });
}
DenseMatrix cwise_sqrt(const DenseMatrix& a) {
  return map1(a, [](double x) { return std::sqrt(x); });
}
DenseMatrix cwise_sin(const DenseMatrix& a) {
  return map1(a, [](double x) { return std::sin(x); });
}
DenseMatrix cwise_cos(const DenseMatrix& a) {
  return map1(a, [](double x) { return std::cos(x); });
}
DenseMatrix cwise_square(const DenseMatrix& a) {
  return map1(a, [](double x) { return x * x; });
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix r(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) r(j, i) = a(i, j);
  return r;
}

double sum(const DenseMatrix& a) {
  double s = 0.0;
  const double* p = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += p[i];
  return s;
}

double trace(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeMismatch("trace: matrix not square");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

double frobenius_norm(const DenseMatrix& a) {
  double s = 0.0;
  const double* p = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += p[i] * p[i];
  return std::sqrt(s);
}

double max_abs(const DenseMatrix& a) {
  double s = 0.0;
  const double* p = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::fabs(p[i]));
  return s;
}

namespace detail {

// One output row of a*b; the single code path used by both the serial and the
// OpenMP matmul. noinline pins one emitted body so both callers produce
// bit-identical results whatever the optimizer does at the call sites.
__attribute__((noinline)) void matmul_row(const double* arow, const DenseMatrix& b, double* out) {
  const std::size_t k = b.rows();
  const std::size_t n = b.cols();
  for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
  for (std::size_t t = 0; t < k; ++t) {
    const double av = arow[t];
    const double* brow = b.row_ptr(t);
    for (std::size_t j = 0; j < n; ++j) out[j] += av * brow[j];
  }
}

__attribute__((noinline)) void gram_row(const DenseMatrix& a, std::size_t i, double* out) {
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  const double* ai = a.row_ptr(i);
  for (std::size_t j = 0; j < n; ++j) {
    const double* aj = a.row_ptr(j);
    double s = 0.0;
    for (std::size_t t = 0; t < k; ++t) s += ai[t] * aj[t];
    out[j] = s;
  }
}

}  // namespace detail

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows())
    throw ShapeMismatch("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                        " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  DenseMatrix r(a.rows(), b.cols());
  const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < nr; ++i)
    detail::matmul_row(a.row_ptr(static_cast<std::size_t>(i)), b,
                       r.row_ptr(static_cast<std::size_t>(i)));
  return r;
}

DenseMatrix gram(const DenseMatrix& a) {
  DenseMatrix r(a.rows(), a.rows());
  const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < nr; ++i)
    detail::gram_row(a, static_cast<std::size_t>(i), r.row_ptr(static_cast<std::size_t>(i)));
  return r;
}

DenseMatrix gram_t(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  DenseMatrix r(k, k);
  for (std::size_t t = 0; t < n; ++t) {
    const double* row = a.row_ptr(t);
    for (std::size_t i = 0; i < k; ++i) {
      const double v = row[i];
      double* ri = r.row_ptr(i);
      for (std::size_t j = 0; j < k; ++j) ri[j] += v * row[j];
    }
  }
  return r;
}

DenseMatrix gather_rows(const DenseMatrix& a, std::span<const std::size_t> rows) {
  DenseMatrix r(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::memcpy(r.row_ptr(i), a.row_ptr(rows[i]), a.cols() * sizeof(double));
  return r;
}

DenseMatrix slice_rows_copy(const DenseMatrix& a, std::size_t row0, std::size_t count) {
  if (row0 + count > a.rows()) throw ShapeMismatch("slice_rows_copy: range out of bounds");
  DenseMatrix out(count, a.cols());
  for (std::size_t i = 0; i < count; ++i)
    std::memcpy(out.row_ptr(i), a.row_ptr(row0 + i), a.cols() * sizeof(double));
  return out;
}

DenseMatrix hcat(const std::vector<const DenseMatrix*>& blocks) {
  if (blocks.empty()) return {};
  const std::size_t n = blocks.front()->rows();
  std::size_t total = 0;
  for (const auto* b : blocks) {
    if (b->rows() != n) throw ShapeMismatch("hcat: row count mismatch");
    total += b->cols();
  }
  DenseMatrix r(n, total);
  for (std::size_t i = 0; i < n; ++i) {
    double* out = r.row_ptr(i);
    for (const auto* b : blocks) {
      std::memcpy(out, b->row_ptr(i), b->cols() * sizeof(double));
      out += b->cols();
    }
  }
  return r;
}

std::vector<double> get_col(const DenseMatrix& a, std::size_t j) {
  std::vector<double> v(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) v[i] = a(i, j);
  return v;
}

namespace serial {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeMismatch("serial::matmul: inner dimension mismatch");
  DenseMatrix r(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) detail::matmul_row(a.row_ptr(i), b, r.row_ptr(i));
  return r;
}

DenseMatrix gram(const DenseMatrix& a) {
  DenseMatrix r(a.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) detail::gram_row(a, i, r.row_ptr(i));
  return r;
}

}  // namespace serial

}  // namespace aglv
