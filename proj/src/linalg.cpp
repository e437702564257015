#include "aglv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aglv {

void require_symmetric(const DenseMatrix& a, const char* what) {
  if (a.rows() != a.cols()) throw SymmetryViolation(std::string(what) + ": matrix not square");
  const double tol = 1e-12 * std::max(1.0, max_abs(a));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::fabs(a(i, j) - a(j, i)) > tol)
        throw SymmetryViolation(std::string(what) + ": asymmetry at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
}

CholeskyFactor::CholeskyFactor(const DenseMatrix& a) {
  require_symmetric(a, "cholesky");
  const std::size_t n = a.rows();
  l_ = DenseMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
    if (!(d > 0.0))
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(d) + " at column " +
                                std::to_string(j));
    const double ljj = std::sqrt(d);
    l_(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
      l_(i, j) = s / ljj;
    }
  }
}

double CholeskyFactor::logdet() const {
  double s = 0.0;
  for (std::size_t i = 0; i < l_.rows(); ++i) s += std::log(l_(i, i));
  return 2.0 * s;
}

std::vector<double> CholeskyFactor::solve(std::span<const double> b) const {
  const std::size_t n = l_.rows();
  if (b.size() != n) throw ShapeMismatch("cholesky solve: vector length mismatch");
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * x[k];
    x[i] = s / l_(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * x[k];
    x[ii] = s / l_(ii, ii);
  }
  return x;
}

DenseMatrix CholeskyFactor::solve(const DenseMatrix& b) const {
  const std::size_t n = l_.rows();
  if (b.rows() != n) throw ShapeMismatch("cholesky solve: row count mismatch");
  DenseMatrix x = b;
  // forward substitution on all columns
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l_(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) x(i, j) -= lik * x(k, j);
    }
    const double d = l_(i, i);
    for (std::size_t j = 0; j < b.cols(); ++j) x(i, j) /= d;
  }
  // back substitution
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double lki = l_(k, ii);
      for (std::size_t j = 0; j < b.cols(); ++j) x(ii, j) -= lki * x(k, j);
    }
    const double d = l_(ii, ii);
    for (std::size_t j = 0; j < b.cols(); ++j) x(ii, j) /= d;
  }
  return x;
}

DenseMatrix CholeskyFactor::inverse() const { return solve(DenseMatrix::identity(l_.rows())); }

CholeskySolveResult cholesky_logdet_solve(const DenseMatrix& a, const DenseMatrix& b) {
  CholeskyFactor chol(a);
  return {chol.logdet(), chol.solve(b)};
}

namespace {

// Householder reduction to tridiagonal form (d = diagonal, e = subdiagonal),
// accumulating the orthogonal transform in z. Follows the classic EISPACK
// tred2/tql2 pair.
void tridiagonalize(DenseMatrix& z, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = z.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scl = 0.0;
      for (std::size_t k = 0; k <= l; ++k) scl += std::fabs(z(i, k));
      if (scl == 0.0) {
        e[i] = z(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          z(i, k) /= scl;
          h += z(i, k) * z(i, k);
        }
        double f = z(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scl * g;
        h -= f * g;
        z(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          z(j, i) = z(i, j) / h;
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
          e[j] = g / h;
          f += e[j] * z(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = z(i, j);
          e[j] = g = e[j] - hh * f;
          for (std::size_t k = 0; k <= j; ++k) z(j, k) -= f * e[k] + g * z(i, k);
        }
      }
    } else {
      e[i] = z(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] != 0.0) {
      for (std::size_t j = 0; j < i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k < i; ++k) g += z(i, k) * z(k, j);
        for (std::size_t k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
      }
    }
    d[i] = z(i, i);
    z(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      z(j, i) = 0.0;
      z(i, j) = 0.0;
    }
  }
}

// Implicit-shift QL sweeps on the tridiagonal matrix, rotations accumulated
// into z. The sweep budget is shared across all eigenvalues.
void ql_implicit(DenseMatrix& z, std::vector<double>& d, std::vector<double>& e,
                 std::size_t sweep_cap) {
  const std::size_t n = z.rows();
  if (n <= 1) return;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  std::size_t sweeps = 0;
  for (std::size_t l = 0; l < n; ++l) {
    for (;;) {
      std::size_t m = l;
      for (; m + 1 < n; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= 1e-300 || std::fabs(e[m]) <= 2.22e-16 * dd) break;
      }
      if (m == l) break;
      if (++sweeps > sweep_cap) throw NoConvergence("sym_eig: sweep cap exceeded");
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflowed = false;
      for (std::size_t i = m; i-- > l;) {
        double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          underflowed = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        for (std::size_t k = 0; k < n; ++k) {
          f = z(k, i + 1);
          z(k, i + 1) = s * z(k, i) + c * f;
          z(k, i) = c * z(k, i) - s * f;
        }
      }
      if (underflowed) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }
}

}  // namespace

EigenDecomposition sym_eig(const DenseMatrix& a) {
  require_symmetric(a, "sym_eig");
  const std::size_t n = a.rows();
  EigenDecomposition out;
  if (n == 0) return out;

  // work on the symmetrized copy so tiny input asymmetries cannot bias sweeps
  DenseMatrix z(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) z(i, j) = 0.5 * (a(i, j) + a(j, i));

  std::vector<double> d, e;
  tridiagonalize(z, d, e);
  ql_implicit(z, d, e, 10000);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });

  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = d[order[c]];
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = z(r, order[c]);
  }
  return out;
}

double woodbury_logdet(const DenseMatrix& phi, double sigma2) {
  if (!(sigma2 > 0.0)) throw NonPositiveSigma("woodbury_logdet: sigma2 must be positive");
  const std::size_t n = phi.rows();
  const std::size_t r = phi.cols();
  DenseMatrix inner = scale(gram_t(phi), 1.0 / sigma2);
  for (std::size_t i = 0; i < r; ++i) inner(i, i) += 1.0;
  CholeskyFactor chol(inner);
  return static_cast<double>(n) * std::log(sigma2) + chol.logdet();
}

WoodburySolveResult woodbury_quad_solve(const DenseMatrix& phi, double sigma2,
                                        std::span<const double> y) {
  if (!(sigma2 > 0.0)) throw NonPositiveSigma("woodbury_quad_solve: sigma2 must be positive");
  const std::size_t n = phi.rows();
  const std::size_t r = phi.cols();
  if (y.size() != n) throw ShapeMismatch("woodbury_quad_solve: vector length mismatch");

  DenseMatrix inner = gram_t(phi);  // sigma2 I_R + Phi^T Phi
  for (std::size_t i = 0; i < r; ++i) inner(i, i) += sigma2;
  CholeskyFactor chol(inner);

  std::vector<double> t(r, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = phi.row_ptr(i);
    const double yi = y[i];
    for (std::size_t j = 0; j < r; ++j) t[j] += row[j] * yi;
  }
  const std::vector<double> zv = chol.solve(t);

  WoodburySolveResult out;
  out.cinv_y.resize(n);
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = phi.row_ptr(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r; ++j) s += row[j] * zv[j];
    const double v = (y[i] - s) / sigma2;
    out.cinv_y[i] = v;
    quad += y[i] * v;
  }
  out.quad = quad;
  return out;
}

double spectral_norm_sym(const DenseMatrix& a) {
  const EigenDecomposition eig = sym_eig(a);
  double best = 0.0;
  for (double v : eig.values) best = std::max(best, std::fabs(v));
  return best;
}

}  // namespace aglv
