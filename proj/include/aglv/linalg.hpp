#pragma once
#include <span>
#include <vector>

#include "aglv/matrix.hpp"

namespace aglv {

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(const DenseMatrix& a);  // throws NotPositiveDefinite

  double logdet() const;
  std::vector<double> solve(std::span<const double> b) const;
  DenseMatrix solve(const DenseMatrix& b) const;
  DenseMatrix inverse() const;
  std::size_t dim() const { return l_.rows(); }
  const DenseMatrix& lower() const { return l_; }

 private:
  DenseMatrix l_;
};

struct CholeskySolveResult {
  double logdet;
  DenseMatrix solution;
};

// log|A| and X with A X = B, for symmetric positive-definite A.
CholeskySolveResult cholesky_logdet_solve(const DenseMatrix& a, const DenseMatrix& b);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  DenseMatrix vectors;         // orthonormal columns, order matching values
};

// Full symmetric eigendecomposition: Householder tridiagonalization followed
// by implicit-shift QL sweeps (capped), eigenpairs sorted by descending value.
EigenDecomposition sym_eig(const DenseMatrix& a);

void require_symmetric(const DenseMatrix& a, const char* what);

// log|Phi Phi^T + sigma2 I_N| computed at O(N R^2) through the determinant
// lemma: N log sigma2 + log|I_R + Phi^T Phi / sigma2|.
double woodbury_logdet(const DenseMatrix& phi, double sigma2);

struct WoodburySolveResult {
  double quad;                 // y^T (Phi Phi^T + sigma2 I)^{-1} y
  std::vector<double> cinv_y;  // (Phi Phi^T + sigma2 I)^{-1} y
};

// Low-rank solve via Woodbury:
// (Phi Phi^T + sigma2 I)^{-1} y = [y - Phi (sigma2 I_R + Phi^T Phi)^{-1} Phi^T y] / sigma2.
WoodburySolveResult woodbury_quad_solve(const DenseMatrix& phi, double sigma2,
                                        std::span<const double> y);

// Largest-magnitude eigenvalue of a symmetric matrix (spectral norm).
double spectral_norm_sym(const DenseMatrix& a);

}  // namespace aglv
