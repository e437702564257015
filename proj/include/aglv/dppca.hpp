#pragma once
#include <optional>
#include <string>
#include <vector>

#include "aglv/linalg.hpp"
#include "aglv/matrix.hpp"

namespace aglv {

// Closed-form landscape analysis of the linear-kernel latent variable model
// (dual probabilistic PCA): which projection variances admit stable maxima
// with zero latent columns, and what the stationary points look like.

enum class CollapseRegime {
  GlobalOptimum,   // sigma2 below the retained spectrum; stable max has no zero columns
  ZeroColumns,     // sigma2 inside the top-Q spectrum; q columns collapse
  AllZero,         // sigma2 above the leading eigenvalue; full homogeneity collapse
  LocalMinCluster, // sigma2 below the smallest eigenvalue
  Ambiguous,       // sigma2 exactly on an eigenvalue boundary
};

std::string to_string(CollapseRegime r);

struct DppcaReport {
  std::vector<double> eigvals;  // descending spectrum of (1/M) Y Y^T
  double sigma2_hat = 0.0;      // MLE of the projection variance at Q' = Q
  CollapseRegime regime = CollapseRegime::GlobalOptimum;
  std::size_t predicted_zero_cols = 0;
};

enum class StationaryKind { GlobalOptimum, LocalOptimum, Saddle, LocalMinimum };

std::string to_string(StationaryKind k);

// Outcome of the eigenvalue sign analysis alone (optimum may be local or
// global depending on the retention pattern).
enum class SignClass { Optimum, Saddle, LocalMinimum };

std::string to_string(SignClass c);

// One retained slot of the stationary point: either an eigenvalue index or a
// sigma2 fill (which produces an exactly-zero latent column).
struct RetainedSlot {
  bool sigma2_fill = false;
  std::size_t eig_index = 0;

  static RetainedSlot eig(std::size_t idx) { return {false, idx}; }
  static RetainedSlot fill() { return {true, 0}; }
};

struct StationaryPoint {
  DenseMatrix x_hat;                    // N x Q
  std::vector<double> retained_eigvals; // lambda_i or sigma2 per slot
  StationaryKind kind = StationaryKind::Saddle;
};

// Descending eigendecomposition of (1/M) Y Y^T.
EigenDecomposition gram_eigs(const DenseMatrix& y);

// Mean of the discarded eigenvalues: the MLE of the projection variance when
// the top q_prime eigenpairs are retained.
double sigma2_mle(const std::vector<double>& eigvals_desc, std::size_t q_prime, std::size_t n);

// X_hat = U_Q (Lambda_Q - sigma2 I)^{1/2} R for a chosen retention pattern.
// Requires lambda >= sigma2 on retained slots and an orthogonal R.
StationaryPoint stationary_x(const EigenDecomposition& eig,
                             const std::vector<RetainedSlot>& retained, double sigma2,
                             const DenseMatrix& r_rotation);

// Regime and predicted zero-column count for a projection variance against a
// descending spectrum with Q latent dimensions.
DppcaReport classify_regime(const std::vector<double>& eigvals_desc, double sigma2,
                            std::size_t q);

// Sign analysis of the likelihood variation along discarded eigendirections:
// all retained above all discarded -> optimum; all below -> local minimum;
// mixed -> saddle.
SignClass classify_stationary(const std::vector<double>& retained,
                              const std::vector<double>& discarded);

// Log-likelihood of the linear-kernel model at latents X:
// M [ -N/2 log 2pi - 1/2 log|X X^T + sigma2 I| ] - 1/2 tr((X X^T + sigma2 I)^{-1} Y Y^T).
double dppca_log_likelihood(const DenseMatrix& y, const DenseMatrix& x, double sigma2);

// Same quantity through the eigen-spectrum shortcut for a retention of the
// top q_prime eigenpairs at their stationary point.
double dppca_log_likelihood_closed_form(const std::vector<double>& eigvals_desc,
                                        std::size_t q_prime, double sigma2, std::size_t n,
                                        std::size_t m_cols);

// ||(1/M) Y Y^T K^{-1} X - X||_F with K = X X^T + sigma2 I; zero at
// stationary points.
double stationarity_residual(const DenseMatrix& y, const DenseMatrix& x, double sigma2);

// key: value serialization consumed by the command-line diagnose report.
std::string serialize_report(const DppcaReport& report);

}  // namespace aglv
