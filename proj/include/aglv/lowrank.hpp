#pragma once
#include <memory>
#include <optional>
#include <vector>

#include "aglv/linalg.hpp"
#include "aglv/mask.hpp"
#include "aglv/matrix.hpp"

namespace aglv {

// Columns of the data matrix that share an observed-row pattern. Grouping lets
// the low-rank likelihood factorize the inner R x R system once per pattern
// (once in total when nothing is missing).
struct ColumnGroup {
  std::vector<std::size_t> observed_rows;
  std::vector<std::size_t> columns;
};

// Immutable per-dataset payload for the batched low-rank Gaussian
// log-likelihood: yt holds the data columns as rows (M x N).
struct LoglikBatch {
  DenseMatrix yt;
  std::vector<ColumnGroup> groups;
};

std::vector<ColumnGroup> group_columns(const MaskMatrix* mask, std::size_t n, std::size_t m);

std::shared_ptr<const LoglikBatch> make_loglik_batch(const DenseMatrix& y, const MaskMatrix* mask);

// Forward pass of sum_j log N(y_j | 0, Phi_j Phi_j^T + sigma2 I) where Phi_j
// keeps only the rows observed in column j. Cached factors feed the adjoint.
struct LowrankBatchResult {
  double total = 0.0;
  std::vector<double> per_column;

  struct GroupCache {
    CholeskyFactor chol;   // sigma2 I_R + Phi_g^T Phi_g
    DenseMatrix u;         // n_obs x |columns|: (C^-1 y_j) stacked
    double sum_uu = 0.0;   // sum_j u_j^T u_j
  };
  std::vector<GroupCache> cache;  // parallel to batch.groups when cached
};

LowrankBatchResult lowrank_loglik_batch(const DenseMatrix& phi, double sigma2,
                                        const LoglikBatch& batch, bool want_cache);

// Accumulates bar * d(total)/dPhi into dphi and bar * d(total)/dsigma2 into
// dsigma2, using the forward cache.
void lowrank_loglik_batch_adjoint(const DenseMatrix& phi, double sigma2, const LoglikBatch& batch,
                                  const LowrankBatchResult& fwd, double bar, DenseMatrix& dphi,
                                  double& dsigma2);

// KL(N(mu_i, diag exp(log_s_i)) || N(0, I)) summed over rows; shared between
// the tape composite and the closed-form evaluation.
double diag_kl_value(const DenseMatrix& mu, const DenseMatrix& log_s);

}  // namespace aglv
