#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "aglv/data.hpp"
#include "aglv/kernels.hpp"
#include "aglv/model.hpp"

namespace aglv {

struct EvalReport {
  std::string metric;
  double value = 0.0;
  double stderr_over_repeats = 0.0;
  std::string config;

  std::string to_csv_row() const;
};

// Mean k-nearest-neighbour accuracy over stratified random folds (Euclidean
// distance, majority vote, ties to the smallest label). folds = 1 evaluates
// the training set against itself.
EvalReport knn_cv_accuracy(const DenseMatrix& x, const std::vector<int>& labels, std::size_t k,
                           std::size_t folds, std::uint64_t seed);

// Coefficient of determination of the best affine map from x_est onto x_true,
// residuals pooled across output dimensions.
double affine_r2(const DenseMatrix& x_est, const DenseMatrix& x_true);

// GP posterior-mean imputation per column: missing rows get
// K_mo (K_oo + sigma2 I)^{-1} y_obs with the exact SM kernel at the latent
// means; observed entries pass through unchanged.
DenseMatrix impute_posterior_mean(const Dataset& ds, const DenseMatrix& x_hat,
                                  const SmKernelParams& params);

// Monte Carlo variant: average the imputation over fresh spectral samples and
// latent draws from q(X).
DenseMatrix impute_posterior_mean_mc(const Dataset& ds, const VariationalParams& vp,
                                     const SmKernelParams& params, std::size_t l_features,
                                     std::size_t num_draws, std::uint64_t seed);

// Mean squared error over hidden entries only.
double imputation_mse(const DenseMatrix& y_imputed, const DenseMatrix& y_truth,
                      const MaskMatrix& mask);

// Per-column observed-mean imputation; the baseline the model must beat.
DenseMatrix impute_column_means(const Dataset& ds);

// Top-Q PCA projection of (centered) y; the linear baseline for latent
// recovery comparisons.
DenseMatrix pca_projection(const DenseMatrix& y, std::size_t q);

}  // namespace aglv
