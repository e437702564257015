#pragma once
#include <cstdint>
#include <optional>
#include <span>

#include "aglv/kernels.hpp"
#include "aglv/lowrank.hpp"
#include "aglv/mask.hpp"
#include "aglv/matrix.hpp"

namespace aglv {

// Per-datum Gaussian variational factors q(x_i) = N(mu_i, diag exp(log_s_i)).
struct VariationalParams {
  DenseMatrix mu;     // N x Q
  DenseMatrix log_s;  // N x Q

  static VariationalParams make(std::size_t n, std::size_t q, double init_var = 1.0);
  void validate() const;
};

struct ElboBreakdown {
  double total = 0.0;
  double term1 = 0.0;  // data reconstruction
  double term2 = 0.0;  // KL regularization
  std::vector<double> per_sample_term1;
};

// Closed-form KL from q(X) to the standard-normal prior; always >= 0.
double kl_term(const VariationalParams& vp);

// log N(y | 0, Phi Phi^T + sigma2 I) through the low-rank determinant and
// solve identities; O(N R^2).
double lowrank_gaussian_loglik(std::span<const double> y, const DenseMatrix& phi, double sigma2);

// Monte Carlo objective: reconstruction term averaged over num_samples fresh
// draws of latents and spectral points, minus the closed-form KL.
// Deterministic in the seed. With a mask, each column's likelihood uses only
// its observed rows.
ElboBreakdown elbo_mc(const DenseMatrix& y, const VariationalParams& vp,
                      const SmKernelParams& params, std::size_t l_features,
                      std::size_t num_samples, std::uint64_t seed,
                      const MaskMatrix* mask = nullptr);

// Dense small-N marginal likelihood under an exact kernel; the test oracle
// for the low-rank path.
double exact_log_marginal(const DenseMatrix& y, const DenseMatrix& x, const KernelFn& kernel,
                          double sigma2);

}  // namespace aglv
