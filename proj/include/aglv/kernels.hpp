#pragma once
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "aglv/matrix.hpp"
#include "aglv/rng.hpp"

namespace aglv {

// Spectral mixture kernel hyperparameters plus the projection variance.
// Positivity is enforced structurally: weights, spectral variances and the
// projection variance live in log space.
struct SmKernelParams {
  std::size_t num_components = 0;  // mixture components
  std::size_t latent_dim = 0;      // input dimension
  DenseMatrix log_weights;         // num_components x 1
  DenseMatrix means;               // num_components x latent_dim
  DenseMatrix log_var;             // num_components x latent_dim
  double log_sigma2 = 0.0;

  double weight(std::size_t i) const;
  double spectral_var(std::size_t i, std::size_t q) const;
  double sigma2() const;
  double sum_weights() const;

  void validate() const;

  static SmKernelParams make(std::size_t components, std::size_t dim);
};

// Reparameterized spectral points: points = mean_i + sd_i (*) eps with eps
// standard normal, stored as an (m * L/2) x Q stack of per-component blocks.
struct SpectralSample {
  std::size_t num_components = 0;
  std::size_t half_l = 0;  // frequencies per component (L/2)
  std::size_t latent_dim = 0;
  DenseMatrix eps;
  DenseMatrix points;

  std::size_t feature_count() const { return num_components * 2 * half_l; }
  const double* point(std::size_t component, std::size_t l) const {
    return points.row_ptr(component * half_l + l);
  }
};

struct BaseKernelConfig {
  enum class Kind { Rbf, Periodic, Sum };
  Kind kind = Kind::Rbf;
  double outputscale = 1.0;
  double lengthscale = 1.0;
  double period = 1.0;  // Periodic only
  std::vector<BaseKernelConfig> children;

  static BaseKernelConfig rbf(double outputscale, double lengthscale);
  static BaseKernelConfig periodic(double outputscale, double lengthscale, double period);
  static BaseKernelConfig sum(std::vector<BaseKernelConfig> parts);

  void validate() const;
};

// Closed-form SM kernel:
//   sum_i alpha_i exp(-2 pi^2 sum_q var_{i,q} tau_q^2) cos(2 pi mean_i . tau).
double sm_kernel_eval(std::span<const double> x, std::span<const double> xp,
                      const SmKernelParams& params);

double base_kernel_eval(std::span<const double> x, std::span<const double> xp,
                        const BaseKernelConfig& cfg);

// L/2 spectral points per component, deterministic in the seed.
SpectralSample sample_spectral_points(const SmKernelParams& params, std::size_t l_features,
                                      std::uint64_t seed);

// Regenerate points from stored eps under (possibly different) params.
void refresh_spectral_points(SpectralSample& sample, const SmKernelParams& params);

// Stacked random Fourier feature vector of length m*L. Per component:
// sqrt(alpha_i) * sqrt(2/L) * [sin, cos] interleaved per frequency, components
// concatenated in index order.
std::vector<double> sm_rff_features(std::span<const double> x, const SpectralSample& sample,
                                    const SmKernelParams& params);

// Row n holds sm_rff_features(x_n). OpenMP-parallel over rows with disjoint
// writes; bit-identical to serial::feature_matrix.
DenseMatrix feature_matrix(const DenseMatrix& x, const SpectralSample& sample,
                           const SmKernelParams& params);

namespace serial {
DenseMatrix feature_matrix(const DenseMatrix& x, const SpectralSample& sample,
                           const SmKernelParams& params);
}

// Bernstein-type tail bound on P(||Khat - K||_2 >= epsilon) for the stacked
// feature approximation with L features per component. Returned raw; may
// exceed 1 (clip only when reporting).
double rff_tail_bound(const SmKernelParams& params, std::size_t n, std::size_t l_features,
                      double epsilon, double kernel_spectral_norm);

using KernelFn = std::function<double(std::span<const double>, std::span<const double>)>;

// Exact kernel matrix over the rows of x; symmetric by construction.
DenseMatrix kernel_matrix(const DenseMatrix& x, const KernelFn& kernel);

KernelFn make_base_kernel_fn(const BaseKernelConfig& cfg);
KernelFn make_sm_kernel_fn(const SmKernelParams& params);
KernelFn make_linear_kernel_fn();

}  // namespace aglv
