#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aglv/kernels.hpp"
#include "aglv/mask.hpp"
#include "aglv/matrix.hpp"
#include "aglv/model.hpp"

namespace aglv {

// Adam with bias correction over named parameter matrices. Ascent on the
// objective is implemented as descent on its negation.
struct AdamState {
  std::size_t step = 0;
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  std::map<std::string, DenseMatrix> m;
  std::map<std::string, DenseMatrix> v;
};

void adam_step(AdamState& state, std::map<std::string, DenseMatrix>& params,
               const std::map<std::string, DenseMatrix>& grads);

struct TrainConfig {
  std::size_t iterations = 10000;
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.99;
  std::size_t num_components = 2;  // mixture components in the SM kernel
  std::size_t l_features = 50;     // random features per component
  std::size_t latent_dim = 2;
  std::size_t mc_samples = 1;
  std::uint64_t seed = 0;
  bool learn_sigma2 = true;
  std::optional<double> fixed_sigma2;
  double zero_col_tol = 1e-3;   // relative to the largest column RMS
  double zero_col_abs = 1e-2;   // absolute floor in units of the prior scale
  std::size_t trace_every = 100;

  void validate() const;
};

struct TraceRecord {
  std::size_t iter;
  double elbo;
  double term1;
  double term2;
  double sigma2;
  std::size_t zero_cols;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
};

void write_trace_csv(const std::string& path, const TrainTrace& trace);

struct TrainResult {
  VariationalParams vp;
  SmKernelParams kernel;
  TrainTrace trace;
  AdamState adam;
  bool aborted = false;
  std::size_t aborted_at = 0;
};

// Variational training loop: per iteration draw latents and spectral points,
// build the stacked feature map, evaluate the objective on the tape, and take
// one Adam step on the kernel hyperparameters, projection variance (unless
// frozen) and variational parameters. Deterministic per seed.
TrainResult train(const DenseMatrix& y, const TrainConfig& config,
                  const MaskMatrix* mask = nullptr);

// Columns whose RMS falls below max(tol_rel * largest column RMS, tol_abs)
// count as collapsed; a matrix that is zero to 1e-12 absolute counts fully.
std::size_t count_zero_columns(const DenseMatrix& x, double tol_rel, double tol_abs = 0.0);

// Deterministic initialization: latent means from a unit-variance PCA
// projection of the (centered) data, diag(S) = 0.1, spectral means drawn from
// N(0, 0.1^2), unit spectral variances, uniform weights, sigma2 at 10% of the
// mean data variance.
void init_parameters(const DenseMatrix& y, const TrainConfig& config, VariationalParams& vp,
                     SmKernelParams& kernel);

struct Checkpoint {
  std::uint32_t version = 1;
  std::size_t n = 0;
  std::size_t m_cols = 0;
  std::size_t latent_dim = 0;
  std::size_t num_components = 0;
  std::size_t l_features = 0;
  VariationalParams vp;
  SmKernelParams kernel;
  AdamState adam;
};

// Versioned little-endian binary layout; magic "AGLV". Round-trips bit-exact.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace aglv
