#include "aglv/model.hpp"

#include <cmath>

#include "aglv/elbo_graph.hpp"
#include "aglv/linalg.hpp"

namespace aglv {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

VariationalParams VariationalParams::make(std::size_t n, std::size_t q, double init_var) {
  VariationalParams vp;
  vp.mu = DenseMatrix(n, q);
  vp.log_s = DenseMatrix(n, q, std::log(init_var));
  return vp;
}

void VariationalParams::validate() const {
  require_same_shape(mu, log_s, "variational params");
  require_finite(mu, "variational mu");
  require_finite(log_s, "variational log_s");
}

double kl_term(const VariationalParams& vp) { return diag_kl_value(vp.mu, vp.log_s); }

double lowrank_gaussian_loglik(std::span<const double> y, const DenseMatrix& phi, double sigma2) {
  const double n = static_cast<double>(phi.rows());
  const double logdet = woodbury_logdet(phi, sigma2);
  const double quad = woodbury_quad_solve(phi, sigma2, y).quad;
  return -0.5 * n * kLog2Pi - 0.5 * logdet - 0.5 * quad;
}

ElboBreakdown elbo_mc(const DenseMatrix& y, const VariationalParams& vp,
                      const SmKernelParams& params, std::size_t l_features,
                      std::size_t num_samples, std::uint64_t seed, const MaskMatrix* mask) {
  if (num_samples < 1) throw Error("elbo_mc: need at least one Monte Carlo sample");
  if (l_features < 2 || l_features % 2 != 0) throw OddL("elbo_mc: L must be even and >= 2");
  vp.validate();
  params.validate();
  require_finite(y, "observations");
  if (vp.mu.rows() != y.rows()) throw ShapeMismatch("elbo_mc: latent/data row mismatch");
  if (vp.mu.cols() != params.latent_dim) throw ShapeMismatch("elbo_mc: latent dimension");

  const std::size_t half_l = l_features / 2;
  auto batch = make_loglik_batch(y, mask);

  Rng rng(seed);
  const ElboNoise noise = draw_elbo_noise(y.rows(), params.latent_dim, params.num_components,
                                          half_l, num_samples, rng);

  PlainBackend b;
  ElboVars<PlainBackend> vars{vp.mu,
                              vp.log_s,
                              params.log_weights,
                              params.means,
                              params.log_var,
                              DenseMatrix::scalar(params.log_sigma2)};
  const auto graph = build_elbo(b, vars, noise, batch, params.num_components, half_l);

  ElboBreakdown out;
  out.term1 = PlainBackend::scalar_of(graph.term1);
  out.term2 = PlainBackend::scalar_of(graph.term2);
  out.total = PlainBackend::scalar_of(graph.total);
  for (const auto& v : graph.per_sample) out.per_sample_term1.push_back(v.scalar_value());
  return out;
}

double exact_log_marginal(const DenseMatrix& y, const DenseMatrix& x, const KernelFn& kernel,
                          double sigma2) {
  if (!(sigma2 > 0.0)) throw NonPositiveSigma("exact_log_marginal: sigma2 must be positive");
  if (y.rows() != x.rows()) throw ShapeMismatch("exact_log_marginal: row mismatch");
  const std::size_t n = y.rows();
  DenseMatrix c = kernel_matrix(x, kernel);
  for (std::size_t i = 0; i < n; ++i) c(i, i) += sigma2;
  CholeskyFactor chol(c);
  const double logdet = chol.logdet();

  double total = 0.0;
  for (std::size_t j = 0; j < y.cols(); ++j) {
    const std::vector<double> col = get_col(y, j);
    const std::vector<double> sol = chol.solve(col);
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) quad += col[i] * sol[i];
    total += -0.5 * static_cast<double>(n) * kLog2Pi - 0.5 * logdet - 0.5 * quad;
  }
  return total;
}

}  // namespace aglv
