#pragma once
#include <memory>
#include <vector>

#include "aglv/autodiff.hpp"
#include "aglv/kernels.hpp"
#include "aglv/lowrank.hpp"
#include "aglv/matrix.hpp"
#include "aglv/rng.hpp"

namespace aglv {

// Reparameterization noise for one objective evaluation: per Monte Carlo
// sample, first the latent draws (N x Q), then the spectral draws
// ((m * L/2) x Q) in component-major order. Both the direct evaluator and the
// trainer consume this fixed order, which is what makes a seed reproducible.
struct ElboNoise {
  std::vector<DenseMatrix> eps_x;
  std::vector<DenseMatrix> eps_w;
};

inline ElboNoise draw_elbo_noise(std::size_t n, std::size_t q, std::size_t components,
                                 std::size_t half_l, std::size_t num_samples, Rng& rng) {
  ElboNoise noise;
  for (std::size_t s = 0; s < num_samples; ++s) {
    DenseMatrix ex(n, q);
    for (std::size_t i = 0; i < ex.size(); ++i) ex.data()[i] = rng.normal();
    noise.eps_x.push_back(std::move(ex));
    DenseMatrix ew(components * half_l, q);
    for (std::size_t i = 0; i < ew.size(); ++i) ew.data()[i] = rng.normal();
    noise.eps_w.push_back(std::move(ew));
  }
  return noise;
}

// Evaluation backend: plain matrices, no recording.
struct PlainBackend {
  using V = DenseMatrix;
  V constant(DenseMatrix m) { return m; }
  V add(const V& a, const V& b) { return aglv::add(a, b); }
  V sub(const V& a, const V& b) { return aglv::sub(a, b); }
  V cwise_mul(const V& a, const V& b) { return aglv::cwise_mul(a, b); }
  V scale(const V& a, double c) { return aglv::scale(a, c); }
  V add_constant(const V& a, double c) { return aglv::add_constant(a, c); }
  V mul_scalar(const V& a, const V& s) { return aglv::scale(a, s.scalar_value()); }
  V cwise_exp(const V& a) { return aglv::cwise_exp(a); }
  V cwise_sqrt(const V& a) { return aglv::cwise_sqrt(a); }
  V cwise_sin(const V& a) { return aglv::cwise_sin(a); }
  V cwise_cos(const V& a) { return aglv::cwise_cos(a); }
  V matmul(const V& a, const V& b) { return aglv::matmul(a, b); }
  V transpose(const V& a) { return aglv::transpose(a); }
  V slice_rows(const V& a, std::size_t r0, std::size_t n) { return slice_rows_copy(a, r0, n); }
  V concat_cols(const std::vector<V>& parts) {
    std::vector<const DenseMatrix*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    return hcat(ptrs);
  }
  V lowrank(const V& phi, const V& sigma2, const std::shared_ptr<const LoglikBatch>& batch) {
    return DenseMatrix::scalar(
        lowrank_loglik_batch(phi, sigma2.scalar_value(), *batch, false).total);
  }
  V diag_kl(const V& mu, const V& log_s) { return DenseMatrix::scalar(diag_kl_value(mu, log_s)); }
  static double scalar_of(const V& v) { return v.scalar_value(); }
};

// Recording backend: same arithmetic, adjoints available.
struct TapeBackend {
  Tape& tape;
  using V = Var;
  V constant(DenseMatrix m) { return tape.constant(std::move(m)); }
  V add(V a, V b) { return tape.add(a, b); }
  V sub(V a, V b) { return tape.sub(a, b); }
  V cwise_mul(V a, V b) { return tape.cwise_mul(a, b); }
  V scale(V a, double c) { return tape.scale(a, c); }
  V add_constant(V a, double c) { return tape.add_constant(a, c); }
  V mul_scalar(V a, V s) { return tape.mul_scalar(a, s); }
  V cwise_exp(V a) { return tape.cwise_exp(a); }
  V cwise_sqrt(V a) { return tape.cwise_sqrt(a); }
  V cwise_sin(V a) { return tape.cwise_sin(a); }
  V cwise_cos(V a) { return tape.cwise_cos(a); }
  V matmul(V a, V b) { return tape.matmul(a, b); }
  V transpose(V a) { return tape.transpose(a); }
  V slice_rows(V a, std::size_t r0, std::size_t n) { return tape.slice_rows(a, r0, n); }
  V concat_cols(const std::vector<V>& parts) { return tape.concat_cols(parts); }
  V lowrank(V phi, V sigma2, std::shared_ptr<const LoglikBatch> batch) {
    return tape.lowrank_loglik(phi, sigma2, std::move(batch));
  }
  V diag_kl(V mu, V log_s) { return tape.diag_kl(mu, log_s); }
  static double scalar_of(V v) { return v.value().scalar_value(); }
};

template <class B>
struct ElboVars {
  typename B::V mu;          // N x Q
  typename B::V log_s;       // N x Q
  typename B::V log_weights; // m x 1
  typename B::V means;       // m x Q
  typename B::V log_var;     // m x Q
  typename B::V log_sigma2;  // 1 x 1
};

template <class B>
struct ElboGraph {
  typename B::V term1;
  typename B::V term2;
  typename B::V total;
  std::vector<typename B::V> per_sample;
};

// One objective evaluation: reparameterized latents, fresh spectral points,
// stacked feature map, averaged low-rank reconstruction term, closed-form KL.
// Identical call sequence for both backends, so the recorded forward value and
// the direct evaluation agree bit-for-bit.
template <class B>
ElboGraph<B> build_elbo(B& b, const ElboVars<B>& p, const ElboNoise& noise,
                        const std::shared_ptr<const LoglikBatch>& batch,
                        std::size_t components, std::size_t half_l) {
  using V = typename B::V;
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const std::size_t num_samples = noise.eps_x.size();
  const double l_features = static_cast<double>(2 * half_l);

  V sigma2 = b.cwise_exp(p.log_sigma2);
  V latent_sd = b.cwise_exp(b.scale(p.log_s, 0.5));

  // per-component rows, shared across Monte Carlo samples
  std::vector<V> mean_rows, sd_rows, block_scales;
  for (std::size_t i = 0; i < components; ++i) {
    mean_rows.push_back(b.slice_rows(p.means, i, 1));
    // small additive floor keeps the spectral spread differentiable at the
    // bottom of its range during optimization
    sd_rows.push_back(
        b.cwise_sqrt(b.add_constant(b.cwise_exp(b.slice_rows(p.log_var, i, 1)), 1e-12)));
    block_scales.push_back(b.cwise_sqrt(
        b.scale(b.cwise_exp(b.slice_rows(p.log_weights, i, 1)), 2.0 / l_features)));
  }
  V ones = b.constant(DenseMatrix(half_l, 1, 1.0));

  ElboGraph<B> out;
  for (std::size_t s = 0; s < num_samples; ++s) {
    V x = b.add(p.mu, b.cwise_mul(latent_sd, b.constant(noise.eps_x[s])));
    std::vector<V> blocks;
    for (std::size_t i = 0; i < components; ++i) {
      V eps = b.constant(slice_rows_copy(noise.eps_w[s], i * half_l, half_l));
      V w = b.add(b.matmul(ones, mean_rows[i]),
                  b.cwise_mul(b.matmul(ones, sd_rows[i]), eps));
      V angles = b.scale(b.matmul(x, b.transpose(w)), kTwoPi);
      blocks.push_back(b.mul_scalar(b.cwise_sin(angles), block_scales[i]));
      blocks.push_back(b.mul_scalar(b.cwise_cos(angles), block_scales[i]));
    }
    V phi = b.concat_cols(blocks);
    out.per_sample.push_back(b.lowrank(phi, sigma2, batch));
  }

  V acc = out.per_sample[0];
  for (std::size_t s = 1; s < num_samples; ++s) acc = b.add(acc, out.per_sample[s]);
  out.term1 = b.scale(acc, 1.0 / static_cast<double>(num_samples));
  out.term2 = b.diag_kl(p.mu, p.log_s);
  out.total = b.sub(out.term1, out.term2);
  return out;
}

}  // namespace aglv
