#include "aglv/kernels.hpp"

#include <cmath>

#include "aglv/parallel.hpp"

namespace aglv {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.1415926535897932384626433832795;
constexpr double kTwoPiSq = 19.739208802178717237668981999752;  // 2 pi^2
}  // namespace

double SmKernelParams::weight(std::size_t i) const { return std::exp(log_weights(i, 0)); }
double SmKernelParams::spectral_var(std::size_t i, std::size_t q) const {
  return std::exp(log_var(i, q));
}
double SmKernelParams::sigma2() const { return std::exp(log_sigma2); }

double SmKernelParams::sum_weights() const {
  double s = 0.0;
  for (std::size_t i = 0; i < num_components; ++i) s += weight(i);
  return s;
}

void SmKernelParams::validate() const {
  if (log_weights.rows() != num_components || log_weights.cols() != 1)
    throw DimensionMismatch("sm params: log_weights shape");
  if (means.rows() != num_components || means.cols() != latent_dim)
    throw DimensionMismatch("sm params: means shape");
  if (log_var.rows() != num_components || log_var.cols() != latent_dim)
    throw DimensionMismatch("sm params: log_var shape");
}

SmKernelParams SmKernelParams::make(std::size_t components, std::size_t dim) {
  SmKernelParams p;
  p.num_components = components;
  p.latent_dim = dim;
  p.log_weights = DenseMatrix(components, 1);
  p.means = DenseMatrix(components, dim);
  p.log_var = DenseMatrix(components, dim);
  return p;
}

double sm_kernel_eval(std::span<const double> x, std::span<const double> xp,
                      const SmKernelParams& params) {
  if (x.size() != params.latent_dim || xp.size() != params.latent_dim)
    throw DimensionMismatch("sm_kernel_eval: input dimension");
  double out = 0.0;
  for (std::size_t i = 0; i < params.num_components; ++i) {
    double decay = 0.0;
    double phase = 0.0;
    for (std::size_t q = 0; q < params.latent_dim; ++q) {
      const double tau = x[q] - xp[q];
      decay += params.spectral_var(i, q) * tau * tau;
      phase += params.means(i, q) * tau;
    }
    out += params.weight(i) * std::exp(-kTwoPiSq * decay) * std::cos(kTwoPi * phase);
  }
  return out;
}

BaseKernelConfig BaseKernelConfig::rbf(double outputscale, double lengthscale) {
  BaseKernelConfig c;
  c.kind = Kind::Rbf;
  c.outputscale = outputscale;
  c.lengthscale = lengthscale;
  return c;
}

BaseKernelConfig BaseKernelConfig::periodic(double outputscale, double lengthscale,
                                            double period) {
  BaseKernelConfig c;
  c.kind = Kind::Periodic;
  c.outputscale = outputscale;
  c.lengthscale = lengthscale;
  c.period = period;
  return c;
}

BaseKernelConfig BaseKernelConfig::sum(std::vector<BaseKernelConfig> parts) {
  BaseKernelConfig c;
  c.kind = Kind::Sum;
  c.children = std::move(parts);
  return c;
}

void BaseKernelConfig::validate() const {
  if (kind == Kind::Sum) {
    for (const auto& ch : children) ch.validate();
    return;
  }
  if (!(outputscale > 0.0) || !(lengthscale > 0.0))
    throw DimensionMismatch("base kernel: scales must be positive");
  if (kind == Kind::Periodic && !(period > 0.0))
    throw DimensionMismatch("base kernel: period must be positive");
}

double base_kernel_eval(std::span<const double> x, std::span<const double> xp,
                        const BaseKernelConfig& cfg) {
  if (x.size() != xp.size()) throw DimensionMismatch("base_kernel_eval: input dimension");
  switch (cfg.kind) {
    case BaseKernelConfig::Kind::Rbf: {
      double d2 = 0.0;
      for (std::size_t q = 0; q < x.size(); ++q) {
        const double tau = x[q] - xp[q];
        d2 += tau * tau;
      }
      return cfg.outputscale * std::exp(-d2 / (2.0 * cfg.lengthscale * cfg.lengthscale));
    }
    case BaseKernelConfig::Kind::Periodic: {
      double d2 = 0.0;
      for (std::size_t q = 0; q < x.size(); ++q) {
        const double tau = x[q] - xp[q];
        d2 += tau * tau;
      }
      const double s = std::sin(kPi * std::sqrt(d2) / cfg.period);
      return cfg.outputscale *
             std::exp(-2.0 * s * s / (cfg.lengthscale * cfg.lengthscale));
    }
    case BaseKernelConfig::Kind::Sum: {
      double out = 0.0;
      for (const auto& ch : cfg.children) out += base_kernel_eval(x, xp, ch);
      return out;
    }
  }
  throw UnsupportedPrimitive("base_kernel_eval: unknown kind");
}

SpectralSample sample_spectral_points(const SmKernelParams& params, std::size_t l_features,
                                      std::uint64_t seed) {
  if (l_features < 2 || l_features % 2 != 0)
    throw OddL("sample_spectral_points: L must be even and >= 2");
  params.validate();
  SpectralSample s;
  s.num_components = params.num_components;
  s.half_l = l_features / 2;
  s.latent_dim = params.latent_dim;
  s.eps = DenseMatrix(s.num_components * s.half_l, s.latent_dim);
  Rng rng(seed);
  for (std::size_t r = 0; r < s.eps.rows(); ++r)
    for (std::size_t q = 0; q < s.latent_dim; ++q) s.eps(r, q) = rng.normal();
  refresh_spectral_points(s, params);
  return s;
}

void refresh_spectral_points(SpectralSample& sample, const SmKernelParams& params) {
  if (sample.num_components != params.num_components || sample.latent_dim != params.latent_dim)
    throw DimensionMismatch("refresh_spectral_points: sample/params mismatch");
  sample.points = DenseMatrix(sample.eps.rows(), sample.eps.cols());
  for (std::size_t i = 0; i < sample.num_components; ++i) {
    for (std::size_t l = 0; l < sample.half_l; ++l) {
      const std::size_t r = i * sample.half_l + l;
      for (std::size_t q = 0; q < sample.latent_dim; ++q) {
        const double sd = std::sqrt(params.spectral_var(i, q));
        sample.points(r, q) = params.means(i, q) + sd * sample.eps(r, q);
      }
    }
  }
}

namespace detail {

// One feature row; shared by the serial and OpenMP feature_matrix.
__attribute__((noinline)) void feature_row(const double* x, std::size_t dim,
                                           const SpectralSample& sample,
                                           const std::vector<double>& block_scale, double* out) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < sample.num_components; ++i) {
    const double scl = block_scale[i];
    for (std::size_t l = 0; l < sample.half_l; ++l) {
      const double* w = sample.point(i, l);
      double dot = 0.0;
      for (std::size_t q = 0; q < dim; ++q) dot += w[q] * x[q];
      const double angle = kTwoPi * dot;
      out[c++] = scl * std::sin(angle);
      out[c++] = scl * std::cos(angle);
    }
  }
}

std::vector<double> block_scales(const SpectralSample& sample, const SmKernelParams& params) {
  const double l_features = static_cast<double>(2 * sample.half_l);
  std::vector<double> s(sample.num_components);
  for (std::size_t i = 0; i < sample.num_components; ++i)
    s[i] = std::sqrt(params.weight(i) * 2.0 / l_features);
  return s;
}

}  // namespace detail

std::vector<double> sm_rff_features(std::span<const double> x, const SpectralSample& sample,
                                    const SmKernelParams& params) {
  if (x.size() != sample.latent_dim) throw DimensionMismatch("sm_rff_features: input dimension");
  if (sample.num_components != params.num_components)
    throw DimensionMismatch("sm_rff_features: sample/params mismatch");
  std::vector<double> out(sample.feature_count());
  detail::feature_row(x.data(), x.size(), sample, detail::block_scales(sample, params),
                      out.data());
  return out;
}

DenseMatrix feature_matrix(const DenseMatrix& x, const SpectralSample& sample,
                           const SmKernelParams& params) {
  if (x.cols() != sample.latent_dim) throw DimensionMismatch("feature_matrix: input dimension");
  const std::vector<double> scales = detail::block_scales(sample, params);
  DenseMatrix phi(x.rows(), sample.feature_count());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    detail::feature_row(x.row_ptr(static_cast<std::size_t>(i)), x.cols(), sample, scales,
                        phi.row_ptr(static_cast<std::size_t>(i)));
  return phi;
}

namespace serial {
DenseMatrix feature_matrix(const DenseMatrix& x, const SpectralSample& sample,
                           const SmKernelParams& params) {
  if (x.cols() != sample.latent_dim) throw DimensionMismatch("feature_matrix: input dimension");
  const std::vector<double> scales = aglv::detail::block_scales(sample, params);
  DenseMatrix phi(x.rows(), sample.feature_count());
  for (std::size_t i = 0; i < x.rows(); ++i)
    aglv::detail::feature_row(x.row_ptr(i), x.cols(), sample, scales, phi.row_ptr(i));
  return phi;
}
}  // namespace serial

double rff_tail_bound(const SmKernelParams& params, std::size_t n, std::size_t l_features,
                      double epsilon, double kernel_spectral_norm) {
  if (!(epsilon > 0.0)) throw NonPositiveEpsilon("rff_tail_bound: epsilon must be positive");
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < params.num_components; ++i) {
    const double w = params.weight(i);
    sum_sq += w * w;
  }
  const double a = std::sqrt(sum_sq);
  const double nn = static_cast<double>(n);
  const double ll = static_cast<double>(l_features);
  const double m = static_cast<double>(params.num_components);
  const double denom =
      2.0 * nn * a * (6.0 * kernel_spectral_norm + 3.0 * nn * a * std::sqrt(m) + 8.0 * epsilon);
  return nn * std::exp(-3.0 * epsilon * epsilon * ll / denom);
}

DenseMatrix kernel_matrix(const DenseMatrix& x, const KernelFn& kernel) {
  const std::size_t n = x.rows();
  DenseMatrix k(n, n);
  OmpExceptionGuard guard;
  const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < nn; ++i) {
    guard.run([&, i] {
      for (std::size_t j = static_cast<std::size_t>(i); j < n; ++j)
        k(static_cast<std::size_t>(i), j) =
            kernel(x.row_span(static_cast<std::size_t>(i)), x.row_span(j));
    });
  }
  guard.rethrow_if_any();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) k(i, j) = k(j, i);
  return k;
}

KernelFn make_base_kernel_fn(const BaseKernelConfig& cfg) {
  cfg.validate();
  return [cfg](std::span<const double> a, std::span<const double> b) {
    return base_kernel_eval(a, b, cfg);
  };
}

KernelFn make_sm_kernel_fn(const SmKernelParams& params) {
  return [params](std::span<const double> a, std::span<const double> b) {
    return sm_kernel_eval(a, b, params);
  };
}

KernelFn make_linear_kernel_fn() {
  return [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) s += a[q] * b[q];
    return s;
  };
}

}  // namespace aglv
