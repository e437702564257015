#include "aglv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "aglv/dppca.hpp"
#include "aglv/elbo_graph.hpp"
#include "aglv/linalg.hpp"
#include "aglv/parallel.hpp"
#include "aglv/rng.hpp"

namespace aglv {

std::string EvalReport::to_csv_row() const {
  char buf[128];
  std::ostringstream os;
  os << metric << ',';
  std::snprintf(buf, sizeof buf, "%.17g", value);
  os << buf << ',';
  std::snprintf(buf, sizeof buf, "%.17g", stderr_over_repeats);
  os << buf << ',' << '"' << config << '"';
  return os.str();
}

namespace {

int knn_predict(const DenseMatrix& x, const std::vector<int>& labels,
                const std::vector<std::size_t>& train_idx, std::size_t query, std::size_t k) {
  // k nearest by squared Euclidean distance; ties in distance resolved by
  // training order for determinism
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(train_idx.size());
  const double* xq = x.row_ptr(query);
  for (std::size_t t : train_idx) {
    const double* xt = x.row_ptr(t);
    double d = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double diff = xq[c] - xt[c];
      d += diff * diff;
    }
    dist.emplace_back(d, t);
  }
  const std::size_t kk = std::min(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + kk, dist.end(),
                    [](const auto& a, const auto& b) {
                      return a.first < b.first || (a.first == b.first && a.second < b.second);
                    });
  std::map<int, std::size_t> votes;
  for (std::size_t i = 0; i < kk; ++i) votes[labels[dist[i].second]] += 1;
  int best = votes.begin()->first;
  std::size_t best_count = votes.begin()->second;
  for (const auto& [label, count] : votes) {
    if (count > best_count) {  // ties keep the smallest label (map order)
      best = label;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

EvalReport knn_cv_accuracy(const DenseMatrix& x, const std::vector<int>& labels, std::size_t k,
                           std::size_t folds, std::uint64_t seed) {
  const std::size_t n = x.rows();
  if (labels.size() != n) throw ShapeMismatch("knn_cv_accuracy: label count mismatch");
  if (folds == 0 || n < folds) throw TooFewPoints("knn_cv_accuracy: need at least `folds` points");

  EvalReport rep;
  rep.metric = "knn_accuracy";
  {
    std::ostringstream cfg;
    cfg << "k=" << k << ";folds=" << folds << ";seed=" << seed;
    rep.config = cfg.str();
  }

  if (folds == 1) {
    // self-evaluation: every point classified against the full set
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += knn_predict(x, labels, all, i, k) == labels[i];
    rep.value = static_cast<double>(correct) / static_cast<double>(n);
    return rep;
  }

  // stratified-as-possible split: shuffle within each class, deal round-robin
  Rng rng(seed);
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> fold_of(n, 0);
  std::size_t next_fold = 0;
  for (auto& [label, idx] : by_class) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_below(i);
      std::swap(idx[i - 1], idx[j]);
    }
    for (std::size_t i : idx) {
      fold_of[i] = next_fold;
      next_fold = (next_fold + 1) % folds;
    }
  }

  std::vector<double> fold_acc;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < n; ++i)
      (fold_of[i] == f ? test_idx : train_idx).push_back(i);
    if (test_idx.empty() || train_idx.empty())
      throw TooFewPoints("knn_cv_accuracy: empty fold");
    std::size_t correct = 0;
    for (std::size_t i : test_idx)
      correct += knn_predict(x, labels, train_idx, i, k) == labels[i];
    fold_acc.push_back(static_cast<double>(correct) / static_cast<double>(test_idx.size()));
  }

  double mean = 0.0;
  for (double a : fold_acc) mean += a;
  mean /= static_cast<double>(folds);
  double var = 0.0;
  for (double a : fold_acc) var += (a - mean) * (a - mean);
  var /= static_cast<double>(folds > 1 ? folds - 1 : 1);
  rep.value = mean;
  rep.stderr_over_repeats = std::sqrt(var / static_cast<double>(folds));
  return rep;
}

double affine_r2(const DenseMatrix& x_est, const DenseMatrix& x_true) {
  const std::size_t n = x_est.rows();
  const std::size_t qe = x_est.cols();
  const std::size_t qt = x_true.cols();
  if (x_true.rows() != n) throw ShapeMismatch("affine_r2: row mismatch");
  if (n <= qe + 1) throw TooFewPoints("affine_r2: need more points than design columns");

  // design [x_est, 1]
  DenseMatrix d(n, qe + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < qe; ++c) d(i, c) = x_est(i, c);
    d(i, qe) = 1.0;
  }
  const DenseMatrix dtd = gram_t(d);
  const DenseMatrix dty = matmul(transpose(d), x_true);
  CholeskyFactor chol;
  try {
    chol = CholeskyFactor(dtd);
  } catch (const NotPositiveDefinite&) {
    throw RankDeficientDesign("affine_r2: estimate columns are affinely dependent");
  }
  const DenseMatrix coef = chol.solve(dty);
  const DenseMatrix fitted = matmul(d, coef);

  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < qt; ++c) {
      const double r = x_true(i, c) - fitted(i, c);
      ss_res += r * r;
    }
  double ss_tot = 0.0;
  for (std::size_t c = 0; c < qt; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x_true(i, c);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = x_true(i, c) - mean;
      ss_tot += r * r;
    }
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

namespace {

DenseMatrix impute_with_kernel(const Dataset& ds, const DenseMatrix& x_hat,
                               const KernelFn& kernel, double sigma2) {
  if (!ds.mask) return ds.y;
  const MaskMatrix& mask = *ds.mask;
  DenseMatrix out = ds.y;
  OmpExceptionGuard guard;
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(ds.y.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t jj = 0; jj < m; ++jj) {
    guard.run([&, jj] {
    const std::size_t j = static_cast<std::size_t>(jj);
    const std::vector<std::size_t> obs = mask.observed_rows_of_col(j);
    const std::vector<std::size_t> miss = mask.hidden_rows_of_col(j);
    if (miss.empty()) return;
    if (obs.empty()) throw EmptyColumn("impute: column " + std::to_string(j) + " fully hidden");

    DenseMatrix koo(obs.size(), obs.size());
    for (std::size_t a = 0; a < obs.size(); ++a)
      for (std::size_t b = a; b < obs.size(); ++b) {
        const double v = kernel(x_hat.row_span(obs[a]), x_hat.row_span(obs[b]));
        koo(a, b) = v;
        koo(b, a) = v;
      }
    for (std::size_t a = 0; a < obs.size(); ++a) koo(a, a) += sigma2;

    CholeskyFactor chol;
    try {
      chol = CholeskyFactor(koo);
    } catch (const NotPositiveDefinite&) {
      for (std::size_t a = 0; a < obs.size(); ++a) koo(a, a) += 1e-8;
      chol = CholeskyFactor(koo);  // NotPositiveDefinite propagates on second failure
    }

    std::vector<double> y_obs(obs.size());
    for (std::size_t a = 0; a < obs.size(); ++a) y_obs[a] = ds.y(obs[a], j);
    const std::vector<double> alpha = chol.solve(y_obs);

    for (std::size_t r : miss) {
      double v = 0.0;
      for (std::size_t a = 0; a < obs.size(); ++a)
        v += kernel(x_hat.row_span(r), x_hat.row_span(obs[a])) * alpha[a];
      out(r, j) = v;
    }
    });
  }
  guard.rethrow_if_any();
  return out;
}

}  // namespace

DenseMatrix impute_posterior_mean(const Dataset& ds, const DenseMatrix& x_hat,
                                  const SmKernelParams& params) {
  return impute_with_kernel(ds, x_hat, make_sm_kernel_fn(params), params.sigma2());
}

DenseMatrix impute_posterior_mean_mc(const Dataset& ds, const VariationalParams& vp,
                                     const SmKernelParams& params, std::size_t l_features,
                                     std::size_t num_draws, std::uint64_t seed) {
  if (num_draws < 1) throw Error("impute mc: need at least one draw");
  const std::size_t n = vp.mu.rows();
  const std::size_t q = vp.mu.cols();
  DenseMatrix acc(ds.y.rows(), ds.y.cols());
  for (std::size_t t = 0; t < num_draws; ++t) {
    Rng rng(mix_seed(seed, t));
    DenseMatrix x(n, q);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < q; ++c)
        x(i, c) = vp.mu(i, c) + std::exp(0.5 * vp.log_s(i, c)) * rng.normal();
    const SpectralSample sample =
        sample_spectral_points(params, l_features, mix_seed(seed, num_draws + t));
    const KernelFn approx = [&sample, &params](std::span<const double> a,
                                               std::span<const double> b) {
      const std::vector<double> fa = sm_rff_features(a, sample, params);
      const std::vector<double> fb = sm_rff_features(b, sample, params);
      double s = 0.0;
      for (std::size_t i = 0; i < fa.size(); ++i) s += fa[i] * fb[i];
      return s;
    };
    const DenseMatrix imp = impute_with_kernel(ds, x, approx, params.sigma2());
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += imp.data()[i];
  }
  DenseMatrix out = scale(acc, 1.0 / static_cast<double>(num_draws));
  // observed entries pass through exactly
  if (ds.mask) {
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c)
        if (ds.mask->observed(r, c)) out(r, c) = ds.y(r, c);
  }
  return out;
}

double imputation_mse(const DenseMatrix& y_imputed, const DenseMatrix& y_truth,
                      const MaskMatrix& mask) {
  require_same_shape(y_imputed, y_truth, "imputation_mse");
  if (mask.rows() != y_truth.rows() || mask.cols() != y_truth.cols())
    throw ShapeMismatch("imputation_mse: mask shape mismatch");
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < y_truth.rows(); ++r)
    for (std::size_t c = 0; c < y_truth.cols(); ++c)
      if (!mask.observed(r, c)) {
        const double d = y_imputed(r, c) - y_truth(r, c);
        s += d * d;
        ++count;
      }
  if (count == 0) throw NoHiddenEntries("imputation_mse: mask hides nothing");
  return s / static_cast<double>(count);
}

DenseMatrix impute_column_means(const Dataset& ds) {
  DenseMatrix out = ds.y;
  if (!ds.mask) return out;
  for (std::size_t j = 0; j < ds.y.cols(); ++j) {
    double mean = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < ds.y.rows(); ++i)
      if (ds.mask->observed(i, j)) {
        mean += ds.y(i, j);
        ++count;
      }
    if (count == 0) throw EmptyColumn("impute_column_means: column fully hidden");
    mean /= static_cast<double>(count);
    for (std::size_t i = 0; i < ds.y.rows(); ++i)
      if (!ds.mask->observed(i, j)) out(i, j) = mean;
  }
  return out;
}

DenseMatrix pca_projection(const DenseMatrix& y, std::size_t q) {
  DenseMatrix yc = y;
  for (std::size_t j = 0; j < y.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) mean += y(i, j);
    mean /= static_cast<double>(y.rows());
    for (std::size_t i = 0; i < y.rows(); ++i) yc(i, j) -= mean;
  }
  const EigenDecomposition eig = gram_eigs(yc);
  DenseMatrix out(y.rows(), q);
  for (std::size_t k = 0; k < q && k < eig.values.size(); ++k) {
    const double len = std::sqrt(std::max(eig.values[k], 0.0));
    for (std::size_t i = 0; i < y.rows(); ++i) out(i, k) = eig.vectors(i, k) * len;
  }
  return out;
}

}  // namespace aglv
