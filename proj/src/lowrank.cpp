#include "aglv/lowrank.hpp"

#include <cmath>
#include <map>

#include "aglv/parallel.hpp"

namespace aglv {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

std::vector<ColumnGroup> group_columns(const MaskMatrix* mask, std::size_t n, std::size_t m) {
  std::vector<ColumnGroup> groups;
  if (mask == nullptr || mask->all_observed()) {
    ColumnGroup g;
    g.observed_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.observed_rows[i] = i;
    g.columns.resize(m);
    for (std::size_t j = 0; j < m; ++j) g.columns[j] = j;
    groups.push_back(std::move(g));
    return groups;
  }
  if (mask->rows() != n || mask->cols() != m)
    throw ShapeMismatch("group_columns: mask shape mismatch");
  std::map<std::vector<std::size_t>, std::size_t> seen;
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<std::size_t> rows = mask->observed_rows_of_col(j);
    if (rows.empty()) throw EmptyColumn("column " + std::to_string(j) + " has no observed entry");
    auto it = seen.find(rows);
    if (it == seen.end()) {
      seen.emplace(rows, groups.size());
      ColumnGroup g;
      g.observed_rows = std::move(rows);
      g.columns = {j};
      groups.push_back(std::move(g));
    } else {
      groups[it->second].columns.push_back(j);
    }
  }
  return groups;
}

std::shared_ptr<const LoglikBatch> make_loglik_batch(const DenseMatrix& y, const MaskMatrix* mask) {
  auto batch = std::make_shared<LoglikBatch>();
  batch->yt = transpose(y);
  batch->groups = group_columns(mask, y.rows(), y.cols());
  return batch;
}

LowrankBatchResult lowrank_loglik_batch(const DenseMatrix& phi, double sigma2,
                                        const LoglikBatch& batch, bool want_cache) {
  if (!(sigma2 > 0.0)) throw NonPositiveSigma("lowrank_loglik_batch: sigma2 must be positive");
  const std::size_t n = phi.rows();
  const std::size_t r = phi.cols();
  const std::size_t m = batch.yt.rows();
  const std::size_t ngroups = batch.groups.size();
  if (batch.yt.cols() != n) throw ShapeMismatch("lowrank_loglik_batch: data/feature row mismatch");

  LowrankBatchResult out;
  out.per_column.assign(m, 0.0);
  out.cache.resize(ngroups);

  std::vector<DenseMatrix> phi_g(ngroups);
  std::vector<double> logdet_c(ngroups);  // log|Phi_g Phi_g^T + sigma2 I|

  OmpExceptionGuard guard;
  const std::ptrdiff_t ng = static_cast<std::ptrdiff_t>(ngroups);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t gi = 0; gi < ng; ++gi) {
    guard.run([&, gi] {
      const auto& g = batch.groups[static_cast<std::size_t>(gi)];
      const std::size_t n_obs = g.observed_rows.size();
      phi_g[gi] = n_obs == n ? phi : gather_rows(phi, g.observed_rows);

      DenseMatrix b = gram_t(phi_g[gi]);
      DenseMatrix m1 = scale(b, 1.0 / sigma2);
      for (std::size_t i = 0; i < r; ++i) m1(i, i) += 1.0;
      CholeskyFactor chol_m1(m1);
      logdet_c[gi] = static_cast<double>(n_obs) * std::log(sigma2) + chol_m1.logdet();

      for (std::size_t i = 0; i < r; ++i) b(i, i) += sigma2;
      auto& gc = out.cache[static_cast<std::size_t>(gi)];
      gc.chol = CholeskyFactor(b);
      gc.u = DenseMatrix(n_obs, g.columns.size());
    });
  }
  guard.rethrow_if_any();

  // per-column solves, parallel over a flat worklist
  std::vector<std::pair<std::size_t, std::size_t>> work;  // (group, slot)
  for (std::size_t gi = 0; gi < ngroups; ++gi)
    for (std::size_t s = 0; s < batch.groups[gi].columns.size(); ++s) work.emplace_back(gi, s);

  std::vector<double> uu(m, 0.0);
  const std::ptrdiff_t nwork = static_cast<std::ptrdiff_t>(work.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t wi = 0; wi < nwork; ++wi) {
    guard.run([&, wi] {
    const auto [gi, s] = work[static_cast<std::size_t>(wi)];
    const auto& g = batch.groups[gi];
    const std::size_t j = g.columns[s];
    const std::size_t n_obs = g.observed_rows.size();
    const DenseMatrix& pg = phi_g[gi];
    auto& gc = out.cache[gi];

    std::vector<double> y(n_obs);
    const double* yrow = batch.yt.row_ptr(j);
    for (std::size_t i = 0; i < n_obs; ++i) y[i] = yrow[g.observed_rows[i]];

    std::vector<double> t(r, 0.0);
    for (std::size_t i = 0; i < n_obs; ++i) {
      const double* row = pg.row_ptr(i);
      const double yi = y[i];
      for (std::size_t k = 0; k < r; ++k) t[k] += row[k] * yi;
    }
    const std::vector<double> zv = gc.chol.solve(t);

    double quad = 0.0, sum_uu = 0.0;
    for (std::size_t i = 0; i < n_obs; ++i) {
      const double* row = pg.row_ptr(i);
      double dot = 0.0;
      for (std::size_t k = 0; k < r; ++k) dot += row[k] * zv[k];
      const double ui = (y[i] - dot) / sigma2;
      gc.u(i, s) = ui;
      quad += y[i] * ui;
      sum_uu += ui * ui;
    }
    uu[j] = sum_uu;
    out.per_column[j] =
        -0.5 * (static_cast<double>(n_obs) * kLog2Pi + logdet_c[gi] + quad);
    });
  }
  guard.rethrow_if_any();

  for (std::size_t gi = 0; gi < ngroups; ++gi) {
    double s = 0.0;
    for (std::size_t j : batch.groups[gi].columns) s += uu[j];
    out.cache[gi].sum_uu = s;
  }

  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) total += out.per_column[j];
  out.total = total;

  if (!want_cache) out.cache.clear();
  return out;
}

double diag_kl_value(const DenseMatrix& mu, const DenseMatrix& log_s) {
  require_same_shape(mu, log_s, "diag_kl");
  double acc = 0.0;
  const double* pm = mu.data();
  const double* pl = log_s.data();
  for (std::size_t i = 0; i < mu.size(); ++i)
    acc += std::exp(pl[i]) + pm[i] * pm[i] - pl[i] - 1.0;
  return 0.5 * acc;
}

void lowrank_loglik_batch_adjoint(const DenseMatrix& phi, double sigma2, const LoglikBatch& batch,
                                  const LowrankBatchResult& fwd, double bar, DenseMatrix& dphi,
                                  double& dsigma2) {
  const std::size_t n = phi.rows();
  const std::size_t r = phi.cols();
  if (fwd.cache.size() != batch.groups.size())
    throw Error("lowrank adjoint: forward cache missing");
  if (dphi.rows() != n || dphi.cols() != r) throw ShapeMismatch("lowrank adjoint: dphi shape");

  for (std::size_t gi = 0; gi < batch.groups.size(); ++gi) {
    const auto& g = batch.groups[gi];
    const auto& gc = fwd.cache[gi];
    const std::size_t n_obs = g.observed_rows.size();
    const double ncols = static_cast<double>(g.columns.size());
    const DenseMatrix pg = n_obs == n ? phi : gather_rows(phi, g.observed_rows);

    // d/dPhi of the group's summed loglik: U (U^T Phi) - |J| * Phi A2^-1
    DenseMatrix ut_phi = matmul(transpose(gc.u), pg);            // |J| x R
    DenseMatrix grad1 = matmul(gc.u, ut_phi);                    // n_obs x R
    DenseMatrix ainv_phit = gc.chol.solve(transpose(pg));        // R x n_obs
    DenseMatrix phi_ainv = transpose(ainv_phit);                 // n_obs x R

    for (std::size_t i = 0; i < n_obs; ++i) {
      double* drow = dphi.row_ptr(g.observed_rows[i]);
      const double* g1 = grad1.row_ptr(i);
      const double* g2 = phi_ainv.row_ptr(i);
      for (std::size_t k = 0; k < r; ++k) drow[k] += bar * (g1[k] - ncols * g2[k]);
    }

    const double tr_ainv = trace(gc.chol.inverse());
    const double tr_cinv =
        (static_cast<double>(n_obs) - static_cast<double>(r)) / sigma2 + tr_ainv;
    dsigma2 += bar * 0.5 * (gc.sum_uu - ncols * tr_cinv);
  }
}

}  // namespace aglv
