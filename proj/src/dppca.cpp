#include "aglv/dppca.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aglv {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

std::string to_string(CollapseRegime r) {
  switch (r) {
    case CollapseRegime::GlobalOptimum: return "global-optimum";
    case CollapseRegime::ZeroColumns: return "zero-columns";
    case CollapseRegime::AllZero: return "all-zero";
    case CollapseRegime::LocalMinCluster: return "local-min-cluster";
    case CollapseRegime::Ambiguous: return "ambiguous";
  }
  return "?";
}

std::string to_string(StationaryKind k) {
  switch (k) {
    case StationaryKind::GlobalOptimum: return "global-optimum";
    case StationaryKind::LocalOptimum: return "local-optimum";
    case StationaryKind::Saddle: return "saddle";
    case StationaryKind::LocalMinimum: return "local-minimum";
  }
  return "?";
}

std::string to_string(SignClass c) {
  switch (c) {
    case SignClass::Optimum: return "optimum";
    case SignClass::Saddle: return "saddle";
    case SignClass::LocalMinimum: return "local-minimum";
  }
  return "?";
}

EigenDecomposition gram_eigs(const DenseMatrix& y) {
  if (y.rows() == 0 || y.cols() == 0) throw ShapeMismatch("gram_eigs: empty matrix");
  const DenseMatrix g = scale(gram(y), 1.0 / static_cast<double>(y.cols()));
  return sym_eig(g);
}

double sigma2_mle(const std::vector<double>& eigvals_desc, std::size_t q_prime, std::size_t n) {
  if (eigvals_desc.size() != n) throw InvalidQprime("sigma2_mle: spectrum length != n");
  if (q_prime >= n) throw InvalidQprime("sigma2_mle: need 0 <= q_prime < n");
  double s = 0.0;
  for (std::size_t j = q_prime; j < n; ++j) s += eigvals_desc[j];
  return s / static_cast<double>(n - q_prime);
}

StationaryPoint stationary_x(const EigenDecomposition& eig,
                             const std::vector<RetainedSlot>& retained, double sigma2,
                             const DenseMatrix& r_rotation) {
  const std::size_t n = eig.vectors.rows();
  const std::size_t q = retained.size();
  if (r_rotation.rows() != q || r_rotation.cols() != q)
    throw NonOrthogonalR("stationary_x: rotation must be Q x Q");
  const DenseMatrix rtr = matmul(transpose(r_rotation), r_rotation);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      const double expect = i == j ? 1.0 : 0.0;
      if (std::fabs(rtr(i, j) - expect) > 1e-10)
        throw NonOrthogonalR("stationary_x: rotation is not orthogonal within 1e-10");
    }

  StationaryPoint out;
  DenseMatrix cols(n, q);  // U_Q (Lambda_Q - sigma2 I)^{1/2}, zero columns on fills
  for (std::size_t c = 0; c < q; ++c) {
    const RetainedSlot& slot = retained[c];
    if (slot.sigma2_fill) {
      out.retained_eigvals.push_back(sigma2);
      continue;  // column stays exactly zero
    }
    if (slot.eig_index >= eig.values.size())
      throw InvalidQprime("stationary_x: eigen index out of range");
    const double lambda = eig.values[slot.eig_index];
    if (lambda < sigma2 - 1e-12)
      throw NegativeUnderRoot("stationary_x: retained eigenvalue below sigma2");
    const double len = std::sqrt(std::max(lambda - sigma2, 0.0));
    for (std::size_t r = 0; r < n; ++r) cols(r, c) = eig.vectors(r, slot.eig_index) * len;
    out.retained_eigvals.push_back(lambda);
  }
  out.x_hat = matmul(cols, r_rotation);

  std::vector<double> discarded;
  std::vector<bool> used(eig.values.size(), false);
  for (const auto& slot : retained)
    if (!slot.sigma2_fill) used[slot.eig_index] = true;
  for (std::size_t j = 0; j < eig.values.size(); ++j)
    if (!used[j]) discarded.push_back(eig.values[j]);

  // no discarded directions (Q = N) leaves nothing to perturb along; the
  // retention pattern alone decides between global and local optimum
  if (!discarded.empty()) {
    switch (classify_stationary(out.retained_eigvals, discarded)) {
      case SignClass::Saddle:
        out.kind = StationaryKind::Saddle;
        return out;
      case SignClass::LocalMinimum:
        out.kind = StationaryKind::LocalMinimum;
        return out;
      case SignClass::Optimum:
        break;
    }
  }
  // An optimum is global exactly when the retained slots are the top-Q
  // eigenpairs with no sigma2 fills.
  bool top_q = true;
  std::vector<bool> chosen(q, false);
  for (const auto& slot : retained) {
    if (slot.sigma2_fill || slot.eig_index >= q) {
      top_q = false;
      break;
    }
    chosen[slot.eig_index] = true;
  }
  if (top_q)
    for (bool c : chosen) top_q = top_q && c;
  out.kind = top_q ? StationaryKind::GlobalOptimum : StationaryKind::LocalOptimum;
  return out;
}

DppcaReport classify_regime(const std::vector<double>& eigvals_desc, double sigma2,
                            std::size_t q) {
  DppcaReport rep;
  rep.eigvals = eigvals_desc;
  const std::size_t n = eigvals_desc.size();
  if (q == 0 || q >= n) throw InvalidQprime("classify_regime: need 0 < Q < N");
  rep.sigma2_hat = sigma2_mle(eigvals_desc, q, n);

  for (double lam : eigvals_desc) {
    if (sigma2 == lam) {
      rep.regime = CollapseRegime::Ambiguous;
      rep.predicted_zero_cols = 0;
      return rep;
    }
  }

  if (sigma2 > eigvals_desc[0]) {
    rep.regime = CollapseRegime::AllZero;
    rep.predicted_zero_cols = q;
    return rep;
  }
  if (sigma2 < eigvals_desc[n - 1]) {
    rep.regime = CollapseRegime::LocalMinCluster;
    rep.predicted_zero_cols = 0;
    return rep;
  }
  // bands inside the top-Q spectrum: sigma2 in (lambda_{Q-k+1}, lambda_{Q-k})
  // collapses k columns (1-based eigenvalue indices)
  for (std::size_t k = 1; k + 1 <= q; ++k) {
    const double lo = eigvals_desc[q - k];      // lambda_{Q-k+1}
    const double hi = eigvals_desc[q - k - 1];  // lambda_{Q-k}
    if (sigma2 > lo && sigma2 < hi) {
      rep.regime = CollapseRegime::ZeroColumns;
      rep.predicted_zero_cols = k;
      return rep;
    }
  }
  rep.regime = CollapseRegime::GlobalOptimum;
  rep.predicted_zero_cols = 0;
  return rep;
}

SignClass classify_stationary(const std::vector<double>& retained,
                              const std::vector<double>& discarded) {
  if (retained.empty() || discarded.empty())
    throw InvalidQprime("classify_stationary: both lists must be non-empty");
  bool any_above = false, any_below = false;
  for (double r : retained)
    for (double d : discarded) {
      if (r > d) any_above = true;
      if (r < d) any_below = true;
    }
  if (any_above && !any_below) return SignClass::Optimum;
  if (any_below && !any_above) return SignClass::LocalMinimum;
  return SignClass::Saddle;
}

double dppca_log_likelihood(const DenseMatrix& y, const DenseMatrix& x, double sigma2) {
  const std::size_t n = y.rows();
  const double m_cols = static_cast<double>(y.cols());
  DenseMatrix k = gram(x);
  for (std::size_t i = 0; i < n; ++i) k(i, i) += sigma2;
  CholeskyFactor chol(k);
  const DenseMatrix sy = gram(y);
  const DenseMatrix kinv_sy = chol.solve(sy);
  return m_cols * (-0.5 * static_cast<double>(n) * kLog2Pi - 0.5 * chol.logdet()) -
         0.5 * trace(kinv_sy);
}

double dppca_log_likelihood_closed_form(const std::vector<double>& eigvals_desc,
                                        std::size_t q_prime, double sigma2, std::size_t n,
                                        std::size_t m_cols) {
  if (q_prime >= n) throw InvalidQprime("closed form: need q_prime < n");
  double retained_logs = 0.0;
  for (std::size_t j = 0; j < q_prime; ++j) retained_logs += std::log(eigvals_desc[j]);
  double discarded_sum = 0.0;
  for (std::size_t j = q_prime; j < n; ++j) discarded_sum += eigvals_desc[j];
  const double nn = static_cast<double>(n);
  const double qq = static_cast<double>(q_prime);
  return -0.5 * static_cast<double>(m_cols) *
         (nn * kLog2Pi + retained_logs + (nn - qq) * std::log(sigma2) + discarded_sum / sigma2 +
          qq);
}

double stationarity_residual(const DenseMatrix& y, const DenseMatrix& x, double sigma2) {
  const std::size_t n = y.rows();
  DenseMatrix k = gram(x);
  for (std::size_t i = 0; i < n; ++i) k(i, i) += sigma2;
  CholeskyFactor chol(k);
  const DenseMatrix kinv_x = chol.solve(x);
  const DenseMatrix g = scale(gram(y), 1.0 / static_cast<double>(y.cols()));
  return frobenius_norm(sub(matmul(g, kinv_x), x));
}

std::string serialize_report(const DppcaReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "n: " << report.eigvals.size() << "\n";
  os << "sigma2_hat: " << report.sigma2_hat << "\n";
  os << "regime: " << to_string(report.regime) << "\n";
  os << "predicted_zero_cols: " << report.predicted_zero_cols << "\n";
  os << "eigvals:";
  for (double v : report.eigvals) os << " " << v;
  os << "\n";
  return os.str();
}

}  // namespace aglv
