#include "aglv/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "aglv/autodiff.hpp"
#include "aglv/dppca.hpp"
#include "aglv/elbo_graph.hpp"
#include "aglv/rng.hpp"

namespace aglv {

void adam_step(AdamState& state, std::map<std::string, DenseMatrix>& params,
               const std::map<std::string, DenseMatrix>& grads) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, g] : grads) {
    auto pit = params.find(name);
    if (pit == params.end()) throw ShapeMismatch("adam_step: gradient for unknown parameter " + name);
    DenseMatrix& p = pit->second;
    require_same_shape(p, g, "adam_step");
    DenseMatrix& m = state.m.try_emplace(name, DenseMatrix(p.rows(), p.cols())).first->second;
    DenseMatrix& v = state.v.try_emplace(name, DenseMatrix(p.rows(), p.cols())).first->second;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.data()[k];
      m.data()[k] = state.beta1 * m.data()[k] + (1.0 - state.beta1) * gk;
      v.data()[k] = state.beta2 * v.data()[k] + (1.0 - state.beta2) * gk * gk;
      const double mhat = m.data()[k] / bc1;
      const double vhat = v.data()[k] / bc2;
      p.data()[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (iterations < 1) throw Error("train config: iterations must be >= 1");
  if (l_features < 2 || l_features % 2 != 0) throw OddL("train config: L must be even and >= 2");
  if (num_components < 1) throw Error("train config: need at least one mixture component");
  if (latent_dim < 1) throw Error("train config: latent dimension must be >= 1");
  if (mc_samples < 1) throw Error("train config: need at least one Monte Carlo sample");
  if (!learn_sigma2 && !fixed_sigma2.has_value())
    throw Error("train config: fixed_sigma2 required when sigma2 is not learned");
  if (fixed_sigma2 && !(*fixed_sigma2 > 0.0))
    throw NonPositiveSigma("train config: fixed_sigma2 must be positive");
  if (!(zero_col_tol > 0.0)) throw Error("train config: zero_col_tol must be positive");
}

std::size_t count_zero_columns(const DenseMatrix& x, double tol_rel, double tol_abs) {
  if (!(tol_rel > 0.0)) throw Error("count_zero_columns: tol_rel must be positive");
  const std::size_t q = x.cols();
  if (q == 0) return 0;
  std::vector<double> rms(q, 0.0);
  for (std::size_t j = 0; j < q; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, j) * x(i, j);
    rms[j] = std::sqrt(s / static_cast<double>(x.rows()));
  }
  double max_rms = 0.0;
  for (double r : rms) max_rms = std::max(max_rms, r);
  if (max_rms <= 1e-12) return q;
  const double threshold = std::max(tol_rel * max_rms, tol_abs);
  std::size_t count = 0;
  for (double r : rms) count += (r <= threshold);
  return count;
}

void init_parameters(const DenseMatrix& y, const TrainConfig& config, VariationalParams& vp,
                     SmKernelParams& kernel) {
  const std::size_t n = y.rows();
  const std::size_t m_cols = y.cols();
  const std::size_t q = config.latent_dim;

  // column-centered copy for the PCA warm start
  DenseMatrix yc = y;
  for (std::size_t j = 0; j < m_cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) yc(i, j) -= mean;
  }

  const EigenDecomposition eig = gram_eigs(yc);
  vp.mu = DenseMatrix(n, q);
  for (std::size_t k = 0; k < q && k < eig.values.size(); ++k) {
    const double len = std::sqrt(std::max(eig.values[k], 0.0));
    for (std::size_t i = 0; i < n; ++i) vp.mu(i, k) = eig.vectors(i, k) * len;
  }
  // unit column variance
  for (std::size_t k = 0; k < q; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += vp.mu(i, k);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = vp.mu(i, k) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd > 1e-12)
      for (std::size_t i = 0; i < n; ++i) vp.mu(i, k) /= sd;
  }
  vp.log_s = DenseMatrix(n, q, std::log(0.1));

  kernel = SmKernelParams::make(config.num_components, q);
  const double uniform_weight = std::log(1.0 / static_cast<double>(config.num_components));
  for (std::size_t i = 0; i < config.num_components; ++i) kernel.log_weights(i, 0) = uniform_weight;
  Rng rng(mix_seed(config.seed, 0));
  for (std::size_t i = 0; i < kernel.means.size(); ++i) kernel.means.data()[i] = 0.1 * rng.normal();
  // log_var stays zero: unit spectral variances

  double mean_var = 0.0;
  for (std::size_t i = 0; i < yc.size(); ++i) mean_var += yc.data()[i] * yc.data()[i];
  mean_var /= static_cast<double>(yc.size());
  kernel.log_sigma2 = config.learn_sigma2 ? std::log(std::max(0.1 * mean_var, 1e-12))
                                          : std::log(*config.fixed_sigma2);
}

namespace {

std::map<std::string, DenseMatrix> snapshot_params(const VariationalParams& vp,
                                                   const SmKernelParams& kernel) {
  return {{"mu", vp.mu},
          {"log_s", vp.log_s},
          {"log_weights", kernel.log_weights},
          {"means", kernel.means},
          {"log_var", kernel.log_var},
          {"log_sigma2", DenseMatrix::scalar(kernel.log_sigma2)}};
}

void restore_params(const std::map<std::string, DenseMatrix>& p, VariationalParams& vp,
                    SmKernelParams& kernel) {
  vp.mu = p.at("mu");
  vp.log_s = p.at("log_s");
  kernel.log_weights = p.at("log_weights");
  kernel.means = p.at("means");
  kernel.log_var = p.at("log_var");
  kernel.log_sigma2 = p.at("log_sigma2").scalar_value();
}

}  // namespace

TrainResult train(const DenseMatrix& y, const TrainConfig& config, const MaskMatrix* mask) {
  config.validate();
  require_finite(y, "observations");

  TrainResult result;
  init_parameters(y, config, result.vp, result.kernel);
  result.adam.lr = config.lr;
  result.adam.beta1 = config.beta1;
  result.adam.beta2 = config.beta2;

  std::map<std::string, DenseMatrix> params = snapshot_params(result.vp, result.kernel);
  std::map<std::string, DenseMatrix> last_good = params;

  const auto batch = make_loglik_batch(y, mask);
  const std::size_t half_l = config.l_features / 2;

  for (std::size_t t = 1; t <= config.iterations; ++t) {
    Rng rng(mix_seed(config.seed, t));
    const ElboNoise noise = draw_elbo_noise(y.rows(), config.latent_dim, config.num_components,
                                            half_l, config.mc_samples, rng);

    Tape tape;
    TapeBackend b{tape};
    double total = std::numeric_limits<double>::quiet_NaN();
    ElboGraph<TapeBackend> graph;
    try {
      ElboVars<TapeBackend> vars{
          tape.input("mu", params.at("mu")),
          tape.input("log_s", params.at("log_s")),
          tape.input("log_weights", params.at("log_weights")),
          tape.input("means", params.at("means")),
          tape.input("log_var", params.at("log_var")),
          tape.input("log_sigma2", params.at("log_sigma2"), config.learn_sigma2)};
      graph = build_elbo(b, vars, noise, batch, config.num_components, half_l);
      total = TapeBackend::scalar_of(graph.total);
    } catch (const NotPositiveDefinite&) {
      // degenerate covariance from runaway parameters; handled as non-finite
    } catch (const NoConvergence&) {
    }
    if (!std::isfinite(total)) {
      restore_params(last_good, result.vp, result.kernel);
      result.aborted = true;
      result.aborted_at = t;
      break;
    }

    const bool record = t % config.trace_every == 0 || t == config.iterations;
    if (record) {
      TraceRecord rec;
      rec.iter = t;
      rec.elbo = total;
      rec.term1 = TapeBackend::scalar_of(graph.term1);
      rec.term2 = TapeBackend::scalar_of(graph.term2);
      rec.sigma2 = std::exp(params.at("log_sigma2").scalar_value());
      rec.zero_cols =
          count_zero_columns(params.at("mu"), config.zero_col_tol, config.zero_col_abs);
      result.trace.records.push_back(rec);
      last_good = params;
    }

    tape.backward(tape.neg(graph.total));  // descend on the negated objective

    std::map<std::string, DenseMatrix> grads;
    grads.emplace("mu", tape.grad("mu"));
    grads.emplace("log_s", tape.grad("log_s"));
    grads.emplace("log_weights", tape.grad("log_weights"));
    grads.emplace("means", tape.grad("means"));
    grads.emplace("log_var", tape.grad("log_var"));
    if (config.learn_sigma2) grads.emplace("log_sigma2", tape.grad("log_sigma2"));
    adam_step(result.adam, params, grads);
  }

  if (!result.aborted) restore_params(params, result.vp, result.kernel);
  return result;
}

void write_trace_csv(const std::string& path, const TrainTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_trace_csv: cannot open " + path);
  out << "iter,elbo,term1,term2,sigma2,zero_cols\n";
  char buf[128];
  for (const auto& r : trace.records) {
    out << r.iter << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.elbo);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.term1);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.term2);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.sigma2);
    out << buf << ',' << r.zero_cols << '\n';
  }
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_matrix(std::ofstream& out, const DenseMatrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) put_f64(out, m.data()[i]);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::ifstream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

DenseMatrix get_matrix(std::ifstream& in, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = get_f64(in);
  return m;
}

const char* const kParamOrder[] = {"mu", "log_s", "log_weights", "means", "log_var",
                                   "log_sigma2"};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_checkpoint: cannot open " + path);
  out.write("AGLV", 4);
  put_u32(out, ckpt.version);
  put_u32(out, static_cast<std::uint32_t>(ckpt.n));
  put_u32(out, static_cast<std::uint32_t>(ckpt.m_cols));
  put_u32(out, static_cast<std::uint32_t>(ckpt.latent_dim));
  put_u32(out, static_cast<std::uint32_t>(ckpt.num_components));
  put_u32(out, static_cast<std::uint32_t>(ckpt.l_features));
  put_matrix(out, ckpt.vp.mu);
  put_matrix(out, ckpt.vp.log_s);
  put_matrix(out, ckpt.kernel.log_weights);
  put_matrix(out, ckpt.kernel.means);
  put_matrix(out, ckpt.kernel.log_var);
  put_f64(out, ckpt.kernel.log_sigma2);
  put_u64(out, ckpt.adam.step);
  put_f64(out, ckpt.adam.lr);
  put_f64(out, ckpt.adam.beta1);
  put_f64(out, ckpt.adam.beta2);
  put_f64(out, ckpt.adam.eps);
  for (const char* name : kParamOrder) {
    for (const auto* table : {&ckpt.adam.m, &ckpt.adam.v}) {
      auto it = table->find(name);
      if (it != table->end()) {
        put_matrix(out, it->second);
      } else {
        // frozen parameter: zero moments of the parameter's shape
        std::size_t count = 0;
        if (std::strcmp(name, "mu") == 0 || std::strcmp(name, "log_s") == 0)
          count = ckpt.vp.mu.size();
        else if (std::strcmp(name, "log_weights") == 0)
          count = ckpt.kernel.log_weights.size();
        else if (std::strcmp(name, "means") == 0 || std::strcmp(name, "log_var") == 0)
          count = ckpt.kernel.means.size();
        else
          count = 1;
        for (std::size_t i = 0; i < count; ++i) put_f64(out, 0.0);
      }
    }
  }
  if (!out) throw Error("save_checkpoint: write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AGLV", 4) != 0)
    throw Error("load_checkpoint: bad magic in " + path);
  Checkpoint c;
  c.version = get_u32(in);
  if (c.version != 1) throw Error("load_checkpoint: unsupported version");
  c.n = get_u32(in);
  c.m_cols = get_u32(in);
  c.latent_dim = get_u32(in);
  c.num_components = get_u32(in);
  c.l_features = get_u32(in);
  c.vp.mu = get_matrix(in, c.n, c.latent_dim);
  c.vp.log_s = get_matrix(in, c.n, c.latent_dim);
  c.kernel = SmKernelParams::make(c.num_components, c.latent_dim);
  c.kernel.log_weights = get_matrix(in, c.num_components, 1);
  c.kernel.means = get_matrix(in, c.num_components, c.latent_dim);
  c.kernel.log_var = get_matrix(in, c.num_components, c.latent_dim);
  c.kernel.log_sigma2 = get_f64(in);
  c.adam.step = get_u64(in);
  c.adam.lr = get_f64(in);
  c.adam.beta1 = get_f64(in);
  c.adam.beta2 = get_f64(in);
  c.adam.eps = get_f64(in);
  const std::size_t nq = c.n * c.latent_dim;
  const std::size_t mq = c.num_components * c.latent_dim;
  const std::size_t sizes[] = {nq, nq, c.num_components, mq, mq, 1};
  const std::size_t rows[] = {c.n, c.n, c.num_components, c.num_components, c.num_components, 1};
  for (int p = 0; p < 6; ++p) {
    const std::size_t cols = sizes[p] / rows[p];
    c.adam.m[kParamOrder[p]] = get_matrix(in, rows[p], cols);
    c.adam.v[kParamOrder[p]] = get_matrix(in, rows[p], cols);
  }
  if (!in) throw Error("load_checkpoint: truncated file " + path);
  return c;
}

}  // namespace aglv
