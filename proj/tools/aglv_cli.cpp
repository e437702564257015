// aglv: latent variable model toolkit with a spectral-mixture random-feature
// kernel, collapse diagnostics for the linear model, and evaluation utilities.
//
// Subcommands: generate, train, diagnose, eval, impute, plot.
// Exit codes: 0 success, 2 usage/config error, 3 numerical failure.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "aglv/data.hpp"
#include "aglv/dppca.hpp"
#include "aglv/eval.hpp"
#include "aglv/svg.hpp"
#include "aglv/trainer.hpp"

namespace fs = std::filesystem;
using namespace aglv;

namespace {

bool plain_output() { return std::getenv("NO_COLOR") != nullptr; }

std::string ok_tag() { return plain_output() ? "[ok] " : "\033[32m[ok]\033[0m "; }

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// key = value configuration files with one [section] per subcommand

struct ConfigFile {
  std::map<std::string, std::map<std::string, std::string>> sections;
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

ConfigFile parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path);
  ConfigFile cfg;
  std::string section = "global";
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw Error("config: line " + std::to_string(lineno) + " of " + path +
                  " is not 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw Error("config: empty key at line " + std::to_string(lineno));
    cfg.sections[section][key] = value;
  }
  return cfg;
}

// Applies file values to CLI11 options that were not set on the command line.
// Unknown keys are a hard error naming the key.
void apply_config(CLI::App* sub, const ConfigFile& cfg) {
  for (const std::string& section : {std::string("global"), sub->get_name()}) {
    auto sit = cfg.sections.find(section);
    if (sit == cfg.sections.end()) continue;
    for (const auto& [key, value] : sit->second) {
      CLI::Option* opt = sub->get_option_no_throw("--" + key);
      if (opt == nullptr)
        throw Error("config: unknown key '" + key + "' in section [" + section + "]");
      if (opt->count() > 0) continue;  // command-line flag wins
      opt->add_result(value);
      opt->run_callback();
    }
  }
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error("cannot create output directory " + out + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string preset = "rbf";
  std::size_t n = 500;
  std::size_t m = 100;
  double noise_var = 0.01;
  double missing = 0.0;
  std::uint64_t seed = 0;
  std::string out = "out";
};

int run_generate(const GenerateArgs& a) {
  BaseKernelConfig kernel;
  if (a.preset == "rbf") {
    kernel = BaseKernelConfig::rbf(1.0, 1.0);
  } else if (a.preset == "rbf-periodic") {
    kernel = BaseKernelConfig::sum(
        {BaseKernelConfig::rbf(0.5, 1.0), BaseKernelConfig::periodic(0.5, 1.0, 4.5)});
  } else {
    throw Error("generate: unknown preset '" + a.preset + "' (rbf | rbf-periodic)");
  }

  Dataset ds = make_s_curve_dataset(a.n, a.m, kernel, a.noise_var, a.seed);
  if (a.missing > 0.0) ds = apply_missing_mask(std::move(ds), a.missing, mix_seed(a.seed, 777));

  ensure_out_dir(a.out);
  save_matrix_csv(join_path(a.out, "Y.csv"), ds.y);
  save_matrix_csv(join_path(a.out, "X_true.csv"), *ds.x_true);
  save_labels_csv(join_path(a.out, "labels.csv"), *ds.labels);
  if (ds.mask) save_mask_csv(join_path(a.out, "mask.csv"), *ds.mask);

  std::ostringstream man;
  man << "# aglv generate manifest\n[generate]\n";
  man << "preset = " << a.preset << "\n";
  man << "n = " << a.n << "\nm = " << a.m << "\n";
  man << "noise-var = " << fmt17(a.noise_var) << "\n";
  man << "missing = " << fmt17(a.missing) << "\n";
  man << "seed = " << a.seed << "\nout = " << a.out << "\n";
  write_text_file(join_path(a.out, "manifest.txt"), man.str());

  std::cout << ok_tag() << "wrote dataset (" << a.n << "x" << a.m << ") to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string input;
  std::string mask;
  TrainConfig cfg;
  double fixed_sigma2 = -1.0;  // <= 0 means learn
  std::string out = "out";
};

int run_train(const TrainArgs& a) {
  if (a.input.empty()) throw Error("train: --input is required");
  const DenseMatrix y = load_matrix_csv(a.input);

  std::optional<MaskMatrix> mask;
  if (!a.mask.empty()) {
    mask = load_mask_csv(a.mask);
    if (mask->rows() != y.rows() || mask->cols() != y.cols())
      throw Error("train: mask shape does not match the data");
  }

  TrainConfig cfg = a.cfg;
  if (a.fixed_sigma2 > 0.0) {
    cfg.learn_sigma2 = false;
    cfg.fixed_sigma2 = a.fixed_sigma2;
  }
  cfg.validate();

  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = train(y, cfg, mask ? &*mask : nullptr);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ensure_out_dir(a.out);
  Checkpoint ckpt;
  ckpt.n = y.rows();
  ckpt.m_cols = y.cols();
  ckpt.latent_dim = cfg.latent_dim;
  ckpt.num_components = cfg.num_components;
  ckpt.l_features = cfg.l_features;
  ckpt.vp = result.vp;
  ckpt.kernel = result.kernel;
  ckpt.adam = result.adam;
  save_checkpoint(join_path(a.out, "checkpoint.aglv"), ckpt);
  write_trace_csv(join_path(a.out, "trace.csv"), result.trace);
  save_matrix_csv(join_path(a.out, "latents.csv"), result.vp.mu);

  std::ostringstream man;
  man << "# aglv train manifest\n";
  man << "# wall_time_sec = " << wall << "\n";
  man << "[train]\n";
  man << "input = " << a.input << "\n";
  if (!a.mask.empty()) man << "mask = " << a.mask << "\n";
  man << "iterations = " << cfg.iterations << "\n";
  man << "lr = " << fmt17(cfg.lr) << "\n";
  man << "beta1 = " << fmt17(cfg.beta1) << "\n";
  man << "beta2 = " << fmt17(cfg.beta2) << "\n";
  man << "components = " << cfg.num_components << "\n";
  man << "features = " << cfg.l_features << "\n";
  man << "latent-dim = " << cfg.latent_dim << "\n";
  man << "mc-samples = " << cfg.mc_samples << "\n";
  man << "seed = " << cfg.seed << "\n";
  if (!cfg.learn_sigma2) man << "fixed-sigma2 = " << fmt17(*cfg.fixed_sigma2) << "\n";
  man << "zero-col-tol = " << fmt17(cfg.zero_col_tol) << "\n";
  man << "zero-col-abs = " << fmt17(cfg.zero_col_abs) << "\n";
  man << "trace-every = " << cfg.trace_every << "\n";
  man << "out = " << a.out << "\n";
  write_text_file(join_path(a.out, "manifest.txt"), man.str());

  if (result.aborted) {
    std::cerr << "train: non-finite objective at iteration " << result.aborted_at
              << "; wrote the last finite checkpoint\n";
    return 3;
  }
  const auto& last = result.trace.records.back();
  std::cout << ok_tag() << "trained " << cfg.iterations << " iterations in " << wall
            << " s; final elbo " << last.elbo << ", sigma2 " << last.sigma2 << ", zero columns "
            << last.zero_cols << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
  std::string input;
  std::size_t latent_dim = 2;
  std::string sigma2_list;  // comma-separated; empty -> linspace over (0, 2 lambda1)
  std::size_t grid_count = 50;
  std::string out = "out";
};

int run_diagnose(const DiagnoseArgs& a) {
  if (a.input.empty()) throw Error("diagnose: --input is required");
  const DenseMatrix y = load_matrix_csv(a.input);
  if (a.latent_dim == 0 || a.latent_dim >= y.rows())
    throw Error("diagnose: need 0 < latent-dim < N");

  const EigenDecomposition eig = gram_eigs(y);
  const double s2_hat = sigma2_mle(eig.values, a.latent_dim, y.rows());

  std::vector<double> grid;
  if (!a.sigma2_list.empty()) {
    std::stringstream ss(a.sigma2_list);
    std::string item;
    while (std::getline(ss, item, ',')) grid.push_back(std::stod(trim(item)));
  } else {
    const double top = 2.0 * eig.values.front();
    for (std::size_t i = 0; i < a.grid_count; ++i)
      grid.push_back(top * (static_cast<double>(i) + 0.5) / static_cast<double>(a.grid_count));
  }

  ensure_out_dir(a.out);
  DenseMatrix spectrum(eig.values.size(), 1);
  for (std::size_t i = 0; i < eig.values.size(); ++i) spectrum(i, 0) = eig.values[i];
  save_matrix_csv(join_path(a.out, "eigenspectrum.csv"), spectrum, {"eigval"});

  std::ostringstream rep;
  rep << "n: " << y.rows() << "\n";
  rep << "m_cols: " << y.cols() << "\n";
  rep << "latent_dim: " << a.latent_dim << "\n";
  rep << "sigma2_hat: " << fmt17(s2_hat) << "\n";
  double tr = 0.0;
  for (double v : eig.values) tr += v;
  rep << "eigval_sum: " << fmt17(tr) << "\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const DppcaReport r = classify_regime(eig.values, grid[i], a.latent_dim);
    rep << "grid " << i << ": sigma2=" << fmt17(grid[i]) << " regime=" << to_string(r.regime)
        << " zero_cols=" << r.predicted_zero_cols << "\n";
  }
  write_text_file(join_path(a.out, "report.txt"), rep.str());

  std::cout << ok_tag() << "sigma2_hat = " << s2_hat << "; report in " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  bool do_r2 = false;
  bool do_knn = false;
  std::string est;
  std::string truth;
  std::string latents;
  std::string labels;
  std::size_t k = 1;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::string out = "out";
};

int run_eval(const EvalArgs& a) {
  if (!a.do_r2 && !a.do_knn) throw Error("eval: choose --r2 and/or --knn");
  std::vector<std::string> rows;

  if (a.do_r2) {
    if (a.est.empty() || a.truth.empty()) throw Error("eval: --r2 needs --est and --truth");
    const DenseMatrix est = load_matrix_csv(a.est);
    const DenseMatrix truth = load_matrix_csv(a.truth);
    EvalReport rep;
    rep.metric = "affine_r2";
    rep.value = affine_r2(est, truth);
    rep.config = "est=" + a.est + ";truth=" + a.truth;
    rows.push_back(rep.to_csv_row());
    std::cout << ok_tag() << "affine R2 = " << rep.value << "\n";
  }
  if (a.do_knn) {
    if (a.latents.empty() || a.labels.empty())
      throw Error("eval: --knn needs --latents and --labels");
    const DenseMatrix x = load_matrix_csv(a.latents);
    const std::vector<int> labels = load_label_column_csv(a.labels);
    const EvalReport rep = knn_cv_accuracy(x, labels, a.k, a.folds, a.seed);
    rows.push_back(rep.to_csv_row());
    std::cout << ok_tag() << "knn accuracy = " << rep.value << " (stderr "
              << rep.stderr_over_repeats << ")\n";
  }

  ensure_out_dir(a.out);
  std::ostringstream os;
  os << "metric,value,stderr,config\n";
  for (const auto& r : rows) os << r << "\n";
  write_text_file(join_path(a.out, "eval_report.csv"), os.str());
  return 0;
}

// ---------------------------------------------------------------------------
// impute

struct ImputeArgs {
  std::string input;
  std::string mask;
  std::string checkpoint;
  std::size_t mc_draws = 0;
  std::uint64_t seed = 0;
  std::string out = "out";
};

int run_impute(const ImputeArgs& a) {
  if (a.input.empty() || a.mask.empty() || a.checkpoint.empty())
    throw Error("impute: --input, --mask and --checkpoint are required");
  Dataset ds;
  ds.y = load_matrix_csv(a.input);
  ds.mask = load_mask_csv(a.mask);
  if (ds.mask->rows() != ds.y.rows() || ds.mask->cols() != ds.y.cols())
    throw Error("impute: mask shape does not match the data");
  if (ds.mask->count_hidden() == 0) throw NoHiddenEntries("impute: the mask hides no entries");

  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  if (ckpt.n != ds.y.rows()) throw Error("impute: checkpoint row count does not match the data");

  const DenseMatrix imputed =
      a.mc_draws == 0 ? impute_posterior_mean(ds, ckpt.vp.mu, ckpt.kernel)
                      : impute_posterior_mean_mc(ds, ckpt.vp, ckpt.kernel, ckpt.l_features,
                                                 a.mc_draws, a.seed);

  ensure_out_dir(a.out);
  save_matrix_csv(join_path(a.out, "imputed.csv"), imputed);

  // the stored data retains ground truth under the mask, so the error of the
  // posterior mean and of the column-mean baseline are both reportable
  const double mse = imputation_mse(imputed, ds.y, *ds.mask);
  const double baseline = imputation_mse(impute_column_means(ds), ds.y, *ds.mask);
  std::ostringstream os;
  os << "metric,value,stderr,config\n";
  os << "imputation_mse," << fmt17(mse) << ",0,\"mc_draws=" << a.mc_draws << "\"\n";
  os << "column_mean_mse," << fmt17(baseline) << ",0,\"baseline\"\n";
  write_text_file(join_path(a.out, "mse_report.csv"), os.str());

  std::cout << ok_tag() << "imputation mse = " << mse << " (column-mean baseline " << baseline
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// plot

struct PlotArgs {
  std::string latents;
  std::string labels;
  std::string out = "out";
};

int run_plot(const PlotArgs& a) {
  if (a.latents.empty()) throw Error("plot: --latents is required");
  const DenseMatrix x = load_matrix_csv(a.latents);
  std::optional<std::vector<int>> labels;
  if (!a.labels.empty()) labels = load_label_column_csv(a.labels);

  ensure_out_dir(a.out);
  write_text_file(join_path(a.out, "scatter.svg"),
                  latent_scatter_svg(x, labels ? &*labels : nullptr));
  for (std::size_t d = 0; d < x.cols(); ++d)
    write_text_file(join_path(a.out, "hist_dim" + std::to_string(d) + ".svg"),
                    latent_histogram_svg(x, d));
  std::cout << ok_tag() << "wrote scatter.svg and " << x.cols() << " histograms to " << a.out
            << "\n";
  return 0;
}

bool is_numerical_failure(const Error& e) {
  return dynamic_cast<const NotPositiveDefinite*>(&e) != nullptr ||
         dynamic_cast<const NoConvergence*>(&e) != nullptr ||
         dynamic_cast<const NonFiniteObjective*>(&e) != nullptr ||
         dynamic_cast<const NegativeUnderRoot*>(&e) != nullptr ||
         dynamic_cast<const KernelNotPD*>(&e) != nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent variable model toolkit (spectral-mixture random features)"};
  app.require_subcommand(1);

  std::string config_path;

  GenerateArgs gen;
  CLI::App* cmd_generate = app.add_subcommand("generate", "write a synthetic S-curve dataset");
  cmd_generate->add_option("--config", config_path, "configuration file");
  cmd_generate->add_option("--preset", gen.preset, "rbf | rbf-periodic");
  cmd_generate->add_option("--n", gen.n, "number of observations");
  cmd_generate->add_option("--m", gen.m, "observed dimensions");
  cmd_generate->add_option("--noise-var", gen.noise_var, "observation noise variance");
  cmd_generate->add_option("--missing", gen.missing, "fraction of entries to hide");
  cmd_generate->add_option("--seed", gen.seed, "random seed");
  cmd_generate->add_option("--out", gen.out, "output directory");

  TrainArgs tr;
  CLI::App* cmd_train = app.add_subcommand("train", "fit the model by variational inference");
  cmd_train->add_option("--config", config_path, "configuration file");
  cmd_train->add_option("--input", tr.input, "observations CSV");
  cmd_train->add_option("--mask", tr.mask, "observation mask CSV (1 = observed)");
  cmd_train->add_option("--iterations", tr.cfg.iterations, "optimization steps");
  cmd_train->add_option("--lr", tr.cfg.lr, "Adam learning rate");
  cmd_train->add_option("--beta1", tr.cfg.beta1, "Adam first-moment decay");
  cmd_train->add_option("--beta2", tr.cfg.beta2, "Adam second-moment decay");
  cmd_train->add_option("--components", tr.cfg.num_components, "mixture components");
  cmd_train->add_option("--features", tr.cfg.l_features, "random features per component");
  cmd_train->add_option("--latent-dim", tr.cfg.latent_dim, "latent dimension");
  cmd_train->add_option("--mc-samples", tr.cfg.mc_samples, "Monte Carlo samples per step");
  cmd_train->add_option("--seed", tr.cfg.seed, "random seed");
  cmd_train->add_option("--fixed-sigma2", tr.fixed_sigma2,
                        "freeze the projection variance at this value");
  cmd_train->add_option("--zero-col-tol", tr.cfg.zero_col_tol, "relative zero-column tolerance");
  cmd_train->add_option("--zero-col-abs", tr.cfg.zero_col_abs,
                        "absolute zero-column floor (prior scale)");
  cmd_train->add_option("--trace-every", tr.cfg.trace_every, "trace cadence");
  cmd_train->add_option("--out", tr.out, "output directory");

  DiagnoseArgs dg;
  CLI::App* cmd_diagnose = app.add_subcommand("diagnose", "collapse regimes of the linear model");
  cmd_diagnose->add_option("--config", config_path, "configuration file");
  cmd_diagnose->add_option("--input", dg.input, "observations CSV");
  cmd_diagnose->add_option("--latent-dim", dg.latent_dim, "latent dimension");
  cmd_diagnose->add_option("--sigma2", dg.sigma2_list, "comma-separated projection variances");
  cmd_diagnose->add_option("--grid-count", dg.grid_count, "automatic grid resolution");
  cmd_diagnose->add_option("--out", dg.out, "output directory");

  EvalArgs ev;
  CLI::App* cmd_eval = app.add_subcommand("eval", "latent space evaluation metrics");
  cmd_eval->add_option("--config", config_path, "configuration file");
  cmd_eval->add_flag("--r2", ev.do_r2, "affine-aligned R2 against ground truth");
  cmd_eval->add_flag("--knn", ev.do_knn, "k-nearest-neighbour accuracy");
  cmd_eval->add_option("--est", ev.est, "estimated latents CSV (for --r2)");
  cmd_eval->add_option("--truth", ev.truth, "ground-truth latents CSV (for --r2)");
  cmd_eval->add_option("--latents", ev.latents, "latents CSV (for --knn)");
  cmd_eval->add_option("--labels", ev.labels, "labels CSV (for --knn)");
  cmd_eval->add_option("--k", ev.k, "neighbours");
  cmd_eval->add_option("--folds", ev.folds, "cross-validation folds");
  cmd_eval->add_option("--seed", ev.seed, "fold split seed");
  cmd_eval->add_option("--out", ev.out, "output directory");

  ImputeArgs im;
  CLI::App* cmd_impute = app.add_subcommand("impute", "posterior-mean imputation");
  cmd_impute->add_option("--config", config_path, "configuration file");
  cmd_impute->add_option("--input", im.input, "observations CSV (with ground truth)");
  cmd_impute->add_option("--mask", im.mask, "observation mask CSV");
  cmd_impute->add_option("--checkpoint", im.checkpoint, "trained checkpoint");
  cmd_impute->add_option("--mc-draws", im.mc_draws,
                         "average over this many sampled kernels (0 = exact kernel)");
  cmd_impute->add_option("--seed", im.seed, "sampling seed for --mc-draws");
  cmd_impute->add_option("--out", im.out, "output directory");

  PlotArgs pl;
  CLI::App* cmd_plot = app.add_subcommand("plot", "latent scatter and histograms as SVG");
  cmd_plot->add_option("--config", config_path, "configuration file");
  cmd_plot->add_option("--latents", pl.latents, "latents CSV");
  cmd_plot->add_option("--labels", pl.labels, "labels CSV for coloring");
  cmd_plot->add_option("--out", pl.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config(sub, parse_config_file(config_path));

    if (sub == cmd_generate) return run_generate(gen);
    if (sub == cmd_train) return run_train(tr);
    if (sub == cmd_diagnose) return run_diagnose(dg);
    if (sub == cmd_eval) return run_eval(ev);
    if (sub == cmd_impute) return run_impute(im);
    if (sub == cmd_plot) return run_plot(pl);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical_failure(e) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
