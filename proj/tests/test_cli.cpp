#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "aglv/data.hpp"
#include "aglv/matrix.hpp"

using namespace aglv;
namespace fs = std::filesystem;

namespace {

const std::string kCli = AGLV_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("aglv_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string sub(const char* name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::size_t last_trace_zero_cols(const fs::path& trace_csv) {
  std::ifstream in(trace_csv);
  std::string line, last;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  const auto pos = last.rfind(',');
  REQUIRE(pos != std::string::npos);
  return std::stoul(last.substr(pos + 1));
}

}  // namespace

TEST_CASE("generate produces the dataset files and is byte-deterministic") {
  TempDir tmp;
  REQUIRE(run("generate --preset rbf --n 40 --m 10 --seed 9 --out " + tmp.sub("a")) == 0);
  CHECK(fs::exists(tmp.path / "a" / "Y.csv"));
  CHECK(fs::exists(tmp.path / "a" / "X_true.csv"));
  CHECK(fs::exists(tmp.path / "a" / "labels.csv"));
  CHECK(fs::exists(tmp.path / "a" / "manifest.txt"));

  REQUIRE(run("generate --preset rbf --n 40 --m 10 --seed 9 --out " + tmp.sub("b")) == 0);
  CHECK(slurp(tmp.path / "a" / "Y.csv") == slurp(tmp.path / "b" / "Y.csv"));
  CHECK(slurp(tmp.path / "a" / "X_true.csv") == slurp(tmp.path / "b" / "X_true.csv"));

  CHECK(run("generate --preset nope --out " + tmp.sub("c")) == 2);
}

TEST_CASE("train writes artifacts, reruns identically, and honors the manifest") {
  TempDir tmp;
  REQUIRE(run("generate --preset rbf --n 40 --m 12 --seed 3 --out " + tmp.sub("data")) == 0);
  const std::string base = "train --input " + tmp.sub("data") + "/Y.csv" +
                           " --iterations 120 --features 12 --latent-dim 2 --seed 5"
                           " --trace-every 30 --out ";

  REQUIRE(run(base + tmp.sub("r1")) == 0);
  for (const char* f : {"checkpoint.aglv", "trace.csv", "latents.csv", "manifest.txt"})
    CHECK(fs::exists(tmp.path / "r1" / f));

  REQUIRE(run(base + tmp.sub("r2")) == 0);
  CHECK(slurp(tmp.path / "r1" / "latents.csv") == slurp(tmp.path / "r2" / "latents.csv"));
  CHECK(slurp(tmp.path / "r1" / "trace.csv") == slurp(tmp.path / "r2" / "trace.csv"));
  CHECK(slurp(tmp.path / "r1" / "checkpoint.aglv") == slurp(tmp.path / "r2" / "checkpoint.aglv"));

  // the manifest alone reproduces the run
  REQUIRE(run("train --config " + tmp.sub("r1") + "/manifest.txt --out " + tmp.sub("r3")) == 0);
  CHECK(slurp(tmp.path / "r1" / "latents.csv") == slurp(tmp.path / "r3" / "latents.csv"));
}

TEST_CASE("oversized frozen projection variance collapses all latent columns") {
  TempDir tmp;
  REQUIRE(run("generate --preset rbf --n 40 --m 12 --seed 8 --out " + tmp.sub("data")) == 0);
  REQUIRE(run("train --input " + tmp.sub("data") + "/Y.csv" +
              " --iterations 700 --features 12 --latent-dim 2 --seed 5 --fixed-sigma2 1e6"
              " --out " +
              tmp.sub("fx")) == 0);
  CHECK(last_trace_zero_cols(tmp.path / "fx" / "trace.csv") == 2);
}

TEST_CASE("diagnose reports a monotone zero-column grid and a consistent spectrum") {
  TempDir tmp;
  REQUIRE(run("generate --preset rbf --n 30 --m 10 --seed 4 --out " + tmp.sub("data")) == 0);
  REQUIRE(run("diagnose --input " + tmp.sub("data") + "/Y.csv --latent-dim 3 --out " +
              tmp.sub("diag")) == 0);

  const std::string report = slurp(tmp.path / "diag" / "report.txt");
  std::istringstream is(report);
  std::string line;
  long prev = -1;
  double eigval_sum = -1.0;
  while (std::getline(is, line)) {
    if (line.rfind("eigval_sum:", 0) == 0) eigval_sum = std::stod(line.substr(11));
    const auto pos = line.find("zero_cols=");
    if (pos == std::string::npos) continue;
    const long zc = std::stol(line.substr(pos + 10));
    CHECK(zc >= prev);
    prev = zc;
  }
  CHECK(prev == 3);

  const DenseMatrix y = load_matrix_csv(tmp.sub("data") + "/Y.csv");
  const double tr = trace(scale(gram(y), 1.0 / static_cast<double>(y.cols())));
  CHECK(std::fabs(eigval_sum - tr) <= 1e-10 * std::max(1.0, std::fabs(tr)));

  REQUIRE(run("diagnose --input " + tmp.sub("data") + "/Y.csv --latent-dim 3 --out " +
              tmp.sub("diag2")) == 0);
  CHECK(slurp(tmp.path / "diag" / "report.txt") == slurp(tmp.path / "diag2" / "report.txt"));
}

TEST_CASE("diagnose flags a projection variance sitting exactly on a tied spectrum") {
  TempDir tmp;
  {
    // identity data: every gram eigenvalue is exactly 1/3
    std::ofstream y(tmp.path / "I.csv");
    y << "1,0,0\n0,1,0\n0,0,1\n";
  }
  REQUIRE(run("diagnose --input " + tmp.sub("I.csv") +
              " --latent-dim 2 --sigma2 0.3333333333333333,0.5 --out " + tmp.sub("d")) == 0);
  const std::string report = slurp(tmp.path / "d" / "report.txt");
  CHECK(report.find("regime=ambiguous") != std::string::npos);
}

TEST_CASE("eval on ground truth scores a perfect alignment") {
  TempDir tmp;
  REQUIRE(run("generate --preset rbf --n 30 --m 8 --seed 2 --out " + tmp.sub("data")) == 0);
  REQUIRE(run("eval --r2 --est " + tmp.sub("data") + "/X_true.csv --truth " + tmp.sub("data") +
              "/X_true.csv --out " + tmp.sub("ev")) == 0);
  const std::string report = slurp(tmp.path / "ev" / "eval_report.csv");
  CHECK(report.find("affine_r2,1,") != std::string::npos);
}

TEST_CASE("plot emits well-formed svg with one marker per row") {
  TempDir tmp;
  REQUIRE(run("generate --preset rbf --n 25 --m 6 --seed 1 --out " + tmp.sub("data")) == 0);
  REQUIRE(run("plot --latents " + tmp.sub("data") + "/X_true.csv --labels " + tmp.sub("data") +
              "/labels.csv --out " + tmp.sub("plots")) == 0);

  const std::string svg = slurp(tmp.path / "plots" / "scatter.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  std::size_t markers = 0;
  for (std::size_t pos = svg.find("<circle"); pos != std::string::npos;
       pos = svg.find("<circle", pos + 1))
    ++markers;
  CHECK(markers == 25);
  CHECK(fs::exists(tmp.path / "plots" / "hist_dim0.svg"));
  CHECK(fs::exists(tmp.path / "plots" / "hist_dim1.svg"));

  REQUIRE(run("plot --latents " + tmp.sub("data") + "/X_true.csv --labels " + tmp.sub("data") +
              "/labels.csv --out " + tmp.sub("plots2")) == 0);
  CHECK(slurp(tmp.path / "plots" / "scatter.svg") == slurp(tmp.path / "plots2" / "scatter.svg"));
}

TEST_CASE("config errors name the offending key and exit 2") {
  TempDir tmp;
  {
    std::ofstream bad(tmp.path / "bad.ini");
    bad << "[train]\nbogus-key = 3\n";
  }
  CHECK(run("train --config " + tmp.sub("bad.ini")) == 2);
  CHECK(run("train") == 2);                      // missing input
  CHECK(run("eval --r2") == 2);                  // missing files
  CHECK(run("impute --input x --mask y") == 2);  // missing checkpoint
  CHECK(run("definitely-not-a-subcommand") == 2);
}

TEST_CASE("impute refuses a mask with nothing hidden") {
  TempDir tmp;
  REQUIRE(run("generate --preset rbf --n 25 --m 6 --seed 6 --out " + tmp.sub("data")) == 0);
  REQUIRE(run("train --input " + tmp.sub("data") + "/Y.csv --iterations 50 --features 8"
              " --seed 1 --out " +
              tmp.sub("run")) == 0);
  {
    std::ofstream m(tmp.path / "full_mask.csv");
    for (int r = 0; r < 25; ++r) {
      for (int c = 0; c < 6; ++c) m << (c ? "," : "") << 1;
      m << "\n";
    }
  }
  CHECK(run("impute --input " + tmp.sub("data") + "/Y.csv --mask " + tmp.sub("full_mask.csv") +
            " --checkpoint " + tmp.sub("run") + "/checkpoint.aglv --out " + tmp.sub("imp")) == 2);
}

TEST_CASE("masked training and imputation round-trip through the cli") {
  TempDir tmp;
  REQUIRE(run("generate --preset rbf --n 40 --m 10 --missing 0.3 --seed 11 --out " +
              tmp.sub("data")) == 0);
  CHECK(fs::exists(tmp.path / "data" / "mask.csv"));
  REQUIRE(run("train --input " + tmp.sub("data") + "/Y.csv --mask " + tmp.sub("data") +
              "/mask.csv --iterations 150 --features 12 --seed 2 --out " + tmp.sub("run")) == 0);
  REQUIRE(run("impute --input " + tmp.sub("data") + "/Y.csv --mask " + tmp.sub("data") +
              "/mask.csv --checkpoint " + tmp.sub("run") + "/checkpoint.aglv --out " +
              tmp.sub("imp")) == 0);
  CHECK(fs::exists(tmp.path / "imp" / "imputed.csv"));
  CHECK(fs::exists(tmp.path / "imp" / "mse_report.csv"));

  REQUIRE(run("impute --input " + tmp.sub("data") + "/Y.csv --mask " + tmp.sub("data") +
              "/mask.csv --checkpoint " + tmp.sub("run") + "/checkpoint.aglv --out " +
              tmp.sub("imp2")) == 0);
  CHECK(slurp(tmp.path / "imp" / "imputed.csv") == slurp(tmp.path / "imp2" / "imputed.csv"));
}
