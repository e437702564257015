#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "aglv/data.hpp"
#include "aglv/linalg.hpp"
#include "aglv/rng.hpp"
#include "oracles.hpp"

using namespace aglv;

namespace {
std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("s-curve dataset: shapes, labels and determinism") {
  const auto cfg = BaseKernelConfig::rbf(1.0, 1.0);
  const Dataset a = make_s_curve_dataset(40, 7, cfg, 0.01, 5);
  CHECK(a.y.rows() == 40);
  CHECK(a.y.cols() == 7);
  REQUIRE(a.x_true.has_value());
  CHECK(a.x_true->rows() == 40);
  CHECK(a.x_true->cols() == 2);
  REQUIRE(a.labels.has_value());
  CHECK(a.labels->size() == 40);
  CHECK(a.labels->front() == 0);
  CHECK(a.labels->back() == 3);

  const Dataset b = make_s_curve_dataset(40, 7, cfg, 0.01, 5);
  CHECK(a.y.bitwise_equal(b.y));
  CHECK(a.x_true->bitwise_equal(*b.x_true));

  const Dataset c = make_s_curve_dataset(40, 7, cfg, 0.01, 6);
  CHECK_FALSE(a.y.bitwise_equal(c.y));
}

TEST_CASE("s-curve latents span a well-conditioned plane") {
  const Dataset ds = make_s_curve_dataset(300, 3, BaseKernelConfig::rbf(1.0, 1.0), 0.01, 9);
  const DenseMatrix& x = *ds.x_true;
  // 2x2 covariance of the latent columns
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    m0 += x(i, 0);
    m1 += x(i, 1);
  }
  m0 /= x.rows();
  m1 /= x.rows();
  double c00 = 0.0, c01 = 0.0, c11 = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    c00 += (x(i, 0) - m0) * (x(i, 0) - m0);
    c01 += (x(i, 0) - m0) * (x(i, 1) - m1);
    c11 += (x(i, 1) - m1) * (x(i, 1) - m1);
  }
  const auto eig = sym_eig(DenseMatrix::from_rows({{c00, c01}, {c01, c11}}));
  CHECK(eig.values[0] / eig.values[1] < 100.0);
}

TEST_CASE("s-curve columns reproduce the latent kernel covariance") {
  const std::size_t n = 30, m = 2000;
  const double noise = 0.01;
  const auto cfg = BaseKernelConfig::rbf(1.0, 1.0);
  const Dataset ds = make_s_curve_dataset(n, m, cfg, noise, 123);

  DenseMatrix expected = kernel_matrix(*ds.x_true, make_base_kernel_fn(cfg));
  for (std::size_t i = 0; i < n; ++i) expected(i, i) += noise;

  // column sample covariance (columns are zero-mean by construction)
  DenseMatrix sample = scale(gram(ds.y), 1.0 / static_cast<double>(m));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      const double se = std::sqrt(
          (expected(a, a) * expected(b, b) + expected(a, b) * expected(a, b)) / m);
      CHECK(std::fabs(sample(a, b) - expected(a, b)) <= 5.0 * se);
    }
}

TEST_CASE("missing mask: fractions, determinism, column coverage") {
  const Dataset base = make_s_curve_dataset(250, 200, BaseKernelConfig::rbf(1.0, 1.0), 0.01, 3);

  const Dataset none = apply_missing_mask(base, 0.0, 1);
  REQUIRE(none.mask.has_value());
  CHECK(none.mask->all_observed());

  const Dataset some = apply_missing_mask(base, 0.3, 1);
  const double frac =
      static_cast<double>(some.mask->count_hidden()) / (250.0 * 200.0);
  CHECK(frac >= 0.29);
  CHECK(frac <= 0.31);
  for (std::size_t j = 0; j < 200; ++j)
    CHECK(some.mask->observed_rows_of_col(j).size() >= 1);

  const Dataset again = apply_missing_mask(base, 0.3, 1);
  for (std::size_t r = 0; r < 250; ++r)
    for (std::size_t c = 0; c < 200; ++c)
      CHECK(some.mask->observed(r, c) == again.mask->observed(r, c));

  // masking never touches the stored values
  CHECK(some.y.bitwise_equal(base.y));
}

TEST_CASE("csv round trip preserves every bit") {
  Rng rng(7);
  DenseMatrix m = oracle::random_matrix(10, 4, rng);
  m(0, 0) = 1.0 / 3.0;
  m(1, 1) = 1e-300;
  m(2, 2) = -12345.678901234567;
  const std::string path = temp_path("aglv_roundtrip.csv");
  save_matrix_csv(path, m);
  const DenseMatrix back = load_matrix_csv(path);
  CHECK(back.bitwise_equal(m));
  std::filesystem::remove(path);
}

TEST_CASE("csv header detection and error reporting") {
  const std::string path = temp_path("aglv_header.csv");
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("x0,x1\r\n1.5,2.5\r\n3.5,4.5\r\n", f);
    std::fclose(f);
  }
  const DenseMatrix m = load_matrix_csv(path);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m(0, 0) == 1.5);
  CHECK(m(1, 1) == 4.5);
  std::filesystem::remove(path);

  const std::string ragged = temp_path("aglv_ragged.csv");
  {
    std::FILE* f = std::fopen(ragged.c_str(), "wb");
    std::fputs("1,2\n3,4,5\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_matrix_csv(ragged), RaggedRows);
  std::filesystem::remove(ragged);

  const std::string alpha = temp_path("aglv_alpha.csv");
  {
    std::FILE* f = std::fopen(alpha.c_str(), "wb");
    std::fputs("1,2\n3,abc\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_matrix_csv(alpha), NonNumericField);
  std::filesystem::remove(alpha);
}

TEST_CASE("labels csv parses a trailing integer column") {
  const std::string path = temp_path("aglv_labels.csv");
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("0.1,0.2,0\n0.3,0.4,1\n0.5,0.6,2\n", f);
    std::fclose(f);
  }
  const LabeledMatrix lm = load_labels_csv(path);
  CHECK(lm.features.cols() == 2);
  CHECK(lm.labels == std::vector<int>{0, 1, 2});
  std::filesystem::remove(path);
}

TEST_CASE("mask csv round trip") {
  MaskMatrix mask(3, 2, true);
  mask.set(1, 0, false);
  const std::string path = temp_path("aglv_mask.csv");
  save_mask_csv(path, mask);
  const MaskMatrix back = load_mask_csv(path);
  CHECK(back.rows() == 3);
  CHECK(back.cols() == 2);
  CHECK_FALSE(back.observed(1, 0));
  CHECK(back.observed(0, 0));
  CHECK(back.count_hidden() == 1);
  std::filesystem::remove(path);
}
