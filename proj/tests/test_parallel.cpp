#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include "aglv/kernels.hpp"
#include "aglv/lowrank.hpp"
#include "aglv/matrix.hpp"
#include "aglv/rng.hpp"
#include "oracles.hpp"

using namespace aglv;

// The OpenMP kernels must match the serial reference implementations bit for
// bit, for any thread count: parallel loops only ever do disjoint writes and
// reductions stay in fixed index order.

namespace {

struct ThreadCountGuard {
  int saved;
  explicit ThreadCountGuard(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadCountGuard() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("matmul: parallel equals serial reference") {
  Rng rng(1);
  const DenseMatrix a = oracle::random_matrix(57, 33, rng);
  const DenseMatrix b = oracle::random_matrix(33, 41, rng);
  const DenseMatrix ref = serial::matmul(a, b);
  for (int threads : {1, 2, 4, 7}) {
    ThreadCountGuard guard(threads);
    CHECK(matmul(a, b).bitwise_equal(ref));
  }
}

TEST_CASE("gram: parallel equals serial reference") {
  Rng rng(2);
  const DenseMatrix a = oracle::random_matrix(48, 21, rng);
  const DenseMatrix ref = serial::gram(a);
  for (int threads : {1, 3, 8}) {
    ThreadCountGuard guard(threads);
    CHECK(gram(a).bitwise_equal(ref));
  }
}

TEST_CASE("feature matrix: parallel equals serial reference") {
  Rng rng(3);
  SmKernelParams p = SmKernelParams::make(3, 2);
  for (std::size_t i = 0; i < 3; ++i) p.log_weights(i, 0) = 0.3 * rng.normal();
  for (std::size_t i = 0; i < p.means.size(); ++i) p.means.data()[i] = 0.4 * rng.normal();
  for (std::size_t i = 0; i < p.log_var.size(); ++i) p.log_var.data()[i] = 0.5 * rng.normal();
  const SpectralSample s = sample_spectral_points(p, 16, 9);
  const DenseMatrix x = oracle::random_matrix(201, 2, rng);
  const DenseMatrix ref = serial::feature_matrix(x, s, p);
  for (int threads : {1, 2, 5}) {
    ThreadCountGuard guard(threads);
    CHECK(feature_matrix(x, s, p).bitwise_equal(ref));
  }
}

TEST_CASE("batched low-rank loglik is invariant to the thread count") {
  Rng rng(4);
  const std::size_t n = 64, r = 24, m = 12;
  const DenseMatrix phi = oracle::random_matrix(n, r, rng);
  const DenseMatrix y = oracle::random_matrix(n, m, rng);

  MaskMatrix mask(n, m, true);
  for (std::size_t k = 0; k < n * m / 4; ++k)
    mask.set(rng.uniform_below(n), rng.uniform_below(m), false);
  for (std::size_t j = 0; j < m; ++j)
    if (mask.observed_rows_of_col(j).empty()) mask.set(0, j, true);

  for (const MaskMatrix* mp :
       {static_cast<const MaskMatrix*>(nullptr), static_cast<const MaskMatrix*>(&mask)}) {
    const auto batch = make_loglik_batch(y, mp);
    ThreadCountGuard one(1);
    const auto ref = lowrank_loglik_batch(phi, 0.7, *batch, false);
    for (int threads : {2, 4}) {
      ThreadCountGuard guard(threads);
      const auto out = lowrank_loglik_batch(phi, 0.7, *batch, false);
      CHECK(out.total == ref.total);
      for (std::size_t j = 0; j < m; ++j) CHECK(out.per_column[j] == ref.per_column[j]);
    }
  }
}
