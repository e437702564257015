// Benchmark of the OpenMP kernels against their serial reference
// implementations. Run with OMP_NUM_THREADS set to compare configurations.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "aglv/kernels.hpp"
#include "aglv/lowrank.hpp"
#include "aglv/matrix.hpp"
#include "aglv/rng.hpp"

using namespace aglv;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// keeps results observable so the optimizer cannot drop the kernels
double g_sink = 0.0;
__attribute__((noinline)) void consume(double v) { g_sink += v; }

double time_ms(const std::function<void()>& fn, int reps = 5) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  Rng rng(1);

  {
    const DenseMatrix a = random_matrix(512, 512, rng);
    const DenseMatrix b = random_matrix(512, 512, rng);
        const double s = time_ms([&] { consume(serial::matmul(a, b)(0, 0)); });
    const double p = time_ms([&] { consume(matmul(a, b)(0, 0)); });
    report("matmul 512x512", s, p);
    if (!serial::matmul(a, b).bitwise_equal(matmul(a, b)))
      std::printf("  WARNING: serial/parallel results differ\n");
  }

  {
    const DenseMatrix a = random_matrix(1500, 120, rng);
        const double s = time_ms([&] { consume(serial::gram(a)(0, 0)); });
    const double p = time_ms([&] { consume(gram(a)(0, 0)); });
    report("gram 1500x120", s, p);
  }

  {
    SmKernelParams params = SmKernelParams::make(2, 2);
    const SpectralSample sample = sample_spectral_points(params, 100, 3);
    const DenseMatrix x = random_matrix(4000, 2, rng);
        const double s = time_ms([&] { consume(serial::feature_matrix(x, sample, params)(0, 0)); });
    const double p = time_ms([&] { consume(feature_matrix(x, sample, params)(0, 0)); });
    report("feature matrix 4000x200", s, p);
  }

  {
    const std::size_t n = 1000, r = 100, m = 50;
    const DenseMatrix phi = random_matrix(n, r, rng);
    const DenseMatrix y = random_matrix(n, m, rng);
    const auto batch = make_loglik_batch(y, nullptr);
        const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const double s = time_ms([&] { consume(lowrank_loglik_batch(phi, 0.5, *batch, false).total); });
    omp_set_num_threads(saved);
    const double p = time_ms([&] { consume(lowrank_loglik_batch(phi, 0.5, *batch, false).total); });
    report("low-rank loglik 1000x100x50", s, p);
  }

  return 0;
}
