#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aglv/autodiff.hpp"
#include "aglv/elbo_graph.hpp"
#include "aglv/model.hpp"
#include "aglv/rng.hpp"
#include "oracles.hpp"

using namespace aglv;

TEST_CASE("forward sum equals direct evaluation") {
  Tape t;
  DenseMatrix x(3, 1);
  x(0, 0) = 1.0;
  x(1, 0) = 2.0;
  x(2, 0) = 3.0;
  const Var v = t.sum(t.input("x", x));
  CHECK(v.value().scalar_value() == 6.0);
  CHECK(v.value().scalar_value() == aglv::sum(x));
}

TEST_CASE("forward trace of product") {
  Tape t;
  const Var a = t.input("a", DenseMatrix::identity(2));
  const Var b = t.input("b", DenseMatrix::from_rows({{2.0, 0.0}, {0.0, 3.0}}));
  const Var out = t.trace(t.matmul(a, b));
  CHECK(out.value().scalar_value() == 5.0);
}

TEST_CASE("gradient of x^T x") {
  Tape t;
  DenseMatrix x(2, 1);
  x(0, 0) = 1.0;
  x(1, 0) = 2.0;
  const Var xv = t.input("x", x);
  t.backward(t.sum(t.cwise_square(xv)));
  const DenseMatrix& g = t.grad("x");
  CHECK(g(0, 0) == 2.0);
  CHECK(g(1, 0) == 4.0);
}

TEST_CASE("gradient of trace(AB) with respect to A is B^T") {
  Tape t;
  const Var a = t.input("a", DenseMatrix::identity(2));
  const Var b = t.constant(DenseMatrix::from_rows({{2.0, 0.0}, {0.0, 3.0}}));
  t.backward(t.trace(t.matmul(a, b)));
  const DenseMatrix& g = t.grad("a");
  CHECK(g(0, 0) == 2.0);
  CHECK(g(1, 1) == 3.0);
  CHECK(g(0, 1) == 0.0);
  CHECK(g(1, 0) == 0.0);
}

TEST_CASE("low-rank Gaussian log-likelihood adjoint matches finite differences") {
  Rng rng(17);
  const std::size_t n = 10, r = 4;
  const DenseMatrix phi = oracle::random_matrix(n, r, rng);
  DenseMatrix y(n, 1);
  for (std::size_t i = 0; i < n; ++i) y(i, 0) = rng.normal();
  auto batch = make_loglik_batch(y, nullptr);

  const GraphBuilder build = [&](Tape& t, const std::map<std::string, DenseMatrix>& in) {
    return t.lowrank_loglik(t.input("phi", in.at("phi")), t.input("sigma2", in.at("sigma2")),
                            batch);
  };
  std::map<std::string, DenseMatrix> inputs{{"phi", phi}, {"sigma2", DenseMatrix::scalar(0.7)}};
  CHECK(gradcheck(build, inputs, 1e-5) <= 1e-5);
}

TEST_CASE("gradcheck on a linear functional is exact to rounding") {
  Rng rng(2);
  const DenseMatrix a = oracle::random_matrix(5, 1, rng);
  const DenseMatrix x0 = oracle::random_matrix(5, 1, rng);
  const GraphBuilder build = [&](Tape& t, const std::map<std::string, DenseMatrix>& in) {
    return t.sum(t.cwise_mul(t.constant(a), t.input("x", in.at("x"))));
  };
  CHECK(gradcheck(build, {{"x", x0}}, 1e-4) <= 1e-9);
}

TEST_CASE("gradcheck on the KL term") {
  Rng rng(4);
  const DenseMatrix mu = oracle::random_matrix(6, 2, rng);
  const DenseMatrix log_s = oracle::random_matrix(6, 2, rng, 0.3);
  const GraphBuilder build = [&](Tape& t, const std::map<std::string, DenseMatrix>& in) {
    return t.diag_kl(t.input("mu", in.at("mu")), t.input("log_s", in.at("log_s")));
  };
  CHECK(gradcheck(build, {{"mu", mu}, {"log_s", log_s}}, 1e-5) <= 1e-6);
}

namespace {

struct ElboFixture {
  std::size_t n = 12, m_cols = 3, q = 2, components = 2, half_l = 4, samples = 1;
  DenseMatrix y;
  ElboNoise noise;
  std::shared_ptr<const LoglikBatch> batch;
  std::map<std::string, DenseMatrix> inputs;

  explicit ElboFixture(std::uint64_t seed) {
    Rng rng(seed);
    y = oracle::random_matrix(n, m_cols, rng);
    batch = make_loglik_batch(y, nullptr);
    Rng noise_rng(mix_seed(seed, 1));
    noise = draw_elbo_noise(n, q, components, half_l, samples, noise_rng);
    inputs["mu"] = oracle::random_matrix(n, q, rng, 0.8);
    inputs["log_s"] = oracle::random_matrix(n, q, rng, 0.3);
    inputs["log_weights"] = oracle::random_matrix(components, 1, rng, 0.4);
    inputs["means"] = oracle::random_matrix(components, q, rng, 0.3);
    inputs["log_var"] = oracle::random_matrix(components, q, rng, 0.4);
    inputs["log_sigma2"] = DenseMatrix::scalar(-0.5 + 0.3 * rng.normal());
  }

  GraphBuilder builder() const {
    return [this](Tape& t, const std::map<std::string, DenseMatrix>& in) {
      TapeBackend b{t};
      ElboVars<TapeBackend> vars{t.input("mu", in.at("mu")),
                                 t.input("log_s", in.at("log_s")),
                                 t.input("log_weights", in.at("log_weights")),
                                 t.input("means", in.at("means")),
                                 t.input("log_var", in.at("log_var")),
                                 t.input("log_sigma2", in.at("log_sigma2"))};
      return build_elbo(b, vars, noise, batch, components, half_l).total;
    };
  }
};

}  // namespace

TEST_CASE("gradcheck on the full objective") {
  const ElboFixture fix(101);
  CHECK(gradcheck(fix.builder(), fix.inputs, 3e-5) <= 1e-4);
}

TEST_CASE("tape forward of the objective equals the direct evaluation bit for bit") {
  const ElboFixture fix(303);
  Tape t;
  const Var out = fix.builder()(t, fix.inputs);

  VariationalParams vp{fix.inputs.at("mu"), fix.inputs.at("log_s")};
  SmKernelParams params = SmKernelParams::make(fix.components, fix.q);
  params.log_weights = fix.inputs.at("log_weights");
  params.means = fix.inputs.at("means");
  params.log_var = fix.inputs.at("log_var");
  params.log_sigma2 = fix.inputs.at("log_sigma2").scalar_value();

  // elbo_mc draws its own noise from the seed; reproduce the same stream
  Rng probe(mix_seed(303, 1));
  const ElboNoise again =
      draw_elbo_noise(fix.n, fix.q, fix.components, fix.half_l, fix.samples, probe);
  REQUIRE(again.eps_x[0].bitwise_equal(fix.noise.eps_x[0]));

  const ElboBreakdown direct =
      elbo_mc(fix.y, vp, params, 2 * fix.half_l, fix.samples, mix_seed(303, 1));
  CHECK(out.value().scalar_value() == direct.total);
}

TEST_CASE("sum rule: gradient of f+g equals gradient of f plus gradient of g") {
  Rng rng(8);
  const DenseMatrix x0 = oracle::random_matrix(4, 1, rng);

  Tape tf;
  const Var xf = tf.input("x", x0);
  tf.backward(tf.sum(tf.cwise_square(xf)));
  Tape tg;
  const Var xg = tg.input("x", x0);
  tg.backward(tg.sum(tg.cwise_exp(xg)));
  Tape tfg;
  const Var xfg = tfg.input("x", x0);
  tfg.backward(tfg.add(tfg.sum(tfg.cwise_square(xfg)), tfg.sum(tfg.cwise_exp(xfg))));

  const DenseMatrix expected = add(tf.grad("x"), tg.grad("x"));
  CHECK(tfg.grad("x").bitwise_equal(expected));
}

TEST_CASE("fan-out accumulates both adjoint contributions") {
  Rng rng(10);
  const DenseMatrix x0 = oracle::random_matrix(5, 1, rng);

  Tape ta;
  const Var xa = ta.input("x", x0);
  ta.backward(ta.sum(ta.cwise_mul(xa, xa)));  // x used twice
  Tape tb;
  const Var xb = tb.input("x", x0);
  tb.backward(tb.sum(tb.cwise_square(xb)));

  CHECK(ta.grad("x").bitwise_equal(tb.grad("x")));
}

TEST_CASE("two backward passes over the same tape agree bit for bit") {
  const ElboFixture fix(77);
  Tape t;
  const Var out = fix.builder()(t, fix.inputs);
  t.backward(out);
  const DenseMatrix g1 = t.grad("means");
  const DenseMatrix g2 = t.grad("mu");
  t.backward(out);
  CHECK(t.grad("means").bitwise_equal(g1));
  CHECK(t.grad("mu").bitwise_equal(g2));
}

TEST_CASE("backward rejects non-scalar outputs") {
  Tape t;
  const Var x = t.input("x", DenseMatrix(2, 2, 1.0));
  CHECK_THROWS_AS(t.backward(t.cwise_exp(x)), NonScalarOutput);
}

TEST_CASE("shape mismatches are rejected at recording time") {
  Tape t;
  const Var a = t.input("a", DenseMatrix(2, 2, 1.0));
  const Var b = t.input("b", DenseMatrix(3, 2, 1.0));
  CHECK_THROWS_AS(t.add(a, b), ShapeMismatch);
  CHECK_THROWS_AS(t.mul_scalar(a, b), ShapeMismatch);
}

TEST_CASE("gradcheck over repeated random draws of the full objective") {
  for (std::uint64_t seed : {11ull, 22ull, 33ull, 44ull, 55ull}) {
    const ElboFixture fix(seed);
    CHECK(gradcheck(fix.builder(), fix.inputs, 3e-5) <= 1e-4);
  }
}
