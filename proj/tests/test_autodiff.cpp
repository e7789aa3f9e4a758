#include <cmath>

#include "doctest.h"
#include "gradcheck_suite.hpp"
#include "semcom/error.hpp"

using namespace semcom;

namespace {

Tensor randn(std::uint64_t seed, std::size_t r, std::size_t c) {
  Rng g(seed, "test/randn");
  return gradsuite::randn(g, r, c);
}

}  // namespace

TEST_CASE("grad_check: primitives and architectures, two seeds") {
  for (std::uint64_t seed : {1ULL, 2ULL}) {
    for (const auto& c : gradsuite::primitive_cases(seed)) {
      CAPTURE(c.name);
      CHECK(c.result.checked > 0);
      CHECK(c.result.max_rel_error < 1e-4);
    }
    for (const auto& c : gradsuite::architecture_cases(seed)) {
      CAPTURE(c.name);
      CHECK(c.result.checked > 0);
      CHECK(c.result.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("grad_check flags a primitive with a wrong backward rule") {
  // Negative control: y = x^2 recorded with backward 3x instead of 2x.
  ParameterSet ps;
  ps.add("x", randn(3, 2, 3));
  auto faulty_square = [](ad::Var x) {
    Tensor v = x.value();
    for (double& e : v.data()) e *= e;
    const Tensor xv = x.value();
    return x.tape().record(std::move(v), {x}, [xv](const Tensor& g, std::span<Tensor* const> in) {
      if (!in[0]) return;
      for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += 3.0 * xv[i] * g[i];
    });
  };
  const auto res = grad_check(ps, [&](ad::Tape& t) { return ad::sum(faulty_square(t.parameter(ps.at("x")))); }, 7);
  CHECK(res.max_rel_error > 0.1);

  // Same primitive with the correct rule passes.
  auto square = [](ad::Var x) {
    Tensor v = x.value();
    for (double& e : v.data()) e *= e;
    const Tensor xv = x.value();
    return x.tape().record(std::move(v), {x}, [xv](const Tensor& g, std::span<Tensor* const> in) {
      if (!in[0]) return;
      for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += 2.0 * xv[i] * g[i];
    });
  };
  CHECK(grad_check(ps, [&](ad::Tape& t) { return ad::sum(square(t.parameter(ps.at("x")))); }, 7).max_rel_error < 1e-6);
}

TEST_CASE("softmax cross-entropy gradient equals (p - onehot) / n") {
  const Tensor logits = randn(11, 5, 4);
  const std::vector<int> y{0, 3, 1, 1, 2};
  ad::Tape t;
  ad::Var x = t.input(logits);
  ad::Var loss = ad::softmax_cross_entropy(x, y);
  t.backward(loss);
  const Tensor g = x.grad();
  double expected_loss = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    double mx = -1e300, z = 0;
    for (std::size_t k = 0; k < 4; ++k) mx = std::max(mx, logits.at(i, k));
    for (std::size_t k = 0; k < 4; ++k) z += std::exp(logits.at(i, k) - mx);
    for (std::size_t k = 0; k < 4; ++k) {
      const double p = std::exp(logits.at(i, k) - mx) / z;
      CHECK(g.at(i, k) == doctest::Approx((p - (static_cast<int>(k) == y[i] ? 1.0 : 0.0)) / 5.0).epsilon(1e-12));
    }
    expected_loss -= (logits.at(i, static_cast<std::size_t>(y[i])) - mx - std::log(z)) / 5.0;
  }
  CHECK(loss.value().item() == doctest::Approx(expected_loss).epsilon(1e-12));
}

TEST_CASE("power normalisation value and gradient match the closed form") {
  const Tensor xv = randn(12, 3, 6);
  const Tensor c = randn(13, 3, 6);
  ad::Tape t;
  ad::Var x = t.input(xv);
  ad::Var y = ad::power_normalize_rows(x);
  t.backward(ad::sum(ad::mul(y, t.constant_ref(c))));
  const Tensor g = x.grad();
  const double m = 6;
  for (std::size_t i = 0; i < 3; ++i) {
    double nn = 0, xc = 0, ms = 0;
    for (std::size_t j = 0; j < 6; ++j) {
      nn += xv.at(i, j) * xv.at(i, j);
      xc += xv.at(i, j) * c.at(i, j);
    }
    const double norm = std::sqrt(nn);
    for (std::size_t j = 0; j < 6; ++j) {
      const double yij = y.value().at(i, j);
      ms += yij * yij;
      CHECK(yij == doctest::Approx(xv.at(i, j) * std::sqrt(m) / norm).epsilon(1e-12));
      const double expect = std::sqrt(m) * (c.at(i, j) / norm - xv.at(i, j) * xc / (norm * norm * norm));
      CHECK(g.at(i, j) == doctest::Approx(expect).epsilon(1e-10));
    }
    CHECK(ms / m == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mse and row distance gradients") {
  const Tensor a = randn(21, 3, 4), b = randn(22, 3, 4);
  ad::Tape t;
  ad::Var va = t.input(a);
  ad::Var loss = ad::add(ad::mse(va, t.constant_ref(b)), ad::row_sq_distance(va, t.constant_ref(b)));
  t.backward(loss);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(va.grad()[i] == doctest::Approx(2 * (a[i] - b[i]) / 12.0 + 2 * (a[i] - b[i]) / 3.0).epsilon(1e-12));
}

TEST_CASE("affine gradient: dW = x^T g, db = column sums") {
  const Tensor xv = randn(31, 4, 3), wv = randn(32, 3, 2), c = randn(33, 4, 2);
  ParameterSet ps;
  ps.add("W", wv);
  ps.add("b", Tensor({2}, std::vector<double>{0.1, -0.2}));
  ad::Tape t;
  ad::Var x = t.input(xv);
  ad::Var out = ad::affine(x, t.parameter(ps.at("W")), t.parameter(ps.at("b")));
  t.backward(ad::sum(ad::mul(out, t.constant_ref(c))));
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < 4; ++i) s += xv.at(i, k) * c.at(i, j);
      CHECK(ps.at("W").grad.at(k, j) == doctest::Approx(s).epsilon(1e-12));
    }
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i) s += c.at(i, j);
    CHECK(ps.at("b").grad[j] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("rows_matmul with an orthogonal matrix and its transpose is the identity") {
  const Tensor xv = randn(41, 2, 8);
  auto mats = std::make_shared<std::vector<Tensor>>();
  for (int i = 0; i < 2; ++i) {
    Tensor key({16});
    for (std::size_t j = 0; j < 16; ++j) key[j] = ((j * 7 + static_cast<std::size_t>(i)) % 3) ? 1.0 : -1.0;
    mats->push_back(key_scrambler(key.data(), 8));
  }
  ad::Tape t;
  ad::Var back = ad::rows_matmul(ad::rows_matmul(t.constant_ref(xv), mats, false), mats, true);
  for (std::size_t i = 0; i < xv.size(); ++i) CHECK(back.value()[i] == doctest::Approx(xv[i]).epsilon(1e-12));
}

TEST_CASE("tape rules") {
  ad::Tape t;
  ad::Var a = t.input(Tensor::matrix(1, 2, {1, 2}));
  ad::Var unused = t.input(Tensor::matrix(1, 2, {3, 4}));
  ad::Var loss = ad::sum(ad::scale(a, 2.0));
  CHECK_THROWS_AS(t.backward(a), Error);  // not a scalar
  t.backward(loss);
  CHECK(a.grad() == Tensor::matrix(1, 2, {2, 2}));
  CHECK(unused.grad() == Tensor::matrix(1, 2, {0, 0}));
  CHECK_THROWS_AS(ad::add(a, t.input(Tensor::matrix(2, 1, {1, 1}))), Error);
}

TEST_CASE("adam: first step moves every coordinate by lr against the gradient sign") {
  ParameterSet ps;
  ps.add("w", Tensor::vector({1.0, -2.0, 0.5}));
  ps.at("w").grad = Tensor::vector({0.3, -4.0, 1e-3});
  AdamConfig cfg;
  adam_step(ps, cfg, 1);
  // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  CHECK(ps.at("w").value[0] == doctest::Approx(1.0 - 1e-3 * 0.3 / (0.3 + 1e-8)));
  CHECK(ps.at("w").value[1] == doctest::Approx(-2.0 + 1e-3 * 4.0 / (4.0 + 1e-8)));
  CHECK(ps.at("w").value[2] == doctest::Approx(0.5 - 1e-3 * 1e-3 / (1e-3 + 1e-8)));
  CHECK_THROWS_AS(adam_step(ps, cfg, 0), Error);
}

TEST_CASE("parameter set bookkeeping") {
  ParameterSet ps;
  ps.add("a", Tensor::vector({0.1, 0.2}));
  CHECK_THROWS_AS(ps.add("a", Tensor::vector({1})), Error);
  CHECK_THROWS_AS(ps.at("missing"), Error);
  const auto h = ps.hash();
  ps.at("a").value[0] = 0.1000001;
  CHECK(ps.hash() != h);
  ps.round_to_float();
  CHECK(ps.at("a").value[0] == static_cast<double>(static_cast<float>(0.1000001)));
  CHECK(ps.scalar_count() == 2);
}
