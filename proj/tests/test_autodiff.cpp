#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "severitas/errors.hpp"
#include "severitas/ops.hpp"

using namespace severitas;

namespace {

Var weighted_sum(const Var& v, Rng& rng) {
  return sum(mul(v, Var(oracle::random_tensor(rng, v.shape()))));
}

}  // namespace

TEST_CASE("tensor rejects value count mismatch") {
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{0, 2}), ShapeError);
}

TEST_CASE("matmul") {
  SUBCASE("identity") {
    Var a(Tensor({2, 2}, {1, 2, 3, 4}));
    Var id(Tensor({2, 2}, {1, 0, 0, 1}));
    CHECK(matmul(a, id).value() == a.value());
  }
  SUBCASE("row times column") {
    Var r = matmul(Var(Tensor({1, 2}, {1, 2})), Var(Tensor({2, 1}, {3, 4})));
    CHECK(r.shape() == Shape{1, 1});
    CHECK(r.value()[0] == 11.0);
  }
  SUBCASE("random against triple loop") {
    Rng rng(7);
    Tensor a = oracle::random_tensor(rng, {4, 5});
    Tensor b = oracle::random_tensor(rng, {5, 3});
    Tensor got = matmul(Var(a), Var(b)).value();
    Tensor want = oracle::naive_matmul(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12);
  }
  SUBCASE("shape error names both shapes") {
    try {
      matmul(Var(Tensor({2, 3})), Var(Tensor({2, 3})));
      FAIL("expected throw");
    } catch (const ShapeError& e) {
      const std::string what = e.what();
      CHECK(what.find("[2x3]") != std::string::npos);
    }
  }
}

TEST_CASE("sparsemax examples") {
  auto p = sparsemax(std::vector<double>{0.7, 0.7, 0.7});
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(sparsemax(std::vector<double>{2, 0}) == std::vector<double>{1, 0});
  auto q = sparsemax(std::vector<double>{0.5, 0});
  CHECK(q[0] == doctest::Approx(0.75));
  CHECK(q[1] == doctest::Approx(0.25));
  CHECK_THROWS_AS(sparsemax(std::vector<double>{}), ArgumentError);
}

TEST_CASE("sparsemax properties") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(15);
    std::vector<double> z(n);
    for (double& v : z) v = rng.uniform(-3, 3);
    auto p = sparsemax(z);
    auto want = oracle::simplex_projection(z);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(p[i] >= 0.0);
      CHECK(std::abs(p[i] - want[i]) <= 1e-12);
      total += p[i];
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    const double c = rng.uniform(-10, 10);
    std::vector<double> shifted = z;
    for (double& v : shifted) v += c;
    auto ps = sparsemax(shifted);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ps[i] - p[i]) <= 1e-12);
  }
}

TEST_CASE("conv1d") {
  SUBCASE("identity kernel") {
    Var x(Tensor({1, 4}, {1, -2, 3, 5}));
    Var k(Tensor({1, 1, 1}, {1}));
    CHECK(conv1d(x, k, 0).value() == x.value());
  }
  SUBCASE("box kernel with padding") {
    Var y = conv1d(Var(Tensor({1, 3}, {1, 2, 3})), Var(Tensor({1, 1, 3}, {1, 1, 1})), 1);
    CHECK(y.value().values() == oracle::sliding_conv({1, 2, 3}, {1, 1, 1}, 1));
    CHECK(y.value().values() == std::vector<double>{3, 6, 5});
  }
  SUBCASE("shape arithmetic") {
    Var y = conv1d(Var(Tensor({16, 10})), Var(Tensor({32, 16, 3})), 1);
    CHECK(y.shape() == Shape{32, 10});
  }
  SUBCASE("kernel wider than padded input") {
    CHECK_THROWS_AS(conv1d(Var(Tensor({1, 2})), Var(Tensor({1, 1, 5})), 1), ShapeError);
  }
  SUBCASE("output length law over random triples") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const std::size_t len = 1 + rng.below(12), pad = rng.below(4);
      const std::size_t k = 1 + rng.below(len + 2 * pad);
      Var y = conv1d(Var(Tensor({2, 1, len})), Var(Tensor({3, 1, k})), pad);
      CHECK(y.shape() == Shape{2, 3, len + 2 * pad - k + 1});
    }
  }
}

TEST_CASE("lstm_cell hand algebra") {
  LstmParams zero{Var(Tensor({2, 4})), Var(Tensor({1, 4})), Var(Tensor({4}))};
  Var x(Tensor({1, 2}, {0.3, -0.8}));
  SUBCASE("zero state stays zero") {
    LstmState s = lstm_cell(x, {Var(Tensor({1, 1})), Var(Tensor({1, 1}))}, zero);
    CHECK(s.h.value()[0] == 0.0);
    CHECK(s.c.value()[0] == 0.0);
  }
  SUBCASE("cell 2 halves") {
    LstmState s = lstm_cell(x, {Var(Tensor({1, 1})), Var(Tensor({1, 1}, {2.0}))}, zero);
    CHECK(s.c.value()[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.h.value()[0] == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-15));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(lstm_cell(Var(Tensor({1, 3})), {Var(Tensor({1, 1})), Var(Tensor({1, 1}))}, zero),
                    ShapeError);
  }
}

TEST_CASE("dropout") {
  Rng rng(5);
  Var x(Tensor({10}, 1.0));
  CHECK(dropout(x, 0.0, Mode::train, rng).value() == x.value());
  CHECK(dropout(x, 0.5, Mode::eval, rng).value() == x.value());
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::train, rng), ArgumentError);
  Var big(Tensor({100000}, 1.0));
  double total = 0.0;
  Var dropped = dropout(big, 0.3, Mode::train, rng);
  for (double v : dropped.value().values()) total += v;
  CHECK(std::abs(total / 1e5 - 1.0) < 0.01);
}

TEST_CASE("backward basics") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0));
  tape.backward(mul(x, x));
  CHECK(x.grad()[0] == 6.0);

  Tape t2;
  Var y = t2.leaf(Tensor::scalar(0.0));
  t2.backward(exp(y));
  CHECK(y.grad()[0] == 1.0);

  Tape t3;
  Var v = t3.leaf(Tensor({2}, {1, 2}));
  CHECK_THROWS_AS(t3.backward(mul(v, v)), ArgumentError);
}

TEST_CASE("tape records in topological order") {
  Tape tape;
  Var a = tape.leaf(Tensor({2}, {1, 2}));
  Var b = tape.leaf(Tensor({2}, {3, 4}));
  Var c = mul(a, b);
  Var d = sum(add(c, a));
  CHECK(a.node_id() < c.node_id());
  CHECK(b.node_id() < c.node_id());
  CHECK(c.node_id() < d.node_id());
  tape.backward(d);
  CHECK(a.grad().values() == std::vector<double>{4, 5});
  CHECK(b.grad().values() == std::vector<double>{1, 2});
}

TEST_CASE("constants are not recorded") {
  Tape tape;
  Var c(Tensor({2}, {1, 2}));
  Var d = mul(c, c);
  CHECK_FALSE(d.tracked());
  CHECK(tape.size() == 0);
}

TEST_CASE("broadcasting add of a row bias") {
  Tape tape;
  Var m = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = tape.leaf(Tensor({3}, {10, 20, 30}));
  Var y = add(m, b);
  CHECK(y.value().values() == std::vector<double>{11, 22, 33, 14, 25, 36});
  tape.backward(sum(y));
  CHECK(b.grad().values() == std::vector<double>{2, 2, 2});
  CHECK_THROWS_AS(add(m, Var(Tensor({2}))), ShapeError);
}

TEST_CASE("primitive gradients match central differences") {
  Rng rng(2024);
  auto run = [&](const char* name, oracle::LossFn fn, std::vector<Tensor> inputs) {
    CAPTURE(name);
    auto r = oracle::check_gradients(fn, inputs);
    CHECK(r.max_rel_error <= 1e-4);
  };
  for (int seed = 0; seed < 5; ++seed) {
    Rng w(seed);
    Rng w2 = w;
    run("matmul", [&](const std::vector<Var>& v) { Rng r = w2; return weighted_sum(matmul(v[0], v[1]), r); },
        {oracle::random_tensor(rng, {3, 4}), oracle::random_tensor(rng, {4, 2})});
    run("bmm", [&](const std::vector<Var>& v) { Rng r = w2; return weighted_sum(bmm(v[0], v[1]), r); },
        {oracle::random_tensor(rng, {2, 3, 4}), oracle::random_tensor(rng, {2, 4, 2})});
    run("sparsemax", [&](const std::vector<Var>& v) { Rng r = w2; return weighted_sum(sparsemax(v[0]), r); },
        {oracle::random_tensor(rng, {3, 6}, -2, 2)});
    run("conv1d", [&](const std::vector<Var>& v) { Rng r = w2; return weighted_sum(conv1d(v[0], v[1], 1), r); },
        {oracle::random_tensor(rng, {2, 3, 5}), oracle::random_tensor(rng, {4, 3, 3})});
    run("log-exp-tanh-sigmoid",
        [&](const std::vector<Var>& v) {
          Rng r = w2;
          return weighted_sum(mul(log(add_scalar(exp(v[0]), 0.5)), sigmoid(tanh(v[0]))), r);
        },
        {oracle::random_tensor(rng, {7})});
    run("cross_entropy",
        [](const std::vector<Var>& v) {
          const std::vector<int> labels{0, 2, 1};
          return cross_entropy(v[0], labels);
        },
        {oracle::random_tensor(rng, {3, 3}, -3, 3)});
    run("lstm_cell",
        [&](const std::vector<Var>& v) {
          Rng r = w2;
          LstmState s = lstm_cell(v[0], {v[1], v[2]}, {v[3], v[4], v[5]});
          return add(weighted_sum(s.h, r), weighted_sum(s.c, r));
        },
        {oracle::random_tensor(rng, {2, 3}), oracle::random_tensor(rng, {2, 2}),
         oracle::random_tensor(rng, {2, 2}), oracle::random_tensor(rng, {3, 8}),
         oracle::random_tensor(rng, {2, 8}), oracle::random_tensor(rng, {8})});
  }
}
