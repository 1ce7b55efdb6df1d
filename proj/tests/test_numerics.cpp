#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "streamtag/adam.hpp"
#include "streamtag/checkpoint_io.hpp"
#include "streamtag/crf.hpp"
#include "streamtag/gradcheck.hpp"
#include "streamtag/ops.hpp"

using namespace streamtag;
using namespace streamtag::num;
using testing::random_tensor;

namespace {

// Weighted sum with fixed random weights, so every output element matters.
Var probe(Var out, const Tensor& weights) {
  Graph& g = out.graph();
  return sum(mul(out, g.constant(weights.reshaped(out.value().shape()))));
}

double max_error(const std::function<Var(Graph&)>& f, std::vector<Parameter*> params) {
  double worst = 0;
  for (const auto& r : grad_check(f, params)) worst = std::max(worst, r.max_relative_error);
  return worst;
}

}  // namespace

TEST_CASE("tensor construction checks sizes") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(Tensor({4}).rows() == 1);
  CHECK(Tensor::scalar(2.0).item() == 2.0);
}

TEST_CASE("log_sum_exp and softmax closed forms") {
  Graph g;
  Var v = g.constant(Tensor({2}, std::vector<double>{0.0, 0.0}));
  CHECK(log_sum_exp(v, 0).value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  Var c = g.constant(Tensor({1, 4}, 3.0));
  for (double p : softmax(c).value().data()) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("shape mismatch names the op and shapes") {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, g.constant(Tensor({3, 2}))), ShapeError);
  CHECK_THROWS_AS(concat({a, g.constant(Tensor({3, 1}))}), ShapeError);
}

TEST_CASE("per-op gradients match central differences within 1e-6") {
  std::mt19937_64 rng(5);
  Parameter a("a", random_tensor({3, 4}, rng));
  Parameter b("b", random_tensor({3, 4}, rng));
  Parameter m("m", random_tensor({4, 2}, rng));
  Parameter bias("bias", random_tensor({4}, rng));
  const Tensor w34 = random_tensor({3, 4}, rng);
  const Tensor w32 = random_tensor({3, 2}, rng);
  const Tensor w38 = random_tensor({3, 8}, rng);
  const Tensor w3 = random_tensor({3}, rng);
  const Tensor w4 = random_tensor({4}, rng);
  const Tensor w24 = random_tensor({2, 4}, rng);
  const Tensor w54 = random_tensor({5, 4}, rng);

  SUBCASE("matmul") { CHECK(max_error([&](Graph& g) { return probe(matmul(g.parameter(a), g.parameter(m)), w32); }, {&a, &m}) < 1e-6); }
  SUBCASE("add") { CHECK(max_error([&](Graph& g) { return probe(add(g.parameter(a), g.parameter(b)), w34); }, {&a, &b}) < 1e-6); }
  SUBCASE("sub") { CHECK(max_error([&](Graph& g) { return probe(sub(g.parameter(a), g.parameter(b)), w34); }, {&a, &b}) < 1e-6); }
  SUBCASE("mul") { CHECK(max_error([&](Graph& g) { return probe(mul(g.parameter(a), g.parameter(b)), w34); }, {&a, &b}) < 1e-6); }
  SUBCASE("add_bias") { CHECK(max_error([&](Graph& g) { return probe(add_bias(g.parameter(a), g.parameter(bias)), w34); }, {&a, &bias}) < 1e-6); }
  SUBCASE("tanh") { CHECK(max_error([&](Graph& g) { return probe(num::tanh(g.parameter(a)), w34); }, {&a}) < 1e-6); }
  SUBCASE("sigmoid") { CHECK(max_error([&](Graph& g) { return probe(sigmoid(g.parameter(a)), w34); }, {&a}) < 1e-6); }
  SUBCASE("softplus") { CHECK(max_error([&](Graph& g) { return probe(softplus(g.parameter(a)), w34); }, {&a}) < 1e-6); }
  SUBCASE("concat") { CHECK(max_error([&](Graph& g) { return probe(concat({g.parameter(a), g.parameter(b)}), w38); }, {&a, &b}) < 1e-6); }
  SUBCASE("softmax") { CHECK(max_error([&](Graph& g) { return probe(softmax(g.parameter(a)), w34); }, {&a}) < 1e-6); }
  SUBCASE("log_sum_exp rows") { CHECK(max_error([&](Graph& g) { return probe(log_sum_exp(g.parameter(a), 1), w3); }, {&a}) < 1e-6); }
  SUBCASE("log_sum_exp cols") { CHECK(max_error([&](Graph& g) { return probe(log_sum_exp(g.parameter(a), 0), w4); }, {&a}) < 1e-6); }
  SUBCASE("embedding_lookup with repeats") {
    const std::vector<int> idx = {2, 0, 2, 1, 0};
    CHECK(max_error([&](Graph& g) { return probe(embedding_lookup(g.parameter(a), idx), w54); }, {&a}) < 1e-6);
  }
  SUBCASE("row, repeat_rows, stack_rows, select") {
    CHECK(max_error([&](Graph& g) {
            Var r = repeat_rows(row(g.parameter(a), 1), 2);
            Var s = stack_rows(std::vector<Var>{row(g.parameter(b), 2), row(g.parameter(a), 0)});
            return add(probe(add(r, s), w24), select(g.parameter(b), 5));
          }, {&a, &b}) < 1e-6);
  }
  SUBCASE("scale") { CHECK(max_error([&](Graph& g) { return probe(scale(g.parameter(a), -2.5), w34); }, {&a}) < 1e-6); }
}

TEST_CASE("lstm gradients, forward and reverse") {
  std::mt19937_64 rng(9);
  Parameter x("x", random_tensor({4, 3}, rng));
  Parameter wih("wih", random_tensor({3, 8}, rng, 0.5));
  Parameter whh("whh", random_tensor({2, 8}, rng, 0.5));
  Parameter b("b", random_tensor({8}, rng, 0.5));
  const Tensor w = random_tensor({4, 2}, rng);
  for (bool reverse : {false, true}) {
    CHECK(max_error([&](Graph& g) {
            return probe(lstm(g.parameter(x), g.parameter(wih), g.parameter(whh), g.parameter(b), reverse), w);
          }, {&x, &wih, &whh, &b}) < 1e-6);
  }
}

TEST_CASE("grad_check is exact for a linear loss") {
  Parameter w("w", Tensor({3}, std::vector<double>{0.5, -1.0, 2.0}));
  const Tensor x({3}, std::vector<double>{1.0, 2.0, -0.5});
  const auto r = grad_check([&](Graph& g) { return sum(mul(g.parameter(w), g.constant(x))); }, std::vector<Parameter*>{&w});
  CHECK(r.at(0).max_relative_error < 1e-10);
  CHECK(r.at(0).checked == 3);
  CHECK(w.value[1] == -1.0);
}

TEST_CASE("relative error uses the floor for tiny gradients") {
  CHECK(relative_error(1.0, 1.0, 1e-5) == 0.0);
  CHECK(relative_error(2e-10, 1e-10, 1e-5) == doctest::Approx(1e-5));
  CHECK(relative_error(2.0, 1.0, 1e-5) == doctest::Approx(0.5));
}

TEST_CASE("adam first step closed form") {
  Parameter x("x", Tensor::scalar(1.0));
  Adam opt({&x}, 1e-3);
  {
    Graph g;
    Var v = g.parameter(x);
    g.backward(mul(v, v));
  }
  CHECK(x.grad.item() == 2.0);
  opt.step();
  // m = 0.2, v = 0.004; bias corrected m = 2, v = 4; step = lr * 2 / (2 + eps)
  CHECK(x.value.item() == doctest::Approx(1.0 - 1e-3 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
  CHECK(x.grad.item() == 0.0);
  CHECK(opt.state().step == 1);
}

TEST_CASE("adam leaves zero-gradient and frozen parameters alone") {
  Parameter a("a", Tensor({2}, std::vector<double>{1.0, -1.0}));
  Parameter frozen("f", Tensor({2}, std::vector<double>{3.0, 4.0}), false);
  frozen.grad.fill(5.0);
  Adam opt({&a, &frozen});
  opt.step();
  CHECK(a.value == Tensor({2}, std::vector<double>{1.0, -1.0}));
  CHECK(frozen.value == Tensor({2}, std::vector<double>{3.0, 4.0}));
  CHECK(frozen.grad[0] == 0.0);

  Parameter b("b", Tensor::scalar(1.0));
  Adam zero_lr({&b}, 0.0);
  b.grad.fill(3.0);
  zero_lr.step();
  CHECK(b.value.item() == 1.0);
}

TEST_CASE("frozen parameters get no gradient through the graph") {
  Parameter p("p", Tensor({2}, 1.0), false);
  Graph g;
  Var v = g.parameter(p);
  CHECK_FALSE(g.requires_grad(v));
  g.backward(sum(mul(v, v)));
  CHECK(p.grad == Tensor({2}));
}

TEST_CASE("crf transition gradient on a two-tag toy") {
  std::mt19937_64 rng(4);
  Parameter e("e", random_tensor({3, 2}, rng));
  Parameter t("t", random_tensor({4, 4}, rng));
  const std::vector<int> gold = {1, 0, 1};
  const auto r = grad_check([&](Graph& g) { return crf::nll(g.parameter(e), g.parameter(t), gold); },
                            std::vector<Parameter*>{&e, &t});
  for (const auto& x : r) CHECK(x.max_relative_error < 1e-6);
}

TEST_CASE("checkpoint container round trip") {
  std::mt19937_64 rng(1);
  ParameterContainer params = {{"a.w", random_tensor({3, 2}, rng)}, {"b", random_tensor({5}, rng)},
                               {"s", Tensor::scalar(0.25)}};
  const std::string bytes = parameters_to_bytes(params);
  CHECK(bytes.substr(0, 4) == "STPC");
  std::istringstream is(bytes);
  CHECK(read_parameters(is) == params);

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bs(bad);
  CHECK_THROWS(read_parameters(bs));
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(read_parameters(truncated));
}

TEST_CASE("initializers follow their ranges") {
  std::mt19937_64 rng(2);
  const Tensor w = glorot_uniform(30, 20, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  for (double x : w.data()) CHECK(std::abs(x) <= limit);
  const Tensor e = normal_table(100, 50, 0.1, rng);
  double sq = 0;
  for (double x : e.data()) sq += x * x;
  CHECK(std::sqrt(sq / 5000.0) == doctest::Approx(0.1).epsilon(0.05));
}
