#include <omp.h>

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "readnet/num/kernels.hpp"
#include "readnet/num/ops.hpp"
#include "readnet/num/params.hpp"
#include "readnet/num/rng.hpp"
#include "readnet/num/serialize.hpp"

using namespace readnet::num;
using readnet::testing::gradcheck;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double bound = 1.0) {
  return init_uniform({r, c}, bound, rng);
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  Graph g;
  auto y = softmax(g.constant(Tensor::matrix(1, 2, {0.0, 0.0})), 1);
  CHECK(y.value()[0] == doctest::Approx(0.5));
  CHECK(y.value()[1] == doctest::Approx(0.5));
}

TEST_CASE("identity matmul returns the operand") {
  Graph g;
  const auto x = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  auto y = matmul(g.constant(Tensor::identity(2)), g.constant(x));
  CHECK(y.value() == x);
}

TEST_CASE("layer_norm of [1,3] is [-1,1]") {
  Graph g;
  auto y = layer_norm(g.constant(Tensor::matrix(1, 2, {1.0, 3.0})), 1);
  CHECK(y.value()[0] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(y.value()[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("shape mismatch names both shapes") {
  Graph g;
  auto a = g.constant(Tensor({2, 3}));
  auto b = g.constant(Tensor({4, 5}));
  try {
    matmul(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x5]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}

TEST_CASE("backward of x^2 at 3 is 6") {
  Graph g;
  auto x = g.variable(Tensor::scalar(3.0));
  g.backward(mul(x, x));
  CHECK(x.grad().item() == doctest::Approx(6.0));
}

TEST_CASE("sum of softmax has zero gradient") {
  Graph g;
  auto x = g.variable(Tensor::matrix(1, 4, {0.3, -1.0, 2.0, 0.5}));
  g.backward(sum(softmax(x, 1)));
  const auto gx = x.grad();
  for (double v : gx.data()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("backward rejects non-scalar loss and visits each node once") {
  Graph g;
  auto x = g.variable(Tensor::matrix(1, 2, {1.0, 2.0}));
  auto y = tanh(x);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);

  Graph h;
  auto a = h.variable(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  auto b = relu(a);
  auto c = add(b, a);
  auto loss = sum(mul(c, c));
  h.backward(loss);
  // a, b, c, c*c, sum: five differentiable nodes.
  CHECK(h.last_backward_visits() == 5);
}

TEST_CASE("masked softmax excludes positions and rejects empty support") {
  Graph g;
  auto x = g.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  auto y = softmax(x, 1, Mask{1, 0, 1});
  CHECK(y.value()(0, 1) == 0.0);
  CHECK(y.value()(0, 0) + y.value()(0, 2) == doctest::Approx(1.0));
  auto col = softmax(x, 0, Mask{0, 1});
  CHECK(col.value()(1, 2) == doctest::Approx(1.0));
  CHECK_THROWS_WITH(softmax(x, 1, Mask{0, 0, 0}), "empty sequence");
}

TEST_CASE("softmax rows sum to one on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = 1 + rng.below(5), c = 1 + rng.below(5);
    Graph g;
    auto y = softmax(g.constant(random_matrix(rng, r, c, 30.0)), 1);
    for (std::size_t i = 0; i < r; ++i) {
      double total = 0;
      for (std::size_t j = 0; j < c; ++j) total += y.value()(i, j);
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("finite-difference gradient check for every op") {
  Rng rng(2024);
  constexpr double kTol = 1e-4;
  for (int trial = 0; trial < 8; ++trial) {
    const auto r = 1 + rng.below(5), c = 1 + rng.below(5), k = 1 + rng.below(5);
    const auto a = random_matrix(rng, r, c);
    const auto b = random_matrix(rng, r, c);
    const auto row = random_matrix(rng, 1, c);
    const auto right = random_matrix(rng, c, k);
    // A fixed random readout keeps the loss from being symmetric in its inputs.
    const auto weights_rc = random_matrix(rng, r, c);
    auto readout = [weights_rc](Graph& g, const Var& v) { return sum(mul(v, g.constant(weights_rc))); };

    CAPTURE(trial);
    const auto weights_rk = random_matrix(rng, r, k);
    CHECK(gradcheck([&](Graph& g, const auto& v) {
            return sum(mul(matmul(v[0], v[1]), g.constant(weights_rk)));
          }, {a, right}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, add(v[0], v[1])); }, {a, b}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, add(v[0], v[1])); }, {a, row}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, sub(v[0], v[1])); }, {a, row}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, mul(v[0], v[1])); }, {a, b}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, mul(v[0], v[1])); }, {a, row}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, scale(v[0], -2.5)); }, {a}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, tanh(v[0])); }, {a}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, sigmoid(v[0])); }, {a}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, log_sigmoid(v[0])); }, {a}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, softmax(v[0], 1)); }, {a}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, softmax(v[0], 0)); }, {a}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, log_softmax(v[0])); }, {a}) < kTol);
    if (c > 1) {
      Mask mask(c, 1);
      mask[0] = 0;
      CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, softmax(v[0], 1, mask)); }, {a}) < kTol);
      CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, layer_norm(v[0], 1)); }, {a}) < kTol);
    }
    if (r > 1) {
      CHECK(gradcheck([&](Graph& g, const auto& v) { return readout(g, layer_norm(v[0], 0)); }, {a}) < kTol);
    }
    CHECK(gradcheck([&](Graph& g, const auto& v) {
            auto t = transpose(v[0]);
            return sum(mul(t, g.constant(Tensor(t.value().shape(), 0.5)))) ;
          }, {a}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) {
            const Var parts[] = {v[0], v[1]};
            auto cat = concat(parts, 0);
            return sum(mul(cat, cat));
          }, {a, b}) < kTol);
    CHECK(gradcheck([&](Graph& g, const auto& v) {
            const Var parts[] = {v[0], v[1]};
            auto cat = concat(parts, 1);
            return sum(mul(cat, tanh(cat)));
          }, {a, b}) < kTol);
    CHECK(gradcheck([&](Graph&, const auto& v) {
            const std::size_t idx[] = {0, r - 1, 0};
            auto sel = row_select(v[0], idx);
            return sum(mul(sel, sel));
          }, {a}) < kTol);
  }
}

TEST_CASE("relu gradient away from the kink") {
  const auto a = Tensor::matrix(2, 2, {0.5, -0.7, 1.3, -2.0});
  CHECK(gradcheck([](Graph&, const auto& v) { return sum(mul(relu(v[0]), v[0])); }, {a}) < 1e-4);
}

TEST_CASE("parallel gemm matches the serial reference bit for bit") {
  Rng rng(5);
  for (auto [m, n, k] : {std::tuple{64, 48, 40}, std::tuple{3, 5, 7}, std::tuple{128, 64, 32}}) {
    for (bool ta : {false, true}) {
      for (bool tb : {false, true}) {
        const auto a = ta ? random_matrix(rng, k, m) : random_matrix(rng, m, k);
        const auto b = tb ? random_matrix(rng, n, k) : random_matrix(rng, k, n);
        Tensor ref({static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
        matmul_reference(a, ta, b, tb, ref);
        for (int threads : {1, 2, 4}) {
          omp_set_num_threads(threads);
          Tensor par(ref.shape(), 7.0);
          matmul_into(a, ta, b, tb, par);
          CHECK(par == ref);
        }
      }
    }
  }
}

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
  ParameterStore store;
  auto& p = store.add("w", Tensor::matrix(1, 3, {1.0, -2.0, 0.5}));
  const auto before = p.value;
  p.has_grad = true;
  adam_step(store, {});
  CHECK(p.value == before);
}

TEST_CASE("adam first step moves by lr * sign(g)") {
  for (double gval : {3.7, -0.02}) {
    ParameterStore store;
    auto& p = store.add("w", Tensor::scalar(1.0));
    Graph g;
    auto w = g.parameter(p);
    g.backward(scale(w, gval));
    adam_step(store, {.lr = 1e-3});
    CHECK(std::abs(p.value.item() - (1.0 - 1e-3 * (gval > 0 ? 1.0 : -1.0))) < 1e-6);
    CHECK_FALSE(p.has_grad);
  }
}

TEST_CASE("adam without gradients is an error") {
  ParameterStore store;
  store.add("w", Tensor::scalar(1.0));
  CHECK_THROWS_AS(adam_step(store, {}), std::logic_error);
}

TEST_CASE("adam steps are deterministic") {
  auto run = [] {
    ParameterStore store;
    Rng rng(3);
    store.add_uniform("w", {3, 3}, 3, rng);
    for (int step = 0; step < 5; ++step) {
      Graph g;
      auto w = g.parameter(store.at("w"));
      g.backward(sum(mul(tanh(w), w)));
      adam_step(store, {});
    }
    return store.at("w").value;
  };
  CHECK(run() == run());
}

TEST_CASE("frozen parameters are recorded as constants") {
  ParameterStore store;
  auto& frozen = store.add("f", Tensor::scalar(2.0), false);
  auto& live = store.add("l", Tensor::scalar(3.0));
  Graph g;
  auto loss = mul(g.parameter(frozen), g.parameter(live));
  g.backward(loss);
  CHECK_FALSE(frozen.has_grad);
  CHECK(live.grad.item() == doctest::Approx(2.0));
}

TEST_CASE("seeded rng and uniform initialisation") {
  Rng a(42), b(42);
  CHECK(init_uniform({4, 4}, 0.3, a) == init_uniform({4, 4}, 0.3, b));
  Rng c(1);
  const auto zeros = init_uniform({3, 2}, 0.0, c);
  for (double v : zeros.data()) CHECK(v == 0.0);

  Rng d(9);
  const auto draws = init_uniform({10000, 1}, 1.0, d);
  double mean = 0;
  for (double v : draws.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
    mean += v;
  }
  mean /= 10000.0;
  const double sigma_of_mean = (1.0 / std::sqrt(3.0)) / std::sqrt(10000.0);
  CHECK(std::abs(mean) < 3.0 * sigma_of_mean);
}

TEST_CASE("tensor payload round-trips for random shapes and both dtypes") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Shape shape;
    const auto rank = 1 + rng.below(3);
    for (std::size_t i = 0; i < rank; ++i) shape.push_back(1 + rng.below(4));
    const auto t = init_uniform(shape, 10.0, rng);
    std::stringstream buf;
    write_tensor(buf, "layer." + std::to_string(trial), t);
    write_tensor(buf, "f32", t, DType::kFloat32);
    const auto back = read_tensor(buf);
    CHECK(back.name == "layer." + std::to_string(trial));
    CHECK(back.tensor == t);
    const auto narrow = read_tensor(buf);
    CHECK(narrow.dtype == DType::kFloat32);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(narrow.tensor[i] == static_cast<double>(static_cast<float>(t[i])));
  }
}

TEST_CASE("tensor payload is little-endian") {
  std::stringstream buf;
  write_tensor(buf, "x", Tensor::scalar(1.0));
  const auto bytes = buf.str();
  // u32 name length = 1, 'x', u32 rank = 2, two u64 dims = 1, tag 2, then 1.0.
  REQUIRE(bytes.size() == 4 + 1 + 4 + 16 + 1 + 8);
  CHECK(bytes[0] == 1);
  CHECK(bytes[4] == 'x');
  CHECK(bytes[5] == 2);
  CHECK(bytes[25] == 2);
  CHECK(static_cast<unsigned char>(bytes[33]) == 0x3F);
  CHECK(static_cast<unsigned char>(bytes[32]) == 0xF0);
}
