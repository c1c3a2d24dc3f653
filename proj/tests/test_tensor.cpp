#include <doctest.h>

#include <cmath>
#include <random>

#include "mmt/gradcheck.hpp"
#include "mmt/tensor.hpp"

using namespace mmt;

namespace {

TensorPtr random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double range = 2.0) {
  auto t = make_tensor(std::move(shape));
  for (double& v : t->data) v = (uniform01(rng) * 2.0 - 1.0) * range;
  return t;
}

// Checks reverse-mode gradients of an op against central finite differences
// through a random-weighted scalarization of the output.
void fd_check_op(const std::function<TensorPtr(Graph&, const std::vector<TensorPtr>&)>& build,
                 std::vector<TensorPtr> inputs, double step, double tol, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TensorPtr weights;
  const auto eval = [&]() {
    Graph g;
    auto out = build(g, inputs);
    if (weights == nullptr) weights = random_tensor(out->shape, rng, 1.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < out->size(); ++i) acc += out->data[i] * weights->data[i];
    return acc;
  };
  eval();  // materialize weights

  Graph g;
  auto out = build(g, inputs);
  auto loss = g.sum_all(g.mul(out, weights));
  for (auto& in : inputs) in->zero_grad();
  g.backward(loss);

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& in = inputs[k];
    for (std::size_t i = 0; i < in->size(); ++i) {
      const double saved = in->data[i];
      in->data[i] = saved + step;
      const double fp = eval();
      in->data[i] = saved - step;
      const double fm = eval();
      in->data[i] = saved;
      const double fd = (fp - fm) / (2.0 * step);
      const double an = in->grad[i];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      INFO("input ", k, " coord ", i, " fd=", fd, " analytic=", an);
      CHECK(rel < tol);
    }
  }
}

}  // namespace

TEST_CASE("matmul identity leaves the operand unchanged") {
  Graph g;
  auto id = make_tensor({2, 2}, {1.0, 0.0, 0.0, 1.0});
  auto m = make_tensor({2, 2}, {3.0, -1.0, 2.0, 5.0});
  auto out = g.matmul(id, m);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out->data[i] == m->data[i]);
}

TEST_CASE("matmul hand arithmetic") {
  Graph g;
  auto a = make_tensor({2, 2}, {1.0, 2.0, 3.0, 4.0});
  auto b = make_tensor({2, 1}, {1.0, 1.0});
  auto out = g.matmul(a, b);
  CHECK(out->shape == std::vector<std::size_t>{2, 1});
  CHECK(out->data[0] == 3.0);
  CHECK(out->data[1] == 7.0);
}

TEST_CASE("matmul rejects mismatched inner extents with both shapes named") {
  Graph g;
  auto a = make_tensor({2, 3});
  auto b = make_tensor({2, 2});
  try {
    g.matmul(a, b);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
    CHECK(std::string(e.what()).find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("matmul backward matches finite differences on random 3x4 by 4x2") {
  std::mt19937_64 rng(7);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.matmul(in[0], in[1]); },
              {a, b}, 1e-5, 1e-6, 11);
}

TEST_CASE("elementwise trivial values") {
  Graph g;
  auto zero = make_scalar(0.0);
  CHECK(g.tanh(zero)->data[0] == 0.0);
  CHECK(g.sigmoid(zero)->data[0] == 0.5);
}

TEST_CASE("tanh backward at 0.3 matches central differences to 1e-8 absolute") {
  auto x = make_scalar(0.3);
  Graph g;
  auto y = g.tanh(x);
  x->zero_grad();
  g.backward(y);
  const double h = 1e-6;
  const double fd = (std::tanh(0.3 + h) - std::tanh(0.3 - h)) / (2.0 * h);
  CHECK(std::abs(x->grad[0] - fd) < 1e-8);
}

TEST_CASE("elementwise ops match finite differences on random inputs") {
  std::mt19937_64 rng(21);
  auto a = random_tensor({3, 3}, rng);
  auto b = random_tensor({3, 3}, rng);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.add(in[0], in[1]); },
              {a, b}, 1e-5, 1e-5, 1);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.mul(in[0], in[1]); },
              {a, b}, 1e-5, 1e-5, 2);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.tanh(in[0]); }, {a}, 1e-5,
              1e-5, 3);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.sigmoid(in[0]); }, {a},
              1e-5, 1e-5, 4);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.neg(in[0]); }, {a}, 1e-5,
              1e-5, 5);

  auto pos = make_tensor({4}, {0.5, 1.5, 2.0, 0.25});
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.log(in[0]); }, {pos}, 1e-6,
              1e-5, 6);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.exp(in[0]); }, {a}, 1e-5,
              1e-5, 7);

  auto scalar = make_scalar(0.75);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.mul(in[0], in[1]); },
              {a, scalar}, 1e-5, 1e-5, 8);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.add(in[0], in[1]); },
              {scalar, b}, 1e-5, 1e-5, 9);
}

TEST_CASE("structural ops match finite differences") {
  std::mt19937_64 rng(33);
  auto a = random_tensor({2, 3}, rng);
  auto b = random_tensor({2, 2}, rng);
  auto v = random_tensor({3}, rng);
  fd_check_op(
      [](Graph& g, const std::vector<TensorPtr>& in) { return concat_cols2(g, in[0], in[1]); },
      {a, b}, 1e-5, 1e-5, 1);
  fd_check_op(
      [](Graph& g, const std::vector<TensorPtr>& in) {
        const TensorPtr parts[2] = {in[0], in[1]};
        return g.concat_rows(parts);
      },
      {a, random_tensor({3, 3}, rng)}, 1e-5, 1e-5, 2);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.slice_cols(in[0], 1, 2); },
              {a}, 1e-5, 1e-5, 3);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.transpose(in[0]); }, {a},
              1e-5, 1e-5, 4);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.add_rowvec(in[0], in[1]); },
              {a, v}, 1e-5, 1e-5, 5);
  fd_check_op(
      [](Graph& g, const std::vector<TensorPtr>& in) {
        const int cols[2] = {2, 0};
        return g.pick_per_row(in[0], cols);
      },
      {a}, 1e-5, 1e-5, 6);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.log_softmax_row(in[0]); },
              {a}, 1e-5, 1e-5, 7);
}

TEST_CASE("softmax of a constant row is uniform") {
  Graph g;
  auto x = make_tensor({3}, {4.2, 4.2, 4.2});
  auto y = g.softmax_row(x);
  for (double v : y->data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax survives large logits via max subtraction") {
  Graph g;
  auto x = make_tensor({2}, {1000.0, 0.0});
  auto y = g.softmax_row(x);
  CHECK(y->data[0] == doctest::Approx(1.0));
  CHECK(y->data[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(y->data[0]));
}

TEST_CASE("softmax properties: sums to one, shift invariant") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor({7}, rng);
    Graph g;
    auto y = g.softmax_row(x);
    double sum = 0.0;
    for (double v : y->data) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);

    auto shifted = make_tensor({7});
    const double c = uniform01(rng) * 10.0 - 5.0;
    for (std::size_t i = 0; i < 7; ++i) shifted->data[i] = x->data[i] + c;
    auto y2 = g.softmax_row(shifted);
    for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(y->data[i] - y2->data[i]) < 1e-12);
  }
}

TEST_CASE("softmax Jacobian-vector product matches finite differences on length 5") {
  std::mt19937_64 rng(13);
  auto x = random_tensor({5}, rng);
  fd_check_op([](Graph& g, const std::vector<TensorPtr>& in) { return g.softmax_row(in[0]); }, {x},
              1e-5, 1e-6, 17);
}

TEST_CASE("gather_rows basics and additive backward") {
  auto table = make_tensor({3, 2}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});

  Graph g;
  const int first[1] = {0};
  auto row = g.gather_rows(table, first);
  CHECK(row->data == std::vector<double>{1.0, 2.0});

  // Repeated id: both upstream grads land in the same table row.
  Graph g2;
  const int twice[2] = {2, 2};
  auto picked = g2.gather_rows(table, twice);
  auto loss = g2.sum_all(picked);
  table->zero_grad();
  g2.backward(loss);
  CHECK(table->grad[4] == 2.0);
  CHECK(table->grad[5] == 2.0);
  CHECK(table->grad[0] == 0.0);
}

TEST_CASE("gather_rows rejects out-of-range ids naming the position") {
  auto table = make_tensor({3, 2});
  Graph g;
  const int bad[2] = {1, 7};
  try {
    g.gather_rows(table, bad);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("position 1") != std::string::npos);
  }
}

TEST_CASE("gather_rows backward matches finite differences") {
  std::mt19937_64 rng(41);
  auto table = random_tensor({5, 3}, rng);
  fd_check_op(
      [](Graph& g, const std::vector<TensorPtr>& in) {
        const int ids[4] = {1, 3, 1, 0};
        return g.gather_rows(in[0], ids);
      },
      {table}, 1e-5, 1e-6, 19);
}

TEST_CASE("backward of sum gives all-ones gradient") {
  std::mt19937_64 rng(3);
  auto w = random_tensor({3, 2}, rng);
  Graph g;
  auto loss = g.sum_all(w);
  w->zero_grad();
  g.backward(loss);
  for (double gv : w->grad) CHECK(gv == 1.0);
}

TEST_CASE("backward of zero-scaled function gives zero gradient") {
  std::mt19937_64 rng(4);
  auto w = random_tensor({4}, rng);
  Graph g;
  auto loss = g.mul_scalar(g.sum_all(g.tanh(w)), 0.0);
  w->zero_grad();
  g.backward(loss);
  for (double gv : w->grad) CHECK(gv == 0.0);
}

TEST_CASE("backward rejects empty graph and non-scalar loss") {
  Graph g;
  auto t = make_tensor({2}, {1.0, 2.0});
  CHECK_THROWS_AS(g.backward(t), Error);

  Graph g2;
  auto y = g2.tanh(t);
  CHECK_THROWS_AS(g2.backward(y), Error);
}

TEST_CASE("two-layer tanh MLP gradients match finite differences everywhere") {
  std::mt19937_64 rng(55);
  auto x = random_tensor({1, 4}, rng, 1.0);
  auto w1 = random_tensor({4, 5}, rng, 0.5);
  auto b1 = random_tensor({5}, rng, 0.5);
  auto w2 = random_tensor({5, 3}, rng, 0.5);
  auto b2 = random_tensor({3}, rng, 0.5);

  const auto forward = [&](Graph& g) {
    auto h = g.tanh(g.add_rowvec(g.matmul(x, w1), b1));
    auto out = g.tanh(g.add_rowvec(g.matmul(h, w2), b2));
    return g.sum_all(out);
  };

  Graph g;
  auto loss = forward(g);
  std::vector<std::pair<std::string, TensorPtr>> params = {
      {"x", x}, {"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}};
  for (auto& [name, p] : params) p->zero_grad();
  g.backward(loss);

  auto report = finite_diff_check(
      [&]() {
        Graph fresh;
        return forward(fresh)->scalar();
      },
      params, 1e-5, 1e-5);
  INFO(report.to_string());
  CHECK(report.pass);
}

TEST_CASE("gradient accumulation is order independent across siblings") {
  std::mt19937_64 rng(66);
  auto w = random_tensor({3}, rng);

  // Same three consumers added to the loss in two different orders.
  const auto run = [&](bool flipped) {
    Graph g;
    auto a = g.tanh(w);
    auto b = g.sigmoid(w);
    auto c = g.mul(w, w);
    auto sum = flipped ? g.add(g.add(g.sum_all(c), g.sum_all(b)), g.sum_all(a))
                       : g.add(g.add(g.sum_all(a), g.sum_all(b)), g.sum_all(c));
    w->zero_grad();
    g.backward(sum);
    return w->grad;
  };
  const auto g1 = run(false);
  const auto g2 = run(true);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g1[i] - g2[i]) < 1e-12);
}

TEST_CASE("log rejects non-positive inputs before producing NaN") {
  Graph g;
  auto bad = make_tensor({2}, {1.0, -0.5});
  CHECK_THROWS_AS(g.log(bad), Error);
  auto zero = make_tensor({1}, {0.0});
  CHECK_THROWS_AS(g.log(zero), Error);
}

TEST_CASE("finite_diff_check on a quadratic reports near-zero error") {
  auto w = make_tensor({2}, {1.0, 2.0});
  w->requires_grad = true;
  Graph g;
  auto loss = g.sum_all(g.mul(w, w));
  w->zero_grad();
  g.backward(loss);
  CHECK(w->grad[0] == doctest::Approx(2.0));
  CHECK(w->grad[1] == doctest::Approx(4.0));

  auto report = finite_diff_check(
      [&]() {
        Graph fresh;
        return fresh.sum_all(fresh.mul(w, w))->scalar();
      },
      {{"w", w}}, 1e-5, 1e-8);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("finite_diff_check flags a corrupted backward") {
  auto w = make_tensor({3}, {0.1, -0.4, 0.9});
  Graph g;
  auto loss = g.sum_all(g.tanh(w));
  w->zero_grad();
  g.backward(loss);
  w->grad[1] += 0.5;  // deliberate corruption

  auto report = finite_diff_check(
      [&]() {
        Graph fresh;
        return fresh.sum_all(fresh.tanh(w))->scalar();
      },
      {{"w", w}}, 1e-5, 1e-5);
  CHECK_FALSE(report.pass);
}

TEST_CASE("finite_diff_check rejects a non-deterministic function") {
  auto w = make_tensor({1}, {1.0});
  w->grad = {1.0};
  int calls = 0;
  CHECK_THROWS_AS(finite_diff_check([&]() { return static_cast<double>(++calls); },
                                    {{"w", w}}, 1e-5, 1e-5),
                  Error);
}

TEST_CASE("completed passes leave no non-finite entries") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor({2, 4}, rng);
    auto w = random_tensor({4, 4}, rng);
    Graph g;
    auto y = g.softmax_row(g.tanh(g.matmul(x, w)));
    auto loss = g.sum_all(g.mul(y, y));
    x->zero_grad();
    w->zero_grad();
    g.backward(loss);
    for (double v : y->data) CHECK(std::isfinite(v));
    for (double v : x->grad) CHECK(std::isfinite(v));
    for (double v : w->grad) CHECK(std::isfinite(v));
  }
}
