#include <benchmark/benchmark.h>

#include <random>

#include "mmt/tensor.hpp"

namespace {

using namespace mmt;

TensorPtr random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  auto t = make_tensor(std::move(shape));
  for (double& v : t->data) v = uniform01(rng) * 2.0 - 1.0;
  return t;
}

void BM_MatmulForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = random_tensor({1, n}, rng);
  const auto b = random_tensor({n, 4 * n}, rng);
  for (auto _ : state) {
    Graph g;
    benchmark::DoNotOptimize(g.matmul(a, b));
  }
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(128)->Arg(256);

void BM_LstmStepGraph(benchmark::State& state) {
  // One decoder-style LSTM step: concat, matmul, bias, gates, state update.
  const auto h = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const auto x = random_tensor({1, 2 * h}, rng);
  const auto hp = random_tensor({1, h}, rng);
  const auto cp = random_tensor({1, h}, rng);
  const auto w = random_tensor({3 * h, 4 * h}, rng);
  const auto b = random_tensor({4 * h}, rng);
  for (auto _ : state) {
    Graph g;
    auto lin = g.add_rowvec(g.matmul(concat_cols2(g, x, hp), w), b);
    auto i = g.sigmoid(g.slice_cols(lin, 0, h));
    auto f = g.sigmoid(g.slice_cols(lin, h, h));
    auto o = g.sigmoid(g.slice_cols(lin, 2 * h, h));
    auto cand = g.tanh(g.slice_cols(lin, 3 * h, h));
    auto c = g.add(g.mul(f, cp), g.mul(i, cand));
    benchmark::DoNotOptimize(g.mul(o, g.tanh(c)));
  }
}
BENCHMARK(BM_LstmStepGraph)->Arg(64)->Arg(128);

void BM_ForwardBackwardMlp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  const auto x = random_tensor({1, n}, rng);
  const auto w1 = random_tensor({n, n}, rng);
  const auto w2 = random_tensor({n, n}, rng);
  for (auto _ : state) {
    Graph g;
    auto loss = g.sum_all(g.tanh(g.matmul(g.tanh(g.matmul(x, w1)), w2)));
    w1->zero_grad();
    w2->zero_grad();
    x->zero_grad();
    g.backward(loss);
    benchmark::DoNotOptimize(w1->grad.data());
  }
}
BENCHMARK(BM_ForwardBackwardMlp)->Arg(64)->Arg(128);

}  // namespace
