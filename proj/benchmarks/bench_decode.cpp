#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "mmt/decode.hpp"

namespace {

using namespace mmt;

std::shared_ptr<const Model> bench_model(std::uint64_t seed, std::size_t hidden) {
  ModelConfig c;
  c.vocab_size = 40;
  c.embed_dim = 32;
  c.hidden_dim = hidden;
  c.encoder_layers = 2;
  c.dropout_rate = 0.0;
  c.seed = seed;
  return std::make_shared<const Model>(Model::create(c, 1));
}

std::vector<int> bench_source(std::size_t len) {
  std::vector<int> src;
  std::mt19937_64 rng(5);
  for (std::size_t i = 0; i < len; ++i) src.push_back(4 + static_cast<int>(rng() % 30));
  return src;
}

void BM_GreedyDecode(benchmark::State& state) {
  EnsembleSpec spec;
  spec.members.push_back(bench_model(1, static_cast<std::size_t>(state.range(0))));
  spec.max_len = 12;
  const auto src = bench_source(8);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_decode(spec, src));
}
BENCHMARK(BM_GreedyDecode)->Arg(64)->Arg(128);

void BM_BeamDecode(benchmark::State& state) {
  EnsembleSpec spec;
  spec.members.push_back(bench_model(1, 64));
  spec.max_len = 12;
  spec.beam_size = static_cast<std::size_t>(state.range(0));
  const auto src = bench_source(8);
  for (auto _ : state) benchmark::DoNotOptimize(beam_decode(spec, src));
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(5)->Arg(10);

void BM_EnsembleGreedy(benchmark::State& state) {
  EnsembleSpec spec;
  for (std::uint64_t seed = 1; seed <= static_cast<std::uint64_t>(state.range(0)); ++seed) {
    spec.members.push_back(bench_model(seed, 64));
  }
  spec.max_len = 12;
  const auto src = bench_source(8);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_decode(spec, src));
}
BENCHMARK(BM_EnsembleGreedy)->Arg(1)->Arg(4);

}  // namespace
