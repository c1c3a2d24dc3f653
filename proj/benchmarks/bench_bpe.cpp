#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "mmt/bpe.hpp"
#include "mmt/reward.hpp"

namespace {

using namespace mmt;

std::vector<std::string> corpus_lines() {
  static const char* words[] = {"lower", "lowest", "newer", "wider",  "river", "house",
                                "field", "view",   "note",  "things", "said",  "near"};
  std::mt19937_64 rng(7);
  std::vector<std::string> lines;
  for (int i = 0; i < 400; ++i) {
    std::ostringstream line;
    for (int k = 0, len = 4 + static_cast<int>(rng() % 6); k < len; ++k) {
      line << (k ? " " : "") << words[rng() % 12];
    }
    lines.push_back(line.str());
  }
  return lines;
}

void BM_LearnBpe(benchmark::State& state) {
  const auto lines = corpus_lines();
  for (auto _ : state) {
    benchmark::DoNotOptimize(learn_bpe(lines, static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_LearnBpe)->Arg(20)->Arg(60);

void BM_ApplyBpeCorpus(benchmark::State& state) {
  const auto lines = corpus_lines();
  const auto table = learn_bpe(lines, 40);
  std::vector<std::vector<std::string>> tokenized;
  for (const auto& line : lines) {
    std::vector<std::string> words;
    std::istringstream ls(line);
    std::string w;
    while (ls >> w) words.push_back(w);
    tokenized.push_back(std::move(words));
  }
  for (auto _ : state) {
    for (const auto& words : tokenized) benchmark::DoNotOptimize(apply_bpe(table, words));
  }
}
BENCHMARK(BM_ApplyBpeCorpus);

void BM_SentenceBleu(benchmark::State& state) {
  static const char* words[] = {"a", "b", "c", "d", "e", "f"};
  std::mt19937_64 rng(11);
  std::vector<std::vector<std::string>> cands, refs;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> c, r;
    for (int k = 0, len = 3 + static_cast<int>(rng() % 10); k < len; ++k) c.push_back(words[rng() % 6]);
    for (int k = 0, len = 3 + static_cast<int>(rng() % 10); k < len; ++k) r.push_back(words[rng() % 6]);
    cands.push_back(std::move(c));
    refs.push_back(std::move(r));
  }
  for (auto _ : state) {
    for (std::size_t i = 0; i < cands.size(); ++i) {
      benchmark::DoNotOptimize(sentence_bleu(cands[i], refs[i]));
    }
  }
}
BENCHMARK(BM_SentenceBleu);

}  // namespace
