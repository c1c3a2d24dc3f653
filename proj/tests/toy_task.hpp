#pragma once

// Synthetic copy-style translation tasks for training and decoding tests:
// target = source, with optional source-side word corruption ("noisy copy").

#include <random>
#include <string>
#include <vector>

#include "mmt/bpe.hpp"
#include "mmt/data.hpp"
#include "mmt/tensor.hpp"
#include "mmt/vocab.hpp"

namespace mmt::testing {

struct ToyTask {
  MergeTable bpe;
  Vocabulary vocab;
  ParallelCorpus train;
  ParallelCorpus val;
  std::vector<std::string> word_types;
};

inline std::vector<std::string> make_word_types(std::size_t count, std::mt19937_64& rng) {
  static const char* consonants = "bdgklmnprst";
  static const char* vowels = "aeiou";
  std::vector<std::string> words;
  std::size_t guard = 0;
  while (words.size() < count && guard++ < count * 100) {
    std::string w;
    const std::size_t syllables = 1 + rng() % 2;
    for (std::size_t s = 0; s < syllables; ++s) {
      w.push_back(consonants[rng() % 11]);
      w.push_back(vowels[rng() % 5]);
    }
    if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
  }
  return words;
}

struct ToyTaskOptions {
  std::size_t n_train = 60;
  std::size_t n_val = 20;
  std::uint64_t seed = 1234;
  double source_noise = 0.0;  // probability of corrupting each source word
  std::size_t n_word_types = 12;
  std::size_t min_len = 3;
  std::size_t max_len = 7;
  std::size_t num_merges = 30;
  std::size_t vocab_cap = 4000;
};

inline ToyTask make_copy_task(const ToyTaskOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  ToyTask task;
  task.word_types = make_word_types(opts.n_word_types, rng);

  const auto make_pairs = [&](std::size_t n) {
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t len = opts.min_len + rng() % (opts.max_len - opts.min_len + 1);
      std::vector<std::string> target;
      for (std::size_t k = 0; k < len; ++k) {
        target.push_back(task.word_types[rng() % task.word_types.size()]);
      }
      std::vector<std::string> source = target;
      for (auto& w : source) {
        if (opts.source_noise > 0.0 && uniform01(rng) < opts.source_noise) {
          w = task.word_types[rng() % task.word_types.size()];
        }
      }
      pairs.emplace_back(std::move(source), std::move(target));
    }
    return pairs;
  };
  const auto train_pairs = make_pairs(opts.n_train);
  const auto val_pairs = make_pairs(opts.n_val);

  std::vector<std::string> joint_text;
  for (const auto& [s, t] : train_pairs) {
    std::string line;
    for (const auto& w : s) line += w + " ";
    joint_text.push_back(line);
    line.clear();
    for (const auto& w : t) line += w + " ";
    joint_text.push_back(line);
  }
  task.bpe = learn_bpe(joint_text, opts.num_merges);

  std::vector<std::vector<std::string>> encoded;
  for (const auto& line : joint_text) {
    std::vector<std::string> words;
    std::string w;
    for (char c : line) {
      if (c == ' ') {
        if (!w.empty()) words.push_back(w);
        w.clear();
      } else {
        w.push_back(c);
      }
    }
    encoded.push_back(apply_bpe(task.bpe, words));
  }
  task.vocab = Vocabulary::build(encoded, opts.vocab_cap);

  const auto to_corpus = [&](const auto& pairs) {
    ParallelCorpus corpus;
    corpus.vocab_hash = task.vocab.content_hash();
    for (const auto& [s, t] : pairs) {
      corpus.source.push_back(task.vocab.encode(apply_bpe(task.bpe, s)));
      corpus.target.push_back(task.vocab.encode(apply_bpe(task.bpe, t)));
      corpus.source_lang.push_back("toy");
    }
    return corpus;
  };
  task.train = to_corpus(train_pairs);
  task.val = to_corpus(val_pairs);
  return task;
}

}  // namespace mmt::testing
