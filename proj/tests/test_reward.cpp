#include <doctest.h>

#include <cmath>
#include <random>

#include "mmt/error.hpp"
#include "mmt/reward.hpp"

using namespace mmt;

namespace {

using Sentence = std::vector<std::string>;

// Independent brute-force scorer: positional n-gram comparison with explicit
// vector equality and greedy clipping, no hash maps. Mirrors the published
// formula directly.
double oracle_sentence_bleu(const Sentence& cand, const Sentence& ref, int max_order = 4) {
  if (cand.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    const std::size_t cn = cand.size() + 1 >= static_cast<std::size_t>(n)
                               ? cand.size() + 1 - static_cast<std::size_t>(n)
                               : 0;
    const std::size_t rn = ref.size() + 1 >= static_cast<std::size_t>(n)
                               ? ref.size() + 1 - static_cast<std::size_t>(n)
                               : 0;
    std::vector<bool> ref_used(rn, false);
    std::size_t matches = 0;
    for (std::size_t i = 0; i < cn; ++i) {
      for (std::size_t j = 0; j < rn; ++j) {
        if (ref_used[j]) continue;
        bool equal = true;
        for (int k = 0; k < n; ++k) {
          if (cand[i + static_cast<std::size_t>(k)] != ref[j + static_cast<std::size_t>(k)]) {
            equal = false;
            break;
          }
        }
        if (equal) {
          ref_used[j] = true;
          ++matches;
          break;
        }
      }
    }
    const double p = matches == 0 ? 1.0 / static_cast<double>(cn + 1)
                                  : static_cast<double>(matches) / static_cast<double>(cn);
    log_sum += std::log(p);
  }
  const double bp = std::exp(
      std::min(0.0, 1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size())));
  return bp * std::exp(log_sum / max_order);
}

Sentence random_sentence(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", "h"};
  const std::size_t len = min_len + rng() % (max_len - min_len + 1);
  Sentence s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(words[rng() % words.size()]);
  return s;
}

}  // namespace

TEST_CASE("exact match scores one") {
  const Sentence s = {"a", "man", "runs", "fast", "today"};
  CHECK(sentence_bleu(s, s) == doctest::Approx(1.0));
  const Sentence tiny = {"hi"};
  CHECK(sentence_bleu(tiny, tiny) == doctest::Approx(1.0));
}

TEST_CASE("empty candidate scores zero, empty reference is rejected") {
  CHECK(sentence_bleu({}, {"a"}) == 0.0);
  CHECK_THROWS_AS(sentence_bleu({"a"}, {}), Error);
}

TEST_CASE("zero-overlap candidate equals the smoothed floor formula") {
  const Sentence cand = {"x", "y", "z"};
  const Sentence ref = {"a", "b", "c"};
  // Direct evaluation: every order has zero matches, so each precision is
  // 1/(count+1) with counts 3,2,1,0 and the brevity penalty is 1.
  const double expected =
      std::exp((std::log(1.0 / 4.0) + std::log(1.0 / 3.0) + std::log(1.0 / 2.0) + std::log(1.0)) /
               4.0);
  CHECK(sentence_bleu(cand, ref) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(sentence_bleu(cand, ref) == doctest::Approx(oracle_sentence_bleu(cand, ref)).epsilon(1e-12));
}

TEST_CASE("pinned regression value for a b c vs a b c d") {
  // exp(-1/3): all precisions are exact or smoothed to 1, only BP bites.
  const double pinned = 0.71653131057378927;
  CHECK(sentence_bleu({"a", "b", "c"}, {"a", "b", "c", "d"}) ==
        doctest::Approx(pinned).epsilon(1e-12));
}

TEST_CASE("sentence scorer matches the brute-force oracle on random pairs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto cand = random_sentence(rng, 1, 12);
    const auto ref = random_sentence(rng, 1, 12);
    const double mine = sentence_bleu(cand, ref);
    const double oracle = oracle_sentence_bleu(cand, ref);
    CHECK(std::abs(mine - oracle) <= 1e-12);
  }
}

TEST_CASE("score stays within the unit interval and detects non-identity") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto cand = random_sentence(rng, 1, 10);
    const auto ref = random_sentence(rng, 1, 10);
    const double v = sentence_bleu(cand, ref);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (cand != ref) CHECK(v < 1.0);
  }
}

TEST_CASE("appending a wrong token to an exact match strictly lowers the score") {
  const Sentence ref = {"the", "cat", "sat", "down", "now"};
  Sentence cand = ref;
  const double exact = sentence_bleu(cand, ref);
  cand.push_back("wrong");
  CHECK(sentence_bleu(cand, ref) < exact);

  const Sentence short_ref = {"hi", "there"};
  Sentence short_cand = short_ref;
  short_cand.push_back("oops");
  CHECK(sentence_bleu(short_cand, short_ref) < sentence_bleu(short_ref, short_ref));
}

TEST_CASE("reward_batch maps sentence_bleu elementwise") {
  std::mt19937_64 rng(7);
  std::vector<Sentence> cands, refs;
  for (int i = 0; i < 40; ++i) {
    cands.push_back(random_sentence(rng, 1, 8));
    refs.push_back(random_sentence(rng, 1, 8));
  }
  const auto rewards = reward_batch(cands, refs);
  REQUIRE(rewards.size() == cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    CHECK(rewards[i] == sentence_bleu(cands[i], refs[i]));
  }

  const Sentence same = {"x", "y"};
  const auto ones = reward_batch({same, same}, {same, same});
  for (double r : ones) CHECK(r == doctest::Approx(1.0));

  CHECK(reward_batch({}, {}).empty());
  CHECK_THROWS_AS(reward_batch({same}, {}), Error);
}

TEST_CASE("corpus BLEU is one on exact corpora") {
  const std::vector<Sentence> corpus = {{"a", "b", "c", "d", "e"}, {"f", "g", "h", "i"}};
  CHECK(corpus_bleu(corpus, corpus) == doctest::Approx(1.0));
}

TEST_CASE("single-sentence corpus equals the unsmoothed sentence computation") {
  const Sentence cand = {"a", "b", "c", "d", "e"};
  const Sentence ref = {"a", "b", "c", "d", "x"};
  // Direct formula: p1=4/5, p2=3/4, p3=2/3, p4=1/2, BP=1.
  const double direct = std::exp(
      (std::log(4.0 / 5.0) + std::log(3.0 / 4.0) + std::log(2.0 / 3.0) + std::log(1.0 / 2.0)) /
      4.0);
  CHECK(corpus_bleu({cand}, {ref}) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("corpus BLEU pools counts rather than averaging sentence scores") {
  // One perfect long sentence and one hopeless short one: pooling keeps the
  // corpus score well above the mean of the two sentence scores.
  const Sentence good = {"a", "b", "c", "d", "e", "f", "g", "h"};
  const Sentence bad_cand = {"x"};
  const Sentence bad_ref = {"q"};
  const double pooled = corpus_bleu({good, bad_cand}, {good, bad_ref});
  const double mean_sentence =
      0.5 * (sentence_bleu(good, good) + sentence_bleu(bad_cand, bad_ref));
  CHECK(pooled != doctest::Approx(mean_sentence).epsilon(1e-6));
  CHECK(corpus_bleu({good}, {good}) == doctest::Approx(1.0));
}

TEST_CASE("reward ignores vocabulary ids entirely") {
  // Same surface strings, scored as strings; renaming tokens consistently on
  // both sides cannot change the value.
  const Sentence cand = {"t1", "t2", "t3"};
  const Sentence ref = {"t1", "t3", "t2"};
  const Sentence cand_renamed = {"u1", "u2", "u3"};
  const Sentence ref_renamed = {"u1", "u3", "u2"};
  CHECK(sentence_bleu(cand, ref) == doctest::Approx(sentence_bleu(cand_renamed, ref_renamed)));
}
