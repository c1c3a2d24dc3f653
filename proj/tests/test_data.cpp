#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mmt/data.hpp"
#include "mmt/error.hpp"

using namespace mmt;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mmt_data_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
};

// Tiny fixture: joint BPE + vocab over a handful of sentences.
struct Fixture {
  MergeTable bpe;
  Vocabulary vocab;
  Fixture() {
    const std::vector<std::string> corpus = {
        "a man runs", "a man walks", "the dog runs", "the dog walks", "a man and the dog",
    };
    bpe = learn_bpe(corpus, 40);
    std::vector<std::vector<std::string>> encoded;
    for (const auto& s : corpus) {
      std::vector<std::string> words;
      std::string w;
      for (char c : s) {
        if (c == ' ') {
          words.push_back(w);
          w.clear();
        } else {
          w.push_back(c);
        }
      }
      words.push_back(w);
      encoded.push_back(apply_bpe(bpe, words));
    }
    vocab = Vocabulary::build(encoded, 1000);
  }
};

}  // namespace

TEST_CASE("preprocess lowercases, splits punctuation and collapses whitespace") {
  CHECK(preprocess("A man runs.") == std::vector<std::string>{"a", "man", "runs", "."});
  CHECK(preprocess("  Hello,   World!! ") ==
        std::vector<std::string>{"hello", ",", "world", "!", "!"});
  CHECK(preprocess("") == std::vector<std::string>{});
  CHECK(preprocess(" \t ") == std::vector<std::string>{});
}

TEST_CASE("preprocess is idempotent") {
  const std::vector<std::string> raws = {
      "A man runs.", "don't stop", "«Guten Tag», sagte sie…", "Już-teraz; OK?",
      "the “quoted” one — and more",
  };
  for (const auto& raw : raws) {
    const auto once = preprocess_to_line(raw);
    CHECK(preprocess_to_line(once) == once);
  }
}

TEST_CASE("quote styles normalize identically") {
  const auto plain = preprocess("he said \"go\" now");
  CHECK(preprocess("he said “go” now") == plain);
  CHECK(preprocess("he said «go» now") == plain);
  CHECK(preprocess("he said „go” now") == plain);
  const auto apostrophe = preprocess("it's done");
  CHECK(preprocess("it’s done") == apostrophe);
  CHECK(preprocess("a - b") == preprocess("a – b"));
}

TEST_CASE("preprocess lowercases accented European characters") {
  CHECK(preprocess("Äpfel UND Birnen") == std::vector<std::string>{"äpfel", "und", "birnen"});
  CHECK(preprocess("ČESKÝ Krumlov") == std::vector<std::string>{"český", "krumlov"});
  CHECK(preprocess("École Déjà") == std::vector<std::string>{"école", "déjà"});
}

TEST_CASE("corpus loading drops empty pairs and counts them") {
  Fixture fx;
  TempDir dir;
  const auto src = dir.file("src.txt", "A man runs\n\nThe dog walks\n");
  const auto tgt = dir.file("tgt.txt", "a man runs\nx\nthe dog walks\n");
  LoadStats stats;
  const auto corpus = load_parallel_corpus(src, tgt, fx.bpe, fx.vocab, {}, &stats);
  CHECK(corpus.size() == 2);
  CHECK(stats.dropped_empty == 1);
  CHECK(corpus.vocab_hash == fx.vocab.content_hash());
}

TEST_CASE("corpus loading rejects misaligned files") {
  Fixture fx;
  TempDir dir;
  const auto src = dir.file("src.txt", "a man\n");
  const auto tgt = dir.file("tgt.txt", "a man\nthe dog\n");
  CHECK_THROWS_AS(load_parallel_corpus(src, tgt, fx.bpe, fx.vocab), Error);
}

TEST_CASE("over-long pairs drop in training mode and truncate otherwise") {
  Fixture fx;
  TempDir dir;
  const auto src = dir.file("src.txt", "a man runs and walks and runs and walks\na man\n");
  const auto tgt = dir.file("tgt.txt", "a man runs and walks and runs and walks\na man\n");
  LoadOptions drop_opts;
  drop_opts.max_len = 6;
  LoadStats stats;
  const auto dropped = load_parallel_corpus(src, tgt, fx.bpe, fx.vocab, drop_opts, &stats);
  CHECK(dropped.size() == 1);
  CHECK(stats.dropped_long == 1);

  LoadOptions trunc_opts;
  trunc_opts.max_len = 6;
  trunc_opts.drop_long = false;
  const auto truncated = load_parallel_corpus(src, tgt, fx.bpe, fx.vocab, trunc_opts, &stats);
  CHECK(truncated.size() == 2);
  CHECK(stats.truncated == 1);
  CHECK(truncated.source[0].size() == 6);
}

TEST_CASE("batching partitions the corpus exactly with the final partial batch kept") {
  ParallelCorpus corpus;
  for (int i = 0; i < 101; ++i) {
    corpus.source.push_back({4, 5, 4 + i % 3});
    corpus.target.push_back({5, 4});
    corpus.source_lang.push_back("en");
  }
  const auto batches = make_batches(corpus, 50, 11, false);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 50);
  CHECK(batches[1].size() == 50);
  CHECK(batches[2].size() == 1);

  // Multiset equality over source rows.
  std::map<std::vector<int>, int> expected, got;
  for (const auto& s : corpus.source) ++expected[s];
  for (const auto& b : batches) {
    for (std::size_t r = 0; r < b.size(); ++r) {
      std::vector<int> row(b.src[r].begin(), b.src[r].begin() + b.src_len[r]);
      ++got[row];
    }
  }
  CHECK(expected == got);
}

TEST_CASE("different epoch seeds reorder but preserve the multiset") {
  ParallelCorpus corpus;
  for (int i = 0; i < 64; ++i) {
    corpus.source.push_back({4 + i % 7, 5});
    corpus.target.push_back({4});
    corpus.source_lang.push_back("en");
  }
  const auto a = make_batches(corpus, 8, 1, false);
  const auto b = make_batches(corpus, 8, 2, false);
  std::vector<std::vector<int>> flat_a, flat_b;
  for (const auto& batch : a) {
    for (std::size_t r = 0; r < batch.size(); ++r) flat_a.push_back(batch.src[r]);
  }
  for (const auto& batch : b) {
    for (std::size_t r = 0; r < batch.size(); ++r) flat_b.push_back(batch.src[r]);
  }
  CHECK(flat_a != flat_b);  // astronomically unlikely to coincide
  auto sa = flat_a, sb = flat_b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  CHECK(sa == sb);
}

TEST_CASE("batch target rows carry BOS, EOS and an exact mask") {
  ParallelCorpus corpus;
  corpus.source.push_back({7, 8});
  corpus.target.push_back({9, 10, 11});
  corpus.source_lang.push_back("en");
  corpus.source.push_back({7});
  corpus.target.push_back({9});
  corpus.source_lang.push_back("en");
  const auto batches = make_batches(corpus, 2, 3, false);
  REQUIRE(batches.size() == 1);
  const auto& b = batches[0];
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(b.tgt[r][0] == Vocabulary::kBos);
    std::size_t eos_pos = 0;
    for (std::size_t j = 0; j < b.tgt[r].size(); ++j) {
      if (b.tgt[r][j] == Vocabulary::kEos) eos_pos = j;
    }
    CHECK(eos_pos > 0);
    for (std::size_t j = 0; j < b.tgt[r].size(); ++j) {
      const bool is_real = j >= 1 && j <= eos_pos;
      CHECK(static_cast<bool>(b.tgt_mask[r][j]) == is_real);
      if (j > eos_pos) CHECK(b.tgt[r][j] == Vocabulary::kPad);
    }
  }
}

TEST_CASE("shuffle_mix concatenates, shuffles and keeps provenance") {
  const auto make = [](const std::string& lang, int base, std::size_t n) {
    ParallelCorpus c;
    for (std::size_t i = 0; i < n; ++i) {
      c.source.push_back({base + static_cast<int>(i % 5), 4});
      c.target.push_back({4, 5});
      c.source_lang.push_back(lang);
    }
    c.vocab_hash = 42;
    return c;
  };
  const auto mixed = shuffle_mix({make("en", 4, 30), make("fr", 9, 20), make("de", 14, 10)}, 5);
  CHECK(mixed.size() == 60);

  std::map<std::string, std::size_t> per_lang;
  for (const auto& lang : mixed.source_lang) ++per_lang[lang];
  CHECK(per_lang["en"] == 30);
  CHECK(per_lang["fr"] == 20);
  CHECK(per_lang["de"] == 10);

  // Single corpus in: a permutation of the same pairs.
  const auto single = make("en", 4, 12);
  const auto shuffled = shuffle_mix({single}, 9);
  CHECK(shuffled.size() == single.size());
  auto a = single.source, b = shuffled.source;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);

  auto bad = make("fr", 9, 3);
  bad.vocab_hash = 43;
  CHECK_THROWS_AS(shuffle_mix({single, bad}, 1), Error);
}

TEST_CASE("feature files round trip exactly and validate their header") {
  TempDir dir;
  const std::vector<std::vector<double>> rows = {
      {0.1234567890123456789, -7.25, 1e-17, 3.0},
      {2.5, 0.0, -0.0000001, 123456.789},
  };
  const auto path = (dir.path / "feat.txt").string();
  save_features(path, rows);
  const auto loaded = load_features(path, 2);
  REQUIRE(loaded.size() == 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) CHECK(loaded[i][j] == rows[i][j]);
  }

  const auto small = dir.file("small.txt", "dim 4 count 2\n1 2 3 4\n");
  CHECK_THROWS_AS(load_features(small), Error);
  const auto wrong_count = dir.file("wc.txt", "dim 2 count 1\n1 2\n");
  try {
    load_features(wrong_count, 5);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("expected 5") != std::string::npos);
    CHECK(std::string(e.what()).find("found 1") != std::string::npos);
  }
  const auto bad_header = dir.file("bh.txt", "size 2 n 1\n1 2\n");
  CHECK_THROWS_AS(load_features(bad_header), Error);
}

TEST_CASE("feature rows follow their sentence through shuffling and batching") {
  ParallelCorpus corpus;
  for (int i = 0; i < 40; ++i) {
    corpus.source.push_back({4 + i});
    corpus.target.push_back({4 + i, 5});
    corpus.source_lang.push_back("en");
  }
  std::vector<std::vector<double>> feats;
  for (int i = 0; i < 40; ++i) feats.push_back({static_cast<double>(4 + i), 1.0});
  attach_features(corpus, feats);

  const auto mixed = shuffle_mix({corpus}, 17);
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    CHECK(mixed.features[i][0] == static_cast<double>(mixed.source[i][0]));
  }
  const auto batches = make_batches(mixed, 7, 3, true);
  for (const auto& b : batches) {
    for (std::size_t r = 0; r < b.size(); ++r) {
      CHECK(b.features[r][0] == static_cast<double>(b.src[r][0]));
    }
  }
}
