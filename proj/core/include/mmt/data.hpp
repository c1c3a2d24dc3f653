#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mmt/bpe.hpp"
#include "mmt/vocab.hpp"

namespace mmt {

// Lowercases, normalizes quotes/dashes, splits punctuation into standalone
// tokens and collapses whitespace. Idempotent; an empty result means the
// caller should drop the sentence.
std::vector<std::string> preprocess(std::string_view raw);
std::string preprocess_to_line(std::string_view raw);

// Aligned parallel sentences as post-BPE id sequences, optionally with one
// image-feature vector per pair. Immutable after loading.
struct ParallelCorpus {
  std::vector<std::vector<int>> source;
  std::vector<std::vector<int>> target;
  std::vector<std::vector<double>> features;  // empty, or one row per pair
  std::vector<std::string> source_lang;       // per-pair provenance tag
  std::size_t feature_dim = 0;
  std::uint64_t vocab_hash = 0;

  std::size_t size() const { return source.size(); }
  bool has_features() const { return !features.empty(); }
  void validate() const;
};

struct LoadStats {
  std::size_t dropped_empty = 0;
  std::size_t dropped_long = 0;
  std::size_t truncated = 0;
};

struct LoadOptions {
  std::size_t max_len = 100;  // post-BPE cap per side
  bool drop_long = true;      // true: drop over-long pairs (training);
                              // false: truncate (decoding input)
  std::string source_lang;
};

// Reads line-aligned UTF-8 files, preprocesses, applies BPE and encodes.
ParallelCorpus load_parallel_corpus(const std::string& source_path, const std::string& target_path,
                                    const MergeTable& bpe, const Vocabulary& vocab,
                                    const LoadOptions& opts = {}, LoadStats* stats = nullptr);

// Attaches aligned image features to an already loaded corpus.
void attach_features(ParallelCorpus& corpus, std::vector<std::vector<double>> features);

// PAD-padded id matrices. Target rows are BOS y1..yn EOS PAD...; the mask is
// 1 exactly on the positions the decoder must predict (y1..yn and EOS).
struct Batch {
  std::vector<std::vector<int>> src;
  std::vector<std::vector<int>> tgt;
  std::vector<std::size_t> src_len;
  std::vector<std::vector<std::uint8_t>> tgt_mask;
  std::vector<std::vector<double>> features;

  std::size_t size() const { return src.size(); }
};

// Seeded shuffle into batches; every pair appears exactly once, the final
// partial batch is kept. sort_within length-sorts pools of 20*batch_size to
// reduce padding (off for bit-reproducible runs).
std::vector<Batch> make_batches(const ParallelCorpus& corpus, std::size_t batch_size,
                                std::uint64_t seed, bool sort_within);

// Concatenates corpora that share a target language and vocabulary, then
// shuffles the union; feature presence must agree across members.
ParallelCorpus shuffle_mix(const std::vector<ParallelCorpus>& corpora, std::uint64_t seed);

// Image-feature file: header "dim D count N", then N lines of D decimals.
std::vector<std::vector<double>> load_features(const std::string& path,
                                               std::size_t expected_count);
std::vector<std::vector<double>> load_features(const std::string& path);
void save_features(const std::string& path, const std::vector<std::vector<double>>& rows);

// Deterministic in-place Fisher-Yates driven by the given generator.
void seeded_shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng);

}  // namespace mmt
