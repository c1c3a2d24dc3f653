#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mmt/bpe.hpp"
#include "mmt/model.hpp"
#include "mmt/reward.hpp"
#include "mmt/vocab.hpp"

namespace mmt {

// Decoding-time ensemble: one or more loaded models sharing a vocabulary,
// plus beam size, length-reward weight and the decode length cap.
struct EnsembleSpec {
  std::vector<std::shared_ptr<const Model>> members;
  std::size_t beam_size = 1;
  double length_reward = 0.0;  // lambda, added per emitted token
  std::size_t max_len = 100;

  static EnsembleSpec load(const std::vector<std::string>& checkpoint_paths);

  void validate() const;
  std::size_t vocab_size() const;
  std::uint64_t vocab_hash() const;
  bool needs_image() const;  // true when any member is multimodal
};

// Beam-search hypothesis. tokens includes the terminal EOS once finished;
// score = sum of log mean-probabilities + lambda per token.
struct Hypothesis {
  std::vector<int> tokens;
  double score = 0.0;
  std::vector<DecoderState> states;  // one per ensemble member
  bool finished = false;

  std::vector<int> content_tokens() const;  // tokens without the terminal EOS
};

// Per-member encoder outputs for one source sentence.
struct EncodedSource {
  std::vector<EncoderOutput> members;
};

struct EnsembleStep {
  std::vector<double> distribution;  // [V], arithmetic mean of member softmaxes
  std::vector<DecoderState> states;
};

EncodedSource encode_source(Graph& g, const EnsembleSpec& spec, std::span<const int> src,
                            const std::vector<double>* image = nullptr);
std::vector<DecoderState> init_ensemble_decoder(Graph& g, const EnsembleSpec& spec,
                                                const EncodedSource& enc,
                                                const std::vector<double>* image = nullptr);

// Advances every member one step and averages their output distributions.
EnsembleStep ensemble_step(Graph& g, const EnsembleSpec& spec, const EncodedSource& enc,
                           const std::vector<DecoderState>& states, int prev_token);

// Argmax decoding over the averaged distribution (beam ignored). Returns
// content tokens; deterministic, ties resolved to the lowest token id.
std::vector<int> greedy_decode(const EnsembleSpec& spec, std::span<const int> src,
                               const std::vector<double>* image = nullptr);

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> kbest;  // at most beam_size entries, best first
  bool degenerate = false;        // no hypothesis finished within max_len
};

BeamResult beam_decode(const EnsembleSpec& spec, std::span<const int> src,
                       const std::vector<double>* image = nullptr);

struct TranslateReport {
  std::size_t sentences = 0;
  std::size_t empty_sources = 0;
  std::size_t truncated_sources = 0;
  bool has_bleu = false;
  double corpus_bleu_score = 0.0;
  double mean_sentence_bleu = 0.0;
};

// Translates a raw text file line by line (preprocess -> BPE -> decode ->
// un-BPE), writing one detokenized sentence per line. feature_path and
// reference_path may be empty.
TranslateReport translate_corpus(const EnsembleSpec& spec, const MergeTable& bpe,
                                 const Vocabulary& vocab, const std::string& source_path,
                                 const std::string& feature_path, const std::string& output_path,
                                 const std::string& reference_path);

}  // namespace mmt
