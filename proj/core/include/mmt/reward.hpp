#pragma once

#include <string>
#include <vector>

namespace mmt {

// Sentence-level reward configuration. length_reward is the decode-time score
// bonus weight (lambda); it rides along here as configuration but is never
// part of the reward value itself.
struct RewardSpec {
  std::string metric = "sentence-bleu";
  int max_order = 4;
  // Add-one smoothing applied only to orders with zero matches; unsmoothed
  // 4-gram precision is almost always zero on short samples and would kill
  // the training signal.
  bool smooth_zero_orders = true;
  double length_reward = 0.0;

  void validate() const;
};

// Smoothed sentence BLEU in [0, 1] over surface word tokens. Exact match
// scores 1; an empty candidate scores 0 by convention.
double sentence_bleu(const std::vector<std::string>& candidate,
                     const std::vector<std::string>& reference, const RewardSpec& spec = {});

// Elementwise sentence_bleu over aligned candidate/reference lists.
std::vector<double> reward_batch(const std::vector<std::vector<std::string>>& candidates,
                                 const std::vector<std::vector<std::string>>& references,
                                 const RewardSpec& spec = {});

// Corpus-level BLEU: pooled n-gram counts and corpus brevity penalty, no
// smoothing (evaluation metric, not a reward).
double corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::string>>& references, int max_order = 4);

}  // namespace mmt
