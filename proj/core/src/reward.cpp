#include "mmt/reward.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mmt/error.hpp"

namespace mmt {

namespace {

// n-gram key: tokens joined on a separator that cannot occur inside them.
std::string ngram_key(const std::vector<std::string>& tokens, std::size_t start, int n) {
  std::string key;
  for (int k = 0; k < n; ++k) {
    if (k) key.push_back('\x1f');
    key += tokens[start + static_cast<std::size_t>(k)];
  }
  return key;
}

// Clipped n-gram matches and candidate n-gram count for one order.
std::pair<std::size_t, std::size_t> order_counts(const std::vector<std::string>& cand,
                                                 const std::vector<std::string>& ref, int n) {
  if (cand.size() < static_cast<std::size_t>(n)) return {0, 0};
  std::unordered_map<std::string, std::size_t> ref_counts;
  if (ref.size() >= static_cast<std::size_t>(n)) {
    for (std::size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[ngram_key(ref, i, n)];
  }
  std::unordered_map<std::string, std::size_t> cand_counts;
  std::size_t total = 0;
  for (std::size_t i = 0; i + n <= cand.size(); ++i) {
    ++cand_counts[ngram_key(cand, i, n)];
    ++total;
  }
  std::size_t matches = 0;
  for (const auto& [key, count] : cand_counts) {
    auto it = ref_counts.find(key);
    if (it != ref_counts.end()) matches += std::min(count, it->second);
  }
  return {matches, total};
}

}  // namespace

void RewardSpec::validate() const {
  if (max_order < 1) fail("config", "RewardSpec: max_order must be >= 1");
  if (!std::isfinite(length_reward) || length_reward < 0.0) {
    fail("config", "RewardSpec: length_reward must be finite and >= 0");
  }
  if (metric != "sentence-bleu") fail("config", "RewardSpec: unknown metric '" + metric + "'");
}

double sentence_bleu(const std::vector<std::string>& candidate,
                     const std::vector<std::string>& reference, const RewardSpec& spec) {
  spec.validate();
  if (reference.empty()) fail("data", "sentence_bleu: empty reference");
  if (candidate.empty()) return 0.0;

  double log_precision_sum = 0.0;
  for (int n = 1; n <= spec.max_order; ++n) {
    const auto [matches, total] = order_counts(candidate, reference, n);
    double p;
    if (matches == 0 && spec.smooth_zero_orders) {
      p = 1.0 / static_cast<double>(total + 1);
    } else if (matches == 0) {
      return 0.0;
    } else {
      p = static_cast<double>(matches) / static_cast<double>(total);
    }
    log_precision_sum += std::log(p);
  }
  const double bp =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(reference.size()) /
                                       static_cast<double>(candidate.size())));
  return bp * std::exp(log_precision_sum / spec.max_order);
}

std::vector<double> reward_batch(const std::vector<std::vector<std::string>>& candidates,
                                 const std::vector<std::vector<std::string>>& references,
                                 const RewardSpec& spec) {
  if (candidates.size() != references.size()) {
    fail("data", "reward_batch: " + std::to_string(candidates.size()) + " candidates vs " +
                     std::to_string(references.size()) + " references");
  }
  std::vector<double> rewards;
  rewards.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    rewards.push_back(sentence_bleu(candidates[i], references[i], spec));
  }
  return rewards;
}

double corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::string>>& references, int max_order) {
  if (candidates.size() != references.size()) {
    fail("data", "corpus_bleu: " + std::to_string(candidates.size()) + " candidates vs " +
                     std::to_string(references.size()) + " references");
  }
  if (candidates.empty()) fail("data", "corpus_bleu: empty corpus");

  double log_precision_sum = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    std::size_t matches = 0, total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto [m, t] = order_counts(candidates[i], references[i], n);
      matches += m;
      total += t;
    }
    if (matches == 0 || total == 0) return 0.0;
    log_precision_sum += std::log(static_cast<double>(matches) / static_cast<double>(total));
  }
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += candidates[i].size();
    ref_len += references[i].size();
  }
  if (cand_len == 0) return 0.0;
  const double bp = std::exp(
      std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
  return bp * std::exp(log_precision_sum / max_order);
}

}  // namespace mmt
