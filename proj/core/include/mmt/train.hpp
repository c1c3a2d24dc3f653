#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mmt/data.hpp"
#include "mmt/model.hpp"
#include "mmt/reward.hpp"
#include "mmt/tensor.hpp"
#include "mmt/vocab.hpp"

namespace mmt {

enum class Regime { CE, SS, RL };

std::string regime_name(Regime regime);
Regime regime_from_name(const std::string& name);

// Sampling-probability ramp: epsilon starts at 0 and rises by step_size after
// every period epochs, capped.
struct SsSchedule {
  double step_size = 0.05;
  std::size_t period = 5;
  double cap = 0.25;

  void validate() const;
};

// Zero-based epochs with floor semantics: min(cap, step_size * (epoch / period)).
double epsilon_at(std::size_t epoch, const SsSchedule& schedule);

struct TrainConfig {
  std::size_t batch_size = 50;
  double learning_rate = 1.0;
  double dropout = 0.1;
  double grad_clip_norm = 5.0;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  Regime regime = Regime::CE;
  SsSchedule ss_schedule;
  RewardSpec reward;
  bool sort_batches = true;       // off for bit-reproducible runs
  std::size_t max_decode_len = 100;

  void validate() const;
};

// Teacher-forced negative log-likelihood, averaged over non-PAD target
// tokens. teacher_forcing=false feeds the model's own greedy predictions
// instead of the ground truth (targets stay the ground truth).
TensorPtr ce_loss(Graph& g, const Model& m, const Batch& batch, bool teacher_forcing = true,
                  const Dropout& dropout = {});

// Per-step record of the scheduled-sampling decisions, for replay checks.
struct SsTrace {
  struct Step {
    bool used_sample = false;
    int fed_token = 0;
  };
  std::vector<std::vector<Step>> sentences;
};

// Scheduled sampling: per token an independent Bernoulli(epsilon) decides
// whether the decoder input is a token sampled from the model's previous-step
// distribution or the ground truth. Targets stay the ground truth; no
// gradient flows through the sampling choice. epsilon=0 is bit-identical to
// ce_loss.
TensorPtr ss_loss(Graph& g, const Model& m, const Batch& batch, double epsilon,
                  std::mt19937_64& rng, const Dropout& dropout = {}, SsTrace* trace = nullptr);

// One multinomial rollout with its log-probs, its reward and the greedy
// baseline reward.
struct RewardedSample {
  std::vector<int> tokens;        // sampled ids, including terminal EOS if produced
  std::vector<double> log_probs;  // per emitted token, under the sampling distribution
  double reward = 0.0;
  double baseline = 0.0;
};

struct RlResult {
  TensorPtr loss;  // graph-attached surrogate: mean of -(r - b) * sum log p
  std::vector<RewardedSample> samples;
  double mean_sample_reward = 0.0;
  double mean_baseline_reward = 0.0;
  double mean_advantage = 0.0;
};

// Self-critical REINFORCE step: samples a full sequence per sentence, greedy-
// decodes the baseline with the same model (no dropout), and builds the
// surrogate loss whose gradient is the single-sample estimator. Rewards enter
// as constants.
RlResult rl_step(Graph& g, const Model& m, const Batch& batch, const RewardSpec& reward_spec,
                 const Vocabulary& vocab, std::mt19937_64& rng, std::size_t max_decode_len,
                 const Dropout& dropout = {});

// Sum of squared gradient entries across all parameters, under sqrt.
double global_grad_norm(const Model& m);
// Scales gradients so the global norm is at most clip_norm; returns the
// pre-clip norm. Direction is never changed.
double clip_gradients(const Model& m, double clip_norm);
// Plain SGD: p -= lr * grad, then zeroes the grads.
void sgd_update(const Model& m, double learning_rate);

struct EpochLog {
  std::size_t epoch = 0;
  Regime regime = Regime::CE;
  double epsilon = 0.0;
  double mean_loss = 0.0;
  double val_bleu = 0.0;
  double mean_advantage = 0.0;

  std::string tsv() const;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_val_bleu = -1.0;
  std::size_t best_epoch = 0;
  std::string best_checkpoint;   // empty when checkpoint_dir is empty
  std::string final_checkpoint;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Full training loop for one regime: seeded shuffle, per-batch loss, global
// clip, SGD update, per-epoch validation BLEU (greedy) and checkpointing.
// Deterministic end to end under a fixed seed with sort_batches off.
TrainResult train(Model& m, const ParallelCorpus& train_data, const ParallelCorpus& val_data,
                  const TrainConfig& config, const Vocabulary& vocab,
                  const std::string& checkpoint_dir = "", const EpochCallback& on_epoch = {});

// Greedy corpus BLEU of a model over a corpus (validation helper).
double validation_bleu(const Model& m, const ParallelCorpus& corpus, const Vocabulary& vocab,
                       std::size_t max_decode_len);

}  // namespace mmt
