#include "mmt/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mmt/decode.hpp"
#include "mmt/error.hpp"

namespace mmt {

namespace {

// Non-owning view of a model as a single-member ensemble.
EnsembleSpec as_ensemble(const Model& m, std::size_t max_len) {
  EnsembleSpec spec;
  spec.members.push_back(std::shared_ptr<const Model>(std::shared_ptr<void>(), &m));
  spec.max_len = max_len;
  return spec;
}

// Real target ids of one batch row (between BOS and EOS).
std::vector<int> target_ids(const Batch& batch, std::size_t row) {
  std::vector<int> ids;
  const auto& tgt = batch.tgt[row];
  const auto& mask = batch.tgt_mask[row];
  for (std::size_t j = 1; j < tgt.size(); ++j) {
    if (!mask[j] || tgt[j] == Vocabulary::kEos) break;
    ids.push_back(tgt[j]);
  }
  return ids;
}

std::vector<std::string> detok_words(const Vocabulary& vocab, std::span<const int> ids) {
  return bpe_detokenize_words(vocab.decode(ids));
}

// Stable masked softmax over the generatable ids of a logits row.
std::vector<double> masked_probs(const std::vector<double>& logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (generatable(static_cast<int>(j))) mx = std::max(mx, logits[j]);
  }
  std::vector<double> p(logits.size(), 0.0);
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (!generatable(static_cast<int>(j))) continue;
    p[j] = std::exp(logits[j] - mx);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

int sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] <= 0.0) continue;
    acc += probs[j];
    last_positive = static_cast<int>(j);
    if (u < acc) return last_positive;
  }
  return last_positive;  // rounding left acc slightly below 1
}

// Shared decoder loop for the CE and SS losses. Accumulates the summed NLL of
// every masked target position and the number of such positions.
struct NllAccum {
  TensorPtr total;  // null until the first term
  std::size_t tokens = 0;
};

void accumulate_sentence_nll(Graph& g, const Model& m, const Batch& batch, std::size_t row,
                             bool teacher_forcing, double epsilon, std::mt19937_64* rng,
                             const Dropout& dropout, SsTrace* trace, NllAccum& accum) {
  const auto src_span =
      std::span(batch.src[row]).first(std::min(batch.src_len[row], batch.src[row].size()));
  auto enc = encode(g, m, src_span, dropout);
  const std::vector<double>* image = batch.features.empty() ? nullptr : &batch.features[row];
  DecoderState state = init_decoder(g, m, enc, m.config.multimodal() ? image : nullptr);

  std::vector<SsTrace::Step> steps;
  TensorPtr prev_logits;  // model distribution at the previous position
  const auto& tgt = batch.tgt[row];
  const auto& mask = batch.tgt_mask[row];
  for (std::size_t j = 1; j < tgt.size(); ++j) {
    if (!mask[j]) break;
    int input = tgt[j - 1];
    bool used_sample = false;
    if (j > 1) {
      if (!teacher_forcing && prev_logits != nullptr) {
        // Greedy self-feeding (ce_loss with teacher forcing off).
        const auto p = masked_probs(prev_logits->data);
        input = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        used_sample = true;
      } else if (epsilon > 0.0 && rng != nullptr && uniform01(*rng) < epsilon) {
        input = sample_index(masked_probs(prev_logits->data), *rng);
        used_sample = true;
      }
    }
    auto step = decode_step(g, m, state, input, enc, dropout);
    auto logp = g.log_softmax_row(step.logits);
    const int target = tgt[j];
    auto nll = g.neg(g.pick_per_row(logp, std::span(&target, 1)));
    accum.total = accum.total == nullptr ? nll : g.add(accum.total, nll);
    accum.tokens += 1;
    prev_logits = step.logits;
    state = step.state;
    if (trace != nullptr) steps.push_back({used_sample, input});
  }
  if (trace != nullptr) trace->sentences.push_back(std::move(steps));
}

TensorPtr batch_nll(Graph& g, const Model& m, const Batch& batch, bool teacher_forcing,
                    double epsilon, std::mt19937_64* rng, const Dropout& dropout, SsTrace* trace) {
  if (batch.size() == 0) fail("data", "loss: empty batch");
  if (m.config.multimodal() && batch.features.empty()) {
    fail("data", "loss: multimodal model but batch has no image features");
  }
  NllAccum accum;
  for (std::size_t row = 0; row < batch.size(); ++row) {
    accumulate_sentence_nll(g, m, batch, row, teacher_forcing, epsilon, rng, dropout, trace, accum);
  }
  if (accum.tokens == 0) fail("data", "loss: batch has no non-PAD target tokens");
  return g.mul_scalar(accum.total, 1.0 / static_cast<double>(accum.tokens));
}

}  // namespace

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::CE: return "CE";
    case Regime::SS: return "SS";
    case Regime::RL: return "RL";
  }
  fail("config", "unknown regime");
}

Regime regime_from_name(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
  if (upper == "CE") return Regime::CE;
  if (upper == "SS") return Regime::SS;
  if (upper == "RL") return Regime::RL;
  fail("config", "unknown training regime '" + name + "' (expected ce, ss or rl)");
}

void SsSchedule::validate() const {
  if (period == 0) fail("config", "ss schedule: period must be >= 1");
  if (!(cap >= 0.0 && cap <= 1.0)) fail("config", "ss schedule: cap must be in [0, 1]");
  if (!(step_size >= 0.0)) fail("config", "ss schedule: step size must be >= 0");
}

double epsilon_at(std::size_t epoch, const SsSchedule& schedule) {
  schedule.validate();
  return std::min(schedule.cap,
                  schedule.step_size * static_cast<double>(epoch / schedule.period));
}

void TrainConfig::validate() const {
  if (batch_size == 0) fail("config", "train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("config", "train config: learning_rate must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("config", "train config: dropout must be in [0, 1)");
  if (!(grad_clip_norm >= 0.0)) fail("config", "train config: grad_clip_norm must be >= 0");
  if (epochs == 0) fail("config", "train config: epochs must be >= 1");
  if (max_decode_len == 0) fail("config", "train config: max_decode_len must be >= 1");
  ss_schedule.validate();
  reward.validate();
}

TensorPtr ce_loss(Graph& g, const Model& m, const Batch& batch, bool teacher_forcing,
                  const Dropout& dropout) {
  return batch_nll(g, m, batch, teacher_forcing, 0.0, nullptr, dropout, nullptr);
}

TensorPtr ss_loss(Graph& g, const Model& m, const Batch& batch, double epsilon,
                  std::mt19937_64& rng, const Dropout& dropout, SsTrace* trace) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("config", "ss_loss: epsilon must be in [0, 1]");
  return batch_nll(g, m, batch, true, epsilon, &rng, dropout, trace);
}

RlResult rl_step(Graph& g, const Model& m, const Batch& batch, const RewardSpec& reward_spec,
                 const Vocabulary& vocab, std::mt19937_64& rng, std::size_t max_decode_len,
                 const Dropout& dropout) {
  reward_spec.validate();
  if (batch.size() == 0) fail("data", "rl_step: empty batch");
  if (m.regime_tag == "none") {
    fail("config", "rl_step: model must start from a CE- or SS-trained checkpoint");
  }

  const auto mask = generation_mask(m.config.vocab_size);
  const auto ensemble = as_ensemble(m, max_decode_len);

  RlResult result;
  TensorPtr total;
  for (std::size_t row = 0; row < batch.size(); ++row) {
    const auto src_span =
        std::span(batch.src[row]).first(std::min(batch.src_len[row], batch.src[row].size()));
    const std::vector<double>* image =
        (m.config.multimodal() && !batch.features.empty()) ? &batch.features[row] : nullptr;

    // Multinomial rollout under the masked, renormalized distribution; the
    // recorded per-step log-probs stay on the graph.
    auto enc = encode(g, m, src_span, dropout);
    DecoderState state = init_decoder(g, m, enc, image);
    RewardedSample sample;
    TensorPtr logp_sum;
    int prev = Vocabulary::kBos;
    for (std::size_t t = 0; t < max_decode_len; ++t) {
      auto step = decode_step(g, m, state, prev, enc, dropout);
      auto logp = g.log_softmax_row(g.add(step.logits, mask));
      std::vector<double> probs(logp->data.size());
      for (std::size_t j = 0; j < probs.size(); ++j) probs[j] = std::exp(logp->data[j]);
      const int token = sample_index(probs, rng);
      auto picked = g.pick_per_row(logp, std::span(&token, 1));
      logp_sum = logp_sum == nullptr ? picked : g.add(logp_sum, picked);
      sample.tokens.push_back(token);
      sample.log_probs.push_back(logp->data[static_cast<std::size_t>(token)]);
      state = step.state;
      prev = token;
      if (token == Vocabulary::kEos) break;
    }

    // Greedy baseline: the model's own deterministic test-time decode.
    const auto greedy = greedy_decode(ensemble, src_span, image);

    std::vector<int> content = sample.tokens;
    if (!content.empty() && content.back() == Vocabulary::kEos) content.pop_back();
    const auto reference = detok_words(vocab, target_ids(batch, row));
    sample.reward = sentence_bleu(detok_words(vocab, content), reference, reward_spec);
    sample.baseline = sentence_bleu(detok_words(vocab, greedy), reference, reward_spec);

    const double advantage = sample.reward - sample.baseline;
    auto term = g.mul_scalar(logp_sum, -advantage);
    total = total == nullptr ? term : g.add(total, term);

    result.mean_sample_reward += sample.reward;
    result.mean_baseline_reward += sample.baseline;
    result.mean_advantage += advantage;
    result.samples.push_back(std::move(sample));
  }
  const double n = static_cast<double>(batch.size());
  result.loss = g.mul_scalar(total, 1.0 / n);
  result.mean_sample_reward /= n;
  result.mean_baseline_reward /= n;
  result.mean_advantage /= n;
  return result;
}

double global_grad_norm(const Model& m) {
  double sq = 0.0;
  for (const auto& [name, t] : m.named_params()) {
    for (double gv : t->grad) sq += gv * gv;
  }
  return std::sqrt(sq);
}

double clip_gradients(const Model& m, double clip_norm) {
  const double norm = global_grad_norm(m);
  if (clip_norm > 0.0 && norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (const auto& [name, t] : m.named_params()) {
      for (double& gv : t->grad) gv *= scale;
    }
  }
  return norm;
}

void sgd_update(const Model& m, double learning_rate) {
  for (const auto& [name, t] : m.named_params()) {
    t->ensure_grad();
    for (std::size_t i = 0; i < t->data.size(); ++i) t->data[i] -= learning_rate * t->grad[i];
  }
  m.zero_grad();
}

std::string EpochLog::tsv() const {
  std::ostringstream os;
  os << epoch << '\t' << regime_name(regime) << '\t';
  if (regime == Regime::SS) os << epsilon;
  os << '\t' << mean_loss << '\t' << val_bleu << '\t';
  if (regime == Regime::RL) os << mean_advantage;
  return os.str();
}

double validation_bleu(const Model& m, const ParallelCorpus& corpus, const Vocabulary& vocab,
                       std::size_t max_decode_len) {
  const auto ensemble = as_ensemble(m, max_decode_len);
  std::vector<std::vector<std::string>> cands, refs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::vector<double>* image =
        (m.config.multimodal() && corpus.has_features()) ? &corpus.features[i] : nullptr;
    cands.push_back(detok_words(vocab, greedy_decode(ensemble, corpus.source[i], image)));
    refs.push_back(detok_words(vocab, corpus.target[i]));
  }
  return corpus_bleu(cands, refs);
}

TrainResult train(Model& m, const ParallelCorpus& train_data, const ParallelCorpus& val_data,
                  const TrainConfig& config, const Vocabulary& vocab,
                  const std::string& checkpoint_dir, const EpochCallback& on_epoch) {
  config.validate();
  train_data.validate();
  val_data.validate();
  m.config.validate();
  if (config.regime == Regime::RL && m.regime_tag == "none") {
    fail("config", "train: the RL regime requires a CE- or SS-trained starting checkpoint");
  }
  if (m.config.multimodal() && !train_data.has_features()) {
    fail("data", "train: multimodal model but the corpus has no image features");
  }

  std::mt19937_64 rng(config.seed);
  m.zero_grad();

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double epsilon =
        config.regime == Regime::SS ? epsilon_at(epoch, config.ss_schedule) : 0.0;
    const std::uint64_t batch_seed = rng();
    const auto batches = make_batches(train_data, config.batch_size, batch_seed,
                                      config.sort_batches);
    double loss_sum = 0.0;
    double advantage_sum = 0.0;
    std::size_t sentences = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Graph g;
      Dropout dropout{config.dropout, &rng};
      TensorPtr loss;
      if (config.regime == Regime::CE) {
        loss = ce_loss(g, m, batches[b], true, dropout);
      } else if (config.regime == Regime::SS) {
        loss = ss_loss(g, m, batches[b], epsilon, rng, dropout);
      } else {
        auto rl = rl_step(g, m, batches[b], config.reward, vocab, rng, config.max_decode_len,
                          dropout);
        loss = rl.loss;
        advantage_sum += rl.mean_advantage * static_cast<double>(batches[b].size());
      }
      if (!std::isfinite(loss->scalar())) {
        fail("domain", "train: non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      }
      g.backward(loss);
      clip_gradients(m, config.grad_clip_norm);
      sgd_update(m, config.learning_rate);
      loss_sum += loss->scalar() * static_cast<double>(batches[b].size());
      sentences += batches[b].size();
    }

    EpochLog log;
    log.epoch = epoch;
    log.regime = config.regime;
    log.epsilon = epsilon;
    log.mean_loss = loss_sum / static_cast<double>(sentences);
    log.mean_advantage = advantage_sum / static_cast<double>(sentences);
    log.val_bleu = validation_bleu(m, val_data, vocab, config.max_decode_len);

    m.regime_tag = regime_name(config.regime);
    if (!checkpoint_dir.empty()) {
      std::filesystem::create_directories(checkpoint_dir);
      std::ostringstream name;
      name << checkpoint_dir << "/epoch_" << std::setw(3) << std::setfill('0') << epoch << ".ckpt";
      save_checkpoint(m, name.str());
      result.final_checkpoint = name.str();
      if (log.val_bleu > result.best_val_bleu) {
        result.best_checkpoint = name.str();
      }
    }
    if (log.val_bleu > result.best_val_bleu) {
      result.best_val_bleu = log.val_bleu;
      result.best_epoch = epoch;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

}  // namespace mmt
