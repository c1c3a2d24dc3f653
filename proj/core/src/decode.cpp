#include "mmt/decode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mmt/data.hpp"
#include "mmt/error.hpp"

namespace mmt {

EnsembleSpec EnsembleSpec::load(const std::vector<std::string>& checkpoint_paths) {
  EnsembleSpec spec;
  for (const auto& path : checkpoint_paths) {
    spec.members.push_back(std::make_shared<Model>(load_checkpoint(path)));
  }
  spec.validate();
  return spec;
}

void EnsembleSpec::validate() const {
  if (members.empty()) fail("config", "ensemble: needs at least one member");
  if (beam_size == 0) fail("config", "ensemble: beam size must be >= 1");
  if (max_len == 0) fail("config", "ensemble: max decode length must be >= 1");
  if (!(length_reward >= 0.0)) fail("config", "ensemble: length reward must be >= 0");
  for (const auto& m : members) {
    if (m->vocab_hash != members[0]->vocab_hash) {
      fail("vocab", "ensemble: members were trained with different vocabularies");
    }
    if (m->config.vocab_size != members[0]->config.vocab_size) {
      fail("vocab", "ensemble: members disagree on vocabulary size");
    }
  }
}

std::size_t EnsembleSpec::vocab_size() const { return members.at(0)->config.vocab_size; }

std::uint64_t EnsembleSpec::vocab_hash() const { return members.at(0)->vocab_hash; }

bool EnsembleSpec::needs_image() const {
  return std::any_of(members.begin(), members.end(),
                     [](const auto& m) { return m->config.multimodal(); });
}

std::vector<int> Hypothesis::content_tokens() const {
  std::vector<int> out = tokens;
  if (finished && !out.empty()) out.pop_back();
  return out;
}

EncodedSource encode_source(Graph& g, const EnsembleSpec& spec, std::span<const int> src,
                            const std::vector<double>* image) {
  spec.validate();
  if (spec.needs_image() && image == nullptr) {
    fail("data", "decode: ensemble has a multimodal member but no image features were given");
  }
  EncodedSource enc;
  for (const auto& m : spec.members) enc.members.push_back(encode(g, *m, src));
  return enc;
}

std::vector<DecoderState> init_ensemble_decoder(Graph& g, const EnsembleSpec& spec,
                                                const EncodedSource& enc,
                                                const std::vector<double>* image) {
  std::vector<DecoderState> states;
  for (std::size_t i = 0; i < spec.members.size(); ++i) {
    const Model& m = *spec.members[i];
    states.push_back(init_decoder(g, m, enc.members[i], m.config.multimodal() ? image : nullptr));
  }
  return states;
}

EnsembleStep ensemble_step(Graph& g, const EnsembleSpec& spec, const EncodedSource& enc,
                           const std::vector<DecoderState>& states, int prev_token) {
  if (states.size() != spec.members.size()) {
    fail("shape", "ensemble_step: " + std::to_string(states.size()) + " states for " +
                      std::to_string(spec.members.size()) + " members");
  }
  const std::size_t v = spec.vocab_size();
  EnsembleStep out;
  out.distribution.assign(v, 0.0);
  out.states.reserve(states.size());
  for (std::size_t i = 0; i < spec.members.size(); ++i) {
    auto step = decode_step(g, *spec.members[i], states[i], prev_token, enc.members[i]);
    auto probs = g.softmax_row(step.logits);
    for (std::size_t j = 0; j < v; ++j) out.distribution[j] += probs->data[j];
    out.states.push_back(std::move(step.state));
  }
  const double n = static_cast<double>(spec.members.size());
  for (double& p : out.distribution) p /= n;
  return out;
}

namespace {

// Lowest id wins ties.
int argmax_generatable(const std::vector<double>& dist) {
  int best = -1;
  double best_p = -1.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    if (!generatable(static_cast<int>(j))) continue;
    if (dist[j] > best_p) {
      best_p = dist[j];
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

std::vector<int> greedy_decode(const EnsembleSpec& spec, std::span<const int> src,
                               const std::vector<double>* image) {
  Graph g;
  const auto enc = encode_source(g, spec, src, image);
  auto states = init_ensemble_decoder(g, spec, enc, image);
  std::vector<int> tokens;
  int prev = Vocabulary::kBos;
  for (std::size_t t = 0; t < spec.max_len; ++t) {
    auto step = ensemble_step(g, spec, enc, states, prev);
    const int next = argmax_generatable(step.distribution);
    if (next == Vocabulary::kEos) break;
    tokens.push_back(next);
    states = std::move(step.states);
    prev = next;
  }
  return tokens;
}

BeamResult beam_decode(const EnsembleSpec& spec, std::span<const int> src,
                       const std::vector<double>* image) {
  Graph g;
  const auto enc = encode_source(g, spec, src, image);

  Hypothesis root;
  root.states = init_ensemble_decoder(g, spec, enc, image);
  std::vector<Hypothesis> active{std::move(root)};
  std::vector<Hypothesis> finished;

  const auto better = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  };

  for (std::size_t step_idx = 0; step_idx < spec.max_len && !active.empty(); ++step_idx) {
    struct Candidate {
      std::size_t hyp;
      int token;
      double score;
    };
    std::vector<Candidate> pool;
    std::vector<EnsembleStep> steps(active.size());
    for (std::size_t h = 0; h < active.size(); ++h) {
      const int prev = active[h].tokens.empty() ? Vocabulary::kBos : active[h].tokens.back();
      steps[h] = ensemble_step(g, spec, enc, active[h].states, prev);
      for (std::size_t j = 0; j < steps[h].distribution.size(); ++j) {
        if (!generatable(static_cast<int>(j))) continue;
        const double p = steps[h].distribution[j];
        if (p <= 0.0) continue;
        pool.push_back({h, static_cast<int>(j),
                        active[h].score + std::log(p) + spec.length_reward});
      }
    }
    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.token != b.token) return a.token < b.token;
      return a.hyp < b.hyp;
    });

    // Expand the top beam_size candidates; EOS expansions leave the beam.
    std::vector<Hypothesis> next_active;
    const std::size_t take = std::min(pool.size(), spec.beam_size);
    for (std::size_t k = 0; k < take; ++k) {
      const auto& c = pool[k];
      Hypothesis hyp;
      hyp.tokens = active[c.hyp].tokens;
      hyp.tokens.push_back(c.token);
      hyp.score = c.score;
      hyp.states = steps[c.hyp].states;
      if (c.token == Vocabulary::kEos) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
      } else {
        next_active.push_back(std::move(hyp));
      }
    }
    active = std::move(next_active);

    if (!finished.empty() && !active.empty()) {
      // An active hypothesis can still gain at most lambda per remaining step.
      const double best_active =
          std::max_element(active.begin(), active.end(), [](const auto& a, const auto& b) {
            return a.score < b.score;
          })->score;
      const double remaining = static_cast<double>(spec.max_len - (step_idx + 1));
      const double best_finished =
          std::max_element(finished.begin(), finished.end(), [](const auto& a, const auto& b) {
            return a.score < b.score;
          })->score;
      if (best_active + spec.length_reward * remaining <= best_finished) break;
    }
  }

  BeamResult result;
  if (finished.empty()) {
    // Nothing terminated within max_len; hand back the best active hypothesis.
    if (active.empty()) fail("domain", "beam_decode: no hypotheses survive");
    std::sort(active.begin(), active.end(), better);
    result.degenerate = true;
    result.kbest.assign(active.begin(),
                        active.begin() + std::min(active.size(), spec.beam_size));
    result.best = result.kbest.front();
    return result;
  }
  std::sort(finished.begin(), finished.end(), better);
  result.kbest.assign(finished.begin(),
                      finished.begin() + std::min(finished.size(), spec.beam_size));
  result.best = result.kbest.front();
  return result;
}

TranslateReport translate_corpus(const EnsembleSpec& spec, const MergeTable& bpe,
                                 const Vocabulary& vocab, const std::string& source_path,
                                 const std::string& feature_path, const std::string& output_path,
                                 const std::string& reference_path) {
  spec.validate();
  if (vocab.content_hash() != spec.vocab_hash()) {
    fail("vocab", "translate: vocabulary file does not match the ensemble's vocabulary hash");
  }
  std::ifstream in(source_path);
  if (!in) fail("io", "cannot read " + source_path);
  std::vector<std::string> src_lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    src_lines.push_back(line);
  }

  std::vector<std::vector<double>> features;
  if (!feature_path.empty()) {
    features = load_features(feature_path, src_lines.size());
  } else if (spec.needs_image()) {
    fail("data", "translate: ensemble has a multimodal member, a feature file is required");
  }

  std::ofstream out(output_path);
  if (!out) fail("io", "cannot write " + output_path);

  TranslateReport report;
  std::vector<std::vector<std::string>> outputs_words;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    auto words = preprocess(src_lines[i]);
    if (words.empty()) {
      ++report.empty_sources;
      out << "\n";
      outputs_words.emplace_back();
      continue;
    }
    auto ids = vocab.encode(apply_bpe(bpe, words));
    std::size_t member_cap = spec.members[0]->config.max_src_len;
    for (const auto& m : spec.members) member_cap = std::min(member_cap, m->config.max_src_len);
    if (ids.size() > member_cap) {
      ids.resize(member_cap);
      ++report.truncated_sources;
    }
    const std::vector<double>* image = features.empty() ? nullptr : &features[i];
    const auto result = beam_decode(spec, ids, image);
    const auto out_words =
        bpe_detokenize_words(vocab.decode(result.best.content_tokens()));
    std::string joined;
    for (std::size_t w = 0; w < out_words.size(); ++w) {
      if (w) joined.push_back(' ');
      joined += out_words[w];
    }
    out << joined << "\n";
    outputs_words.push_back(out_words);
  }
  report.sentences = src_lines.size();
  out.flush();
  if (!out) fail("io", "failed while writing " + output_path);

  if (!reference_path.empty()) {
    std::ifstream ref_in(reference_path);
    if (!ref_in) fail("io", "cannot read " + reference_path);
    std::vector<std::vector<std::string>> refs;
    while (std::getline(ref_in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      refs.push_back(preprocess(line));
    }
    if (refs.size() != outputs_words.size()) {
      fail("data", "translate: reference has " + std::to_string(refs.size()) + " lines, source has " +
                       std::to_string(outputs_words.size()));
    }
    report.has_bleu = true;
    report.corpus_bleu_score = corpus_bleu(outputs_words, refs);
    double total = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      total += refs[i].empty() ? 0.0 : sentence_bleu(outputs_words[i], refs[i]);
    }
    report.mean_sentence_bleu = refs.empty() ? 0.0 : total / static_cast<double>(refs.size());
  }
  return report;
}

}  // namespace mmt
