// mmt: sequence-to-sequence translation pipeline driver.
//
// Subcommands: bpe-learn, bpe-apply, train, translate, score, gradcheck,
// pipeline. Every run resolves its full configuration up front, writes it as
// a manifest into the run directory, then dispatches.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mmt/data.hpp"
#include "mmt/decode.hpp"
#include "mmt/error.hpp"
#include "mmt/gradcheck.hpp"
#include "mmt/kvconfig.hpp"
#include "mmt/train.hpp"
#include "mmt/version.hpp"

namespace fs = std::filesystem;
using namespace mmt;

namespace {

std::string default_run_dir(const std::string& subcommand) {
  return "mmt_runs/" + subcommand;
}

void write_manifest(const std::string& run_dir, const std::string& subcommand, KvConfig config) {
  fs::create_directories(run_dir);
  fs::create_directories(run_dir + "/outputs");
  config.set("subcommand", subcommand);
  config.set("build_id", std::string(kBuildId));
  config.set("version", std::string(kVersion));
  config.save(run_dir + "/manifest.txt");
}

std::vector<std::string> read_raw_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// ---- bpe-learn --------------------------------------------------------------

struct BpeLearnArgs {
  std::vector<std::string> inputs;
  std::size_t merges = 0;
  std::size_t vocab_cap = 20000;
  std::string out_merges, out_vocab;
  bool no_preprocess = false;
  std::string run_dir = default_run_dir("bpe-learn");
};

int run_bpe_learn(const BpeLearnArgs& args) {
  KvConfig manifest;
  for (std::size_t i = 0; i < args.inputs.size(); ++i) {
    manifest.set("input_" + std::to_string(i), args.inputs[i]);
  }
  manifest.set("merges", std::uint64_t(args.merges));
  manifest.set("vocab_cap", std::uint64_t(args.vocab_cap));
  manifest.set("preprocess", !args.no_preprocess);
  const std::string out_merges =
      args.out_merges.empty() ? args.run_dir + "/outputs/merges.txt" : args.out_merges;
  const std::string out_vocab =
      args.out_vocab.empty() ? args.run_dir + "/outputs/vocab.txt" : args.out_vocab;
  manifest.set("out_merges", out_merges);
  manifest.set("out_vocab", out_vocab);
  write_manifest(args.run_dir, "bpe-learn", manifest);

  std::vector<std::string> corpus;
  for (const auto& path : args.inputs) {
    for (const auto& line : read_raw_lines(path)) {
      corpus.push_back(args.no_preprocess ? line : preprocess_to_line(line));
    }
  }
  const auto table = learn_bpe(corpus, args.merges);
  table.save(out_merges);

  std::vector<std::vector<std::string>> encoded;
  for (const auto& line : corpus) {
    std::vector<std::string> words;
    std::string w;
    for (char c : line) {
      if (c == ' ') {
        if (!w.empty()) words.push_back(std::move(w));
        w.clear();
      } else {
        w.push_back(c);
      }
    }
    if (!w.empty()) words.push_back(std::move(w));
    if (!words.empty()) encoded.push_back(apply_bpe(table, words));
  }
  const auto vocab = Vocabulary::build(encoded, args.vocab_cap);
  vocab.save(out_vocab);
  std::cout << "learned " << table.size() << " merges, vocabulary size " << vocab.size()
            << " (hash " << vocab.content_hash() << ")\n";
  return 0;
}

// ---- bpe-apply --------------------------------------------------------------

struct BpeApplyArgs {
  std::string merges, input, output;
  bool no_preprocess = false;
  std::string run_dir = default_run_dir("bpe-apply");
};

int run_bpe_apply(const BpeApplyArgs& args) {
  KvConfig manifest;
  manifest.set("merges", args.merges);
  manifest.set("input", args.input);
  manifest.set("preprocess", !args.no_preprocess);
  const std::string output =
      args.output.empty() ? args.run_dir + "/outputs/segmented.txt" : args.output;
  manifest.set("output", output);
  write_manifest(args.run_dir, "bpe-apply", manifest);

  const auto table = MergeTable::load(args.merges);
  std::ofstream out(output);
  if (!out) fail("io", "cannot write " + output);
  for (const auto& raw : read_raw_lines(args.input)) {
    std::vector<std::string> words;
    if (args.no_preprocess) {
      std::string w;
      for (char c : raw + " ") {
        if (c == ' ' || c == '\t') {
          if (!w.empty()) words.push_back(w);
          w.clear();
        } else {
          w.push_back(c);
        }
      }
    } else {
      words = preprocess(raw);
    }
    const auto subwords = apply_bpe(table, words);
    for (std::size_t i = 0; i < subwords.size(); ++i) out << (i ? " " : "") << subwords[i];
    out << "\n";
  }
  return 0;
}

// ---- train / pipeline -------------------------------------------------------

// All tunables as a flat key space shared by the config file, CLI overrides
// and the manifest.
struct TrainJob {
  std::string train_src, train_tgt, val_src, val_tgt;
  std::string train_features, val_features;
  std::string merges, vocab;
  std::string init_checkpoint;
  std::string regime = "ce";
  std::string optimizer = "sgd";
  std::string reward_metric = "sentence-bleu";
  std::size_t reward_max_order = 4;
  bool reward_smooth = true;
  std::size_t embed_dim = 64, hidden_dim = 64, encoder_layers = 2, image_feature_dim = 0;
  double dropout = 0.1;
  std::size_t batch_size = 50, epochs = 10;
  double learning_rate = 1.0, grad_clip_norm = 5.0;
  std::uint64_t seed = 1;
  double ss_step = 0.05, ss_cap = 0.25;
  std::size_t ss_period = 5;
  std::size_t max_src_len = 100, max_tgt_len = 100, max_decode_len = 100;
  bool sort_batches = true;

  void apply(const KvConfig& kv) {
    train_src = kv.get("train_src", train_src);
    train_tgt = kv.get("train_tgt", train_tgt);
    val_src = kv.get("val_src", val_src);
    val_tgt = kv.get("val_tgt", val_tgt);
    train_features = kv.get("train_features", train_features);
    val_features = kv.get("val_features", val_features);
    merges = kv.get("merges", merges);
    vocab = kv.get("vocab", vocab);
    init_checkpoint = kv.get("init_checkpoint", init_checkpoint);
    regime = kv.get("regime", regime);
    optimizer = kv.get("optimizer", optimizer);
    reward_metric = kv.get("reward_metric", reward_metric);
    reward_max_order = kv.get_size("reward_max_order", reward_max_order);
    reward_smooth = kv.get_bool("reward_smooth", reward_smooth);
    embed_dim = kv.get_size("embed_dim", embed_dim);
    hidden_dim = kv.get_size("hidden_dim", hidden_dim);
    encoder_layers = kv.get_size("encoder_layers", encoder_layers);
    image_feature_dim = kv.get_size("image_feature_dim", image_feature_dim);
    dropout = kv.get_double("dropout", dropout);
    batch_size = kv.get_size("batch_size", batch_size);
    epochs = kv.get_size("epochs", epochs);
    learning_rate = kv.get_double("learning_rate", learning_rate);
    grad_clip_norm = kv.get_double("grad_clip_norm", grad_clip_norm);
    seed = kv.get_u64("seed", seed);
    ss_step = kv.get_double("ss_step", ss_step);
    ss_period = kv.get_size("ss_period", ss_period);
    ss_cap = kv.get_double("ss_cap", ss_cap);
    max_src_len = kv.get_size("max_src_len", max_src_len);
    max_tgt_len = kv.get_size("max_tgt_len", max_tgt_len);
    max_decode_len = kv.get_size("max_decode_len", max_decode_len);
    sort_batches = kv.get_bool("sort_batches", sort_batches);
  }

  KvConfig resolved() const {
    KvConfig kv;
    kv.set("train_src", train_src);
    kv.set("train_tgt", train_tgt);
    kv.set("val_src", val_src);
    kv.set("val_tgt", val_tgt);
    kv.set("train_features", train_features);
    kv.set("val_features", val_features);
    kv.set("merges", merges);
    kv.set("vocab", vocab);
    kv.set("init_checkpoint", init_checkpoint);
    kv.set("regime", regime);
    kv.set("optimizer", optimizer);
    kv.set("reward_metric", reward_metric);
    kv.set("reward_max_order", std::uint64_t(reward_max_order));
    kv.set("reward_smooth", reward_smooth);
    kv.set("embed_dim", std::uint64_t(embed_dim));
    kv.set("hidden_dim", std::uint64_t(hidden_dim));
    kv.set("encoder_layers", std::uint64_t(encoder_layers));
    kv.set("image_feature_dim", std::uint64_t(image_feature_dim));
    kv.set("dropout", dropout);
    kv.set("batch_size", std::uint64_t(batch_size));
    kv.set("epochs", std::uint64_t(epochs));
    kv.set("learning_rate", learning_rate);
    kv.set("grad_clip_norm", grad_clip_norm);
    kv.set("seed", seed);
    kv.set("ss_step", ss_step);
    kv.set("ss_period", std::uint64_t(ss_period));
    kv.set("ss_cap", ss_cap);
    kv.set("max_src_len", std::uint64_t(max_src_len));
    kv.set("max_tgt_len", std::uint64_t(max_tgt_len));
    kv.set("max_decode_len", std::uint64_t(max_decode_len));
    kv.set("sort_batches", sort_batches);
    return kv;
  }

  TrainConfig train_config() const {
    if (optimizer != "sgd") {
      fail("config", "optimizer '" + optimizer + "' is not supported; only plain sgd");
    }
    TrainConfig cfg;
    cfg.batch_size = batch_size;
    cfg.learning_rate = learning_rate;
    cfg.dropout = dropout;
    cfg.grad_clip_norm = grad_clip_norm;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.regime = regime_from_name(regime);
    cfg.ss_schedule = SsSchedule{ss_step, ss_period, ss_cap};
    cfg.reward.metric = reward_metric;
    cfg.reward.max_order = static_cast<int>(reward_max_order);
    cfg.reward.smooth_zero_orders = reward_smooth;
    cfg.sort_batches = sort_batches;
    cfg.max_decode_len = max_decode_len;
    return cfg;
  }
};

struct LoadedData {
  MergeTable bpe;
  Vocabulary vocab;
  ParallelCorpus train, val;
};

LoadedData load_training_data(const TrainJob& job) {
  if (job.train_src.empty() || job.train_tgt.empty() || job.val_src.empty() ||
      job.val_tgt.empty()) {
    fail("config", "train/val source and target paths are all required");
  }
  if (job.merges.empty() || job.vocab.empty()) {
    fail("config", "a merge table (--merges) and vocabulary (--vocab) are required");
  }
  LoadedData data;
  data.bpe = MergeTable::load(job.merges);
  data.vocab = Vocabulary::load(job.vocab);
  LoadOptions opts;
  opts.max_len = std::max(job.max_src_len, job.max_tgt_len);
  LoadStats stats;
  data.train = load_parallel_corpus(job.train_src, job.train_tgt, data.bpe, data.vocab, opts,
                                    &stats);
  if (stats.dropped_empty + stats.dropped_long > 0) {
    std::cout << "train corpus: dropped " << stats.dropped_empty << " empty and "
              << stats.dropped_long << " over-long pairs\n";
  }
  data.val = load_parallel_corpus(job.val_src, job.val_tgt, data.bpe, data.vocab, opts, &stats);
  if (!job.train_features.empty()) {
    attach_features(data.train, load_features(job.train_features, data.train.size()));
  }
  if (!job.val_features.empty()) {
    attach_features(data.val, load_features(job.val_features, data.val.size()));
  }
  return data;
}

Model make_or_load_model(const TrainJob& job, const Vocabulary& vocab) {
  if (!job.init_checkpoint.empty()) {
    Model m = load_checkpoint(job.init_checkpoint);
    if (m.vocab_hash != vocab.content_hash()) {
      fail("vocab", "checkpoint " + job.init_checkpoint + " was trained with a different vocabulary");
    }
    return m;
  }
  ModelConfig config;
  config.embed_dim = job.embed_dim;
  config.hidden_dim = job.hidden_dim;
  config.encoder_layers = job.encoder_layers;
  config.vocab_size = vocab.size();
  config.image_feature_dim = job.image_feature_dim;
  config.dropout_rate = job.dropout;
  config.seed = job.seed;
  config.max_src_len = job.max_src_len;
  config.max_tgt_len = job.max_tgt_len;
  return Model::create(config, vocab.content_hash());
}

// One training stage: writes epoch logs and checkpoints under stage_dir and a
// stage summary for downstream stages and scripts.
TrainResult run_stage(Model& model, const LoadedData& data, const TrainJob& job,
                      const std::string& stage_dir) {
  fs::create_directories(stage_dir);
  std::ofstream log(stage_dir + "/train.log");
  if (!log) fail("io", "cannot write " + stage_dir + "/train.log");

  const double start_bleu = validation_bleu(model, data.val, data.vocab, job.max_decode_len);
  const auto result =
      train(model, data.train, data.val, job.train_config(), data.vocab,
            stage_dir + "/checkpoints", [&](const EpochLog& epoch_log) {
              log << epoch_log.tsv() << "\n";
              log.flush();
              std::cout << epoch_log.tsv() << "\n";
            });

  KvConfig summary;
  summary.set("regime", job.regime);
  summary.set("start_val_bleu", start_bleu);
  summary.set("end_val_bleu", result.log.back().val_bleu);
  summary.set("best_val_bleu", result.best_val_bleu);
  summary.set("best_epoch", std::uint64_t(result.best_epoch));
  summary.set("best_checkpoint", result.best_checkpoint);
  summary.set("final_checkpoint", result.final_checkpoint);
  summary.save(stage_dir + "/summary.txt");
  return result;
}

int run_train(TrainJob job, const std::string& config_path, const KvConfig& overrides,
              const std::string& run_dir) {
  if (!config_path.empty()) job.apply(KvConfig::load(config_path));
  job.apply(overrides);
  write_manifest(run_dir, "train", job.resolved());

  const auto data = load_training_data(job);
  Model model = make_or_load_model(job, data.vocab);
  const auto result = run_stage(model, data, job, run_dir);
  std::cout << "best epoch " << result.best_epoch << " val_bleu " << result.best_val_bleu
            << "\nbest checkpoint: " << result.best_checkpoint << "\n";
  return 0;
}

int run_pipeline(const std::string& config_path, const KvConfig& overrides,
                 const std::string& run_dir) {
  TrainJob base;
  const KvConfig file = KvConfig::load(config_path);
  base.apply(file);
  base.apply(overrides);

  const std::string stages_str = [&] {
    if (overrides.has("stages")) return overrides.get("stages");
    return file.get("stages", "ce,ss,rl");
  }();
  std::vector<std::string> stages;
  std::string cur;
  for (char c : stages_str + ",") {
    if (c == ',') {
      if (!cur.empty()) stages.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (stages.empty()) fail("config", "pipeline: no stages configured");

  KvConfig manifest = base.resolved();
  manifest.set("stages", stages_str);
  for (const auto& stage : stages) {
    const std::string key = stage + "_epochs";
    manifest.set(key, std::uint64_t(file.get_size(key, base.epochs)));
  }
  write_manifest(run_dir, "pipeline", manifest);

  // Stage order sanity: RL must have something to start from.
  for (std::size_t i = 0; i < stages.size(); ++i) {
    regime_from_name(stages[i]);
    if (stages[i] == "rl" && i == 0 && base.init_checkpoint.empty()) {
      fail("config", "pipeline: an rl stage needs a preceding stage or an init_checkpoint");
    }
  }

  const auto data = load_training_data(base);
  Model model = make_or_load_model(base, data.vocab);
  std::string previous_best;
  for (const auto& stage : stages) {
    TrainJob job = base;
    job.regime = stage;
    job.epochs = file.get_size(stage + "_epochs", base.epochs);
    if (!previous_best.empty()) {
      model = load_checkpoint(previous_best);
      job.init_checkpoint = previous_best;
    }
    const std::string stage_dir = run_dir + "/stage_" + stage;
    std::cout << "=== stage " << stage << " (" << job.epochs << " epochs) ===\n";
    const auto result = run_stage(model, data, job, stage_dir);
    previous_best = result.best_checkpoint;
    std::cout << "stage " << stage << " best val_bleu " << result.best_val_bleu << " at epoch "
              << result.best_epoch << "\n";
  }
  std::cout << "pipeline complete; final best checkpoint: " << previous_best << "\n";
  return 0;
}

// ---- translate / score / gradcheck -------------------------------------------

struct TranslateArgs {
  std::vector<std::string> checkpoints;
  std::string merges, vocab, source, output, features, reference;
  std::size_t beam = 5;
  double length_reward = 0.0;
  std::size_t max_length = 100;
  std::string run_dir = default_run_dir("translate");
};

int run_translate(const TranslateArgs& args) {
  KvConfig manifest;
  for (std::size_t i = 0; i < args.checkpoints.size(); ++i) {
    manifest.set("checkpoint_" + std::to_string(i), args.checkpoints[i]);
  }
  manifest.set("merges", args.merges);
  manifest.set("vocab", args.vocab);
  manifest.set("source", args.source);
  manifest.set("features", args.features);
  manifest.set("reference", args.reference);
  manifest.set("beam", std::uint64_t(args.beam));
  manifest.set("length_reward", args.length_reward);
  manifest.set("max_length", std::uint64_t(args.max_length));
  const std::string output =
      args.output.empty() ? args.run_dir + "/outputs/translations.txt" : args.output;
  manifest.set("output", output);
  write_manifest(args.run_dir, "translate", manifest);

  auto spec = EnsembleSpec::load(args.checkpoints);
  spec.beam_size = args.beam;
  spec.length_reward = args.length_reward;
  spec.max_len = args.max_length;

  const auto bpe = MergeTable::load(args.merges);
  const auto vocab = Vocabulary::load(args.vocab);
  const auto report =
      translate_corpus(spec, bpe, vocab, args.source, args.features, output, args.reference);
  std::cout << "translated " << report.sentences << " sentences";
  if (report.empty_sources > 0) std::cout << " (" << report.empty_sources << " empty)";
  if (report.truncated_sources > 0) std::cout << " (" << report.truncated_sources << " truncated)";
  std::cout << "\n";
  if (report.has_bleu) {
    std::cout << "corpus_bleu " << report.corpus_bleu_score << "\n"
              << "mean_sentence_bleu " << report.mean_sentence_bleu << "\n";
  }
  return 0;
}

struct ScoreArgs {
  std::string candidate, reference;
  bool raw = false;
};

int run_score(const ScoreArgs& args) {
  const auto cand_lines = read_raw_lines(args.candidate);
  const auto ref_lines = read_raw_lines(args.reference);
  if (cand_lines.size() != ref_lines.size()) {
    fail("data", "score: candidate has " + std::to_string(cand_lines.size()) +
                     " lines, reference has " + std::to_string(ref_lines.size()));
  }
  std::vector<std::vector<std::string>> cands, refs;
  const auto to_tokens = [&](const std::string& line) {
    if (!args.raw) return preprocess(line);
    std::vector<std::string> words;
    std::string w;
    for (char c : line + " ") {
      if (c == ' ' || c == '\t') {
        if (!w.empty()) words.push_back(w);
        w.clear();
      } else {
        w.push_back(c);
      }
    }
    return words;
  };
  for (std::size_t i = 0; i < cand_lines.size(); ++i) {
    cands.push_back(to_tokens(cand_lines[i]));
    refs.push_back(to_tokens(ref_lines[i]));
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    mean += refs[i].empty() ? 0.0 : sentence_bleu(cands[i], refs[i]);
  }
  mean = cands.empty() ? 0.0 : mean / static_cast<double>(cands.size());
  std::cout << "corpus_bleu " << corpus_bleu(cands, refs) << "\n"
            << "mean_sentence_bleu " << mean << "\n";
  return 0;
}

struct GradcheckArgs {
  std::string dims = "toy";
  double tol = 1e-4;
  double step = 1e-5;
  std::uint64_t seed = 7;
};

int run_gradcheck(const GradcheckArgs& args) {
  if (args.dims != "toy") fail("config", "gradcheck: unknown dims preset '" + args.dims + "'");
  ModelConfig config;
  config.vocab_size = 12;
  config.embed_dim = 6;
  config.hidden_dim = 8;
  config.encoder_layers = 2;
  config.dropout_rate = 0.0;
  config.seed = args.seed;
  const Model m = Model::create(config, 1);

  std::mt19937_64 rng(args.seed * 1315423911ull + 1);
  const auto rand_id = [&]() { return 4 + static_cast<int>(rng() % 8); };
  std::vector<int> src(4), tgt(5);
  for (auto& id : src) id = rand_id();
  for (std::size_t i = 0; i + 1 < tgt.size(); ++i) tgt[i] = rand_id();
  tgt.back() = Vocabulary::kEos;

  const auto loss_fn = [&]() {
    Graph g;
    const auto enc = encode(g, m, src);
    auto state = init_decoder(g, m, enc);
    TensorPtr total;
    int prev = Vocabulary::kBos;
    for (int target : tgt) {
      const auto step = decode_step(g, m, state, prev, enc);
      auto logp = g.log_softmax_row(step.logits);
      auto nll = g.neg(g.pick_per_row(logp, std::span(&target, 1)));
      total = total == nullptr ? nll : g.add(total, nll);
      state = step.state;
      prev = target;
    }
    return g.mul_scalar(total, 1.0 / static_cast<double>(tgt.size()));
  };

  {
    Graph g;
    const auto enc = encode(g, m, src);
    auto state = init_decoder(g, m, enc);
    TensorPtr total;
    int prev = Vocabulary::kBos;
    for (int target : tgt) {
      const auto step = decode_step(g, m, state, prev, enc);
      auto logp = g.log_softmax_row(step.logits);
      auto nll = g.neg(g.pick_per_row(logp, std::span(&target, 1)));
      total = total == nullptr ? nll : g.add(total, nll);
      state = step.state;
      prev = target;
    }
    auto loss = g.mul_scalar(total, 1.0 / static_cast<double>(tgt.size()));
    m.zero_grad();
    g.backward(loss);
  }

  const auto report = finite_diff_check([&]() { return loss_fn()->scalar(); }, m.named_params(),
                                        args.step, args.tol);
  std::cout << report.to_string();
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequence-to-sequence translation with sequence-level training"};
  app.require_subcommand(1);

  BpeLearnArgs bpe_learn_args;
  auto* learn = app.add_subcommand("bpe-learn", "learn BPE merges and build the joint vocabulary");
  learn->add_option("--input", bpe_learn_args.inputs, "raw text files (all languages)")
      ->required()
      ->expected(-1);
  learn->add_option("--merges", bpe_learn_args.merges, "number of merge rules")->required();
  learn->add_option("--vocab-cap", bpe_learn_args.vocab_cap, "vocabulary size cap");
  learn->add_option("--out-merges", bpe_learn_args.out_merges, "merge table output path");
  learn->add_option("--out-vocab", bpe_learn_args.out_vocab, "vocabulary output path");
  learn->add_flag("--no-preprocess", bpe_learn_args.no_preprocess,
                  "treat input as already preprocessed");
  learn->add_option("--run-dir", bpe_learn_args.run_dir, "run directory");

  BpeApplyArgs bpe_apply_args;
  auto* apply = app.add_subcommand("bpe-apply", "segment text with a learned merge table");
  apply->add_option("--merges", bpe_apply_args.merges, "merge table path")->required();
  apply->add_option("--input", bpe_apply_args.input, "raw text file")->required();
  apply->add_option("--output", bpe_apply_args.output, "segmented output path");
  apply->add_flag("--no-preprocess", bpe_apply_args.no_preprocess,
                  "treat input as already preprocessed");
  apply->add_option("--run-dir", bpe_apply_args.run_dir, "run directory");

  TrainJob train_defaults;
  KvConfig train_overrides;
  std::string train_config_path;
  std::string train_run_dir = default_run_dir("train");
  auto* train_cmd = app.add_subcommand("train", "train one regime (ce, ss or rl)");
  train_cmd->add_option("--config", train_config_path, "flat key=value config file");
  train_cmd->add_option("--run-dir", train_run_dir, "run directory");
  // Every config key is also a CLI flag; flags override the file.
  for (const auto& [key, help] :
       std::vector<std::pair<std::string, std::string>>{
           {"train-src", "training source text"},
           {"train-tgt", "training target text"},
           {"val-src", "validation source text"},
           {"val-tgt", "validation target text"},
           {"train-features", "training image features"},
           {"val-features", "validation image features"},
           {"merges", "BPE merge table"},
           {"vocab", "vocabulary file"},
           {"init-checkpoint", "starting checkpoint"},
           {"regime", "ce | ss | rl"},
           {"optimizer", "optimizer (only sgd)"},
           {"reward-metric", "RL reward metric (sentence-bleu)"},
           {"reward-max-order", "BLEU n-gram order"},
           {"reward-smooth", "add-one smoothing on zero-match orders"},
           {"embed-dim", "embedding dimension"},
           {"hidden-dim", "hidden dimension"},
           {"encoder-layers", "encoder layers"},
           {"image-feature-dim", "image feature dimension (0 = text only)"},
           {"dropout", "dropout rate"},
           {"batch-size", "batch size"},
           {"epochs", "epochs"},
           {"learning-rate", "SGD learning rate"},
           {"grad-clip-norm", "global gradient norm cap"},
           {"seed", "RNG seed"},
           {"ss-step", "scheduled-sampling epsilon increment"},
           {"ss-period", "epochs per epsilon increment"},
           {"ss-cap", "epsilon cap"},
           {"max-src-len", "source length cap"},
           {"max-tgt-len", "target length cap"},
           {"max-decode-len", "decode length cap"},
           {"sort-batches", "length-sort batch pools (true/false)"},
       }) {
    std::string kv_key = key;
    for (auto& c : kv_key) {
      if (c == '-') c = '_';
    }
    train_cmd->add_option_function<std::string>(
        "--" + key,
        [&train_overrides, kv_key](const std::string& v) { train_overrides.set(kv_key, v); },
        help);
  }

  std::string pipeline_config, pipeline_stages;
  std::string pipeline_run_dir = default_run_dir("pipeline");
  auto* pipeline_cmd =
      app.add_subcommand("pipeline", "run staged training (e.g. ce -> ss -> rl)");
  pipeline_cmd->add_option("--config", pipeline_config, "flat key=value config file")->required();
  pipeline_cmd->add_option("--stages", pipeline_stages, "comma-separated stage list override");
  pipeline_cmd->add_option("--run-dir", pipeline_run_dir, "run directory");

  TranslateArgs translate_args;
  auto* translate_cmd = app.add_subcommand("translate", "decode a source file with an ensemble");
  translate_cmd->add_option("--checkpoints", translate_args.checkpoints, "checkpoints to ensemble")
      ->required()
      ->expected(-1);
  translate_cmd->add_option("--merges", translate_args.merges, "BPE merge table")->required();
  translate_cmd->add_option("--vocab", translate_args.vocab, "vocabulary file")->required();
  translate_cmd->add_option("--source", translate_args.source, "source text file")->required();
  translate_cmd->add_option("--output", translate_args.output, "output path");
  translate_cmd->add_option("--beam", translate_args.beam, "beam size");
  translate_cmd->add_option("--length-reward", translate_args.length_reward,
                            "per-token length reward (lambda)");
  translate_cmd->add_option("--max-length", translate_args.max_length, "decode length cap");
  translate_cmd->add_option("--features", translate_args.features, "image feature file");
  translate_cmd->add_option("--reference", translate_args.reference,
                            "reference file for BLEU report");
  translate_cmd->add_option("--run-dir", translate_args.run_dir, "run directory");

  ScoreArgs score_args;
  auto* score_cmd = app.add_subcommand("score", "corpus and mean sentence BLEU of two files");
  score_cmd->add_option("--candidate", score_args.candidate, "candidate text file")->required();
  score_cmd->add_option("--reference", score_args.reference, "reference text file")->required();
  score_cmd->add_flag("--raw", score_args.raw, "skip preprocessing, split on whitespace");

  GradcheckArgs gradcheck_args;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of the full model gradient");
  gradcheck_cmd->add_option("--dims", gradcheck_args.dims, "dimension preset (toy)");
  gradcheck_cmd->add_option("--tol", gradcheck_args.tol, "max relative error tolerance");
  gradcheck_cmd->add_option("--step", gradcheck_args.step, "finite-difference step");
  gradcheck_cmd->add_option("--seed", gradcheck_args.seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (learn->parsed()) return run_bpe_learn(bpe_learn_args);
    if (apply->parsed()) return run_bpe_apply(bpe_apply_args);
    if (train_cmd->parsed()) {
      return run_train(train_defaults, train_config_path, train_overrides, train_run_dir);
    }
    if (pipeline_cmd->parsed()) {
      KvConfig overrides;
      if (!pipeline_stages.empty()) overrides.set("stages", pipeline_stages);
      return run_pipeline(pipeline_config, overrides, pipeline_run_dir);
    }
    if (translate_cmd->parsed()) return run_translate(translate_args);
    if (score_cmd->parsed()) return run_score(score_args);
    if (gradcheck_cmd->parsed()) return run_gradcheck(gradcheck_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
