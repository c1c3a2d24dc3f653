#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmt/tensor.hpp"

namespace mmt {

struct ModelConfig {
  std::size_t embed_dim = 500;
  std::size_t hidden_dim = 500;
  std::size_t encoder_layers = 2;
  std::size_t vocab_size = 0;
  std::size_t image_feature_dim = 0;  // 0 disables the image path
  double dropout_rate = 0.1;
  std::uint64_t seed = 1;
  std::size_t max_src_len = 100;
  std::size_t max_tgt_len = 100;

  bool multimodal() const { return image_feature_dim > 0; }
  void validate() const;
};

// One LSTM direction: gates in a single [(input+H) x 4H] block, columns
// ordered [input | forget | output | cell-candidate], plus a [4H] bias.
struct LstmWeights {
  TensorPtr w;
  TensorPtr b;
};

struct ModelParams {
  TensorPtr embedding;                              // [V x E], shared by both sides
  std::vector<std::array<LstmWeights, 2>> encoder;  // [layer][0=fwd, 1=bwd]
  LstmWeights decoder;                              // input = E + 2H (context feeding)
  TensorPtr attn_w;                                 // [H x H] query projection
  TensorPtr attn_u;                                 // [2H x H] annotation projection
  TensorPtr attn_b;                                 // [H]
  TensorPtr attn_v;                                 // [H x 1] score vector
  TensorPtr init_w;                                 // [H x 2H] encoder-state projection
  TensorPtr init_wimg;                              // [H x D] image projection (null when D=0)
  TensorPtr init_b;                                 // [H]
  TensorPtr comb_w;                                 // [3H x H] attentional-output projection
  TensorPtr comb_b;                                 // [H]
  TensorPtr out_w;                                  // [V x H] output projection
  TensorPtr out_b;                                  // [V]
};

struct Model {
  ModelConfig config;
  ModelParams params;
  std::uint64_t vocab_hash = 0;
  std::string regime_tag = "none";  // none | CE | SS | RL

  static Model create(const ModelConfig& config, std::uint64_t vocab_hash);

  // Stable name -> tensor order shared by SGD, checkpoints and grad checks.
  std::vector<std::pair<std::string, TensorPtr>> named_params() const;
  void zero_grad() const;
};

// Inverted dropout; a null rng or zero rate is a no-op (inference).
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  TensorPtr apply(Graph& g, const TensorPtr& x) const;
};

struct EncoderOutput {
  TensorPtr annotations;  // [S x 2H], top layer, both directions
  TensorPtr attn_keys;    // [S x H], precomputed annotation projection
  TensorPtr fwd_final;    // [1 x H]
  TensorPtr bwd_final;    // [1 x H]
  std::size_t src_len = 0;
};

struct DecoderState {
  TensorPtr hidden;   // [1 x H]
  TensorPtr cell;     // [1 x H]
  TensorPtr context;  // [1 x 2H] previous attention context (fed to the input)
  std::size_t step = 0;
};

struct StepResult {
  TensorPtr logits;     // [1 x V]
  DecoderState state;
  TensorPtr attention;  // [1 x S], sums to 1
};

// Two-layer bidirectional LSTM over the source ids; layer 2 consumes the
// concatenated per-direction outputs of layer 1.
EncoderOutput encode(Graph& g, const Model& m, std::span<const int> src,
                     const Dropout& dropout = {});

// Decoder start state: hidden = tanh(W_e [fwd; bwd] + W_img img + b),
// cell and context zero.
DecoderState init_decoder(Graph& g, const Model& m, const EncoderOutput& enc,
                          const std::vector<double>* image = nullptr);

// One attentional decoder step from prev_token.
StepResult decode_step(Graph& g, const Model& m, const DecoderState& state, int prev_token,
                       const EncoderOutput& enc, const Dropout& dropout = {});

// Logit offset that forbids generating PAD/UNK/BOS: 0 on allowed ids, -1e9 on
// banned ones. Sampling distributions are log-softmaxes of logits plus this.
TensorPtr generation_mask(std::size_t vocab_size);
bool generatable(int token_id);

// Checkpoint container: magic, version, config block, vocab hash, regime tag,
// then named little-endian float64 parameter blocks. Bit-exact round trip.
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace mmt
