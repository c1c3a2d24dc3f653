#include "mmt/model.hpp"

#include <cmath>

#include "mmt/vocab.hpp"

namespace mmt {

void ModelConfig::validate() const {
  if (embed_dim == 0 || hidden_dim == 0 || encoder_layers == 0) {
    fail("config", "model config: dims and layer count must be positive");
  }
  if (vocab_size < 5) fail("config", "model config: vocab_size must cover the specials");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    fail("config", "model config: dropout_rate must be in [0, 1)");
  }
  if (max_src_len == 0 || max_tgt_len == 0) {
    fail("config", "model config: max lengths must be positive");
  }
}

Model Model::create(const ModelConfig& config, std::uint64_t vocab_hash) {
  config.validate();
  const std::size_t e = config.embed_dim;
  const std::size_t h = config.hidden_dim;
  const std::size_t v = config.vocab_size;
  std::mt19937_64 rng(config.seed);

  Model m;
  m.config = config;
  m.vocab_hash = vocab_hash;
  auto& p = m.params;
  p.embedding = make_param({v, e}, rng);
  for (std::size_t layer = 0; layer < config.encoder_layers; ++layer) {
    const std::size_t in = layer == 0 ? e : 2 * h;
    std::array<LstmWeights, 2> dirs;
    for (auto& d : dirs) {
      d.w = make_param({in + h, 4 * h}, rng);
      d.b = make_param({4 * h}, rng);
    }
    p.encoder.push_back(dirs);
  }
  p.decoder.w = make_param({e + 2 * h + h, 4 * h}, rng);
  p.decoder.b = make_param({4 * h}, rng);
  p.attn_w = make_param({h, h}, rng);
  p.attn_u = make_param({2 * h, h}, rng);
  p.attn_b = make_param({h}, rng);
  p.attn_v = make_param({h, 1}, rng);
  p.init_w = make_param({h, 2 * h}, rng);
  if (config.multimodal()) p.init_wimg = make_param({h, config.image_feature_dim}, rng);
  p.init_b = make_param({h}, rng);
  p.comb_w = make_param({3 * h, h}, rng);
  p.comb_b = make_param({h}, rng);
  p.out_w = make_param({v, h}, rng);
  p.out_b = make_param({v}, rng);
  return m;
}

std::vector<std::pair<std::string, TensorPtr>> Model::named_params() const {
  std::vector<std::pair<std::string, TensorPtr>> named;
  named.emplace_back("embedding", params.embedding);
  for (std::size_t layer = 0; layer < params.encoder.size(); ++layer) {
    const char* dir_name[2] = {"fwd", "bwd"};
    for (std::size_t d = 0; d < 2; ++d) {
      const std::string base = "enc_l" + std::to_string(layer) + "_" + dir_name[d];
      named.emplace_back(base + "_w", params.encoder[layer][d].w);
      named.emplace_back(base + "_b", params.encoder[layer][d].b);
    }
  }
  named.emplace_back("dec_w", params.decoder.w);
  named.emplace_back("dec_b", params.decoder.b);
  named.emplace_back("attn_w", params.attn_w);
  named.emplace_back("attn_u", params.attn_u);
  named.emplace_back("attn_b", params.attn_b);
  named.emplace_back("attn_v", params.attn_v);
  named.emplace_back("init_w", params.init_w);
  if (params.init_wimg) named.emplace_back("init_wimg", params.init_wimg);
  named.emplace_back("init_b", params.init_b);
  named.emplace_back("comb_w", params.comb_w);
  named.emplace_back("comb_b", params.comb_b);
  named.emplace_back("out_w", params.out_w);
  named.emplace_back("out_b", params.out_b);
  return named;
}

void Model::zero_grad() const {
  for (auto& [name, t] : named_params()) t->zero_grad();
}

TensorPtr Dropout::apply(Graph& g, const TensorPtr& x) const {
  if (rate <= 0.0 || rng == nullptr) return x;
  auto mask = make_tensor(x->shape);
  const double keep = 1.0 - rate;
  for (double& v : mask->data) v = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
  return g.mul(x, mask);
}

namespace {

// One LSTM cell step; returns (hidden, cell), each [1 x H].
std::pair<TensorPtr, TensorPtr> lstm_step(Graph& g, const LstmWeights& w, const TensorPtr& x,
                                          const TensorPtr& h_prev, const TensorPtr& c_prev) {
  const std::size_t h = h_prev->cols();
  auto lin = g.add_rowvec(g.matmul(concat_cols2(g, x, h_prev), w.w), w.b);
  auto gate_i = g.sigmoid(g.slice_cols(lin, 0, h));
  auto gate_f = g.sigmoid(g.slice_cols(lin, h, h));
  auto gate_o = g.sigmoid(g.slice_cols(lin, 2 * h, h));
  auto cand = g.tanh(g.slice_cols(lin, 3 * h, h));
  auto cell = g.add(g.mul(gate_f, c_prev), g.mul(gate_i, cand));
  auto hidden = g.mul(gate_o, g.tanh(cell));
  return {hidden, cell};
}

// Runs one direction over the given per-position inputs; returns the output
// at every position plus the final hidden state.
struct DirectionOutput {
  std::vector<TensorPtr> outputs;
  TensorPtr final_hidden;
};

DirectionOutput run_direction(Graph& g, const LstmWeights& w, const std::vector<TensorPtr>& inputs,
                              std::size_t hidden_dim, bool reversed) {
  DirectionOutput out;
  out.outputs.resize(inputs.size());
  TensorPtr h = make_tensor({1, hidden_dim});
  TensorPtr c = make_tensor({1, hidden_dim});
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t pos = reversed ? inputs.size() - 1 - k : k;
    auto [nh, nc] = lstm_step(g, w, inputs[pos], h, c);
    h = nh;
    c = nc;
    out.outputs[pos] = h;
  }
  out.final_hidden = h;
  return out;
}

}  // namespace

EncoderOutput encode(Graph& g, const Model& m, std::span<const int> src, const Dropout& dropout) {
  if (src.empty()) fail("data", "encode: empty source");
  if (src.size() > m.config.max_src_len) {
    fail("data", "encode: source length " + std::to_string(src.size()) + " exceeds max " +
                     std::to_string(m.config.max_src_len));
  }
  const std::size_t h = m.config.hidden_dim;

  // Per-position embeddings, dropout on the lookup output.
  std::vector<TensorPtr> layer_in(src.size());
  for (std::size_t t = 0; t < src.size(); ++t) {
    const int id = src[t];
    layer_in[t] = dropout.apply(g, g.gather_rows(m.params.embedding, std::span(&id, 1)));
  }

  DirectionOutput fwd, bwd;
  for (std::size_t layer = 0; layer < m.params.encoder.size(); ++layer) {
    fwd = run_direction(g, m.params.encoder[layer][0], layer_in, h, false);
    bwd = run_direction(g, m.params.encoder[layer][1], layer_in, h, true);
    if (layer + 1 < m.params.encoder.size()) {
      // Inter-layer connection: concatenated directions, with dropout.
      for (std::size_t t = 0; t < src.size(); ++t) {
        layer_in[t] = dropout.apply(g, concat_cols2(g, fwd.outputs[t], bwd.outputs[t]));
      }
    }
  }

  std::vector<TensorPtr> rows(src.size());
  for (std::size_t t = 0; t < src.size(); ++t) {
    rows[t] = concat_cols2(g, fwd.outputs[t], bwd.outputs[t]);
  }
  EncoderOutput enc;
  enc.annotations = g.concat_rows(rows);
  enc.attn_keys = g.add_rowvec(g.matmul(enc.annotations, m.params.attn_u), m.params.attn_b);
  enc.fwd_final = fwd.final_hidden;
  enc.bwd_final = bwd.final_hidden;
  enc.src_len = src.size();
  return enc;
}

DecoderState init_decoder(Graph& g, const Model& m, const EncoderOutput& enc,
                          const std::vector<double>* image) {
  const std::size_t h = m.config.hidden_dim;
  if (m.config.multimodal()) {
    if (image == nullptr) {
      fail("data", "init_decoder: model expects an image feature vector of dim " +
                       std::to_string(m.config.image_feature_dim));
    }
    if (image->size() != m.config.image_feature_dim) {
      fail("data", "init_decoder: image feature dim " + std::to_string(image->size()) +
                       ", model expects " + std::to_string(m.config.image_feature_dim));
    }
  } else if (image != nullptr && !image->empty()) {
    fail("data", "init_decoder: text-only model given an image feature vector");
  }

  auto enc_cat = concat_cols2(g, enc.fwd_final, enc.bwd_final);          // [1 x 2H]
  auto pre = g.matmul(enc_cat, g.transpose(m.params.init_w));            // [1 x H]
  if (m.config.multimodal()) {
    auto img = make_tensor({1, m.config.image_feature_dim}, *image);
    pre = g.add(pre, g.matmul(img, g.transpose(m.params.init_wimg)));
  }
  DecoderState state;
  state.hidden = g.tanh(g.add_rowvec(pre, m.params.init_b));
  state.cell = make_tensor({1, h});
  state.context = make_tensor({1, 2 * h});
  state.step = 0;
  return state;
}

StepResult decode_step(Graph& g, const Model& m, const DecoderState& state, int prev_token,
                       const EncoderOutput& enc, const Dropout& dropout) {
  if (prev_token < 0 || static_cast<std::size_t>(prev_token) >= m.config.vocab_size) {
    fail("vocab", "decode_step: token id " + std::to_string(prev_token) +
                      " outside vocabulary of size " + std::to_string(m.config.vocab_size));
  }
  auto embed = dropout.apply(g, g.gather_rows(m.params.embedding, std::span(&prev_token, 1)));
  auto x = concat_cols2(g, embed, state.context);
  auto [hidden, cell] = lstm_step(g, m.params.decoder, x, state.hidden, state.cell);

  // Additive attention: softmax_j v' tanh(W h + U a_j + b).
  auto query = g.matmul(hidden, m.params.attn_w);                       // [1 x H]
  auto scores = g.matmul(g.tanh(g.add_rowvec(enc.attn_keys, query)), m.params.attn_v);
  auto attention = g.softmax_row(g.transpose(scores));                  // [1 x S]
  auto context = g.matmul(attention, enc.annotations);                  // [1 x 2H]

  auto comb = g.tanh(
      g.add_rowvec(g.matmul(concat_cols2(g, hidden, context), m.params.comb_w), m.params.comb_b));
  comb = dropout.apply(g, comb);
  auto logits = g.add_rowvec(g.matmul(comb, g.transpose(m.params.out_w)), m.params.out_b);

  StepResult r;
  r.logits = logits;
  r.state = DecoderState{hidden, cell, context, state.step + 1};
  r.attention = attention;
  return r;
}

TensorPtr generation_mask(std::size_t vocab_size) {
  auto mask = make_tensor({1, vocab_size});
  mask->data[Vocabulary::kPad] = -1e9;
  mask->data[Vocabulary::kUnk] = -1e9;
  mask->data[Vocabulary::kBos] = -1e9;
  return mask;
}

bool generatable(int token_id) {
  return token_id != Vocabulary::kPad && token_id != Vocabulary::kUnk &&
         token_id != Vocabulary::kBos;
}

}  // namespace mmt
