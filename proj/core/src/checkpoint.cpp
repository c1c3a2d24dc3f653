#include <cstring>
#include <fstream>

#include "mmt/model.hpp"

namespace mmt {

namespace {

// Fixed little-endian layout; written and read via memcpy on LE hosts.
constexpr char kMagic[8] = {'M', 'M', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& out, T v) {
  write_bytes(out, &v, sizeof(T));
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  write_bytes(out, s.data(), s.size());
}

void read_bytes(std::istream& in, void* p, std::size_t n, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    fail("io", "checkpoint " + path + ": truncated or corrupt");
  }
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v;
  read_bytes(in, &v, sizeof(T), path);
  return v;
}

std::string read_string(std::istream& in, const std::string& path) {
  const auto n = read_pod<std::uint32_t>(in, path);
  if (n > (1u << 20)) fail("io", "checkpoint " + path + ": implausible string length");
  std::string s(n, '\0');
  read_bytes(in, s.data(), n, path);
  return s;
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot write checkpoint " + path);
  write_bytes(out, kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint64_t>(out, m.config.embed_dim);
  write_pod<std::uint64_t>(out, m.config.hidden_dim);
  write_pod<std::uint64_t>(out, m.config.encoder_layers);
  write_pod<std::uint64_t>(out, m.config.vocab_size);
  write_pod<std::uint64_t>(out, m.config.image_feature_dim);
  write_pod<double>(out, m.config.dropout_rate);
  write_pod<std::uint64_t>(out, m.config.seed);
  write_pod<std::uint64_t>(out, m.config.max_src_len);
  write_pod<std::uint64_t>(out, m.config.max_tgt_len);
  write_pod<std::uint64_t>(out, m.vocab_hash);
  write_string(out, m.regime_tag);

  const auto named = m.named_params();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    write_string(out, name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t->shape.size()));
    for (std::size_t e : t->shape) write_pod<std::uint64_t>(out, e);
    write_bytes(out, t->data.data(), t->data.size() * sizeof(double));
  }
  out.flush();
  if (!out) fail("io", "failed while writing checkpoint " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot read checkpoint " + path);
  char magic[8];
  read_bytes(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail("io", "checkpoint " + path + ": bad magic, not a checkpoint file");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    fail("io", "checkpoint " + path + ": format version " + std::to_string(version) +
                   ", expected " + std::to_string(kVersion));
  }
  ModelConfig config;
  config.embed_dim = read_pod<std::uint64_t>(in, path);
  config.hidden_dim = read_pod<std::uint64_t>(in, path);
  config.encoder_layers = read_pod<std::uint64_t>(in, path);
  config.vocab_size = read_pod<std::uint64_t>(in, path);
  config.image_feature_dim = read_pod<std::uint64_t>(in, path);
  config.dropout_rate = read_pod<double>(in, path);
  config.seed = read_pod<std::uint64_t>(in, path);
  config.max_src_len = read_pod<std::uint64_t>(in, path);
  config.max_tgt_len = read_pod<std::uint64_t>(in, path);
  const auto vocab_hash = read_pod<std::uint64_t>(in, path);
  const auto regime_tag = read_string(in, path);

  Model m = Model::create(config, vocab_hash);
  m.regime_tag = regime_tag;
  const auto named = m.named_params();
  const auto count = read_pod<std::uint32_t>(in, path);
  if (count != named.size()) {
    fail("io", "checkpoint " + path + ": " + std::to_string(count) + " parameter blocks, expected " +
                   std::to_string(named.size()));
  }
  for (const auto& [name, t] : named) {
    const auto stored_name = read_string(in, path);
    if (stored_name != name) {
      fail("io", "checkpoint " + path + ": parameter '" + stored_name + "', expected '" + name + "'");
    }
    const auto rank = read_pod<std::uint32_t>(in, path);
    if (rank != t->shape.size()) {
      fail("io", "checkpoint " + path + ": rank mismatch for '" + name + "'");
    }
    for (std::size_t d = 0; d < rank; ++d) {
      const auto extent = read_pod<std::uint64_t>(in, path);
      if (extent != t->shape[d]) {
        fail("io", "checkpoint " + path + ": shape mismatch for '" + name + "'");
      }
    }
    read_bytes(in, t->data.data(), t->data.size() * sizeof(double), path);
  }
  char extra;
  if (in.read(&extra, 1)) fail("io", "checkpoint " + path + ": trailing bytes");
  return m;
}

}  // namespace mmt
