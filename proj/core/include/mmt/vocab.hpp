#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmt {

// Shared token<->id map with reserved specials at fixed ids. Immutable after
// construction, safe to share read-only.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static const std::array<std::string, 4>& specials();

  Vocabulary();  // specials only

  // Keeps the most frequent tokens up to cap total entries (including the
  // four specials); frequency ties break lexicographically. cap must be >= 5.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          std::size_t cap);

  int id(std::string_view token) const;  // kUnk for unknown tokens
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

  // FNV-1a over the full token list; used to pair checkpoints, corpora and
  // ensembles that must agree on the id space.
  std::uint64_t content_hash() const;

  // One token per line, id = line number, first four lines are the specials.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  void append(std::string token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

}  // namespace mmt
