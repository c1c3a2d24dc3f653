#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mmt {

// End-of-word marker, attached to the last character of every word before
// pair counting (suffix convention). "low" starts as ["l", "o", "w</w>"].
inline constexpr const char* kEndOfWord = "</w>";

// Splits a word into UTF-8 code points; bytes that do not form a valid
// sequence pass through as single-byte symbols.
std::vector<std::string> split_utf8(std::string_view word);

// Ordered byte-pair merge rules. Immutable once learned; rank order is the
// application order and is dense from 0.
class MergeTable {
 public:
  MergeTable() = default;

  std::size_t size() const { return merges_.size(); }
  const std::pair<std::string, std::string>& merge(std::size_t rank) const {
    return merges_[rank];
  }
  // Rank of a symbol pair, or npos when the pair was never merged.
  std::size_t rank(const std::string& left, const std::string& right) const;
  void add(std::string left, std::string right);

  // One rule per line, two space-separated symbols, rank = line number.
  void save(const std::string& path) const;
  static MergeTable load(const std::string& path);

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, std::size_t> rank_;
};

// Learns merge rules over whitespace-pretokenized sentences. Produces exactly
// num_merges rules unless no pair occurs at least twice; ties on pair
// frequency break lexicographically.
MergeTable learn_bpe(const std::vector<std::string>& sentences, std::size_t num_merges);

// Greedy lowest-rank-first segmentation of one word (marker already implied).
std::vector<std::string> apply_bpe_word(const MergeTable& table, std::string_view word);

// Segments a whole pretokenized sentence; concatenating the output and
// stripping markers reconstructs the input words exactly.
std::vector<std::string> apply_bpe(const MergeTable& table, const std::vector<std::string>& words);

// Inverse of apply_bpe: joins subwords back into the space-separated sentence.
std::string bpe_detokenize(const std::vector<std::string>& subwords);
std::vector<std::string> bpe_detokenize_words(const std::vector<std::string>& subwords);

}  // namespace mmt
