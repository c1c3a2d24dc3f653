#include "mmt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "mmt/error.hpp"

namespace mmt {

namespace {

std::string pair_key(const std::string& left, const std::string& right) {
  std::string k = left;
  k.push_back('\x1f');
  k += right;
  return k;
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) words.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return words;
}

// Initial symbol sequence for a word: code points with the marker glued onto
// the last one.
std::vector<std::string> word_symbols(std::string_view word) {
  std::vector<std::string> syms = split_utf8(word);
  if (!syms.empty()) syms.back() += kEndOfWord;
  return syms;
}

// Merges every non-overlapping occurrence of (left, right), left to right.
void merge_in_place(std::vector<std::string>& syms, const std::string& left,
                    const std::string& right) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < syms.size();) {
    if (r + 1 < syms.size() && syms[r] == left && syms[r + 1] == right) {
      syms[w] = left + right;
      r += 2;
    } else {
      if (w != r) syms[w] = std::move(syms[r]);
      r += 1;
    }
    ++w;
  }
  syms.resize(w);
}

}  // namespace

std::vector<std::string> split_utf8(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const unsigned char b = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if ((b & 0x80) == 0x00) len = 1;
    else if ((b & 0xE0) == 0xC0) len = 2;
    else if ((b & 0xF0) == 0xE0) len = 3;
    else if ((b & 0xF8) == 0xF0) len = 4;
    if (i + len > word.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(word[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

std::size_t MergeTable::rank(const std::string& left, const std::string& right) const {
  auto it = rank_.find(pair_key(left, right));
  return it == rank_.end() ? npos : it->second;
}

void MergeTable::add(std::string left, std::string right) {
  rank_[pair_key(left, right)] = merges_.size();
  merges_.emplace_back(std::move(left), std::move(right));
}

void MergeTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("io", "cannot write merge table to " + path);
  for (const auto& [l, r] : merges_) out << l << ' ' << r << '\n';
}

MergeTable MergeTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot read merge table from " + path);
  MergeTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string l, r, extra;
    if (!(ls >> l >> r) || (ls >> extra)) {
      fail("io", "merge table " + path + ": line " + std::to_string(lineno) +
                     " is not two space-separated symbols");
    }
    table.add(std::move(l), std::move(r));
  }
  return table;
}

MergeTable learn_bpe(const std::vector<std::string>& sentences, std::size_t num_merges) {
  if (sentences.empty()) fail("data", "learn_bpe: empty corpus");

  // Distinct words with multiplicities, in first-seen order.
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  std::unordered_map<std::string, std::size_t> index;
  bool any_word = false;
  for (const auto& sentence : sentences) {
    for (const auto& w : split_whitespace(sentence)) {
      any_word = true;
      auto [it, fresh] = index.try_emplace(w, words.size());
      if (fresh) {
        words.emplace_back(word_symbols(w), 0);
      }
      words[it->second].second += 1;
    }
  }
  if (!any_word) fail("data", "learn_bpe: corpus contains no words");

  MergeTable table;
  for (std::size_t m = 0; m < num_merges; ++m) {
    std::unordered_map<std::string, std::size_t> counts;
    std::unordered_map<std::string, std::pair<std::string, std::string>> pair_of;
    for (const auto& [syms, freq] : words) {
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        const std::string key = pair_key(syms[i], syms[i + 1]);
        counts[key] += freq;
        pair_of.try_emplace(key, syms[i], syms[i + 1]);
      }
    }
    // Best by count, ties lexicographic on the pair; deterministic regardless
    // of hash iteration order.
    const std::pair<std::string, std::string>* best = nullptr;
    std::size_t best_count = 1;  // a pair must occur at least twice
    for (const auto& [key, count] : counts) {
      const auto& pr = pair_of.at(key);
      if (count > best_count || (count == best_count && best != nullptr && pr < *best)) {
        best_count = count;
        best = &pr;
      }
    }
    if (best == nullptr) break;
    table.add(best->first, best->second);
    for (auto& [syms, freq] : words) merge_in_place(syms, best->first, best->second);
  }
  return table;
}

std::vector<std::string> apply_bpe_word(const MergeTable& table, std::string_view word) {
  std::vector<std::string> syms = word_symbols(word);
  while (syms.size() > 1) {
    std::size_t best_rank = MergeTable::npos;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      best_rank = std::min(best_rank, table.rank(syms[i], syms[i + 1]));
    }
    if (best_rank == MergeTable::npos) break;
    const auto& [l, r] = table.merge(best_rank);
    merge_in_place(syms, l, r);
  }
  return syms;
}

std::vector<std::string> apply_bpe(const MergeTable& table, const std::vector<std::string>& words) {
  std::vector<std::string> out;
  for (const auto& w : words) {
    auto syms = apply_bpe_word(table, w);
    out.insert(out.end(), std::make_move_iterator(syms.begin()),
               std::make_move_iterator(syms.end()));
  }
  return out;
}

std::vector<std::string> bpe_detokenize_words(const std::vector<std::string>& subwords) {
  const std::string marker = kEndOfWord;
  std::vector<std::string> words;
  std::string current;
  for (const auto& s : subwords) {
    if (s.size() >= marker.size() && s.compare(s.size() - marker.size(), marker.size(), marker) == 0) {
      current += s.substr(0, s.size() - marker.size());
      words.push_back(std::move(current));
      current.clear();
    } else {
      current += s;
    }
  }
  if (!current.empty()) words.push_back(std::move(current));  // unterminated tail
  return words;
}

std::string bpe_detokenize(const std::vector<std::string>& subwords) {
  const auto words = bpe_detokenize_words(subwords);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace mmt
