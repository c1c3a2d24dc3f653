#include "mmt/vocab.hpp"

#include <algorithm>
#include <fstream>

#include "mmt/error.hpp"

namespace mmt {

const std::array<std::string, 4>& Vocabulary::specials() {
  static const std::array<std::string, 4> kSpecials = {"<pad>", "<unk>", "<s>", "</s>"};
  return kSpecials;
}

Vocabulary::Vocabulary() {
  for (const auto& s : specials()) append(s);
}

void Vocabulary::append(std::string token) {
  token_to_id_[token] = static_cast<int>(id_to_token_.size());
  id_to_token_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             std::size_t cap) {
  if (cap < 5) fail("config", "Vocabulary::build: cap must be at least 5, got " + std::to_string(cap));
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  const auto& sp = specials();
  for (auto& [tok, n] : ranked) {
    if (v.size() >= cap) break;
    if (std::find(sp.begin(), sp.end(), tok) != sp.end()) continue;
    v.append(std::move(tok));
  }
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    fail("vocab", "token id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (int i : ids) tokens.push_back(token(i));
  return tokens;
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ull;
  };
  for (const auto& tok : id_to_token_) {
    for (char c : tok) mix(static_cast<unsigned char>(c));
    mix('\n');
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("io", "cannot write vocabulary to " + path);
  for (const auto& tok : id_to_token_) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot read vocabulary from " + path);
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    if (lineno < 4) {
      if (line != specials()[lineno]) {
        fail("vocab", "vocabulary " + path + ": line " + std::to_string(lineno) +
                          " must be the special token " + specials()[lineno]);
      }
    } else {
      if (line.empty()) fail("vocab", "vocabulary " + path + ": empty token at line " +
                                          std::to_string(lineno));
      if (v.token_to_id_.count(line) != 0) {
        fail("vocab", "vocabulary " + path + ": duplicate token '" + line + "'");
      }
      v.append(line);
    }
    ++lineno;
  }
  if (lineno < 4) fail("vocab", "vocabulary " + path + ": fewer than the four special tokens");
  return v;
}

}  // namespace mmt
