#include "mmt/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mmt/error.hpp"

namespace mmt {

namespace {

// Decodes the next UTF-8 code point; invalid bytes decode as themselves.
std::uint32_t next_codepoint(std::string_view s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  std::uint32_t cp = b0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  }
  if (i + len > s.size()) {
    ++i;
    return b0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char bk = static_cast<unsigned char>(s[i + k]);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += len;
  return cp;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Lowercase for ASCII, Latin-1 supplement and Latin Extended-A; everything
// else passes through. Covers the En/De/Fr/Cs character inventory.
std::uint32_t lower_codepoint(std::uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // À..Þ minus ×
  if (cp >= 0x100 && cp <= 0x137) return (cp | 1u);              // Ā.. paired forms
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;  // Ĺ..Ň odd-uppercase
  if (cp >= 0x14A && cp <= 0x177) return (cp | 1u);
  if (cp == 0x178) return 0xFF;  // Ÿ
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;  // Ź Ž Ż
  return cp;
}

// Canonical quote/dash normalization; returns replacement text (may be
// several code points) or empty to keep the original.
std::string_view normalize_codepoint(std::uint32_t cp) {
  switch (cp) {
    case 0x2018: case 0x2019: case 0x201A: case 0x201B: case 0x2032: case 0x02BC:
      return "'";
    case 0x201C: case 0x201D: case 0x201E: case 0x201F: case 0x2033: case 0xAB: case 0xBB:
      return "\"";
    case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014: case 0x2015: case 0x2212:
      return "-";
    case 0x2026:
      return "...";
    case 0xA0: case 0x2009: case 0x200A: case 0x2002: case 0x2003:
      return " ";
    default:
      return {};
  }
}

bool is_space_cp(std::uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v';
}

bool is_punct_cp(std::uint32_t cp) {
  if (cp < 0x80) {
    return std::ispunct(static_cast<int>(cp)) != 0;
  }
  if (cp == 0xA1 || cp == 0xBF) return true;           // ¡ ¿
  if (cp >= 0x2000 && cp <= 0x206F) return true;       // general punctuation
  return false;
}

std::vector<std::string> read_lines(const std::string& path) {
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

}  // namespace

std::vector<std::string> preprocess(std::string_view raw) {
  // Pass 1: normalize + lowercase into a flat code point stream.
  std::vector<std::uint32_t> cps;
  cps.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    const std::uint32_t cp = next_codepoint(raw, i);
    const std::string_view repl = normalize_codepoint(cp);
    if (repl.empty()) {
      cps.push_back(lower_codepoint(cp));
    } else {
      std::size_t j = 0;
      while (j < repl.size()) cps.push_back(lower_codepoint(next_codepoint(repl, j)));
    }
  }
  // Pass 2: tokenize; punctuation detaches as single-codepoint tokens.
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(std::move(word));
      word.clear();
    }
  };
  for (std::uint32_t cp : cps) {
    if (is_space_cp(cp)) {
      flush();
    } else if (is_punct_cp(cp)) {
      flush();
      std::string p;
      append_utf8(p, cp);
      tokens.push_back(std::move(p));
    } else {
      append_utf8(word, cp);
    }
  }
  flush();
  return tokens;
}

std::string preprocess_to_line(std::string_view raw) {
  const auto tokens = preprocess(raw);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

void ParallelCorpus::validate() const {
  if (source.size() != target.size()) {
    fail("data", "corpus: " + std::to_string(source.size()) + " source vs " +
                     std::to_string(target.size()) + " target sentences");
  }
  if (!features.empty() && features.size() != source.size()) {
    fail("data", "corpus: " + std::to_string(features.size()) + " feature rows for " +
                     std::to_string(source.size()) + " pairs");
  }
  for (const auto& row : features) {
    if (row.size() != feature_dim) fail("data", "corpus: inconsistent feature dimension");
  }
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i].empty() || target[i].empty()) {
      fail("data", "corpus: empty sentence at pair " + std::to_string(i));
    }
  }
}

ParallelCorpus load_parallel_corpus(const std::string& source_path, const std::string& target_path,
                                    const MergeTable& bpe, const Vocabulary& vocab,
                                    const LoadOptions& opts, LoadStats* stats) {
  const auto src_lines = read_lines(source_path);
  const auto tgt_lines = read_lines(target_path);
  if (src_lines.size() != tgt_lines.size()) {
    fail("data", "parallel files differ in length: " + source_path + " has " +
                     std::to_string(src_lines.size()) + " lines, " + target_path + " has " +
                     std::to_string(tgt_lines.size()));
  }
  LoadStats local;
  ParallelCorpus corpus;
  corpus.vocab_hash = vocab.content_hash();
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    auto src_words = preprocess(src_lines[i]);
    auto tgt_words = preprocess(tgt_lines[i]);
    if (src_words.empty() || tgt_words.empty()) {
      ++local.dropped_empty;
      continue;
    }
    auto src_ids = vocab.encode(apply_bpe(bpe, src_words));
    auto tgt_ids = vocab.encode(apply_bpe(bpe, tgt_words));
    if (src_ids.size() > opts.max_len || tgt_ids.size() > opts.max_len) {
      if (opts.drop_long) {
        ++local.dropped_long;
        continue;
      }
      if (src_ids.size() > opts.max_len) src_ids.resize(opts.max_len);
      if (tgt_ids.size() > opts.max_len) tgt_ids.resize(opts.max_len);
      ++local.truncated;
    }
    corpus.source.push_back(std::move(src_ids));
    corpus.target.push_back(std::move(tgt_ids));
    corpus.source_lang.push_back(opts.source_lang);
  }
  if (stats != nullptr) *stats = local;
  corpus.validate();
  return corpus;
}

void attach_features(ParallelCorpus& corpus, std::vector<std::vector<double>> features) {
  if (features.size() != corpus.size()) {
    fail("data", "attach_features: " + std::to_string(features.size()) + " rows for " +
                     std::to_string(corpus.size()) + " pairs");
  }
  corpus.feature_dim = features.empty() ? 0 : features[0].size();
  corpus.features = std::move(features);
  corpus.validate();
}

void seeded_shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
}

std::vector<Batch> make_batches(const ParallelCorpus& corpus, std::size_t batch_size,
                                std::uint64_t seed, bool sort_within) {
  if (corpus.size() == 0) fail("data", "make_batches: empty corpus");
  if (batch_size == 0) fail("config", "make_batches: batch_size must be >= 1");
  corpus.validate();

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  seeded_shuffle(order, rng);
  if (sort_within) {
    const std::size_t pool = batch_size * 20;
    for (std::size_t start = 0; start < order.size(); start += pool) {
      const std::size_t end = std::min(start + pool, order.size());
      std::stable_sort(order.begin() + start, order.begin() + end,
                       [&corpus](std::size_t a, std::size_t b) {
                         return corpus.source[a].size() < corpus.source[b].size();
                       });
    }
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, order.size());
    Batch b;
    std::size_t max_src = 0, max_tgt = 0;
    for (std::size_t k = start; k < end; ++k) {
      max_src = std::max(max_src, corpus.source[order[k]].size());
      max_tgt = std::max(max_tgt, corpus.target[order[k]].size() + 2);  // BOS/EOS
    }
    for (std::size_t k = start; k < end; ++k) {
      const auto& src = corpus.source[order[k]];
      const auto& tgt = corpus.target[order[k]];
      std::vector<int> src_row(max_src, Vocabulary::kPad);
      std::copy(src.begin(), src.end(), src_row.begin());
      std::vector<int> tgt_row(max_tgt, Vocabulary::kPad);
      std::vector<std::uint8_t> mask_row(max_tgt, 0);
      tgt_row[0] = Vocabulary::kBos;
      std::copy(tgt.begin(), tgt.end(), tgt_row.begin() + 1);
      tgt_row[tgt.size() + 1] = Vocabulary::kEos;
      for (std::size_t j = 1; j <= tgt.size() + 1; ++j) mask_row[j] = 1;
      b.src.push_back(std::move(src_row));
      b.tgt.push_back(std::move(tgt_row));
      b.src_len.push_back(src.size());
      b.tgt_mask.push_back(std::move(mask_row));
      if (corpus.has_features()) b.features.push_back(corpus.features[order[k]]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

ParallelCorpus shuffle_mix(const std::vector<ParallelCorpus>& corpora, std::uint64_t seed) {
  if (corpora.empty()) fail("data", "shuffle_mix: no corpora");
  const std::uint64_t hash = corpora[0].vocab_hash;
  const bool with_features = corpora[0].has_features();
  for (const auto& c : corpora) {
    c.validate();
    if (c.vocab_hash != hash) {
      fail("vocab", "shuffle_mix: corpora were encoded with different vocabularies");
    }
    if (c.has_features() != with_features) {
      fail("data", "shuffle_mix: feature presence differs between corpora");
    }
    if (with_features && c.feature_dim != corpora[0].feature_dim) {
      fail("data", "shuffle_mix: feature dimensions differ between corpora");
    }
  }

  ParallelCorpus mixed;
  mixed.vocab_hash = hash;
  mixed.feature_dim = with_features ? corpora[0].feature_dim : 0;
  for (const auto& c : corpora) {
    mixed.source.insert(mixed.source.end(), c.source.begin(), c.source.end());
    mixed.target.insert(mixed.target.end(), c.target.begin(), c.target.end());
    mixed.source_lang.insert(mixed.source_lang.end(), c.source_lang.begin(), c.source_lang.end());
    if (with_features) {
      mixed.features.insert(mixed.features.end(), c.features.begin(), c.features.end());
    }
  }

  std::vector<std::size_t> order(mixed.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  seeded_shuffle(order, rng);

  ParallelCorpus out;
  out.vocab_hash = mixed.vocab_hash;
  out.feature_dim = mixed.feature_dim;
  for (std::size_t idx : order) {
    out.source.push_back(std::move(mixed.source[idx]));
    out.target.push_back(std::move(mixed.target[idx]));
    out.source_lang.push_back(std::move(mixed.source_lang[idx]));
    if (with_features) out.features.push_back(std::move(mixed.features[idx]));
  }
  return out;
}

std::vector<std::vector<double>> load_features(const std::string& path,
                                               std::size_t expected_count) {
  auto rows = load_features(path);
  if (rows.size() != expected_count) {
    fail("data", "feature file " + path + ": expected " + std::to_string(expected_count) +
                     " rows, found " + std::to_string(rows.size()));
  }
  return rows;
}

std::vector<std::vector<double>> load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot read feature file " + path);
  std::string tag_dim, tag_count;
  std::size_t dim = 0, count = 0;
  if (!(in >> tag_dim >> dim >> tag_count >> count) || tag_dim != "dim" || tag_count != "count") {
    fail("data", "feature file " + path + ": header must be \"dim D count N\"");
  }
  std::vector<std::vector<double>> rows;
  rows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> row(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      if (!(in >> row[j])) {
        fail("data", "feature file " + path + ": expected " + std::to_string(count) + " rows of " +
                         std::to_string(dim) + " values, ran out at row " + std::to_string(i));
      }
    }
    rows.push_back(std::move(row));
  }
  double extra;
  if (in >> extra) fail("data", "feature file " + path + ": trailing values beyond the declared count");
  return rows;
}

void save_features(const std::string& path, const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot write feature file " + path);
  const std::size_t dim = rows.empty() ? 0 : rows[0].size();
  out << "dim " << dim << " count " << rows.size() << "\n";
  char buf[64];
  for (const auto& row : rows) {
    if (row.size() != dim) fail("data", "save_features: ragged feature rows");
    for (std::size_t j = 0; j < row.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
      out << (j ? " " : "") << buf;
    }
    out << "\n";
  }
}

}  // namespace mmt
