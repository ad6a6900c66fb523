#pragma once

// Vocabulary, tokenization and span corruption for the denoising pretext task.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "revprio/corpus.hpp"
#include "revprio/error.hpp"
#include "revprio/hash.hpp"
#include "revprio/rng.hpp"

namespace revprio {

using TokenId = std::int32_t;

// Contiguous block of reserved sentinel ids: S_k has id first + k.
struct SentinelRange {
  TokenId first = 0;
  TokenId count = 0;

  bool contains(TokenId id) const noexcept { return id >= first && id < first + count; }
  TokenId at(TokenId k) const {
    if (k < 0 || k >= count) throw ArgumentError("sentinel index out of range");
    return first + k;
  }
};

// Lowercase, ASCII punctuation to space, split on whitespace.
inline std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c) || (c < 0x80 && std::ispunct(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kDefaultSentinels = 64;

  Vocabulary() : Vocabulary(std::vector<std::string>{}, kDefaultSentinels) {}

  // Corpus tokens get ids after the special block, in the given order.
  Vocabulary(std::vector<std::string> corpus_tokens, TokenId sentinel_count) {
    if (sentinel_count < 1) throw ArgumentError("vocabulary needs at least one sentinel");
    tokens_.push_back("<pad>");
    tokens_.push_back("<unk>");
    for (TokenId k = 0; k < sentinel_count; ++k) tokens_.push_back("<s" + std::to_string(k) + ">");
    sentinels_ = {2, sentinel_count};
    for (auto& t : corpus_tokens) {
      if (t.empty() || t.front() == '<') throw ArgumentError("invalid corpus token '" + t + "'");
      if (!index_.emplace(t, static_cast<TokenId>(tokens_.size())).second)
        throw ArgumentError("duplicate corpus token '" + t + "'");
      tokens_.push_back(std::move(t));
    }
  }

  TokenId size() const noexcept { return static_cast<TokenId>(tokens_.size()); }
  SentinelRange sentinels() const noexcept { return sentinels_; }
  TokenId first_corpus_id() const noexcept { return sentinels_.first + sentinels_.count; }

  bool is_special(TokenId id) const noexcept { return id < first_corpus_id(); }

  TokenId lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token(TokenId id) const {
    if (id < 0 || id >= size()) throw ArgumentError("token id out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // One token per line; line number is the id.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary " + path);
    for (const auto& t : tokens_) out << t << '\n';
    if (!out) throw IoError("write failed for " + path);
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary " + path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    if (lines.size() < 3 || lines[0] != "<pad>" || lines[1] != "<unk>")
      throw FormatError("vocabulary file " + path + " lacks the special header block");
    TokenId sentinels = 0;
    std::size_t i = 2;
    while (i < lines.size() && lines[i] == "<s" + std::to_string(sentinels) + ">") {
      ++sentinels;
      ++i;
    }
    return Vocabulary(std::vector<std::string>(lines.begin() + static_cast<std::ptrdiff_t>(i), lines.end()),
                      sentinels);
  }

  std::string fingerprint() const {
    Fnv1a64 h;
    for (const auto& t : tokens_) {
      h.update(t);
      h.update("\n");
    }
    return h.hex();
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  SentinelRange sentinels_;
};

// Every normalized token with frequency >= min_count, ordered by frequency
// descending then lexicographically.
inline Vocabulary build_vocab(const std::vector<Review>& corpus, std::size_t min_count,
                              TokenId sentinel_count = Vocabulary::kDefaultSentinels) {
  if (corpus.empty()) throw EmptyCorpusError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& r : corpus)
    for (auto& w : normalize_words(r.text)) ++freq[std::move(w)];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens), sentinel_count);
}

inline std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  std::vector<TokenId> ids;
  for (const auto& w : normalize_words(text)) {
    if (ids.size() >= max_len) break;
    ids.push_back(vocab.lookup(w));
  }
  if (ids.empty()) ids.push_back(Vocabulary::kUnk);
  return ids;
}

struct CorruptedExample {
  std::vector<TokenId> input_ids;
  std::vector<TokenId> target_ids;
  std::vector<std::size_t> dropped_positions;  // ascending, original positions

  bool operator==(const CorruptedExample&) const = default;
};

// Number of tokens dropped: round-half-up(rate * length).
inline std::size_t drop_count(double corruption_rate, std::size_t length) {
  return static_cast<std::size_t>(std::floor(corruption_rate * static_cast<double>(length) + 0.5));
}

// Builds the corrupted pair from an explicit set of dropped positions.
// Runs of consecutive positions collapse into one span; the k-th span becomes
// sentinel S_k in the input, and the target lists S_0 span_0 S_1 span_1 ...
inline CorruptedExample apply_spans(std::span<const TokenId> ids, std::vector<std::size_t> dropped,
                                    SentinelRange sentinels) {
  std::sort(dropped.begin(), dropped.end());
  if (std::adjacent_find(dropped.begin(), dropped.end()) != dropped.end())
    throw ArgumentError("dropped positions must be distinct");
  if (!dropped.empty() && dropped.back() >= ids.size()) throw ArgumentError("dropped position out of range");
  CorruptedExample ex;
  ex.dropped_positions = dropped;
  TokenId span = -1;
  std::size_t d = 0;
  for (std::size_t pos = 0; pos < ids.size(); ++pos) {
    const bool drop = d < dropped.size() && dropped[d] == pos;
    if (!drop) {
      ex.input_ids.push_back(ids[pos]);
      continue;
    }
    ++d;
    if (d < 2 || dropped[d - 2] + 1 != pos) {
      const TokenId s = sentinels.at(++span);
      ex.input_ids.push_back(s);
      ex.target_ids.push_back(s);
    }
    ex.target_ids.push_back(ids[pos]);
  }
  return ex;
}

// Samples exactly drop_count(rate, |ids|) positions without replacement
// (partial Fisher-Yates on the caller's stream) and applies them.
inline CorruptedExample corrupt_spans(std::span<const TokenId> ids, double corruption_rate, Rng& rng,
                                      SentinelRange sentinels) {
  if (!(corruption_rate >= 0.0 && corruption_rate < 1.0))
    throw ArgumentError("corruption_rate must lie in [0, 1)");
  if (ids.empty()) throw ArgumentError("cannot corrupt an empty sequence");
  const std::size_t n = drop_count(corruption_rate, ids.size());
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(n);
  return apply_spans(ids, std::move(order), sentinels);
}

// Inverse of apply_spans: substitutes each sentinel in the input with its span
// from the target.
inline std::vector<TokenId> reconstruct(const CorruptedExample& ex, SentinelRange sentinels) {
  std::vector<std::vector<TokenId>> spans;
  for (TokenId id : ex.target_ids) {
    if (sentinels.contains(id)) {
      if (id - sentinels.first != static_cast<TokenId>(spans.size()))
        throw FormatError("target sentinels out of order");
      spans.emplace_back();
    } else {
      if (spans.empty()) throw FormatError("target does not start with a sentinel");
      spans.back().push_back(id);
    }
  }
  std::vector<TokenId> out;
  for (TokenId id : ex.input_ids) {
    if (sentinels.contains(id)) {
      const auto k = static_cast<std::size_t>(id - sentinels.first);
      if (k >= spans.size()) throw FormatError("input sentinel without a target span");
      out.insert(out.end(), spans[k].begin(), spans[k].end());
    } else {
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace revprio
