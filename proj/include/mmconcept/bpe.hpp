#pragma once

// Byte-level byte-pair encoding.
//
// Id layout: 5 special tokens (0..4), then the 256 byte symbols, then one id
// per merge rule in training order. Text is pre-tokenized into pieces made of
// a whitespace run followed by a non-whitespace run; merges never cross a
// piece boundary.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmconcept/tree.hpp"

namespace mmconcept {

struct MergeRule {
  int left = 0;
  int right = 0;

  bool operator==(const MergeRule&) const = default;
};

struct BpeTrainOptions {
  std::size_t vocab_size = 4000;
  std::size_t min_frequency = 2;
};

inline bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

/// Splits text into [whitespace*][non-whitespace*] pieces; concatenating the
/// pieces gives back the input.
inline std::vector<std::string_view> split_pieces(std::string_view text) {
  std::vector<std::string_view> pieces;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i;
    while (j < text.size() && is_space_byte(static_cast<unsigned char>(text[j]))) ++j;
    while (j < text.size() && !is_space_byte(static_cast<unsigned char>(text[j]))) ++j;
    pieces.push_back(text.substr(i, j - i));
    i = j;
  }
  return pieces;
}

namespace detail {

// Printable stand-ins for raw bytes in the vocabulary file (GPT-2 convention).
inline const std::array<std::uint32_t, 256>& byte_to_codepoint() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    std::array<bool, 256> direct{};
    for (int b = '!'; b <= '~'; ++b) direct[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
    std::uint32_t extra = 0;
    for (int b = 0; b < 256; ++b) t[b] = direct[b] ? static_cast<std::uint32_t>(b) : 256 + extra++;
    return t;
  }();
  return table;
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string bytes_to_printable(std::string_view bytes) {
  std::string out;
  for (unsigned char b : bytes) append_utf8(out, byte_to_codepoint()[b]);
  return out;
}

inline std::string printable_to_bytes(std::string_view text) {
  static const std::unordered_map<std::uint32_t, unsigned char> inverse = [] {
    std::unordered_map<std::uint32_t, unsigned char> inv;
    for (int b = 0; b < 256; ++b) inv[byte_to_codepoint()[b]] = static_cast<unsigned char>(b);
    return inv;
  }();
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    auto c = static_cast<unsigned char>(text[i]);
    std::uint32_t cp = 0;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c & 0xE0) == 0xC0 && i + 1 < text.size()) {
      cp = ((c & 0x1Fu) << 6) | (static_cast<unsigned char>(text[i + 1]) & 0x3Fu);
      len = 2;
    } else if ((c & 0xF0) == 0xE0 && i + 2 < text.size()) {
      cp = ((c & 0x0Fu) << 12) | ((static_cast<unsigned char>(text[i + 1]) & 0x3Fu) << 6) |
           (static_cast<unsigned char>(text[i + 2]) & 0x3Fu);
      len = 3;
    } else {
      throw std::invalid_argument("vocabulary: malformed token text");
    }
    auto it = inverse.find(cp);
    if (it == inverse.end()) throw std::invalid_argument("vocabulary: unmapped code point in token");
    out.push_back(static_cast<char>(it->second));
    i += len;
  }
  return out;
}

struct PairHash {
  std::size_t operator()(const std::pair<int, int>& p) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.first)) << 32) |
                                      static_cast<std::uint32_t>(p.second));
  }
};

}  // namespace detail

class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr int kMask = 4;
  static constexpr int kSpecialCount = 5;
  static constexpr int kByteOffset = kSpecialCount;
  static constexpr int kBaseSize = kSpecialCount + 256;
  static constexpr std::array<std::string_view, kSpecialCount> kSpecials = {"<s>", "</s>", "<pad>", "<unk>",
                                                                            kMaskToken};
  static constexpr std::string_view kFormatVersion = "bpe-v1";

  Vocabulary() : Vocabulary(std::vector<MergeRule>{}) {}

  explicit Vocabulary(std::vector<MergeRule> merges) : merges_(std::move(merges)) {
    tokens_.reserve(kBaseSize + merges_.size());
    for (auto s : kSpecials) tokens_.emplace_back(s);
    for (int b = 0; b < 256; ++b) tokens_.emplace_back(1, static_cast<char>(b));
    for (std::size_t r = 0; r < merges_.size(); ++r) {
      const auto& m = merges_[r];
      const int next_id = kBaseSize + static_cast<int>(r);
      if (m.left < kByteOffset || m.right < kByteOffset || m.left >= next_id || m.right >= next_id)
        throw std::invalid_argument("vocabulary: merge " + std::to_string(r) +
                                    " references a special or later symbol");
      tokens_.push_back(tokens_[m.left] + tokens_[m.right]);
      ranks_.emplace(std::make_pair(m.left, m.right), static_cast<int>(r));
    }
    for (std::size_t id = kSpecialCount; id < tokens_.size(); ++id) ids_.emplace(tokens_[id], static_cast<int>(id));
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<MergeRule>& merges() const { return merges_; }

  static bool is_special(int id) { return id >= 0 && id < kSpecialCount; }

  const std::string& token_bytes(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
      throw std::out_of_range("unknown token id " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
  }

  /// True for non-special tokens whose first byte is whitespace, i.e. tokens
  /// that can only start a piece.
  bool starts_piece(int id) const {
    return !is_special(id) && is_space_byte(static_cast<unsigned char>(token_bytes(id).front()));
  }

  std::optional<int> find(std::string_view bytes) const {
    auto it = ids_.find(std::string(bytes));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<int> encode_piece(std::string_view piece) const {
    std::vector<int> symbols;
    symbols.reserve(piece.size());
    for (unsigned char b : piece) symbols.push_back(kByteOffset + b);
    while (symbols.size() > 1) {
      int best_rank = -1;
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        auto it = ranks_.find({symbols[i], symbols[i + 1]});
        if (it != ranks_.end() && (best_rank < 0 || it->second < best_rank)) best_rank = it->second;
      }
      if (best_rank < 0) break;
      const MergeRule& rule = merges_[static_cast<std::size_t>(best_rank)];
      const int merged = kBaseSize + best_rank;
      std::vector<int> next;
      next.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == rule.left && symbols[i + 1] == rule.right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(symbols[i]);
        }
      }
      symbols = std::move(next);
    }
    return symbols;
  }

  std::vector<int> encode(std::string_view text) const {
    std::vector<int> ids;
    for (auto piece : split_pieces(text)) {
      auto p = encode_piece(piece);
      ids.insert(ids.end(), p.begin(), p.end());
    }
    return ids;
  }

  std::string decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) out += token_bytes(id);
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["version"] = kFormatVersion;
    j["specials"] = nlohmann::ordered_json::array();
    for (auto s : kSpecials) j["specials"].push_back(s);
    j["merges"] = nlohmann::ordered_json::array();
    for (const auto& m : merges_)
      j["merges"].push_back({detail::bytes_to_printable(tokens_[m.left]), detail::bytes_to_printable(tokens_[m.right])});
    return j;
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    if (j.value("version", std::string()) != kFormatVersion)
      throw std::invalid_argument("vocabulary: unsupported version");
    const auto& specials = j.at("specials");
    if (!specials.is_array() || specials.size() != kSpecials.size())
      throw std::invalid_argument("vocabulary: unexpected special token list");
    for (std::size_t i = 0; i < kSpecials.size(); ++i)
      if (specials[i].get<std::string>() != kSpecials[i])
        throw std::invalid_argument("vocabulary: special tokens out of order");

    Vocabulary partial;
    std::vector<MergeRule> merges;
    for (const auto& jm : j.at("merges")) {
      auto left = partial.find(detail::printable_to_bytes(jm.at(0).get<std::string>()));
      auto right = partial.find(detail::printable_to_bytes(jm.at(1).get<std::string>()));
      if (!left || !right) throw std::invalid_argument("vocabulary: merge references unknown symbol");
      merges.push_back({*left, *right});
      partial.add_merge(merges.back());
    }
    return Vocabulary(std::move(merges));
  }

 private:
  void add_merge(const MergeRule& m) {
    const int id = static_cast<int>(tokens_.size());
    merges_.push_back(m);
    tokens_.push_back(tokens_[m.left] + tokens_[m.right]);
    ranks_.emplace(std::make_pair(m.left, m.right), static_cast<int>(merges_.size() - 1));
    ids_.emplace(tokens_.back(), id);
  }

  std::vector<MergeRule> merges_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::pair<int, int>, int, detail::PairHash> ranks_;
  std::unordered_map<std::string, int> ids_;
};

/// Word (piece) frequencies of a corpus. Each line is read as if preceded by a
/// space so every surface token becomes a " token" piece.
inline std::map<std::string, std::size_t> count_pieces(std::span<const std::string> lines) {
  std::map<std::string, std::size_t> counts;
  for (const auto& line : lines) {
    const std::string prefixed = " " + line;
    for (auto piece : split_pieces(prefixed)) ++counts[std::string(piece)];
  }
  return counts;
}

/// Greedy highest-frequency pair merging. Ties go to the lexicographically
/// smallest (left, right) byte-string pair.
inline Vocabulary train_bpe(std::span<const std::string> corpus, const BpeTrainOptions& opts) {
  if (corpus.empty()) throw std::invalid_argument("train_bpe: empty corpus");
  if (opts.vocab_size <= static_cast<std::size_t>(Vocabulary::kBaseSize))
    throw std::invalid_argument("train_bpe: vocab_size must exceed 261");
  if (opts.min_frequency < 1) throw std::invalid_argument("train_bpe: min_frequency must be >= 1");

  struct Word {
    std::vector<int> symbols;
    std::size_t count;
  };
  std::vector<Word> words;
  for (const auto& [piece, count] : count_pieces(corpus)) {
    Word w{{}, count};
    for (unsigned char b : piece) w.symbols.push_back(Vocabulary::kByteOffset + b);
    words.push_back(std::move(w));
  }

  std::vector<std::string> token_text;
  for (auto s : Vocabulary::kSpecials) token_text.emplace_back(s);
  for (int b = 0; b < 256; ++b) token_text.emplace_back(1, static_cast<char>(b));

  using Pair = std::pair<int, int>;
  struct Ranked {
    std::size_t count;
    Pair pair;
  };
  auto better = [&token_text](const Ranked& a, const Ranked& b) {
    if (a.count != b.count) return a.count > b.count;
    const auto& al = token_text[a.pair.first];
    const auto& bl = token_text[b.pair.first];
    if (al != bl) return al < bl;
    const auto& ar = token_text[a.pair.second];
    const auto& br = token_text[b.pair.second];
    if (ar != br) return ar < br;
    return a.pair < b.pair;
  };
  std::set<Ranked, decltype(better)> queue(better);
  std::unordered_map<Pair, std::size_t, detail::PairHash> pair_count;
  std::unordered_map<Pair, std::set<std::size_t>, detail::PairHash> pair_words;

  auto adjust = [&](const Pair& p, std::size_t word, long delta) {
    auto& c = pair_count[p];
    if (c > 0) queue.erase(Ranked{c, p});
    c = static_cast<std::size_t>(static_cast<long>(c) + delta);
    if (c > 0) {
      queue.insert(Ranked{c, p});
    } else {
      pair_count.erase(p);
    }
    if (delta > 0) pair_words[p].insert(word);
  };
  auto add_word_pairs = [&](std::size_t wi, long sign) {
    const auto& s = words[wi].symbols;
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
      adjust({s[i], s[i + 1]}, wi, sign * static_cast<long>(words[wi].count));
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) add_word_pairs(wi, +1);

  std::vector<MergeRule> merges;
  while (Vocabulary::kBaseSize + merges.size() < opts.vocab_size && !queue.empty()) {
    const Ranked best = *queue.begin();
    if (best.count < opts.min_frequency) break;
    const int merged = Vocabulary::kBaseSize + static_cast<int>(merges.size());
    merges.push_back({best.pair.first, best.pair.second});
    token_text.push_back(token_text[best.pair.first] + token_text[best.pair.second]);

    const std::set<std::size_t> affected = std::move(pair_words[best.pair]);
    pair_words.erase(best.pair);
    for (std::size_t wi : affected) {
      auto& s = words[wi].symbols;
      bool present = false;
      for (std::size_t i = 0; i + 1 < s.size(); ++i)
        if (s[i] == best.pair.first && s[i + 1] == best.pair.second) present = true;
      if (!present) continue;
      add_word_pairs(wi, -1);
      std::vector<int> next;
      next.reserve(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 < s.size() && s[i] == best.pair.first && s[i + 1] == best.pair.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(s[i]);
        }
      }
      s = std::move(next);
      add_word_pairs(wi, +1);
    }
  }
  return Vocabulary(std::move(merges));
}

/// Model-side encoding of surface text: <s>, then each token as a
/// space-prefixed piece, then </s>. The mask token maps to the single mask id.
inline std::vector<int> encode_surface(const Vocabulary& vocab, const SurfaceText& tokens) {
  std::vector<int> ids{Vocabulary::kBos};
  for (const auto& t : tokens) {
    if (t == kMaskToken) {
      ids.push_back(Vocabulary::kMask);
      continue;
    }
    auto piece = vocab.encode_piece(" " + t);
    ids.insert(ids.end(), piece.begin(), piece.end());
  }
  ids.push_back(Vocabulary::kEos);
  return ids;
}

}  // namespace mmconcept
