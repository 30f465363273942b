#pragma once

// Turning surface text into model-sized id sequences.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mmconcept/bpe.hpp"
#include "mmconcept/tree.hpp"

namespace mmconcept {

/// [begin, end) token ranges of the top-level CLS subtrees.
inline std::vector<std::pair<std::size_t, std::size_t>> class_spans(const SurfaceText& s) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == "(") {
      if (depth == 1) start = i;
      ++depth;
    } else if (s[i] == ")") {
      --depth;
      if (depth == 1) spans.emplace_back(start, i + 1);
    }
  }
  return spans;
}

inline std::size_t encoded_length(const Vocabulary& vocab, const std::string& token) {
  if (token == kMaskToken) return 1;
  return vocab.encode_piece(" " + token).size();
}

/// Drops whole class subtrees until the encoded sequence (with <s> and </s>)
/// fits in `budget` ids. Classes holding the mask are kept; trailing classes
/// go first, then leading ones.
inline SurfaceText fit_to_budget(const Vocabulary& vocab, const SurfaceText& s, std::size_t budget) {
  std::vector<std::size_t> lengths(s.size());
  std::size_t total = 2;
  for (std::size_t i = 0; i < s.size(); ++i) total += lengths[i] = encoded_length(vocab, s[i]);
  if (total <= budget) return s;

  auto spans = class_spans(s);
  std::vector<bool> keep_class(spans.size(), true);
  std::vector<std::size_t> span_len(spans.size(), 0);
  std::vector<bool> has_mask(spans.size(), false);
  for (std::size_t c = 0; c < spans.size(); ++c) {
    for (std::size_t i = spans[c].first; i < spans[c].second; ++i) {
      span_len[c] += lengths[i];
      if (s[i] == kMaskToken) has_mask[c] = true;
    }
  }
  for (std::size_t c = spans.size(); c-- > 0 && total > budget;) {
    if (has_mask[c]) break;
    keep_class[c] = false;
    total -= span_len[c];
  }
  for (std::size_t c = 0; c < spans.size() && total > budget; ++c) {
    if (!keep_class[c] || has_mask[c]) continue;
    keep_class[c] = false;
    total -= span_len[c];
  }
  SurfaceText out;
  std::size_t next_span = 0;
  for (std::size_t i = 0; i < s.size();) {
    if (next_span < spans.size() && i == spans[next_span].first) {
      if (keep_class[next_span])
        out.insert(out.end(), s.begin() + static_cast<std::ptrdiff_t>(spans[next_span].first),
                   s.begin() + static_cast<std::ptrdiff_t>(spans[next_span].second));
      i = spans[next_span].second;
      ++next_span;
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

/// Encodes one corpus line for training, truncating at class boundaries and,
/// when a single class is still too long, at the id level.
inline std::vector<int> encode_training_line(const Vocabulary& vocab, const SurfaceText& line, std::size_t max_len) {
  std::vector<int> ids = encode_surface(vocab, fit_to_budget(vocab, line, max_len));
  if (ids.size() > max_len) {
    ids.resize(max_len - 1);
    ids.push_back(Vocabulary::kEos);
  }
  return ids;
}

}  // namespace mmconcept
