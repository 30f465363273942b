#pragma once

// Independent reference implementations used to cross-check the library.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mmconcept/bpe.hpp"
#include "mmconcept/eval.hpp"

namespace testing_support {

struct NaiveMerge {
  std::string left, right;
  std::size_t count;  // pair frequency at the time of the merge
};

/// BPE by brute force: recounts every adjacent pair after each merge, picks
/// the most frequent one, ties to the smallest byte strings.
inline std::vector<NaiveMerge> naive_bpe(const std::vector<std::string>& lines, std::size_t merges,
                                         std::size_t min_frequency) {
  std::map<std::string, std::size_t> pieces;
  for (const auto& l : lines) {
    const std::string prefixed = " " + l;  // split_pieces returns views into this
    for (auto p : mmconcept::split_pieces(prefixed)) ++pieces[std::string(p)];
  }
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  for (const auto& [p, c] : pieces) {
    std::vector<std::string> s;
    for (char ch : p) s.emplace_back(1, ch);
    words.emplace_back(std::move(s), c);
  }
  std::vector<NaiveMerge> out;
  while (out.size() < merges) {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto& [s, c] : words)
      for (std::size_t i = 0; i + 1 < s.size(); ++i) counts[{s[i], s[i + 1]}] += c;
    const std::pair<std::string, std::string>* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [p, c] : counts)
      if (c > best_count) best = &p, best_count = c;  // strict '>' keeps the first in map order on ties
    if (!best || best_count < min_frequency) break;
    const auto pair = *best;
    out.push_back({pair.first, pair.second, best_count});
    for (auto& [s, c] : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 < s.size() && s[i] == pair.first && s[i + 1] == pair.second) {
          next.push_back(pair.first + pair.second);
          ++i;
        } else {
          next.push_back(s[i]);
        }
      }
      s = std::move(next);
    }
  }
  return out;
}

/// Pair frequency of every learned merge, replayed over the corpus in order.
inline std::vector<std::size_t> replay_merge_counts(const mmconcept::Vocabulary& v,
                                                    const std::vector<std::string>& lines) {
  std::map<std::string, std::size_t> pieces;
  for (const auto& l : lines) {
    const std::string prefixed = " " + l;  // split_pieces returns views into this
    for (auto p : mmconcept::split_pieces(prefixed)) ++pieces[std::string(p)];
  }
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  for (const auto& [p, c] : pieces) {
    std::vector<std::string> s;
    for (char ch : p) s.emplace_back(1, ch);
    words.emplace_back(std::move(s), c);
  }
  std::vector<std::size_t> counts;
  for (const auto& m : v.merges()) {
    const std::string& l = v.token_bytes(m.left);
    const std::string& r = v.token_bytes(m.right);
    std::size_t n = 0;
    for (auto& [s, c] : words) {
      for (std::size_t i = 0; i + 1 < s.size(); ++i)
        if (s[i] == l && s[i + 1] == r) n += c;
      std::vector<std::string> next;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 < s.size() && s[i] == l && s[i + 1] == r) {
          next.push_back(l + r);
          ++i;
        } else {
          next.push_back(s[i]);
        }
      }
      s = std::move(next);
    }
    counts.push_back(n);
  }
  return counts;
}

/// Recall@k by scanning the candidate lists directly.
inline double brute_recall(const mmconcept::ScoredRun& run, std::size_t k) {
  std::size_t hits = 0;
  for (const auto& r : run)
    for (std::size_t i = 0; i < r.candidates.size() && i < k; ++i)
      if (r.candidates[i].text == r.sample.ground_truth) {
        ++hits;
        break;
      }
  return static_cast<double>(hits) / static_cast<double>(run.size());
}

inline double brute_mrr(const mmconcept::ScoredRun& run, std::size_t k) {
  double sum = 0;
  for (const auto& r : run)
    for (std::size_t i = 0; i < r.candidates.size() && i < k; ++i)
      if (r.candidates[i].text == r.sample.ground_truth) {
        sum += 1.0 / static_cast<double>(i + 1);
        break;
      }
  return sum / static_cast<double>(run.size());
}

}  // namespace testing_support
