#pragma once

// Ranked identifier recommendations: beam-searched mask filling over the
// language model, and a training-frequency baseline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mmconcept/bpe.hpp"
#include "mmconcept/metamodel.hpp"
#include "mmconcept/nn/transformer.hpp"
#include "mmconcept/sequences.hpp"
#include "mmconcept/tree.hpp"

namespace mmconcept {

struct Candidate {
  std::string text;
  double score = 0;

  bool operator==(const Candidate&) const = default;
};

inline void sort_candidates(std::vector<Candidate>& c) {
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.text < b.text;
  });
}

struct FillMaskOptions {
  std::size_t max_subwords = 6;
  std::size_t beam_width = 10;
};

namespace detail {

// Identifier spelled by a space-led subword sequence, or empty when it is
// not a usable identifier (structural token, whitespace, ...).
inline std::string candidate_identifier(const std::string& bytes) {
  if (bytes.size() < 2 || bytes.front() != ' ') return {};
  const std::string_view surface(bytes.data() + 1, bytes.size() - 1);
  if (is_reserved_token(surface)) return {};
  if (surface.find('(') != std::string_view::npos || surface.find(')') != std::string_view::npos) return {};
  std::string id = unescape_identifier(surface);
  if (!is_valid_identifier(id)) return {};
  return id;
}

inline double log_sum_exp(const std::vector<double>& xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// Top-k whole-identifier completions for the single mask in `context`.
///
/// Left-to-right iterated mask filling: the mask is replaced by the subwords
/// chosen so far followed by a fresh mask. The first subword must open a
/// piece (leading space); later ones must continue it. An identifier is
/// closed by the probability mass the model puts on piece-opening tokens (or
/// </s>) at the fresh mask. Score = sum of subword log-probabilities plus the
/// closing log-probability.
template <typename T>
std::vector<Candidate> fill_mask_topk(const nn::MaskedLM<T>& model, const Vocabulary& vocab, const SurfaceText& context,
                                      std::size_t k, const FillMaskOptions& opts = {}) {
  const std::size_t masks = count_masks(context);
  if (masks != 1)
    throw std::invalid_argument("fill_mask_topk: context must contain exactly one mask (found " +
                                std::to_string(masks) + ")");
  if (k == 0) return {};

  const std::size_t max_len = model.config().max_sequence_length;
  const std::size_t budget = max_len > opts.max_subwords + 3 ? max_len - opts.max_subwords : max_len;
  std::vector<int> ids = encode_surface(vocab, fit_to_budget(vocab, context, budget));
  auto mask_it = std::find(ids.begin(), ids.end(), Vocabulary::kMask);
  std::size_t mask_pos = static_cast<std::size_t>(mask_it - ids.begin());
  if (ids.size() > budget) {
    // A single class larger than the window: keep a window around the mask.
    const std::size_t half = budget / 2;
    const std::size_t begin = mask_pos > half ? std::min(mask_pos - half, ids.size() - budget) : 0;
    ids = std::vector<int>(ids.begin() + static_cast<std::ptrdiff_t>(begin),
                           ids.begin() + static_cast<std::ptrdiff_t>(begin + budget));
    mask_pos -= begin;
  }
  const std::vector<int> before(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(mask_pos));
  const std::vector<int> after(ids.begin() + static_cast<std::ptrdiff_t>(mask_pos) + 1, ids.end());

  const auto vocab_size = static_cast<int>(std::min(vocab.size(), model.config().vocab_size));
  std::vector<int> openers, continuations, closers{Vocabulary::kEos};
  for (int id = Vocabulary::kSpecialCount; id < vocab_size; ++id) {
    if (vocab.starts_piece(id)) {
      closers.push_back(id);
      const std::string& b = vocab.token_bytes(id);
      if (b.size() >= 2 && b != " (" && b != " )" && !is_space_byte(static_cast<unsigned char>(b[1])))
        openers.push_back(id);
    } else {
      continuations.push_back(id);
    }
  }

  struct Beam {
    std::vector<int> prefix;
    double score;
  };
  std::vector<Beam> active{{{}, 0.0}};
  std::unordered_map<std::string, double> finished;

  auto kth_finished = [&]() {
    if (finished.size() < k) return -std::numeric_limits<double>::infinity();
    std::vector<double> scores;
    for (const auto& [_, s] : finished) scores.push_back(s);
    std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k - 1), scores.end(),
                     std::greater<>());
    return scores[k - 1];
  };

  for (std::size_t step = 0; step <= opts.max_subwords && !active.empty(); ++step) {
    const double bar = kth_finished();
    std::erase_if(active, [&](const Beam& b) { return b.score <= bar; });

    std::vector<Beam> next;
    for (const auto& beam : active) {
      std::vector<int> input = before;
      input.insert(input.end(), beam.prefix.begin(), beam.prefix.end());
      const std::size_t pos = input.size();
      input.push_back(Vocabulary::kMask);
      input.insert(input.end(), after.begin(), after.end());
      const std::size_t positions[] = {pos};
      const auto lp = model.log_probs(input, positions);

      if (step > 0) {
        std::vector<double> closing;
        closing.reserve(closers.size());
        for (int id : closers) closing.push_back(static_cast<double>(lp(0, id)));
        const std::string text = detail::candidate_identifier(vocab.decode(beam.prefix));
        if (!text.empty()) {
          const double s = beam.score + detail::log_sum_exp(closing);
          auto [it, inserted] = finished.emplace(text, s);
          if (!inserted) it->second = std::max(it->second, s);
        }
      }
      if (step == opts.max_subwords) continue;

      const auto& allowed = step == 0 ? openers : continuations;
      std::vector<Beam> expansions;
      expansions.reserve(allowed.size());
      for (int id : allowed) {
        std::vector<int> p = beam.prefix;
        p.push_back(id);
        expansions.push_back({std::move(p), beam.score + static_cast<double>(lp(0, id))});
      }
      const std::size_t keep = std::min(opts.beam_width, expansions.size());
      std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep), expansions.end(),
                        [](const Beam& a, const Beam& b) { return a.score > b.score; });
      expansions.resize(keep);
      for (auto& e : expansions) next.push_back(std::move(e));
    }
    std::stable_sort(next.begin(), next.end(), [](const Beam& a, const Beam& b) { return a.score > b.score; });
    if (next.size() > opts.beam_width) next.resize(opts.beam_width);
    active = std::move(next);
  }

  std::vector<Candidate> out;
  out.reserve(finished.size());
  for (auto& [text, score] : finished) out.push_back({text, score});
  sort_candidates(out);
  if (out.size() > k) out.resize(k);
  return out;
}

// ---------------------------------------------------------------------------
// Frequency baseline

class FrequencyTable {
 public:
  void add(const Metamodel& m) {
    for (const auto& c : m.classes) {
      bump(ElementKind::Class, c.name);
      for (const auto& a : c.attributes) bump(ElementKind::Attribute, a.name);
      for (const auto& r : c.associations) bump(ElementKind::Association, r.name);
    }
  }

  /// Occurrences of `id` as any kind of element.
  std::size_t count(const std::string& id) const {
    auto it = total_.find(id);
    return it == total_.end() ? 0 : it->second;
  }

  std::size_t count(ElementKind kind, const std::string& id) const {
    const auto& t = per_kind_[static_cast<std::size_t>(kind)];
    auto it = t.find(id);
    return it == t.end() ? 0 : it->second;
  }

  const std::map<std::string, std::size_t>& table(ElementKind kind) const {
    return per_kind_[static_cast<std::size_t>(kind)];
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    for (auto kind : {ElementKind::Class, ElementKind::Attribute, ElementKind::Association})
      j[std::string(to_string(kind))] = table(kind);
    return j;
  }

  static FrequencyTable from_json(const nlohmann::json& j) {
    FrequencyTable t;
    for (const auto& [kind_name, entries] : j.items()) {
      const ElementKind kind = element_kind_from_string(kind_name);
      for (const auto& [id, n] : entries.items()) {
        t.per_kind_[static_cast<std::size_t>(kind)][id] += n.get<std::size_t>();
        t.total_[id] += n.get<std::size_t>();
      }
    }
    return t;
  }

 private:
  void bump(ElementKind kind, const std::string& id) {
    ++per_kind_[static_cast<std::size_t>(kind)][id];
    ++total_[id];
  }

  std::map<std::string, std::size_t> per_kind_[3];
  std::map<std::string, std::size_t> total_;
};

/// Most frequent training identifiers of `kind`, ties broken
/// lexicographically. Scores are log relative frequencies.
inline std::vector<Candidate> baseline_rank(const FrequencyTable& freq, ElementKind kind, std::size_t k) {
  const auto& table = freq.table(kind);
  std::size_t total = 0;
  for (const auto& [_, n] : table) total += n;
  std::vector<Candidate> out;
  out.reserve(table.size());
  for (const auto& [id, n] : table)
    out.push_back({id, std::log(static_cast<double>(n) / static_cast<double>(total))});
  sort_candidates(out);
  if (out.size() > k) out.resize(k);
  return out;
}

inline std::vector<Candidate> baseline_rank(const FrequencyTable& freq, std::string_view kind, std::size_t k) {
  return baseline_rank(freq, element_kind_from_string(kind), k);
}

}  // namespace mmconcept
