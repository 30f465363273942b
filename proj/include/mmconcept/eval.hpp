#pragma once

// Ranking metrics over recommendation runs, with per-kind and binned
// breakdowns and JSON/CSV reports.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmconcept/recommend.hpp"
#include "mmconcept/sampler.hpp"

namespace mmconcept {

struct ScoredRecord {
  TestSample sample;
  std::vector<Candidate> candidates;
  std::optional<std::size_t> rank;  // 1-based, exact match only
};

using ScoredRun = std::vector<ScoredRecord>;

inline std::optional<std::size_t> rank_of(const std::vector<Candidate>& candidates, const std::string& truth) {
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i].text == truth) return i + 1;
  return std::nullopt;
}

inline ScoredRecord score_sample(TestSample sample, std::vector<Candidate> candidates) {
  ScoredRecord r{std::move(sample), std::move(candidates), std::nullopt};
  r.rank = rank_of(r.candidates, r.sample.ground_truth);
  return r;
}

inline void check_run(const ScoredRun& run, std::size_t k) {
  if (run.empty()) throw std::invalid_argument("metric over an empty run");
  if (k == 0) throw std::invalid_argument("k must be at least 1");
}

inline double recall_at_k(const ScoredRun& run, std::size_t k) {
  check_run(run, k);
  std::size_t hits = 0;
  for (const auto& r : run)
    if (r.rank && *r.rank <= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(run.size());
}

/// Ranks beyond the cutoff contribute 0.
inline double mrr_at_k(const ScoredRun& run, std::size_t k) {
  check_run(run, k);
  double sum = 0;
  for (const auto& r : run)
    if (r.rank && *r.rank <= k) sum += 1.0 / static_cast<double>(*r.rank);
  return sum / static_cast<double>(run.size());
}

inline const std::vector<std::size_t>& default_ks() {
  static const std::vector<std::size_t> ks{1, 5, 10, 20};
  return ks;
}

/// Metrics for one slice of a run. An empty slice has NaN values.
struct Metrics {
  std::size_t count = 0;
  double top1 = std::numeric_limits<double>::quiet_NaN();
  std::map<std::size_t, double> recall_at;
  std::map<std::size_t, double> mrr_at;

  bool operator==(const Metrics& o) const;
};

namespace detail {
inline bool same_value(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }
inline bool same_map(const std::map<std::size_t, double>& a, const std::map<std::size_t, double>& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib)
    if (ia->first != ib->first || !same_value(ia->second, ib->second)) return false;
  return true;
}
}  // namespace detail

inline bool Metrics::operator==(const Metrics& o) const {
  return count == o.count && detail::same_value(top1, o.top1) && detail::same_map(recall_at, o.recall_at) &&
         detail::same_map(mrr_at, o.mrr_at);
}

inline Metrics compute_metrics(const ScoredRun& run, const std::vector<std::size_t>& ks) {
  Metrics m;
  m.count = run.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k : ks) {
    m.recall_at[k] = run.empty() ? nan : recall_at_k(run, k);
    m.mrr_at[k] = run.empty() ? nan : mrr_at_k(run, k);
  }
  m.top1 = run.empty() ? nan : recall_at_k(run, 1);
  return m;
}

struct Bin {
  std::string label;
  std::size_t lo = 0;
  std::optional<std::size_t> hi;  // inclusive; absent = open-ended
  Metrics metrics;

  bool operator==(const Bin&) const = default;
};

namespace detail {

inline std::string bin_label(std::size_t lo, std::optional<std::size_t> hi) {
  if (!hi) return std::to_string(lo) + "+";
  if (*hi == lo) return std::to_string(lo);
  return std::to_string(lo) + "-" + std::to_string(*hi);
}

inline void check_edges(const std::vector<std::size_t>& edges) {
  if (edges.empty()) throw std::invalid_argument("bin edges must not be empty");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) throw std::invalid_argument("bin edges must be strictly increasing");
}

// Half-open intervals [e_i, e_{i+1}); values outside go to a trailing
// "overflow" bin, or with `open_top` the last edge starts an unbounded bin.
template <typename ValueFn>
std::vector<Bin> bin_run(const ScoredRun& run, const std::vector<std::size_t>& edges, const std::vector<std::size_t>& ks,
                         bool open_top, ValueFn value) {
  check_edges(edges);
  const std::size_t bounded = edges.size() - 1;
  std::vector<ScoredRun> parts(bounded + 1);
  for (const auto& r : run) {
    const std::size_t v = value(r);
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t slot = bounded;  // overflow / open top
    if (it != edges.begin() && it != edges.end()) slot = static_cast<std::size_t>(it - edges.begin()) - 1;
    parts[slot].push_back(r);
  }
  std::vector<Bin> bins;
  for (std::size_t i = 0; i < bounded; ++i) {
    Bin b;
    b.lo = edges[i];
    b.hi = edges[i + 1] - 1;
    b.label = bin_label(b.lo, b.hi);
    b.metrics = compute_metrics(parts[i], ks);
    bins.push_back(std::move(b));
  }
  Bin last;
  if (open_top) {
    last.lo = edges.back();
    last.label = bin_label(last.lo, std::nullopt);
  } else {
    last.label = "overflow";
  }
  last.metrics = compute_metrics(parts[bounded], ks);
  bins.push_back(std::move(last));
  return bins;
}

}  // namespace detail

inline std::vector<std::size_t> default_context_edges() {
  std::vector<std::size_t> e;
  for (std::size_t x = 1; x <= 251; x += 10) e.push_back(x);
  return e;
}

inline std::vector<std::size_t> default_occurrence_edges() { return {0, 1, 2, 11}; }

/// Bins by context size. Sizes outside [edges.front(), edges.back()) land in
/// a final "overflow" bin.
inline std::vector<Bin> bin_by_context(const ScoredRun& run, const std::vector<std::size_t>& edges,
                                       const std::vector<std::size_t>& ks = default_ks()) {
  return detail::bin_run(run, edges, ks, false, [](const ScoredRecord& r) { return r.sample.context_size; });
}

/// Bins by how often the ground truth occurs in the training corpus (as any
/// element kind). The last edge opens an unbounded bin.
inline std::vector<Bin> bin_by_occurrence(const ScoredRun& run, const FrequencyTable& train_freq,
                                          const std::vector<std::size_t>& edges = default_occurrence_edges(),
                                          const std::vector<std::size_t>& ks = default_ks()) {
  return detail::bin_run(run, edges, ks, true,
                         [&](const ScoredRecord& r) { return train_freq.count(r.sample.ground_truth); });
}

struct EvalReport {
  std::string name;
  std::vector<std::size_t> ks = default_ks();
  Metrics overall;
  std::map<std::string, Metrics> per_kind;
  std::vector<Bin> context_bins;
  std::vector<Bin> occurrence_bins;

  bool operator==(const EvalReport&) const = default;
};

inline EvalReport build_report(const ScoredRun& run, const FrequencyTable& train_freq,
                               const std::vector<std::size_t>& ks = default_ks(), std::string name = {}) {
  EvalReport rep;
  rep.name = std::move(name);
  rep.ks = ks;
  std::sort(rep.ks.begin(), rep.ks.end());
  rep.overall = compute_metrics(run, rep.ks);
  for (auto kind : {ElementKind::Class, ElementKind::Attribute, ElementKind::Association}) {
    ScoredRun part;
    for (const auto& r : run)
      if (r.sample.kind == kind) part.push_back(r);
    rep.per_kind[std::string(to_string(kind))] = compute_metrics(part, rep.ks);
  }
  rep.context_bins = bin_by_context(run, default_context_edges(), rep.ks);
  rep.occurrence_bins = bin_by_occurrence(run, train_freq, default_occurrence_edges(), rep.ks);
  return rep;
}

// ---------------------------------------------------------------------------
// Producing runs

template <typename T>
ScoredRun run_model(const nn::MaskedLM<T>& model, const Vocabulary& vocab, const std::vector<TestSample>& samples,
                    std::size_t k, const FillMaskOptions& opts = {}) {
  ScoredRun run;
  run.reserve(samples.size());
  for (const auto& s : samples) run.push_back(score_sample(s, fill_mask_topk(model, vocab, s.context, k, opts)));
  return run;
}

inline ScoredRun run_baseline(const FrequencyTable& freq, const std::vector<TestSample>& samples, std::size_t k) {
  ScoredRun run;
  run.reserve(samples.size());
  std::map<ElementKind, std::vector<Candidate>> ranked;
  for (auto kind : {ElementKind::Class, ElementKind::Attribute, ElementKind::Association})
    ranked[kind] = baseline_rank(freq, kind, k);
  for (const auto& s : samples) run.push_back(score_sample(s, ranked[s.kind]));
  return run;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::ordered_json number_or_null(double v) {
  return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
}

inline double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["count"] = m.count;
  j["top1"] = number_or_null(m.top1);
  nlohmann::ordered_json r, mrr;
  for (const auto& [k, v] : m.recall_at) r[std::to_string(k)] = number_or_null(v);
  for (const auto& [k, v] : m.mrr_at) mrr[std::to_string(k)] = number_or_null(v);
  j["recall_at"] = r;
  j["mrr_at"] = mrr;
  return j;
}

inline Metrics metrics_from(const nlohmann::json& j) {
  Metrics m;
  m.count = j.at("count").get<std::size_t>();
  m.top1 = number_from(j.at("top1"));
  for (const auto& [k, v] : j.at("recall_at").items()) m.recall_at[std::stoul(k)] = number_from(v);
  for (const auto& [k, v] : j.at("mrr_at").items()) m.mrr_at[std::stoul(k)] = number_from(v);
  return m;
}

inline nlohmann::ordered_json bins_json(const std::vector<Bin>& bins) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& b : bins) {
    nlohmann::ordered_json j;
    j["label"] = b.label;
    j["lo"] = b.lo;
    j["hi"] = b.hi ? nlohmann::ordered_json(*b.hi) : nlohmann::ordered_json(nullptr);
    j["metrics"] = metrics_json(b.metrics);
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<Bin> bins_from(const nlohmann::json& arr) {
  std::vector<Bin> out;
  for (const auto& j : arr) {
    Bin b;
    b.label = j.at("label").get<std::string>();
    b.lo = j.at("lo").get<std::size_t>();
    if (!j.at("hi").is_null()) b.hi = j.at("hi").get<std::size_t>();
    b.metrics = metrics_from(j.at("metrics"));
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["version"] = "report-v1";
  j["name"] = r.name;
  j["ks"] = r.ks;
  j["overall"] = detail::metrics_json(r.overall);
  nlohmann::ordered_json kinds;
  for (const auto& [kind, m] : r.per_kind) kinds[kind] = detail::metrics_json(m);
  j["per_kind"] = kinds;
  j["context_bins"] = detail::bins_json(r.context_bins);
  j["occurrence_bins"] = detail::bins_json(r.occurrence_bins);
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  if (j.value("version", "") != "report-v1") throw std::runtime_error("not a report-v1 document");
  EvalReport r;
  r.name = j.value("name", "");
  r.ks = j.at("ks").get<std::vector<std::size_t>>();
  r.overall = detail::metrics_from(j.at("overall"));
  for (const auto& [kind, m] : j.at("per_kind").items()) r.per_kind[kind] = detail::metrics_from(m);
  r.context_bins = detail::bins_from(j.at("context_bins"));
  r.occurrence_bins = detail::bins_from(j.at("occurrence_bins"));
  return r;
}

/// One row per metric x kind x bin x k. Empty slices print NA.
inline std::string report_csv(const EvalReport& r) {
  std::ostringstream out;
  out.precision(10);
  out << "metric,kind,bin,k,value\n";
  auto value = [&](double v) {
    if (std::isnan(v)) out << "NA";
    else out << v;
  };
  auto rows = [&](const Metrics& m, const std::string& kind, const std::string& bin) {
    out << "count," << kind << ',' << bin << ",," << m.count << '\n';
    out << "top1," << kind << ',' << bin << ",1,";
    value(m.top1);
    out << '\n';
    for (const auto& [k, v] : m.recall_at) {
      out << "recall," << kind << ',' << bin << ',' << k << ',';
      value(v);
      out << '\n';
    }
    for (const auto& [k, v] : m.mrr_at) {
      out << "mrr," << kind << ',' << bin << ',' << k << ',';
      value(v);
      out << '\n';
    }
  };
  rows(r.overall, "all", "all");
  for (const auto& [kind, m] : r.per_kind) rows(m, kind, "all");
  for (const auto& b : r.context_bins) rows(b.metrics, "all", "context:" + b.label);
  for (const auto& b : r.occurrence_bins) rows(b.metrics, "all", "occurrence:" + b.label);
  return out.str();
}

/// Writes <stem>.json and <stem>.csv into `dir`.
inline void emit_report(const EvalReport& r, const std::filesystem::path& dir, const std::string& stem = "report") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + p.string());
  };
  write(dir / (stem + ".json"), to_json(r).dump(2) + "\n");
  write(dir / (stem + ".csv"), report_csv(r));
}

}  // namespace mmconcept
