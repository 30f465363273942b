#pragma once

// Test-sample generation for the three modeling scenarios: renaming with the
// whole metamodel as context, renaming with the association neighbourhood as
// context, and step-by-step construction from a root class.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmconcept/metamodel.hpp"
#include "mmconcept/nn/rng.hpp"
#include "mmconcept/tree.hpp"

namespace mmconcept {

enum class Strategy { Global, Local, Incremental };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Global: return "global";
    case Strategy::Local: return "local";
    case Strategy::Incremental: return "incremental";
  }
  return "?";
}

inline Strategy strategy_from_string(std::string_view s) {
  if (s == "global") return Strategy::Global;
  if (s == "local") return Strategy::Local;
  if (s == "incremental") return Strategy::Incremental;
  throw std::invalid_argument("unknown strategy '" + std::string(s) + "'");
}

struct TestSample {
  SurfaceText context;
  std::string ground_truth;
  ElementKind kind = ElementKind::Class;
  std::size_t context_size = 0;
  std::string metamodel_id;
  Strategy strategy = Strategy::Global;

  bool operator==(const TestSample&) const = default;
};

/// What a sample masks and which elements its context shows.
struct SamplePlan {
  ElementRef target;
  Selection selection;
};

inline TestSample materialize(const Metamodel& m, const SamplePlan& plan, Strategy strategy) {
  auto masked = mask_element(m, plan.target, plan.selection);
  TestSample s;
  s.context = std::move(masked.context);
  s.ground_truth = std::move(masked.ground_truth);
  s.kind = plan.target.kind;
  s.context_size = plan.selection.element_count() - 1;
  s.metamodel_id = m.id;
  s.strategy = strategy;
  return s;
}

inline std::vector<TestSample> materialize(const Metamodel& m, const std::vector<SamplePlan>& plans, Strategy strategy) {
  std::vector<TestSample> out;
  out.reserve(plans.size());
  for (const auto& p : plans) out.push_back(materialize(m, p, strategy));
  return out;
}

// ---------------------------------------------------------------------------
// Association graph helpers

/// Classes connected to `c` by an association in either direction (excluding c).
inline std::vector<std::size_t> linked_classes(const Metamodel& m, std::size_t c) {
  std::set<std::size_t> out;
  for (const auto& r : m.classes[c].associations) out.insert(m.find_class(r.target_class));
  for (std::size_t i = 0; i < m.classes.size(); ++i)
    for (const auto& r : m.classes[i].associations)
      if (r.target_class == m.classes[c].name) out.insert(i);
  out.erase(c);
  return {out.begin(), out.end()};
}

inline std::vector<std::size_t> incoming_counts(const Metamodel& m) {
  std::vector<std::size_t> in(m.classes.size(), 0);
  for (const auto& c : m.classes)
    for (const auto& r : c.associations) ++in[m.find_class(r.target_class)];
  return in;
}

// ---------------------------------------------------------------------------
// Plans

inline std::vector<SamplePlan> plan_global(const Metamodel& m) {
  std::vector<SamplePlan> plans;
  const Selection all = Selection::all(m);
  for (const auto& ref : all_elements(m)) plans.push_back({ref, all});
  return plans;
}

/// The owning class of the target plus every class associated with it, each
/// with its full subtree.
inline std::vector<SamplePlan> plan_local(const Metamodel& m) {
  std::vector<SamplePlan> plans;
  for (const auto& ref : all_elements(m)) {
    Selection sel = Selection::none(m);
    sel.set_class_subtree(ref.class_index);
    for (std::size_t n : linked_classes(m, ref.class_index)) sel.set_class_subtree(n);
    plans.push_back({ref, std::move(sel)});
  }
  return plans;
}

namespace detail {

class IncrementalBuilder {
 public:
  IncrementalBuilder(const Metamodel& m, std::uint64_t seed)
      : m_(m), rng_(seed), built_(Selection::none(m)), visited_(m.classes.size(), false),
        emitted_assoc_(m.classes.size()) {
    for (std::size_t i = 0; i < m.classes.size(); ++i) emitted_assoc_[i].assign(m.classes[i].associations.size(), false);
  }

  std::vector<SamplePlan> run() {
    if (m_.classes.empty()) return {};
    const auto incoming = incoming_counts(m_);
    std::size_t current = least_incoming(incoming, /*unvisited_only=*/false);
    // The root is given, not predicted; its members still are.
    visited_[current] = true;
    built_.classes[current] = true;
    emit_attributes(current);
    emit_associations(current, current);
    std::vector<std::size_t> trail{current};

    while (std::find(visited_.begin(), visited_.end(), false) != visited_.end()) {
      auto candidates = unvisited_links(current);
      if (candidates.empty()) {
        // Walk back to the latest visited class that still has unvisited links.
        bool found = false;
        for (std::size_t t = trail.size(); t-- > 0;) {
          if (!unvisited_links(trail[t]).empty()) {
            current = trail[t];
            found = true;
            break;
          }
        }
        if (!found) {
          const std::size_t next = least_incoming(incoming, /*unvisited_only=*/true);
          place(next, next);
          trail.push_back(next);
          current = next;
        }
        continue;
      }
      const std::size_t chosen = candidates[static_cast<std::size_t>(rng_.below(candidates.size()))];
      place(chosen, current);
      trail.push_back(chosen);
      current = chosen;
    }
    return std::move(plans_);
  }

 private:
  std::vector<std::size_t> unvisited_links(std::size_t c) const {
    std::vector<std::size_t> out;
    for (std::size_t n : linked_classes(m_, c))
      if (!visited_[n]) out.push_back(n);
    return out;
  }

  std::size_t least_incoming(const std::vector<std::size_t>& incoming, bool unvisited_only) const {
    std::size_t best = m_.classes.size();
    for (std::size_t i = 0; i < m_.classes.size(); ++i) {
      if (unvisited_only && visited_[i]) continue;
      if (best == m_.classes.size() || incoming[i] < incoming[best]) best = i;
    }
    return best;
  }

  void emit(const ElementRef& ref) {
    Selection sel = built_;
    sel.set(ref);
    plans_.push_back({ref, sel});
    built_.set(ref);
  }

  void emit_attributes(std::size_t c) {
    for (std::size_t j = 0; j < m_.classes[c].attributes.size(); ++j) emit({ElementKind::Attribute, c, j});
  }

  // Associations between `c` and already built classes; those touching
  // `partner` first, each group in declaration order.
  void emit_associations(std::size_t c, std::size_t partner) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < m_.classes.size(); ++i) {
        for (std::size_t j = 0; j < m_.classes[i].associations.size(); ++j) {
          if (emitted_assoc_[i][j]) continue;
          const std::size_t target = m_.find_class(m_.classes[i].associations[j].target_class);
          if (i != c && target != c) continue;
          const std::size_t other = i == c ? target : i;
          if (!built_.classes[other]) continue;
          const bool touches_partner = other == partner;
          if ((pass == 0) != touches_partner) continue;
          emitted_assoc_[i][j] = true;
          emit({ElementKind::Association, i, j});
        }
      }
    }
  }

  void place(std::size_t chosen, std::size_t current) {
    visited_[chosen] = true;
    emit({ElementKind::Class, chosen, 0});
    emit_attributes(chosen);
    emit_associations(chosen, current);
  }

  const Metamodel& m_;
  nn::Rng rng_;
  Selection built_;
  std::vector<bool> visited_;
  std::vector<std::vector<bool>> emitted_assoc_;
  std::vector<SamplePlan> plans_;
};

}  // namespace detail

inline std::vector<SamplePlan> plan_incremental(const Metamodel& m, std::uint64_t seed) {
  return detail::IncrementalBuilder(m, seed).run();
}

inline std::vector<TestSample> sample_global(const Metamodel& m) {
  return materialize(m, plan_global(m), Strategy::Global);
}

inline std::vector<TestSample> sample_local(const Metamodel& m) { return materialize(m, plan_local(m), Strategy::Local); }

inline std::vector<TestSample> sample_incremental(const Metamodel& m, std::uint64_t seed) {
  return materialize(m, plan_incremental(m, seed), Strategy::Incremental);
}

inline std::vector<TestSample> sample(const Metamodel& m, Strategy strategy, std::uint64_t seed) {
  switch (strategy) {
    case Strategy::Global: return sample_global(m);
    case Strategy::Local: return sample_local(m);
    case Strategy::Incremental: return sample_incremental(m, seed);
  }
  return {};
}

// ---------------------------------------------------------------------------
// JSON-lines IO

inline nlohmann::ordered_json to_json(const TestSample& s) {
  nlohmann::ordered_json j;
  j["context"] = s.context;
  j["ground_truth"] = s.ground_truth;
  j["kind"] = to_string(s.kind);
  j["context_size"] = s.context_size;
  j["metamodel_id"] = s.metamodel_id;
  j["strategy"] = to_string(s.strategy);
  return j;
}

inline TestSample sample_from_json(const nlohmann::json& j) {
  TestSample s;
  s.context = j.at("context").get<SurfaceText>();
  s.ground_truth = j.at("ground_truth").get<std::string>();
  s.kind = element_kind_from_string(j.at("kind").get<std::string>());
  s.context_size = j.at("context_size").get<std::size_t>();
  s.metamodel_id = j.at("metamodel_id").get<std::string>();
  s.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  if (count_masks(s.context) != 1) throw ParseError("sample context must contain exactly one mask");
  if (s.ground_truth.empty()) throw ParseError("sample ground truth is empty");
  return s;
}

inline void write_samples(std::ostream& out, const std::vector<TestSample>& samples) {
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

inline std::vector<TestSample> read_samples(std::istream& in) {
  std::vector<TestSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(sample_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace mmconcept
