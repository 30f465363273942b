#pragma once

// Synthetic metamodel corpora built from small domain vocabularies. Each
// concept carries its own attributes and associations, so names are
// predictable from structure; a low rate of rare made-up names supplies the
// long tail real corpora have.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmconcept/metamodel.hpp"
#include "mmconcept/nn/rng.hpp"

namespace mmconcept {

struct ConceptSpec {
  std::string name;
  double weight = 1.0;
  std::vector<AttributeDef> attributes;
  std::vector<AssociationDef> associations;  // target_class names another concept
};

struct SyntheticDomainSpec {
  std::string name;
  std::vector<ConceptSpec> concepts;
  std::size_t min_classes = 2;
  std::size_t max_classes = 6;
  double attribute_keep = 0.65;
  double association_keep = 0.8;
  double rare_rate = 0.15;
  double rare_exponent = 1.0;  // Zipf exponent of rare-name frequencies

  void validate() const {
    if (name.empty()) throw std::invalid_argument("synthetic domain without a name");
    if (concepts.empty()) throw std::invalid_argument("domain '" + name + "': empty concept pool");
    if (min_classes < kMinCorpusClasses || max_classes > kMaxCorpusClasses || min_classes > max_classes)
      throw std::invalid_argument("domain '" + name + "': class bounds outside the eligible range");
    if (concepts.size() < min_classes) throw std::invalid_argument("domain '" + name + "': too few concepts");
    std::set<std::string> names;
    for (const auto& c : concepts) {
      if (!names.insert(c.name).second) throw std::invalid_argument("domain '" + name + "': duplicate concept " + c.name);
      if (c.attributes.empty() && c.associations.empty())
        throw std::invalid_argument("domain '" + name + "': concept " + c.name + " has empty pools");
    }
    for (const auto& c : concepts)
      for (const auto& a : c.associations)
        if (!names.count(a.target_class))
          throw std::invalid_argument("domain '" + name + "': unknown association target " + a.target_class);
  }
};

namespace detail {

inline AttributeDef attr(std::string type, std::string name) { return {std::move(name), std::move(type)}; }
inline AssociationDef assoc(std::string name, std::string target, bool containment = false) {
  return {std::move(name), std::move(target), containment};
}

inline const std::vector<std::string>& rare_prefixes() {
  static const std::vector<std::string> v{"amber",  "brisk",  "cobalt", "dusky",  "ember",  "fable",
                                          "gusty",  "hazel",  "ivory",  "jolly",  "kelp",   "lunar",
                                          "mossy",  "nimbus", "onyx",   "pebble", "quartz", "rustic",
                                          "sable",  "tundra", "umber",  "velvet", "willow", "zephyr"};
  return v;
}

inline const std::vector<std::string>& rare_suffixes() {
  static const std::vector<std::string> v{"Anchor", "Beacon", "Cipher", "Drift",  "Ember",  "Falcon",
                                          "Garnet", "Harbor", "Isle",   "Jigsaw", "Kettle", "Lantern",
                                          "Meadow", "Nectar", "Orchid", "Prism",  "Quill",  "Ripple",
                                          "Saddle", "Thicket", "Urchin", "Vessel", "Walnut", "Yarrow"};
  return v;
}

// Rare names follow a Zipf law over the prefix x suffix grid, giving the
// corpus a long tail: a few renames recur, most occur once or never again.
inline std::size_t zipf_rank(nn::Rng& rng, std::size_t n, double exponent) {
  std::vector<double> cdf(n);
  double total = 0;
  for (std::size_t r = 0; r < n; ++r) cdf[r] = total += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
  const double u = rng.uniform() * total;
  return std::min<std::size_t>(static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()), n - 1);
}

inline std::string rare_name(nn::Rng& rng, bool capitalized, double exponent) {
  const std::size_t np = rare_prefixes().size(), ns = rare_suffixes().size();
  const std::size_t r = zipf_rank(rng, np * ns, exponent);
  // Walk the grid diagonally so neighbouring ranks differ in both halves.
  std::string s = rare_prefixes()[r % np] + rare_suffixes()[(r / np + r) % ns];
  if (capitalized) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

// Weighted sampling of `count` distinct concept indices.
inline std::vector<std::size_t> pick_concepts(const SyntheticDomainSpec& spec, std::size_t count, nn::Rng& rng) {
  std::vector<double> w;
  for (const auto& c : spec.concepts) w.push_back(c.weight);
  std::vector<std::size_t> picked;
  while (picked.size() < count) {
    double total = 0;
    for (double x : w) total += x;
    double u = rng.uniform() * total;
    std::size_t i = 0;
    for (; i + 1 < w.size(); ++i) {
      if (u < w[i]) break;
      u -= w[i];
    }
    while (w[i] == 0) i = (i + 1) % w.size();
    picked.push_back(i);
    w[i] = 0;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace detail

/// State machines, Petri-net-like nets and library catalogs.
inline std::vector<SyntheticDomainSpec> builtin_domains() {
  using detail::assoc;
  using detail::attr;
  std::vector<SyntheticDomainSpec> d;

  d.push_back({"state-machines",
               {
                   {"StateMachine", 4.0, {attr("EString", "name"), attr("EString", "version")},
                    {assoc("states", "State", true), assoc("transitions", "Transition", true),
                     assoc("initialState", "State"), assoc("regions", "Region", true)}},
                   {"State", 4.0, {attr("EString", "name"), attr("EBoolean", "isFinal"), attr("EBoolean", "isInitial")},
                    {assoc("outgoing", "Transition"), assoc("incoming", "Transition"), assoc("entryAction", "Action"),
                     assoc("exitAction", "Action")}},
                   {"Transition", 4.0, {attr("EString", "trigger"), attr("EInt", "priority")},
                    {assoc("source", "State"), assoc("target", "State"), assoc("guard", "Guard"),
                     assoc("effect", "Action")}},
                   {"Event", 1.5, {attr("EString", "signal"), attr("EDouble", "timestamp")},
                    {assoc("handlers", "Transition")}},
                   {"Guard", 1.5, {attr("EString", "expression"), attr("EString", "language")}, {}},
                   {"Action", 2.0, {attr("EString", "body"), attr("EBoolean", "isAsync")}, {}},
                   {"Region", 1.0, {attr("EInt", "depth")}, {assoc("subvertices", "State", true)}},
                   {"Variable", 1.0, {attr("EString", "initialValue"), attr("EBoolean", "isConstant")},
                    {assoc("owner", "StateMachine")}},
                   {"CompositeState", 1.0, {attr("EBoolean", "isOrthogonal"), attr("EInt", "nesting")},
                    {assoc("substates", "State", true), assoc("history", "State")}},
               }});

  d.push_back({"petri-net-like",
               {
                   {"PetriNet", 4.0, {attr("EString", "name"), attr("EString", "description")},
                    {assoc("places", "Place", true), assoc("transitions", "Transition", true),
                     assoc("arcs", "Arc", true)}},
                   {"Place", 4.0, {attr("EInt", "tokens"), attr("EInt", "capacity"), attr("EString", "label")},
                    {assoc("outgoingArc", "Arc"), assoc("incomingArc", "Arc")}},
                   {"Transition", 3.0, {attr("EString", "label"), attr("EBoolean", "enabled"), attr("EInt", "firingCount")},
                    {assoc("inputs", "Arc"), assoc("outputs", "Arc")}},
                   {"Arc", 3.0, {attr("EInt", "weight"), attr("EBoolean", "inhibitor")},
                    {assoc("place", "Place"), assoc("transition", "Transition")}},
                   {"Token", 1.5, {attr("EString", "color"), attr("EInt", "amount")}, {assoc("location", "Place")}},
                   {"Marking", 1.0, {attr("EInt", "step")}, {assoc("markedPlaces", "Place"), assoc("content", "Token")}},
                   {"Page", 1.0, {attr("EString", "title"), attr("EInt", "pageNumber")},
                    {assoc("nodes", "Place", true), assoc("subnets", "PetriNet")}},
                   {"Annotation", 1.0, {attr("EString", "text"), attr("EInt", "offsetX"), attr("EInt", "offsetY")},
                    {assoc("annotated", "Transition")}},
               }});

  d.push_back({"library-catalog",
               {
                   {"Library", 4.0, {attr("EString", "name"), attr("EString", "address"), attr("EString", "city")},
                    {assoc("books", "Book", true), assoc("members", "Member", true), assoc("loans", "Loan", true),
                     assoc("branches", "Branch", true)}},
                   {"Book", 4.0,
                    {attr("EString", "title"), attr("EString", "isbn"), attr("EInt", "year"), attr("EInt", "pages")},
                    {assoc("authors", "Author"), assoc("publisher", "Publisher"), assoc("category", "Category")}},
                   {"Author", 3.0, {attr("EString", "firstName"), attr("EString", "lastName"), attr("EDate", "birthDate")},
                    {assoc("writings", "Book")}},
                   {"Member", 3.0, {attr("EString", "memberId"), attr("EString", "email"), attr("EDate", "joinDate")},
                    {assoc("borrowed", "Loan"), assoc("reservations", "Reservation")}},
                   {"Loan", 2.5, {attr("EDate", "startDate"), attr("EDate", "dueDate"), attr("EBoolean", "returned")},
                    {assoc("item", "Book"), assoc("borrower", "Member")}},
                   {"Publisher", 1.5, {attr("EString", "country"), attr("EString", "website")},
                    {assoc("catalog", "Book")}},
                   {"Category", 1.5, {attr("EString", "code"), attr("EString", "heading")},
                    {assoc("parent", "Category"), assoc("entries", "Book")}},
                   {"Reservation", 1.0, {attr("EDate", "reservedOn"), attr("EInt", "queuePosition")},
                    {assoc("requested", "Book"), assoc("holder", "Member")}},
                   {"Branch", 1.0, {attr("EString", "location"), attr("EInt", "floor")}, {assoc("shelf", "Book")}},
                   {"Librarian", 1.0, {attr("EString", "employeeNumber"), attr("EDouble", "salary")},
                    {assoc("worksAt", "Branch")}},
               }});
  return d;
}

/// One metamodel from `spec`; always corpus-eligible.
inline Metamodel generate_metamodel(const SyntheticDomainSpec& spec, nn::Rng& rng, std::string id) {
  const std::size_t hi = std::min(spec.max_classes, spec.concepts.size());
  const std::size_t count = spec.min_classes + rng.below(hi - spec.min_classes + 1);
  const auto picked = detail::pick_concepts(spec, count, rng);

  // Concept name -> class name in this metamodel (rare renames included).
  std::vector<std::string> class_names;
  std::set<std::string> taken;
  for (std::size_t i : picked) {
    std::string n = spec.concepts[i].name;
    if (rng.uniform() < spec.rare_rate) {
      std::string r = detail::rare_name(rng, true, spec.rare_exponent);
      if (!taken.count(r)) n = r;
    }
    taken.insert(n);
    class_names.push_back(n);
  }
  auto class_of = [&](const std::string& concept_name) -> const std::string* {
    for (std::size_t j = 0; j < picked.size(); ++j)
      if (spec.concepts[picked[j]].name == concept_name) return &class_names[j];
    return nullptr;
  };

  Metamodel m;
  m.id = std::move(id);
  for (std::size_t j = 0; j < picked.size(); ++j) {
    const ConceptSpec& c = spec.concepts[picked[j]];
    ClassDef cls;
    cls.name = class_names[j];
    std::set<std::string> members;
    for (const auto& a : c.attributes) {
      if (rng.uniform() >= spec.attribute_keep) continue;
      AttributeDef def = a;
      if (rng.uniform() < spec.rare_rate) def.name = detail::rare_name(rng, false, spec.rare_exponent);
      if (members.insert(def.name).second) cls.attributes.push_back(std::move(def));
    }
    if (cls.attributes.empty() && !c.attributes.empty()) {
      cls.attributes.push_back(c.attributes[rng.below(c.attributes.size())]);
      members.insert(cls.attributes.back().name);
    }
    for (const auto& r : c.associations) {
      const std::string* target = class_of(r.target_class);
      if (!target || rng.uniform() >= spec.association_keep) continue;
      AssociationDef def{r.name, *target, r.is_containment};
      if (rng.uniform() < spec.rare_rate) def.name = detail::rare_name(rng, false, spec.rare_exponent);
      if (members.insert(def.name).second) cls.associations.push_back(std::move(def));
    }
    m.classes.push_back(std::move(cls));
  }
  validate(m);
  return m;
}

/// `n` metamodels spread round-robin over `specs`. Ids are relative file
/// paths "<domain>/<domain>-NNNN.json".
inline std::vector<Metamodel> generate_synthetic(const std::vector<SyntheticDomainSpec>& specs, std::size_t n,
                                                 std::uint64_t seed) {
  if (specs.empty()) throw std::invalid_argument("no synthetic domains");
  if (n == 0) throw std::invalid_argument("synthetic corpus size must be at least 1");
  for (const auto& s : specs) s.validate();
  nn::Rng rng(seed);
  std::vector<Metamodel> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& spec = specs[i % specs.size()];
    char num[24];
    std::snprintf(num, sizeof num, "%04zu", i);
    out.push_back(generate_metamodel(spec, rng, spec.name + "/" + spec.name + "-" + num + ".json"));
  }
  return out;
}

/// Writes each metamodel as canonical JSON at `dir / id`.
inline void write_corpus(const std::vector<Metamodel>& corpus, const std::filesystem::path& dir) {
  for (const auto& m : corpus) {
    const auto path = dir / m.id;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << serialize_canonical(m) << '\n';
  }
}

inline std::vector<Metamodel> run_generate_synthetic(const std::vector<SyntheticDomainSpec>& specs, std::size_t n,
                                                     std::uint64_t seed, const std::filesystem::path& dir) {
  auto corpus = generate_synthetic(specs, n, seed);
  write_corpus(corpus, dir);
  return corpus;
}

}  // namespace mmconcept
