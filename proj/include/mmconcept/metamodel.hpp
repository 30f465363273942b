#pragma once

// In-memory metamodel representation, canonical JSON interchange format,
// corpus eligibility filter and identifier statistics.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace mmconcept {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed UTF-8: shortest encodings only, no surrogates, at most U+10FFFF.
inline bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (b < 0x80) {
      ++i;
      continue;
    } else if ((b & 0xE0) == 0xC0) {
      len = 2, cp = b & 0x1F;
    } else if ((b & 0xF0) == 0xE0) {
      len = 3, cp = b & 0x0F;
    } else if ((b & 0xF8) == 0xF0) {
      len = 4, cp = b & 0x07;
    } else {
      return false;
    }
    if (i + len > text.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto c = static_cast<unsigned char>(text[i + k]);
      if ((c & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (c & 0x3F);
    }
    static constexpr std::uint32_t kMinForLength[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMinForLength[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp < 0xE000)) return false;
    i += len;
  }
  return true;
}

inline bool is_valid_identifier(std::string_view text) {
  if (text.empty() || !is_valid_utf8(text)) return false;
  return std::none_of(text.begin(), text.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

struct AttributeDef {
  std::string name;
  std::string type_name;

  bool operator==(const AttributeDef&) const = default;
};

struct AssociationDef {
  std::string name;
  std::string target_class;
  bool is_containment = false;

  bool operator==(const AssociationDef&) const = default;
};

struct ClassDef {
  std::string name;
  std::vector<AttributeDef> attributes;
  std::vector<AssociationDef> associations;

  bool operator==(const ClassDef&) const = default;
};

struct Metamodel {
  std::string id;
  std::vector<ClassDef> classes;

  bool operator==(const Metamodel&) const = default;

  std::size_t attribute_count() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.attributes.size();
    return n;
  }
  std::size_t association_count() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.associations.size();
    return n;
  }
  /// Classes + attributes + associations, i.e. every named element.
  std::size_t element_count() const {
    return classes.size() + attribute_count() + association_count();
  }

  /// Index of the class called `name`, or classes.size() when absent.
  std::size_t find_class(std::string_view name) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i].name == name) return i;
    return classes.size();
  }
};

/// Throws ParseError when `m` breaks a structural invariant: empty or
/// whitespace-bearing identifiers, duplicate class names, duplicate attribute
/// names within a class, or an association whose target is not declared.
inline void validate(const Metamodel& m) {
  std::set<std::string_view> class_names;
  for (const auto& c : m.classes) {
    if (c.name.empty()) throw ParseError("class with empty name");
    if (!is_valid_identifier(c.name))
      throw ParseError("invalid class name '" + c.name + "'");
    if (!class_names.insert(c.name).second)
      throw ParseError("duplicate class name '" + c.name + "'");
  }
  for (const auto& c : m.classes) {
    std::set<std::string_view> attr_names;
    for (const auto& a : c.attributes) {
      if (!is_valid_identifier(a.name))
        throw ParseError("invalid attribute name in class '" + c.name + "'");
      if (!is_valid_identifier(a.type_name))
        throw ParseError("invalid type for attribute '" + a.name + "' in class '" + c.name + "'");
      if (!attr_names.insert(a.name).second)
        throw ParseError("duplicate attribute '" + a.name + "' in class '" + c.name + "'");
    }
    for (const auto& r : c.associations) {
      if (!is_valid_identifier(r.name))
        throw ParseError("invalid association name in class '" + c.name + "'");
      if (!class_names.contains(r.target_class))
        throw ParseError("dangling association target '" + r.target_class + "' (" + c.name +
                         "." + r.name + ")");
    }
  }
}

inline constexpr std::size_t kMinCorpusClasses = 2;
inline constexpr std::size_t kMaxCorpusClasses = 15;

inline bool is_corpus_eligible(const Metamodel& m, std::size_t min_classes = kMinCorpusClasses,
                               std::size_t max_classes = kMaxCorpusClasses) {
  return m.classes.size() >= min_classes && m.classes.size() <= max_classes;
}

// ---------------------------------------------------------------------------
// Canonical JSON format

namespace detail {

inline void require_object_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                std::string_view what) {
  if (!j.is_object()) throw ParseError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ParseError("unknown field '" + key + "' in " + std::string(what));
  }
}

inline std::string require_string(const nlohmann::json& j, const char* key, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw ParseError(std::string(what) + ": missing or non-string field '" + key + "'");
  return it->get<std::string>();
}

inline const nlohmann::json& require_array(const nlohmann::json& j, const char* key,
                                           std::string_view what) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array())
    throw ParseError(std::string(what) + ": missing or non-array field '" + key + "'");
  return *it;
}

}  // namespace detail

inline Metamodel metamodel_from_json(const nlohmann::json& doc) {
  detail::require_object_keys(doc, {"id", "classes"}, "metamodel");
  Metamodel m;
  if (doc.contains("id")) {
    if (!doc["id"].is_string()) throw ParseError("metamodel: 'id' must be a string");
    m.id = doc["id"].get<std::string>();
  }
  for (const auto& jc : detail::require_array(doc, "classes", "metamodel")) {
    detail::require_object_keys(jc, {"name", "attributes", "associations"}, "class");
    ClassDef c;
    c.name = detail::require_string(jc, "name", "class");
    if (jc.contains("attributes")) {
      for (const auto& ja : detail::require_array(jc, "attributes", "class")) {
        detail::require_object_keys(ja, {"name", "type"}, "attribute");
        c.attributes.push_back(
            {detail::require_string(ja, "name", "attribute"), detail::require_string(ja, "type", "attribute")});
      }
    }
    if (jc.contains("associations")) {
      for (const auto& jr : detail::require_array(jc, "associations", "class")) {
        detail::require_object_keys(jr, {"name", "target", "containment"}, "association");
        AssociationDef r;
        r.name = detail::require_string(jr, "name", "association");
        r.target_class = detail::require_string(jr, "target", "association");
        if (jr.contains("containment")) {
          if (!jr["containment"].is_boolean())
            throw ParseError("association: 'containment' must be a boolean");
          r.is_containment = jr["containment"].get<bool>();
        }
        c.associations.push_back(std::move(r));
      }
    }
    m.classes.push_back(std::move(c));
  }
  validate(m);
  return m;
}

inline Metamodel parse_canonical(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return metamodel_from_json(doc);
}

/// Field order follows the canonical schema; an empty id is omitted.
inline nlohmann::ordered_json to_json(const Metamodel& m) {
  nlohmann::ordered_json doc;
  if (!m.id.empty()) doc["id"] = m.id;
  doc["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : m.classes) {
    nlohmann::ordered_json jc;
    jc["name"] = c.name;
    jc["attributes"] = nlohmann::ordered_json::array();
    for (const auto& a : c.attributes) {
      nlohmann::ordered_json ja;
      ja["name"] = a.name;
      ja["type"] = a.type_name;
      jc["attributes"].push_back(std::move(ja));
    }
    jc["associations"] = nlohmann::ordered_json::array();
    for (const auto& r : c.associations) {
      nlohmann::ordered_json jr;
      jr["name"] = r.name;
      jr["target"] = r.target_class;
      jr["containment"] = r.is_containment;
      jc["associations"].push_back(std::move(jr));
    }
    doc["classes"].push_back(std::move(jc));
  }
  return doc;
}

inline std::string serialize_canonical(const Metamodel& m, int indent = 2) {
  return to_json(m).dump(indent);
}

// ---------------------------------------------------------------------------
// Corpus statistics

struct CorpusStats {
  std::size_t identifier_count = 0;
  std::size_t type_count = 0;
  std::size_t hapax_count = 0;

  bool operator==(const CorpusStats&) const = default;
};

template <typename Fn>
void for_each_identifier(const Metamodel& m, Fn&& fn) {
  for (const auto& c : m.classes) {
    fn(c.name);
    for (const auto& a : c.attributes) fn(a.name);
    for (const auto& r : c.associations) fn(r.name);
  }
}

inline CorpusStats corpus_stats(const std::vector<Metamodel>& corpus) {
  std::unordered_map<std::string, std::size_t> counts;
  CorpusStats stats;
  for (const auto& m : corpus) {
    for_each_identifier(m, [&](const std::string& id) {
      ++counts[id];
      ++stats.identifier_count;
    });
  }
  stats.type_count = counts.size();
  stats.hapax_count = static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](const auto& kv) { return kv.second == 1; }));
  return stats;
}

}  // namespace mmconcept
