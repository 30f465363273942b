#pragma once

// Ecore/XMI reader. Only EClass, EAttribute and EReference are kept;
// supertypes, operations, annotations, enums and data types are skipped.

#include <sstream>
#include <string>
#include <string_view>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "mmconcept/metamodel.hpp"

namespace mmconcept {

namespace detail {

using boost::property_tree::ptree;

inline std::string xml_attr(const ptree& node, const char* name) {
  if (auto attrs = node.get_child_optional("<xmlattr>")) {
    if (auto v = attrs->get_optional<std::string>(name)) return *v;
  }
  return {};
}

// "ecore:EDataType http://www.eclipse.org/emf/2002/Ecore#//EString" -> "EString"
// "#//sub/State" -> "State"
inline std::string type_reference_name(std::string_view ref) {
  if (auto space = ref.rfind(' '); space != std::string_view::npos) ref = ref.substr(space + 1);
  if (auto slash = ref.rfind('/'); slash != std::string_view::npos) return std::string(ref.substr(slash + 1));
  if (auto hash = ref.rfind('#'); hash != std::string_view::npos) return std::string(ref.substr(hash + 1));
  return std::string(ref);
}

inline std::string feature_type(const ptree& feature) {
  std::string ref = xml_attr(feature, "eType");
  if (ref.empty()) {
    // Generic features carry their type on a nested eGenericType element.
    if (auto generic = feature.get_child_optional("eGenericType")) ref = xml_attr(*generic, "eClassifier");
  }
  return ref.empty() ? std::string() : type_reference_name(ref);
}

inline bool is_xsi_type(const ptree& node, std::string_view type) {
  std::string t = xml_attr(node, "xsi:type");
  if (t.empty()) return false;
  if (auto colon = t.find(':'); colon != std::string::npos) t = t.substr(colon + 1);
  return t == type;
}

inline void read_package(const ptree& package, Metamodel& out) {
  for (const auto& [tag, child] : package) {
    if (tag == "eSubpackages") {
      read_package(child, out);
      continue;
    }
    if (tag != "eClassifiers" || !is_xsi_type(child, "EClass")) continue;
    ClassDef cls;
    cls.name = xml_attr(child, "name");
    if (cls.name.empty()) throw ParseError("EClass with empty name");
    for (const auto& [ftag, feature] : child) {
      if (ftag != "eStructuralFeatures") continue;
      const std::string name = xml_attr(feature, "name");
      if (is_xsi_type(feature, "EAttribute")) {
        std::string type = feature_type(feature);
        cls.attributes.push_back({name, type.empty() ? std::string("EJavaObject") : type});
      } else if (is_xsi_type(feature, "EReference")) {
        std::string target = feature_type(feature);
        if (target.empty())
          throw ParseError("EReference '" + cls.name + "." + name + "' has no target type");
        cls.associations.push_back({name, target, xml_attr(feature, "containment") == "true"});
      }
    }
    out.classes.push_back(std::move(cls));
  }
}

}  // namespace detail

/// Parses an Ecore XMI document. The root must be an EPackage, or an XMI
/// wrapper whose children are EPackages.
inline Metamodel parse_xmi(std::string_view bytes, std::string id = {}) {
  using boost::property_tree::ptree;
  ptree doc;
  try {
    std::istringstream in{std::string(bytes)};
    boost::property_tree::read_xml(in, doc);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw ParseError(std::string("malformed XML: ") + e.what());
  }

  Metamodel m;
  m.id = std::move(id);
  bool found_package = false;
  for (const auto& [tag, node] : doc) {
    if (tag == "ecore:EPackage") {
      detail::read_package(node, m);
      found_package = true;
    } else if (tag == "xmi:XMI") {
      for (const auto& [inner_tag, inner] : node) {
        if (inner_tag == "ecore:EPackage") {
          detail::read_package(inner, m);
          found_package = true;
        }
      }
    }
  }
  if (!found_package) throw ParseError("no EPackage root element");
  validate(m);
  return m;
}

}  // namespace mmconcept
