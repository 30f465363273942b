#pragma once

// Metamodel -> tree -> surface text, and back.
//
// Surface grammar (tokens separated by single spaces):
//   model  := "(" "MM" class* ")"
//   class  := "(" "CLS" "(" "NAME" id ")" "(" "ATTRS" attr* ")" "(" "ASSOCS" assoc* ")" ")"
//   attr   := "(" "ATTR" type name ")"
//   assoc  := "(" "ASSOC" target name ")"
// An identifier that equals a reserved token, or starts with '@', is written
// with an extra leading '@'. The bare token "<mask>" marks a hidden leaf.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mmconcept/metamodel.hpp"

namespace mmconcept {

inline constexpr std::string_view kMaskToken = "<mask>";

enum class NodeKind { Model, Cls, Name, Attrs, Attr, Assocs, Assoc, Leaf };

struct TreeNode {
  NodeKind kind = NodeKind::Leaf;
  std::string text;  // Leaf only
  bool is_mask = false;  // Leaf only
  std::vector<TreeNode> children;

  bool operator==(const TreeNode&) const = default;

  std::size_t node_count() const {
    std::size_t n = 1;
    for (const auto& c : children) n += c.node_count();
    return n;
  }
};

using SurfaceText = std::vector<std::string>;

enum class ElementKind { Class, Attribute, Association };

inline std::string_view to_string(ElementKind k) {
  switch (k) {
    case ElementKind::Class: return "class";
    case ElementKind::Attribute: return "attribute";
    case ElementKind::Association: return "association";
  }
  return "?";
}

inline ElementKind element_kind_from_string(std::string_view s) {
  if (s == "class") return ElementKind::Class;
  if (s == "attribute") return ElementKind::Attribute;
  if (s == "association") return ElementKind::Association;
  throw std::invalid_argument("unknown element kind '" + std::string(s) + "'");
}

struct ElementRef {
  ElementKind kind = ElementKind::Class;
  std::size_t class_index = 0;
  std::size_t member_index = 0;  // ignored for classes

  bool operator==(const ElementRef&) const = default;
};

inline bool resolves(const Metamodel& m, const ElementRef& ref) {
  if (ref.class_index >= m.classes.size()) return false;
  const auto& c = m.classes[ref.class_index];
  switch (ref.kind) {
    case ElementKind::Class: return true;
    case ElementKind::Attribute: return ref.member_index < c.attributes.size();
    case ElementKind::Association: return ref.member_index < c.associations.size();
  }
  return false;
}

inline const std::string& element_name(const Metamodel& m, const ElementRef& ref) {
  const auto& c = m.classes.at(ref.class_index);
  switch (ref.kind) {
    case ElementKind::Attribute: return c.attributes.at(ref.member_index).name;
    case ElementKind::Association: return c.associations.at(ref.member_index).name;
    default: return c.name;
  }
}

/// Every named element in declaration order: class, its attributes, its associations.
inline std::vector<ElementRef> all_elements(const Metamodel& m) {
  std::vector<ElementRef> refs;
  for (std::size_t i = 0; i < m.classes.size(); ++i) {
    refs.push_back({ElementKind::Class, i, 0});
    for (std::size_t j = 0; j < m.classes[i].attributes.size(); ++j)
      refs.push_back({ElementKind::Attribute, i, j});
    for (std::size_t j = 0; j < m.classes[i].associations.size(); ++j)
      refs.push_back({ElementKind::Association, i, j});
  }
  return refs;
}

/// Which elements of a metamodel are rendered. A member is only rendered when
/// its owning class is.
struct Selection {
  std::vector<bool> classes;
  std::vector<std::vector<bool>> attributes;
  std::vector<std::vector<bool>> associations;

  static Selection all(const Metamodel& m, bool value = true) {
    Selection s;
    s.classes.assign(m.classes.size(), value);
    for (const auto& c : m.classes) {
      s.attributes.emplace_back(c.attributes.size(), value);
      s.associations.emplace_back(c.associations.size(), value);
    }
    return s;
  }
  static Selection none(const Metamodel& m) { return all(m, false); }

  bool contains(const ElementRef& r) const {
    if (!classes[r.class_index]) return false;
    switch (r.kind) {
      case ElementKind::Class: return true;
      case ElementKind::Attribute: return attributes[r.class_index][r.member_index];
      case ElementKind::Association: return associations[r.class_index][r.member_index];
    }
    return false;
  }

  void set(const ElementRef& r, bool value = true) {
    switch (r.kind) {
      case ElementKind::Class: classes[r.class_index] = value; break;
      case ElementKind::Attribute: attributes[r.class_index][r.member_index] = value; break;
      case ElementKind::Association: associations[r.class_index][r.member_index] = value; break;
    }
  }

  /// Selects a class together with all of its members.
  void set_class_subtree(std::size_t class_index) {
    classes[class_index] = true;
    attributes[class_index].assign(attributes[class_index].size(), true);
    associations[class_index].assign(associations[class_index].size(), true);
  }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (!classes[i]) continue;
      n += 1 + static_cast<std::size_t>(std::count(attributes[i].begin(), attributes[i].end(), true)) +
           static_cast<std::size_t>(std::count(associations[i].begin(), associations[i].end(), true));
    }
    return n;
  }

  /// True when every element selected here is also selected in `other`.
  bool subset_of(const Selection& other) const {
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] && !other.classes[i]) return false;
      for (std::size_t j = 0; j < attributes[i].size(); ++j)
        if (classes[i] && attributes[i][j] && !(other.classes[i] && other.attributes[i][j])) return false;
      for (std::size_t j = 0; j < associations[i].size(); ++j)
        if (classes[i] && associations[i][j] && !(other.classes[i] && other.associations[i][j]))
          return false;
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// Escaping

inline bool is_reserved_token(std::string_view t) {
  static constexpr std::array<std::string_view, 10> kReserved = {
      "MM", "CLS", "NAME", "ATTRS", "ATTR", "ASSOCS", "ASSOC", "(", ")", kMaskToken};
  return std::find(kReserved.begin(), kReserved.end(), t) != kReserved.end();
}

inline std::string escape_identifier(std::string_view id) {
  if (is_reserved_token(id) || (!id.empty() && id.front() == '@')) return "@" + std::string(id);
  return std::string(id);
}

inline std::string unescape_identifier(std::string_view token) {
  if (!token.empty() && token.front() == '@') return std::string(token.substr(1));
  return std::string(token);
}

// ---------------------------------------------------------------------------
// Tree construction

namespace detail {

inline TreeNode leaf(std::string text) { return TreeNode{NodeKind::Leaf, std::move(text), false, {}}; }
inline TreeNode node(NodeKind kind) { return TreeNode{kind, {}, false, {}}; }

}  // namespace detail

inline TreeNode build_tree(const Metamodel& m, const Selection& sel) {
  TreeNode root = detail::node(NodeKind::Model);
  for (std::size_t i = 0; i < m.classes.size(); ++i) {
    if (!sel.classes[i]) continue;
    const auto& c = m.classes[i];
    TreeNode cls = detail::node(NodeKind::Cls);
    TreeNode name = detail::node(NodeKind::Name);
    name.children.push_back(detail::leaf(c.name));
    TreeNode attrs = detail::node(NodeKind::Attrs);
    for (std::size_t j = 0; j < c.attributes.size(); ++j) {
      if (!sel.attributes[i][j]) continue;
      TreeNode attr = detail::node(NodeKind::Attr);
      attr.children.push_back(detail::leaf(c.attributes[j].type_name));
      attr.children.push_back(detail::leaf(c.attributes[j].name));
      attrs.children.push_back(std::move(attr));
    }
    TreeNode assocs = detail::node(NodeKind::Assocs);
    for (std::size_t j = 0; j < c.associations.size(); ++j) {
      if (!sel.associations[i][j]) continue;
      TreeNode assoc = detail::node(NodeKind::Assoc);
      assoc.children.push_back(detail::leaf(c.associations[j].target_class));
      assoc.children.push_back(detail::leaf(c.associations[j].name));
      assocs.children.push_back(std::move(assoc));
    }
    cls.children.push_back(std::move(name));
    cls.children.push_back(std::move(attrs));
    cls.children.push_back(std::move(assocs));
    root.children.push_back(std::move(cls));
  }
  return root;
}

inline TreeNode build_tree(const Metamodel& m) { return build_tree(m, Selection::all(m)); }

// ---------------------------------------------------------------------------
// Flattening

namespace detail {

inline std::string_view keyword(NodeKind k) {
  switch (k) {
    case NodeKind::Model: return "MM";
    case NodeKind::Cls: return "CLS";
    case NodeKind::Name: return "NAME";
    case NodeKind::Attrs: return "ATTRS";
    case NodeKind::Attr: return "ATTR";
    case NodeKind::Assocs: return "ASSOCS";
    case NodeKind::Assoc: return "ASSOC";
    case NodeKind::Leaf: break;
  }
  return {};
}

inline void flatten_into(const TreeNode& t, SurfaceText& out) {
  if (t.kind == NodeKind::Leaf) {
    out.push_back(t.is_mask ? std::string(kMaskToken) : escape_identifier(t.text));
    return;
  }
  out.emplace_back("(");
  out.emplace_back(keyword(t.kind));
  for (const auto& c : t.children) flatten_into(c, out);
  out.emplace_back(")");
}

}  // namespace detail

inline SurfaceText flatten(const TreeNode& t) {
  SurfaceText out;
  detail::flatten_into(t, out);
  return out;
}

inline std::string join_surface(const SurfaceText& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out.push_back(' ');
    out += s[i];
  }
  return out;
}

inline SurfaceText split_surface(std::string_view line) {
  SurfaceText out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing surface text

class SurfaceError : public ParseError {
 public:
  using ParseError::ParseError;
};

namespace detail {

class SurfaceParser {
 public:
  explicit SurfaceParser(const SurfaceText& s) : tokens_(s) {}

  TreeNode parse_model() {
    TreeNode root = open(NodeKind::Model);
    while (peek_open_of("CLS")) root.children.push_back(parse_class());
    close();
    if (pos_ != tokens_.size()) fail("trailing tokens after model");
    return root;
  }

 private:
  TreeNode parse_class() {
    TreeNode cls = open(NodeKind::Cls);
    TreeNode name = open(NodeKind::Name);
    name.children.push_back(parse_leaf());
    close();
    TreeNode attrs = open(NodeKind::Attrs);
    while (peek_open_of("ATTR")) {
      TreeNode a = open(NodeKind::Attr);
      a.children.push_back(parse_leaf());
      a.children.push_back(parse_leaf());
      close();
      attrs.children.push_back(std::move(a));
    }
    close();
    TreeNode assocs = open(NodeKind::Assocs);
    while (peek_open_of("ASSOC")) {
      TreeNode a = open(NodeKind::Assoc);
      a.children.push_back(parse_leaf());
      a.children.push_back(parse_leaf());
      close();
      assocs.children.push_back(std::move(a));
    }
    close();
    close();
    cls.children = {std::move(name), std::move(attrs), std::move(assocs)};
    return cls;
  }

  TreeNode parse_leaf() {
    const std::string& t = next("identifier");
    if (t == kMaskToken) return TreeNode{NodeKind::Leaf, {}, true, {}};
    if (is_reserved_token(t)) fail("keyword '" + t + "' out of position");
    if (t == "@") fail("empty escaped identifier");
    return leaf(unescape_identifier(t));
  }

  bool peek_open_of(std::string_view kw) const {
    return pos_ + 1 < tokens_.size() && tokens_[pos_] == "(" && tokens_[pos_ + 1] == kw;
  }

  TreeNode open(NodeKind kind) {
    if (next("'('") != "(") fail("expected '('");
    const std::string& kw = next("keyword");
    if (kw != keyword(kind)) fail("expected keyword " + std::string(keyword(kind)) + ", got '" + kw + "'");
    return node(kind);
  }

  void close() {
    if (next("')'") != ")") fail("expected ')'");
  }

  const std::string& next(const std::string& what) {
    if (pos_ >= tokens_.size()) fail("unexpected end of input, expected " + what);
    return tokens_[pos_++];
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SurfaceError("surface parse error at token " + std::to_string(pos_) + ": " + msg);
  }

  const SurfaceText& tokens_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline TreeNode parse_surface(const SurfaceText& s) {
  // Cheap balance check first so unbalanced input gets a specific error.
  long depth = 0;
  for (const auto& t : s) {
    if (t == "(") ++depth;
    if (t == ")" && --depth < 0) throw SurfaceError("unbalanced parentheses");
  }
  if (depth != 0) throw SurfaceError("unbalanced parentheses");
  return detail::SurfaceParser(s).parse_model();
}

/// Rebuilds a metamodel from a parsed tree. Fails on masked leaves.
inline Metamodel metamodel_from_tree(const TreeNode& t, std::string id = {}) {
  auto text_of = [](const TreeNode& leaf) -> const std::string& {
    if (leaf.is_mask) throw ParseError("masked leaf has no identifier");
    return leaf.text;
  };
  Metamodel m;
  m.id = std::move(id);
  for (const auto& cls : t.children) {
    ClassDef c;
    c.name = text_of(cls.children[0].children[0]);
    for (const auto& a : cls.children[1].children)
      c.attributes.push_back({text_of(a.children[1]), text_of(a.children[0])});
    for (const auto& r : cls.children[2].children)
      c.associations.push_back({text_of(r.children[1]), text_of(r.children[0]), false});
    m.classes.push_back(std::move(c));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Masking

struct MaskedContext {
  SurfaceText context;
  std::string ground_truth;
};

/// Renders the selected part of `m` with the name of `ref` replaced by the
/// mask token. For attributes the type stays visible; for associations the
/// target class stays visible.
inline MaskedContext mask_element(const Metamodel& m, const ElementRef& ref, const Selection& sel) {
  if (!resolves(m, ref)) throw std::out_of_range("element reference does not resolve");
  if (!sel.contains(ref)) throw std::invalid_argument("masked element is not part of the selection");

  // Position of the element inside the filtered tree.
  std::size_t cls_pos = 0;
  for (std::size_t i = 0; i < ref.class_index; ++i) cls_pos += sel.classes[i] ? 1 : 0;
  auto member_pos = [&](const std::vector<bool>& flags) {
    std::size_t p = 0;
    for (std::size_t j = 0; j < ref.member_index; ++j) p += flags[j] ? 1 : 0;
    return p;
  };

  TreeNode tree = build_tree(m, sel);
  TreeNode& cls = tree.children[cls_pos];
  TreeNode* target = nullptr;
  switch (ref.kind) {
    case ElementKind::Class: target = &cls.children[0].children[0]; break;
    case ElementKind::Attribute:
      target = &cls.children[1].children[member_pos(sel.attributes[ref.class_index])].children[1];
      break;
    case ElementKind::Association:
      target = &cls.children[2].children[member_pos(sel.associations[ref.class_index])].children[1];
      break;
  }
  MaskedContext out;
  out.ground_truth = target->text;
  target->is_mask = true;
  target->text.clear();
  out.context = flatten(tree);
  return out;
}

inline MaskedContext mask_element(const Metamodel& m, const ElementRef& ref) {
  return mask_element(m, ref, Selection::all(m));
}

inline std::size_t count_masks(const SurfaceText& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), std::string(kMaskToken)));
}

}  // namespace mmconcept
