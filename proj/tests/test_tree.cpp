#include <string>

#include <gtest/gtest.h>

#include "mmconcept/tree.hpp"
#include "test_support.hpp"

using namespace mmconcept;

namespace {

Metamodel fsm() {
  Metamodel m;
  m.classes = {
      {"FSM", {}, {{"states", "State", true}}},
      {"State", {{"isFinal", "EBoolean"}}, {}},
      {"Transition", {}, {{"source", "State", false}, {"target", "State", false}}},
  };
  return m;
}

SurfaceText tokens(const std::string& s) { return split_surface(s); }

// Independent traversal oracle.
std::size_t count_nodes(const TreeNode& t) {
  std::size_t n = 0;
  std::vector<const TreeNode*> stack{&t};
  while (!stack.empty()) {
    const TreeNode* x = stack.back();
    stack.pop_back();
    ++n;
    for (const auto& c : x->children) stack.push_back(&c);
  }
  return n;
}

}  // namespace

TEST(BuildTree, EmptyAttrsNodeIsRetained) {
  Metamodel m;
  m.classes = {{"State", {}, {}}};
  const TreeNode t = build_tree(m);
  ASSERT_EQ(t.children.size(), 1u);
  const TreeNode& cls = t.children[0];
  ASSERT_EQ(cls.children.size(), 3u);
  EXPECT_EQ(cls.children[1].kind, NodeKind::Attrs);
  EXPECT_TRUE(cls.children[1].children.empty());
  EXPECT_TRUE(cls.children[2].children.empty());
}

TEST(BuildTree, PartialFsm) {
  const TreeNode t = build_tree(fsm());
  ASSERT_EQ(t.children.size(), 3u);
  for (const auto& c : t.children) EXPECT_EQ(c.kind, NodeKind::Cls);
  const TreeNode& assocs = t.children[2].children[2];
  ASSERT_EQ(assocs.children.size(), 2u);
  EXPECT_EQ(assocs.children[0].children[0].text, "State");
  EXPECT_EQ(assocs.children[1].children[0].text, "State");
}

TEST(BuildTree, NodeCountClosedForm) {
  Metamodel m;
  m.classes = {{"A", {{"x", "EInt"}, {"y", "EString"}}, {{"b", "B", false}}}, {"B", {}, {{"a", "A", false}}}};
  std::size_t closed = 1;
  for (const auto& c : m.classes) closed += 3 + 1 + 3 * c.attributes.size() + 3 * c.associations.size() + 1;
  const TreeNode t = build_tree(m);
  EXPECT_EQ(count_nodes(t), closed);
  EXPECT_EQ(t.node_count(), closed);

  nn::Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Metamodel r = testing_support::random_metamodel(rng);
    std::size_t expect = 1;
    for (const auto& c : r.classes) expect += 5 + 3 * c.attributes.size() + 3 * c.associations.size();
    EXPECT_EQ(count_nodes(build_tree(r)), expect);
  }
}

TEST(Flatten, SingleClass) {
  Metamodel m;
  m.classes = {{"State", {}, {}}};
  EXPECT_EQ(flatten(build_tree(m)), tokens("( MM ( CLS ( NAME State ) ( ATTRS ) ( ASSOCS ) ) )"));
}

TEST(Flatten, AttributeRendering) {
  Metamodel m;
  m.classes = {{"State", {{"isFinal", "EBoolean"}}, {}}};
  EXPECT_EQ(join_surface(flatten(build_tree(m))),
            "( MM ( CLS ( NAME State ) ( ATTRS ( ATTR EBoolean isFinal ) ) ( ASSOCS ) ) )");
}

TEST(Flatten, KeywordIdentifiersAreEscaped) {
  Metamodel m;
  m.classes = {{"CLS", {{"@a", "MM"}}, {{"(", "CLS", false}}}};
  EXPECT_EQ(join_surface(flatten(build_tree(m))),
            "( MM ( CLS ( NAME @CLS ) ( ATTRS ( ATTR @MM @@a ) ) ( ASSOCS ( ASSOC @CLS @( ) ) ) )");
  EXPECT_EQ(parse_surface(flatten(build_tree(m))), build_tree(m));
}

TEST(ParseSurface, InvertsTheExamples) {
  Metamodel single;
  single.classes = {{"State", {}, {}}};
  EXPECT_EQ(parse_surface(tokens("( MM ( CLS ( NAME State ) ( ATTRS ) ( ASSOCS ) ) )")), build_tree(single));
  Metamodel attr;
  attr.classes = {{"State", {{"isFinal", "EBoolean"}}, {}}};
  EXPECT_EQ(parse_surface(tokens("( MM ( CLS ( NAME State ) ( ATTRS ( ATTR EBoolean isFinal ) ) ( ASSOCS ) ) )")),
            build_tree(attr));
}

TEST(ParseSurface, RoundTripRandomMetamodels) {
  nn::Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    const Metamodel m = testing_support::random_metamodel(rng);
    const TreeNode t = build_tree(m);
    const SurfaceText s = flatten(t);
    EXPECT_EQ(parse_surface(s), t);
    EXPECT_EQ(split_surface(join_surface(s)), s);
    // The containment flag is not part of the surface text.
    Metamodel flat = m;
    for (auto& c : flat.classes)
      for (auto& r : c.associations) r.is_containment = false;
    EXPECT_EQ(metamodel_from_tree(parse_surface(s), m.id), flat);
  }
}

TEST(ParseSurface, Errors) {
  EXPECT_THROW(parse_surface(tokens("( MM ( CLS ( NAME A ) ( ATTRS ) ( ASSOCS ) )")), SurfaceError);
  EXPECT_THROW(parse_surface(tokens("( MM ) )")), SurfaceError);
  EXPECT_THROW(parse_surface(tokens("( MM ( CLS ( NAME CLS ) ( ATTRS ) ( ASSOCS ) ) )")), SurfaceError);
  EXPECT_THROW(parse_surface(tokens("( MM ( CLS ( ATTRS ) ( NAME A ) ( ASSOCS ) ) )")), SurfaceError);
  EXPECT_THROW(parse_surface(tokens("( MM ( CLS ( NAME A ) ( ATTRS ( ATTR x ) ) ( ASSOCS ) ) )")), SurfaceError);
  EXPECT_THROW(parse_surface(tokens("( CLS )")), SurfaceError);
  EXPECT_THROW(parse_surface({}), SurfaceError);
}

TEST(MaskElement, ClassName) {
  const auto masked = mask_element(fsm(), {ElementKind::Class, 0, 0});
  EXPECT_EQ(masked.ground_truth, "FSM");
  SurfaceText expected = flatten(build_tree(fsm()));
  expected[6] = "<mask>";
  EXPECT_EQ(masked.context, expected);
}

TEST(MaskElement, AttributeKeepsType) {
  const auto masked = mask_element(fsm(), {ElementKind::Attribute, 1, 0});
  EXPECT_EQ(masked.ground_truth, "isFinal");
  const std::string text = join_surface(masked.context);
  EXPECT_NE(text.find("( ATTR EBoolean <mask> )"), std::string::npos);
}

TEST(MaskElement, AssociationKeepsTarget) {
  const auto masked = mask_element(fsm(), {ElementKind::Association, 2, 1});
  EXPECT_EQ(masked.ground_truth, "target");
  EXPECT_NE(join_surface(masked.context).find("( ASSOC State source ) ( ASSOC State <mask> )"), std::string::npos);
}

TEST(MaskElement, EveryElementExactlyOneMaskAndRestores) {
  nn::Rng rng(23);
  for (int round = 0; round < 10; ++round) {
    const Metamodel m = testing_support::random_metamodel(rng);
    const SurfaceText full = flatten(build_tree(m));
    const auto refs = all_elements(m);
    EXPECT_EQ(refs.size(), m.element_count());
    for (const auto& ref : refs) {
      auto masked = mask_element(m, ref);
      ASSERT_EQ(count_masks(masked.context), 1u);
      ASSERT_EQ(masked.context.size(), full.size());
      std::size_t diffs = 0;
      for (std::size_t i = 0; i < full.size(); ++i) {
        if (masked.context[i] == full[i]) continue;
        ++diffs;
        EXPECT_EQ(full[i], escape_identifier(masked.ground_truth));
        masked.context[i] = escape_identifier(masked.ground_truth);
      }
      EXPECT_EQ(diffs, 1u);
      EXPECT_EQ(masked.context, full);
      EXPECT_EQ(masked.ground_truth, element_name(m, ref));
    }
  }
}

TEST(MaskElement, UnresolvableReference) {
  EXPECT_THROW(mask_element(fsm(), {ElementKind::Class, 3, 0}), std::out_of_range);
  EXPECT_THROW(mask_element(fsm(), {ElementKind::Attribute, 0, 0}), std::out_of_range);
}

TEST(MaskElement, MaskedContextParses) {
  const auto masked = mask_element(fsm(), {ElementKind::Attribute, 1, 0});
  const TreeNode t = parse_surface(masked.context);
  EXPECT_TRUE(t.children[1].children[1].children[0].children[1].is_mask);
  EXPECT_EQ(flatten(t), masked.context);
}
