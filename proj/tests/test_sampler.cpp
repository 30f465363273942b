#include <algorithm>
#include <sstream>
#include <string>
#include <tuple>

#include <gtest/gtest.h>

#include "mmconcept/sampler.hpp"
#include "mmconcept/synthetic.hpp"
#include "test_support.hpp"

using namespace mmconcept;

namespace {

Metamodel fsm() {
  Metamodel m;
  m.id = "fsm";
  m.classes = {
      {"FSM", {}, {{"states", "State", true}}},
      {"State", {{"isFinal", "EBoolean"}}, {}},
      {"Transition", {}, {{"source", "State", false}, {"target", "State", false}}},
      {"Comment", {{"body", "EString"}}, {}},
  };
  return m;
}

std::size_t visible_elements(const TestSample& s) {
  // Elements shown in the context: every NAME, ATTR and ASSOC entry minus the masked one.
  std::size_t n = 0;
  for (const auto& t : s.context) n += t == "NAME" || t == "ATTR" || t == "ASSOC";
  return n - 1;
}

}  // namespace

TEST(SampleGlobal, CountIdentity) {
  Metamodel m;
  m.classes = {{"A", {{"x", "EInt"}}, {{"b", "B", false}, {"c", "C", false}}},
               {"B", {{"y", "EInt"}}, {{"a", "A", false}}},
               {"C", {}, {{"c", "C", false}}}};
  const auto s = sample_global(m);
  EXPECT_EQ(s.size(), 9u);
  for (const auto& x : s) {
    EXPECT_EQ(x.context_size, 8u);
    EXPECT_EQ(count_masks(x.context), 1u);
    EXPECT_EQ(x.strategy, Strategy::Global);
  }
}

TEST(SampleGlobal, FsmClassContextIsWholeMetamodelMinusName) {
  const auto s = sample_global(fsm());
  const SurfaceText full = flatten(build_tree(fsm()));
  ASSERT_EQ(s[0].ground_truth, "FSM");
  ASSERT_EQ(s[0].context.size(), full.size());
  std::size_t diffs = 0;
  for (std::size_t i = 0; i < full.size(); ++i) diffs += s[0].context[i] != full[i];
  EXPECT_EQ(diffs, 1u);
  EXPECT_EQ(s[0].kind, ElementKind::Class);
}

TEST(SampleLocal, IsolatedClassSeesOnlyItself) {
  const auto s = sample_local(fsm());
  const auto it = std::find_if(s.begin(), s.end(), [](const TestSample& x) { return x.ground_truth == "Comment"; });
  ASSERT_NE(it, s.end());
  EXPECT_EQ(join_surface(it->context), "( MM ( CLS ( NAME <mask> ) ( ATTRS ( ATTR EString body ) ) ( ASSOCS ) ) )");
  EXPECT_EQ(it->context_size, 1u);
}

TEST(SampleLocal, FsmKeepsConnectedStateDropsOthers) {
  const auto s = sample_local(fsm());
  ASSERT_EQ(s[0].ground_truth, "FSM");
  const std::string text = join_surface(s[0].context);
  EXPECT_NE(text.find("( NAME State )"), std::string::npos);
  EXPECT_EQ(text.find("Comment"), std::string::npos);
  EXPECT_EQ(text.find("Transition"), std::string::npos);
  EXPECT_EQ(s[0].context_size, 3u);  // states, State, isFinal
  EXPECT_EQ(visible_elements(s[0]), 3u);
}

TEST(SampleLocal, NeverLargerThanGlobal) {
  nn::Rng rng(31);
  for (int i = 0; i < 50; ++i) {
    const Metamodel m = testing_support::random_metamodel(rng);
    const auto g = plan_global(m);
    const auto l = plan_local(m);
    ASSERT_EQ(g.size(), l.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
      EXPECT_EQ(g[j].target, l[j].target);
      EXPECT_TRUE(l[j].selection.subset_of(g[j].selection));
      EXPECT_LE(l[j].selection.element_count(), g[j].selection.element_count());
    }
  }
}

TEST(SampleIncremental, MinimalTwoClassExample) {
  Metamodel m;
  m.classes = {{"A", {}, {{"toB", "B", false}}}, {"B", {}, {}}};
  const auto s = sample_incremental(m, 1);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].kind, ElementKind::Class);
  EXPECT_EQ(s[0].ground_truth, "B");
  EXPECT_EQ(s[0].context_size, 1u);
  EXPECT_EQ(join_surface(s[0].context),
            "( MM ( CLS ( NAME A ) ( ATTRS ) ( ASSOCS ) ) ( CLS ( NAME <mask> ) ( ATTRS ) ( ASSOCS ) ) )");
  EXPECT_EQ(s[1].kind, ElementKind::Association);
  EXPECT_EQ(s[1].ground_truth, "toB");
  EXPECT_EQ(s[1].context_size, 2u);
}

TEST(SampleIncremental, RootIsLeastReferencedClass) {
  const auto plans = plan_incremental(fsm(), 3);
  for (const auto& p : plans) EXPECT_FALSE(p.target.kind == ElementKind::Class && p.target.class_index == 0);
  EXPECT_TRUE(plans.front().selection.classes[0]);
}

TEST(SampleIncremental, DisconnectedComponentsAreReached) {
  const auto s = sample_incremental(fsm(), 9);
  EXPECT_EQ(s.size(), fsm().element_count() - 1);
  EXPECT_TRUE(std::any_of(s.begin(), s.end(), [](const TestSample& x) { return x.ground_truth == "Comment"; }));
}

TEST(Samplers, CountsAndMonotonicityOnRandomMetamodels) {
  nn::Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    const Metamodel m = testing_support::random_metamodel(rng);
    const std::size_t total = m.element_count();
    EXPECT_EQ(sample_global(m).size(), total);
    EXPECT_EQ(sample_local(m).size(), total);
    const auto inc = sample_incremental(m, static_cast<std::uint64_t>(i));
    ASSERT_EQ(inc.size(), total - 1);
    const auto plans = plan_incremental(m, static_cast<std::uint64_t>(i));
    for (std::size_t j = 0; j < inc.size(); ++j) {
      EXPECT_EQ(count_masks(inc[j].context), 1u);
      EXPECT_EQ(inc[j].context_size, visible_elements(inc[j]));
      if (j > 0) {
        EXPECT_LE(inc[j - 1].context_size, inc[j].context_size);
        EXPECT_TRUE(plans[j - 1].selection.subset_of(plans[j].selection));
      }
    }
    // Every element except the root class is predicted exactly once.
    std::vector<ElementRef> targets;
    for (const auto& p : plans) targets.push_back(p.target);
    auto key = [](const ElementRef& r) { return std::tuple(static_cast<int>(r.kind), r.class_index, r.member_index); };
    std::sort(targets.begin(), targets.end(), [&](const ElementRef& a, const ElementRef& b) { return key(a) < key(b); });
    EXPECT_EQ(std::adjacent_find(targets.begin(), targets.end()), targets.end());
  }
}

TEST(SampleIncremental, SameSeedSameOrder) {
  nn::Rng rng(5);
  const Metamodel m = testing_support::random_metamodel(rng, false, 6, 8);
  EXPECT_EQ(sample_incremental(m, 77), sample_incremental(m, 77));
}

TEST(Samples, JsonLinesRoundTrip) {
  std::vector<TestSample> all = sample_global(fsm());
  const auto inc = sample_incremental(fsm(), 2);
  all.insert(all.end(), inc.begin(), inc.end());
  std::stringstream ss;
  write_samples(ss, all);
  EXPECT_EQ(read_samples(ss), all);
}

TEST(Samples, RejectsMalformedLines) {
  auto j = to_json(sample_global(fsm())[0]);
  j["context"] = SurfaceText{"(", "MM", ")"};
  EXPECT_THROW(sample_from_json(j), ParseError);
  j = to_json(sample_global(fsm())[0]);
  j["strategy"] = "random";
  EXPECT_THROW(sample_from_json(j), std::invalid_argument);
}
