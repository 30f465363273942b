#include <map>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "mmconcept/metamodel.hpp"
#include "mmconcept/synthetic.hpp"
#include "mmconcept/xmi.hpp"
#include "test_support.hpp"

using namespace mmconcept;
using testing_support::read_fixture;

TEST(ParseXmi, FsmTransitionHasTwoAssociationsToState) {
  const Metamodel m = parse_xmi(read_fixture("fsm.ecore"), "fsm.ecore");
  ASSERT_EQ(m.classes.size(), 3u);
  const auto& t = m.classes[m.find_class("Transition")];
  ASSERT_EQ(t.associations.size(), 2u);
  EXPECT_EQ(t.associations[0].name, "source");
  EXPECT_EQ(t.associations[1].name, "target");
  EXPECT_EQ(t.associations[0].target_class, "State");
  EXPECT_EQ(t.associations[1].target_class, "State");
  EXPECT_EQ(m.id, "fsm.ecore");
}

TEST(ParseXmi, SkipsSupertypesOperationsEnumsAndFlagsContainment) {
  const Metamodel m = parse_xmi(read_fixture("fsm.ecore"));
  EXPECT_EQ(m.find_class("Kind"), m.classes.size());
  const auto& state = m.classes[m.find_class("State")];
  ASSERT_EQ(state.attributes.size(), 1u);
  EXPECT_EQ(state.attributes[0], (AttributeDef{"isFinal", "EBoolean"}));
  const auto& fsm = m.classes[m.find_class("FSM")];
  ASSERT_EQ(fsm.associations.size(), 1u);
  EXPECT_TRUE(fsm.associations[0].is_containment);
  EXPECT_FALSE(m.classes[m.find_class("Transition")].associations[0].is_containment);
}

TEST(ParseXmi, EmptyPackageHasNoClasses) {
  const Metamodel m = parse_xmi(
      R"(<?xml version="1.0"?><ecore:EPackage xmlns:ecore="http://www.eclipse.org/emf/2002/Ecore" name="p"/>)");
  EXPECT_TRUE(m.classes.empty());
}

TEST(ParseXmi, ThreeClassFixtureMatchesHandBuiltObject) {
  const char* doc = R"(<?xml version="1.0" encoding="UTF-8"?>
<ecore:EPackage xmlns:xmi="http://www.omg.org/XMI" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"
    xmlns:ecore="http://www.eclipse.org/emf/2002/Ecore" name="lib">
  <eClassifiers xsi:type="ecore:EClass" name="Library">
    <eStructuralFeatures xsi:type="ecore:EAttribute" name="name" eType="ecore:EDataType http://www.eclipse.org/emf/2002/Ecore#//EString"/>
    <eStructuralFeatures xsi:type="ecore:EReference" name="books" upperBound="-1" eType="#//Book" containment="true"/>
  </eClassifiers>
  <eClassifiers xsi:type="ecore:EClass" name="Book">
    <eStructuralFeatures xsi:type="ecore:EAttribute" name="pages" eType="ecore:EDataType http://www.eclipse.org/emf/2002/Ecore#//EInt"/>
    <eStructuralFeatures xsi:type="ecore:EReference" name="author" eType="#//Writer"/>
  </eClassifiers>
  <eClassifiers xsi:type="ecore:EClass" name="Writer">
    <eStructuralFeatures xsi:type="ecore:EAttribute" name="born">
      <eGenericType eClassifier="ecore:EDataType http://www.eclipse.org/emf/2002/Ecore#//EDate"/>
    </eStructuralFeatures>
  </eClassifiers>
</ecore:EPackage>)";
  Metamodel expected;
  expected.classes = {
      {"Library", {{"name", "EString"}}, {{"books", "Book", true}}},
      {"Book", {{"pages", "EInt"}}, {{"author", "Writer", false}}},
      {"Writer", {{"born", "EDate"}}, {}},
  };
  const Metamodel m = parse_xmi(doc);
  EXPECT_EQ(m, expected);
  EXPECT_EQ(m.attribute_count(), 3u);
  EXPECT_EQ(m.association_count(), 2u);
}

TEST(ParseXmi, XmiWrapperAndSubpackages) {
  const Metamodel m = parse_xmi(read_fixture("petri.ecore"));
  ASSERT_EQ(m.classes.size(), 4u);
  EXPECT_EQ(m.classes[3].name, "Arc");
  EXPECT_EQ(m.classes[1].associations[0], (AssociationDef{"outgoingArc", "Arc", false}));
}

TEST(ParseXmi, Errors) {
  EXPECT_THROW(parse_xmi("<ecore:EPackage"), ParseError);
  EXPECT_THROW(parse_xmi("<root/>"), ParseError);
  const char* dangling = R"(<ecore:EPackage xmlns:xsi="x" xmlns:ecore="e" name="p">
    <eClassifiers xsi:type="ecore:EClass" name="A">
      <eStructuralFeatures xsi:type="ecore:EReference" name="b" eType="#//B"/>
    </eClassifiers></ecore:EPackage>)";
  EXPECT_THROW(parse_xmi(dangling), ParseError);
  const char* unnamed = R"(<ecore:EPackage xmlns:xsi="x" xmlns:ecore="e" name="p">
    <eClassifiers xsi:type="ecore:EClass"/></ecore:EPackage>)";
  EXPECT_THROW(parse_xmi(unnamed), ParseError);
}

TEST(ParseXmi, SameBytesSameMetamodel) {
  const std::string bytes = read_fixture("fsm.ecore");
  EXPECT_EQ(parse_xmi(bytes), parse_xmi(bytes));
}

TEST(ParseCanonical, EmptyClassList) { EXPECT_TRUE(parse_canonical(R"({"classes":[]})").classes.empty()); }

TEST(ParseCanonical, AgreesWithXmiOnFsmFixture) {
  EXPECT_EQ(parse_canonical(read_fixture("fsm.json")), parse_xmi(read_fixture("fsm.ecore")));
}

TEST(ParseCanonical, Errors) {
  EXPECT_THROW(parse_canonical(R"({"classes":[{"name":"A","associations":[{"name":"x","target":"B"}]}]})"),
               ParseError);
  EXPECT_THROW(parse_canonical(R"({"classes":[{"name":"A"},{"name":"A"}]})"), ParseError);
  EXPECT_THROW(parse_canonical(R"({"classes":[],"extra":1})"), ParseError);
  EXPECT_THROW(parse_canonical(R"({"classes":[{"name":"A","abstract":true}]})"), ParseError);
  EXPECT_THROW(parse_canonical(R"({"classes":[{"name":""}]})"), ParseError);
  EXPECT_THROW(parse_canonical(R"({"classes":[{"name":"has space"}]})"), ParseError);
  EXPECT_THROW(parse_canonical("not json"), ParseError);
}

TEST(ParseCanonical, SerializeParseIsIdentity) {
  const std::string text = read_fixture("fsm.json");
  const Metamodel m = parse_canonical(text);
  EXPECT_EQ(nlohmann::json::parse(serialize_canonical(m)), nlohmann::json::parse(text));
  EXPECT_EQ(serialize_canonical(m) + "\n", text);

  nn::Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    Metamodel r = testing_support::random_metamodel(rng);
    const std::string s = serialize_canonical(r);
    EXPECT_EQ(serialize_canonical(parse_canonical(s)), s);
    EXPECT_EQ(parse_canonical(s), r);
  }
}

TEST(Eligibility, ClassCountBounds) {
  auto with_classes = [](std::size_t n) {
    Metamodel m;
    for (std::size_t i = 0; i < n; ++i) m.classes.push_back({"C" + std::to_string(i), {}, {}});
    return m;
  };
  EXPECT_FALSE(is_corpus_eligible(with_classes(1)));
  EXPECT_TRUE(is_corpus_eligible(with_classes(2)));
  EXPECT_TRUE(is_corpus_eligible(with_classes(15)));
  EXPECT_FALSE(is_corpus_eligible(with_classes(16)));
  EXPECT_FALSE(is_corpus_eligible(with_classes(0)));
}

TEST(CorpusStats, HandEnumeratedExample) {
  Metamodel a;
  a.classes = {{"A", {}, {}}, {"B", {}, {}}};
  Metamodel b;
  b.classes = {{"A", {}, {}}};
  EXPECT_EQ(corpus_stats({a, b}), (CorpusStats{3, 2, 1}));
  EXPECT_EQ(corpus_stats({}), (CorpusStats{0, 0, 0}));
}

TEST(CorpusStats, MatchesRecountOracle) {
  const auto corpus = generate_synthetic(builtin_domains(), 50, 11);
  std::map<std::string, int> oracle;
  std::size_t total = 0;
  for (const auto& m : corpus) {
    for (const auto& c : m.classes) {
      ++oracle[c.name];
      ++total;
      for (const auto& a : c.attributes) ++oracle[a.name], ++total;
      for (const auto& r : c.associations) ++oracle[r.name], ++total;
    }
  }
  std::size_t hapax = 0;
  for (const auto& [_, n] : oracle) hapax += n == 1;
  const auto stats = corpus_stats(corpus);
  EXPECT_EQ(stats.identifier_count, total);
  EXPECT_EQ(stats.type_count, oracle.size());
  EXPECT_EQ(stats.hapax_count, hapax);
  EXPECT_LE(stats.hapax_count, stats.type_count);
  EXPECT_LE(stats.type_count, stats.identifier_count);
}

TEST(Identifier, RequiresWellFormedUtf8) {
  EXPECT_TRUE(is_valid_identifier("Zustand\xC3\xA4"));
  EXPECT_TRUE(is_valid_identifier("\xF0\x9F\x98\x80"));
  EXPECT_FALSE(is_valid_identifier(""));
  EXPECT_FALSE(is_valid_identifier("a b"));
  EXPECT_FALSE(is_valid_identifier("\xC3"));              // truncated
  EXPECT_FALSE(is_valid_identifier("\xC0\xAF"));          // overlong
  EXPECT_FALSE(is_valid_identifier("\xED\xA0\x80"));      // surrogate
  EXPECT_FALSE(is_valid_identifier("\xF4\x90\x80\x80"));  // above U+10FFFF
  EXPECT_FALSE(is_valid_identifier("\xFF"));
}
