#include <gtest/gtest.h>

#include "lowrate/bundle.hpp"
#include "lowrate/layout.hpp"
#include "lowrate/oracle.hpp"
#include "test_support.hpp"

namespace lowrate::layout {
namespace {

UiVocabulary two_known() { return UiVocabulary({"LinearLayout", "TextView"}); }

TEST(WorkedExample, SlotsMatch) {
  const auto dir = testing::fixture_dir() / "program1";
  UiVocabulary vocab = UiVocabulary::parse(bundle::read_file(dir / "ui_vocab.txt"));
  LayoutDoc doc = parse_layout(bundle::read_file(dir / "layout" / "main.sxml"), "main");
  LayoutVector v = layout_vector(std::span(&doc, 1), vocab);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[1], (LayoutSlot{2, 0.5}));
  EXPECT_EQ(v[2].n, 1u);
  EXPECT_EQ(v[vocab.legacy_slot()].n, 2u);
  EXPECT_EQ(v[vocab.custom_slot()].n, 1u);
}

TEST(Parse, SkipsPrologCommentsAndAttributes) {
  LayoutDoc d = parse_layout("<?xml version=\"1.0\"?>\n<!-- c -->\n<A x=\"1\">\n  <B/>\n  <C y='2'></C>\n</A>\n", "d");
  EXPECT_EQ(d.root.tag, "A");
  ASSERT_EQ(d.root.children.size(), 2u);
  EXPECT_EQ(d.root.children[1].tag, "C");
}

TEST(Parse, ReferenceElement) {
  LayoutDoc d = parse_layout("<A><ref target=\"other\"/></A>", "d");
  ASSERT_TRUE(d.root.children[0].ref_target.has_value());
  EXPECT_EQ(*d.root.children[0].ref_target, "other");
}

struct BadLayout {
  const char* text;
  std::size_t line;
};

class LayoutErrors : public ::testing::TestWithParam<BadLayout> {};

TEST_P(LayoutErrors, ReportLine) {
  try {
    parse_layout(GetParam().text, "x", "x.sxml");
    FAIL() << GetParam().text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), GetParam().line) << e.what();
  }
}

INSTANTIATE_TEST_SUITE_P(Cases, LayoutErrors,
                         ::testing::Values(BadLayout{"<A>\n<B>\n</A>", 3},             // mismatched close
                                           BadLayout{"<A/>\n<B/>", 2},                 // two roots
                                           BadLayout{"<A>\n<ref/>\n</A>", 2},          // ref without target
                                           BadLayout{"<A>\n  text\n</A>", 2},          // text content
                                           BadLayout{"", 1},                           // empty
                                           BadLayout{"<A>\n<ref target=\"q\"><B/></ref>\n</A>", 2}));

TEST(Classify, KnownLegacyCustom) {
  UiVocabulary v = two_known();
  EXPECT_EQ(classify_element("TextView", v), 2u);
  EXPECT_EQ(classify_element("android.support.v4.Foo", v), 3u);
  EXPECT_EQ(classify_element("com.x.Y", v), 4u);
  UiVocabulary w = UiVocabulary::parse("legacy-prefix androidx.\nLinearLayout\n");
  EXPECT_EQ(classify_element("androidx.core.Z", w), w.legacy_slot());
  EXPECT_EQ(classify_element("android.support.v4.Foo", w), w.custom_slot());
}

TEST(References, SpliceAtReferenceDepth) {
  std::vector<LayoutDoc> docs = {parse_layout("<LinearLayout><LinearLayout><ref target=\"inc\"/></LinearLayout></LinearLayout>", "main"),
                                 parse_layout("<TextView/>", "inc")};
  LayoutVector v = layout_vector(docs, two_known());
  EXPECT_EQ(v[1], (LayoutSlot{2, 0.5}));
  EXPECT_EQ(v[2], (LayoutSlot{1, 2.0}));
}

TEST(References, IncludedTwiceCountsTwice) {
  std::vector<LayoutDoc> docs = {parse_layout("<LinearLayout><ref target=\"inc\"/><ref target=\"inc\"/></LinearLayout>", "main"),
                                 parse_layout("<LinearLayout><TextView/></LinearLayout>", "inc")};
  LayoutVector v = layout_vector(docs, two_known());
  EXPECT_EQ(v[1].n, 3u);
  EXPECT_EQ(v[2], (LayoutSlot{2, 2.0}));
}

TEST(References, CyclesAndDanglingTargetsAreErrors) {
  std::vector<LayoutDoc> cyc = {parse_layout("<A><ref target=\"b\"/></A>", "a"), parse_layout("<B><ref target=\"a\"/></B>", "b"),
                                parse_layout("<C/>", "c")};
  EXPECT_THROW(layout_vector(cyc, two_known()), InputError);
  std::vector<LayoutDoc> dangling = {parse_layout("<A><ref target=\"zz\"/></A>", "a")};
  EXPECT_THROW(layout_vector(dangling, two_known()), InputError);
  std::vector<LayoutDoc> dup = {parse_layout("<A/>", "a"), parse_layout("<B/>", "a")};
  EXPECT_THROW(layout_vector(dup, two_known()), InputError);
}

TEST(RoundTrip, RenderedLayoutsParseBack) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    for (const LayoutDoc& d : testing::random_forest(rng)) {
      ASSERT_EQ(parse_layout(render_layout(d), d.name), d);
    }
  }
}

TEST(Oracle, ExpansionMatchesSummariesOnRandomForests) {
  Rng rng(19);
  const auto& ui = corpus::default_vocab().ui;
  for (int i = 0; i < 200; ++i) {
    auto docs = testing::random_forest(rng);
    auto diff = oracle::first_difference(layout_vector(docs, ui), oracle::oracle_layout_vector(docs, ui));
    ASSERT_FALSE(diff.has_value()) << *diff;
  }
}

TEST(Oracle, NoReferenceDocEqualsDirectCount) {
  std::vector<LayoutDoc> docs = {parse_layout("<LinearLayout><TextView/><LinearLayout/></LinearLayout>", "m")};
  EXPECT_EQ(layout_vector(docs, two_known()), oracle::oracle_layout_vector(docs, two_known()));
}

}  // namespace
}  // namespace lowrate::layout
