#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "lowrate/bundle.hpp"
#include "lowrate/cfg.hpp"
#include "test_support.hpp"

namespace lowrate::cfg {
namespace {

ir::Vocabulary fixture_vocab() {
  return ir::Vocabulary::parse(bundle::read_file(testing::fixture_dir() / "program1" / "vocab.txt"));
}

ir::Program fixture_program() {
  return ir::parse_program(bundle::read_file(testing::fixture_dir() / "program1" / "program.sir"), fixture_vocab());
}

ir::Method method_from(const std::string& body) {
  ir::Vocabulary v = ir::Vocabulary::from_names({"a", "c"});
  return ir::parse_program("method m {\n" + body + "}\n", v).methods.at(0);
}

TEST(Dominators, MatchBruteForceOnRandomGraphs) {
  Rng rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng.between(1, 60);
    Digraph g = testing::random_digraph(rng, n, rng.below(2 * n + 1));
    ASSERT_EQ(immediate_dominators(g, 0), testing::brute_force_idom(g, 0)) << "trial " << trial;
    const auto exit = static_cast<NodeId>(rng.below(n));
    ASSERT_EQ(immediate_post_dominators(g, exit), testing::brute_force_idom(g.reversed(), exit));
  }
}

TEST(Dominators, DominatesIsReflexiveAndFollowsTheTree) {
  Digraph g(4);
  g.add_edge(0, 1);
  g.add_edge(0, 2);
  g.add_edge(1, 3);
  g.add_edge(2, 3);
  auto idom = immediate_dominators(g, 0);
  EXPECT_EQ(idom[3], 0u);
  EXPECT_TRUE(dominates(idom, 3, 3));
  EXPECT_TRUE(dominates(idom, 0, 3));
  EXPECT_FALSE(dominates(idom, 1, 3));
}

TEST(Cfg, FallthroughJumpsAndExit) {
  ir::Method m = method_from("  a\n  if c L\n  a\nL: jump E\n  a\nE: ret\n");
  Cfg c = build_cfg(m);
  EXPECT_TRUE(c.graph.has_edge(c.entry, 0));
  EXPECT_TRUE(c.graph.has_edge(1, 2));
  EXPECT_TRUE(c.graph.has_edge(1, 3));
  EXPECT_TRUE(c.graph.has_edge(3, 5));
  EXPECT_TRUE(c.graph.has_edge(5, c.exit));
  EXPECT_FALSE(c.reachable[4]);
  EXPECT_EQ(c.warnings.size(), 1u);
}

TEST(Cfg, FallingOffTheEndReachesExit) {
  ir::Method m = method_from("  a\n  a\n");
  Cfg c = build_cfg(m);
  EXPECT_TRUE(c.graph.has_edge(1, c.exit));
}

TEST(Loops, Program1HasTwoNestedLoops) {
  ir::Program p = fixture_program();
  MethodAnalysis a = analyze_method(p.methods[0]);
  ASSERT_EQ(a.back.size(), 2u);
  EXPECT_EQ(a.back[0], (Edge{10, 6}));
  EXPECT_EQ(a.back[1], (Edge{12, 3}));
  const std::vector<std::size_t> depth = {0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2, 1, 1, 0, 0};
  EXPECT_EQ(std::vector<std::size_t>(a.depth.begin(), a.depth.begin() + 15), depth);
}

TEST(Loops, LoopsSharingAHeaderMerge) {
  // Two latches jump back to the same header: one loop, depth 1.
  ir::Method m = method_from("H: a\n  if c H\n  a\n  if c H\n  ret\n");
  MethodAnalysis a = analyze_method(m);
  EXPECT_EQ(a.back.size(), 2u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.depth[i], 1u) << i;
  EXPECT_EQ(a.depth[4], 0u);
}

TEST(Loops, IrreducibleMethodIsRejected) {
  // Two entries into the cycle {1, 2}.
  ir::Method m = method_from("  if c B\nA: a\nB: a\n  if c A\n  ret\n");
  EXPECT_THROW(analyze_method(m), IrreducibleError);
}

TEST(Branches, Program1CountsOnlyTheInnerIf) {
  ir::Program p = fixture_program();
  MethodAnalysis a = analyze_method(p.methods[0]);
  ASSERT_EQ(a.branches.regions.size(), 1u);
  const BranchRegion& r = a.branches.regions[0];
  EXPECT_EQ(r.start, 6u);
  EXPECT_EQ(r.end, 9u);
  EXPECT_EQ(r.body, (std::vector<NodeId>{7, 8}));
}

TEST(Branches, NestedIfElseCounts) {
  ir::Method m = method_from(
      "  if c X\n"   // 0
      "  a\n"        // 1
      "  if c Y\n"   // 2
      "  a\n"        // 3
      "Y: a\n"       // 4
      "  jump Z\n"   // 5
      "X: a\n"       // 6
      "Z: a\n"       // 7
      "  ret\n");    // 8
  MethodAnalysis a = analyze_method(m);
  EXPECT_EQ(a.branches.counts[0], 0u);
  EXPECT_EQ(a.branches.counts[1], 1u);
  EXPECT_EQ(a.branches.counts[3], 2u);
  EXPECT_EQ(a.branches.counts[4], 1u);
  EXPECT_EQ(a.branches.counts[6], 1u);
  EXPECT_EQ(a.branches.counts[7], 0u);
}

TEST(Branches, EarlyReturnRegionEndsAtExit) {
  ir::Method m = method_from("  if c L\n  a\n  ret\nL: a\n  ret\n");
  MethodAnalysis a = analyze_method(m);
  ASSERT_EQ(a.branches.regions.size(), 1u);
  EXPECT_EQ(a.branches.regions[0].end, a.cfg.exit);
  EXPECT_EQ(a.branches.counts[1], 1u);
  EXPECT_EQ(a.branches.counts[3], 1u);
}

TEST(Dump, ListsEveryTable) {
  ir::Program p = fixture_program();
  std::ostringstream os;
  dump(os, "main", analyze_method(p.methods[0]));
  const std::string s = os.str();
  for (const char* section : {"cfg main", "idom main", "ipdom main", "back-edges main", "depth-count main"}) {
    EXPECT_NE(s.find(section), std::string::npos) << section;
  }
}

}  // namespace
}  // namespace lowrate::cfg
