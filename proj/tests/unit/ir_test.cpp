#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "lowrate/ir.hpp"
#include "test_support.hpp"

namespace lowrate::ir {
namespace {

Vocabulary small_vocab() { return Vocabulary::from_names({"add", "cmp", "api.log"}); }

TEST(Vocabulary, AssignsIdsInOrderAndReservesSpecialNames) {
  Vocabulary v = Vocabulary::parse("# ops\nadd\n\ncmp\n");
  EXPECT_EQ(v.at("add").value, 1u);
  EXPECT_EQ(v.at("cmp").value, 2u);
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.name(v.unknown_api()), kUnknownApi);
  EXPECT_EQ(v.name(v.recursive_call()), kRecursiveCall);
  EXPECT_THROW(v.at("mul"), InputError);
}

TEST(Vocabulary, DuplicateNameReportsLine) {
  try {
    Vocabulary::parse("add\ncmp\nadd\n", "v.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Vocabulary, RenderParsesBack) {
  Vocabulary v = corpus::default_vocab().vocab;
  Vocabulary w = Vocabulary::parse(v.render());
  EXPECT_EQ(v.names(), w.names());
}

TEST(Parser, ResolvesLabelsCallsAndKinds) {
  const char* text = R"(
method main {
L0: add
    if cmp L0
    call helper
    call api.log
    call some.other.Api
    jump END
    add
END: ret
}
method helper { ret }
)";
  Program p = parse_program(text, small_vocab());
  ASSERT_EQ(p.methods.size(), 2u);
  const auto& code = p.methods[0].instructions;
  ASSERT_EQ(code.size(), 8u);
  EXPECT_EQ(code[1].kind, OpKind::CondJump);
  EXPECT_EQ(code[1].target, 0u);
  EXPECT_EQ(code[2].call_kind, CallKind::Internal);
  EXPECT_EQ(code[2].callee_index, 1u);
  EXPECT_EQ(code[3].call_kind, CallKind::Api);
  EXPECT_EQ(code[4].call_kind, CallKind::Unknown);
  EXPECT_EQ(code[4].type, small_vocab().unknown_api());
  EXPECT_EQ(code[5].target, 7u);
  EXPECT_EQ(p.entry_points, std::vector<std::size_t>{0});
}

struct BadProgram {
  const char* text;
  std::size_t line;
};

class ParserErrors : public ::testing::TestWithParam<BadProgram> {};

TEST_P(ParserErrors, ReportLine) {
  try {
    parse_program(GetParam().text, small_vocab(), "bad.sir");
    FAIL() << "accepted: " << GetParam().text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), GetParam().line) << e.what();
    EXPECT_NE(std::string(e.what()).find("bad.sir:"), std::string::npos);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Cases, ParserErrors,
    ::testing::Values(BadProgram{"method m {\n  mul\n  ret\n}\n", 2},                  // unknown opcode
                      BadProgram{"method m {\n  jump NOWHERE\n  ret\n}\n", 2},         // unresolved label
                      BadProgram{"method m {\n  if cmp N\nN: ret\n}\n", 2},            // target == fallthrough
                      BadProgram{"method m {\nA: add\nA: ret\n}\n", 3},                 // duplicate label
                      BadProgram{"method m { ret }\nmethod m { ret }\n", 2},           // duplicate method
                      BadProgram{"method m {\n  add\n", 2},                             // missing brace
                      BadProgram{"vocab add mul\nmethod m { ret }\n", 1},              // vocab assertion
                      BadProgram{"entry nope\nmethod m { ret }\n", 1}));              // unknown entry

TEST(Parser, EntryDirectiveOverridesDefaults) {
  Program p = parse_program("entry b\nmethod a { ret }\nmethod b {\n call a\n ret\n}\n", small_vocab());
  EXPECT_TRUE(p.explicit_entries);
  EXPECT_EQ(p.entry_points, std::vector<std::size_t>{1});
}

TEST(Parser, DefaultEntriesAreUncalledMethods) {
  Program p = parse_program(
      "method a {\n call b\n ret\n}\nmethod b { ret }\nmethod c {\n call c\n ret\n}\n", small_vocab());
  EXPECT_EQ(p.entry_points, (std::vector<std::size_t>{0, 2}));
}

TEST(Parser, MutualRecursionWithoutRootsFallsBackToSourceComponents) {
  Program p = parse_program("method a {\n call b\n ret\n}\nmethod b {\n call a\n ret\n}\n", small_vocab());
  EXPECT_EQ(p.entry_points.size(), 2u);
}

TEST(RoundTrip, RenderedProgramsParseBackIdentically) {
  Rng rng(11);
  const auto& vocab = corpus::default_vocab().vocab;
  for (int i = 0; i < 100; ++i) {
    Program p = testing::random_program(rng);
    Program q = parse_program(render_program(p, vocab), vocab);
    ASSERT_EQ(p, q) << render_program(p, vocab);
  }
}

TEST(CallGraph, ComponentsPartitionMethodsAndComeCalleeFirst) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng.between(1, 25);
    Program p;
    for (std::size_t i = 0; i < n; ++i) p.methods.push_back(Method{"f" + std::to_string(i), {}});
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t calls = rng.below(4);
      for (std::size_t c = 0; c < calls; ++c) {
        Instruction ins;
        ins.kind = OpKind::Call;
        ins.callee = "f" + std::to_string(rng.below(n));
        p.methods[i].instructions.push_back(ins);
      }
      Instruction ret;
      ret.kind = OpKind::Return;
      p.methods[i].instructions.push_back(ret);
    }
    link_program(p, small_vocab());
    CallGraph cg = build_call_graph(p);

    std::vector<int> seen(n, 0);
    for (std::size_t s = 0; s < cg.scc_order.size(); ++s) {
      for (std::size_t m : cg.scc_order[s]) {
        ++seen[m];
        EXPECT_EQ(cg.scc_of[m], s);
      }
    }
    for (int c : seen) ASSERT_EQ(c, 1);

    // Reachability closure: u and v share a component iff each reaches the other.
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t u = 0; u < n; ++u) {
      reach[u][u] = true;
      for (std::size_t v : cg.callees[u]) reach[u][v] = true;
    }
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) {
        EXPECT_EQ(cg.scc_of[u] == cg.scc_of[v], reach[u][v] && reach[v][u]);
        // A callee's component never comes after its caller's.
        if (std::find(cg.callees[u].begin(), cg.callees[u].end(), v) != cg.callees[u].end()) {
          EXPECT_LE(cg.scc_of[v], cg.scc_of[u]);
        }
      }
    }
  }
}

}  // namespace
}  // namespace lowrate::ir
