#include "lowrate/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>

#include "lowrate/cfg.hpp"
#include "lowrate/common.hpp"

namespace lowrate::oracle {

namespace {

using ir::Instruction;
using ir::OpKind;

Instruction bare(OpKind kind) {
  Instruction ins;
  ins.kind = kind;
  return ins;
}

void refuse_recursion(const ir::Program& program) {
  for (std::size_t m = 0; m < program.methods.size(); ++m) {
    for (const Instruction& ins : program.methods[m].instructions) {
      if (ins.kind == OpKind::Call && ins.call_kind == ir::CallKind::Internal && ins.callee_index == m) {
        throw InputError("oracle: method '" + program.methods[m].name + "' is recursive");
      }
    }
  }
  for (const auto& scc : ir::build_call_graph(program).scc_order) {
    if (scc.size() > 1) throw InputError("oracle: recursive call cycle through '" + program.methods[scc[0]].name + "'");
  }
}

class Inliner {
 public:
  Inliner(const ir::Program& program, std::size_t limit)
      : program_(program), limit_(limit), memo_(program.methods.size()) {}

  const std::vector<Instruction>& flat(std::size_t m) {
    if (memo_[m]) return *memo_[m];
    const auto& code = program_.methods[m].instructions;
    std::vector<Instruction> out;
    std::vector<std::size_t> start(code.size() + 1);
    for (std::size_t i = 0; i < code.size(); ++i) {
      start[i] = out.size();
      const Instruction& ins = code[i];
      if (ins.kind == OpKind::Call && ins.call_kind == ir::CallKind::Internal) {
        const std::vector<Instruction>& body = flat(ins.callee_index);
        const std::size_t base = out.size();
        if (base + body.size() > limit_) throw InputError("oracle: inlined program exceeds the size limit");
        std::vector<std::size_t> exits;
        for (Instruction c : body) {
          if (c.kind == OpKind::CondJump || c.kind == OpKind::Jump) c.target += base;
          if (c.kind == OpKind::Return) {
            c = bare(OpKind::Jump);
            exits.push_back(out.size());
          }
          out.push_back(std::move(c));
        }
        for (std::size_t e : exits) out[e].target = out.size();
        if (i + 1 == code.size()) out.push_back(bare(OpKind::Return));
      } else {
        out.push_back(ins);
      }
    }
    start[code.size()] = out.size();
    // Caller-level jumps still hold original indices; callee jumps were rebased above.
    for (std::size_t i = 0; i < code.size(); ++i) {
      const Instruction& ins = code[i];
      if (ins.kind == OpKind::CondJump || ins.kind == OpKind::Jump) out[start[i]].target = start[ins.target];
    }
    memo_[m] = std::move(out);
    return *memo_[m];
  }

 private:
  const ir::Program& program_;
  std::size_t limit_;
  std::vector<std::optional<std::vector<Instruction>>> memo_;
};

}  // namespace

ir::Method inline_method(const ir::Program& program, std::size_t method, std::size_t max_instructions) {
  refuse_recursion(program);
  Inliner inliner(program, max_instructions);
  return ir::Method{program.methods.at(method).name, inliner.flat(method)};
}

semvec::SemanticVector oracle_semantic_vector(const ir::Program& program, const ir::Vocabulary& vocab,
                                              std::size_t max_instructions) {
  refuse_recursion(program);
  Inliner inliner(program, max_instructions);
  std::vector<std::uint64_t> f(vocab.size(), 0);
  std::vector<double> sum_l(vocab.size(), 0.0), sum_b(vocab.size(), 0.0);
  for (std::size_t entry : program.entry_points) {
    ir::Method flat{program.methods[entry].name, inliner.flat(entry)};
    cfg::MethodAnalysis a = cfg::analyze_method(flat);
    for (std::size_t i = 0; i < flat.instructions.size(); ++i) {
      const Instruction& ins = flat.instructions[i];
      if (!a.cfg.reachable[i]) continue;
      if (ins.kind != OpKind::Plain && ins.kind != OpKind::CondJump && ins.kind != OpKind::Call) continue;
      const std::size_t k = ins.type.value - 1;
      f[k] += 1;
      sum_l[k] += static_cast<double>(a.depth[i]);
      sum_b[k] += static_cast<double>(a.branches.counts[i]);
    }
  }
  semvec::SemanticVector v(vocab.size());
  for (std::uint32_t k = 0; k < vocab.size(); ++k) {
    if (f[k] == 0) continue;
    semvec::AveragedSlot& s = v[ir::TypeId{k + 1}];
    s.f = f[k];
    s.l = sum_l[k] / static_cast<double>(f[k]);
    s.b = sum_b[k] / static_cast<double>(f[k]);
  }
  return v;
}

layout::LayoutVector oracle_layout_vector(std::span<const layout::LayoutDoc> docs, const layout::UiVocabulary& vocab) {
  std::map<std::string, const layout::LayoutDoc*> by_name;
  for (const auto& d : docs) {
    if (!by_name.emplace(d.name, &d).second) throw InputError("oracle: duplicate layout document '" + d.name + "'");
  }
  std::map<std::string, bool> referenced;
  std::function<void(const layout::Element&)> scan = [&](const layout::Element& el) {
    if (el.ref_target) referenced[*el.ref_target] = true;
    for (const auto& c : el.children) scan(c);
  };
  for (const auto& d : docs) scan(d.root);

  // Textual expansion: a reference is replaced by a copy of its target's root.
  std::function<layout::Element(const layout::Element&, std::vector<std::string>&)> expand =
      [&](const layout::Element& el, std::vector<std::string>& stack) -> layout::Element {
    if (el.ref_target) {
      auto it = by_name.find(*el.ref_target);
      if (it == by_name.end()) throw InputError("oracle: unknown layout document '" + *el.ref_target + "'");
      if (std::find(stack.begin(), stack.end(), *el.ref_target) != stack.end()) {
        throw InputError("oracle: layout reference cycle through '" + *el.ref_target + "'");
      }
      stack.push_back(*el.ref_target);
      layout::Element out = expand(it->second->root, stack);
      stack.pop_back();
      return out;
    }
    layout::Element out;
    out.tag = el.tag;
    for (const auto& c : el.children) out.children.push_back(expand(c, stack));
    return out;
  };

  const std::size_t slots = vocab.slot_count();
  std::vector<std::uint64_t> n(slots, 0);
  std::vector<std::uint64_t> depth_sum(slots, 0);
  std::function<void(const layout::Element&, std::uint64_t)> count = [&](const layout::Element& el,
                                                                          std::uint64_t depth) {
    const std::size_t s = layout::classify_element(el.tag, vocab) - 1;
    n[s] += 1;
    depth_sum[s] += depth;
    for (const auto& c : el.children) count(c, depth + 1);
  };
  bool any_root = false;
  for (const auto& d : docs) {
    if (referenced.count(d.name) != 0) {
      std::vector<std::string> stack{d.name};
      expand(d.root, stack);  // cycle check for documents only reachable through references
      continue;
    }
    any_root = true;
    std::vector<std::string> stack{d.name};
    count(expand(d.root, stack), 0);
  }
  if (!any_root && !docs.empty()) throw InputError("oracle: every layout document is referenced (cycle)");

  layout::LayoutVector v(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    if (n[s] == 0) continue;
    v[s + 1].n = n[s];
    v[s + 1].d = static_cast<double>(depth_sum[s]) / static_cast<double>(n[s]);
  }
  return v;
}

std::optional<std::string> first_difference(const semvec::SemanticVector& a, const semvec::SemanticVector& b,
                                            double tolerance) {
  if (a.size() != b.size()) return "sizes " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
  const auto sa = a.slots(), sb = b.slots();
  for (std::size_t k = 0; k < sa.size(); ++k) {
    if (sa[k].f != sb[k].f || std::abs(sa[k].l - sb[k].l) >= tolerance || std::abs(sa[k].b - sb[k].b) >= tolerance) {
      return "slot " + std::to_string(k + 1) + ": (" + std::to_string(sa[k].f) + ", " + fixed9(sa[k].l) + ", " +
             fixed9(sa[k].b) + ") vs (" + std::to_string(sb[k].f) + ", " + fixed9(sb[k].l) + ", " + fixed9(sb[k].b) +
             ")";
    }
  }
  return std::nullopt;
}

std::optional<std::string> first_difference(const layout::LayoutVector& a, const layout::LayoutVector& b,
                                            double tolerance) {
  if (a.size() != b.size()) return "sizes " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
  const auto sa = a.slots(), sb = b.slots();
  for (std::size_t k = 0; k < sa.size(); ++k) {
    if (sa[k].n != sb[k].n || std::abs(sa[k].d - sb[k].d) >= tolerance) {
      return "slot " + std::to_string(k + 1) + ": (" + std::to_string(sa[k].n) + ", " + fixed9(sa[k].d) + ") vs (" +
             std::to_string(sb[k].n) + ", " + fixed9(sb[k].d) + ")";
    }
  }
  return std::nullopt;
}

}  // namespace lowrate::oracle
