#include "lowrate/semvec.hpp"

#include <exception>

namespace lowrate::semvec {

std::uint64_t SemanticVector::total_frequency() const {
  std::uint64_t total = 0;
  for (const auto& s : slots_) total += s.f;
  return total;
}

void Accumulator::add_instance(ir::TypeId id, double depth, double branches) {
  auto& s = slots_.at(id.value - 1);
  s.f += 1;
  s.sum_l += depth;
  s.sum_b += branches;
}

void Accumulator::apply_summary(const SemanticVector& callee, double depth, double branches) {
  auto src = callee.slots();
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    const AveragedSlot& c = src[k];
    if (c.f == 0) continue;
    auto f = static_cast<double>(c.f);
    slots_[k].f += c.f;
    slots_[k].sum_l += (depth + c.l) * f;
    slots_[k].sum_b += (branches + c.b) * f;
  }
}

void Accumulator::merge(const Accumulator& other) {
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    slots_[k].f += other.slots_[k].f;
    slots_[k].sum_l += other.slots_[k].sum_l;
    slots_[k].sum_b += other.slots_[k].sum_b;
  }
}

SemanticVector Accumulator::average() const {
  SemanticVector v(slots_.size());
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    const auto& s = slots_[k];
    if (s.f == 0) continue;
    auto& out = v[ir::TypeId{static_cast<std::uint32_t>(k + 1)}];
    out.f = s.f;
    out.l = s.sum_l / static_cast<double>(s.f);
    out.b = s.sum_b / static_cast<double>(s.f);
  }
  return v;
}

Accumulator intra_vector(const ir::Method& method, const ir::Vocabulary& vocab,
                         const cfg::MethodAnalysis& analysis) {
  Accumulator acc(vocab.size());
  for (std::size_t i = 0; i < method.instructions.size(); ++i) {
    if (!analysis.cfg.reachable[i]) continue;
    const auto& ins = method.instructions[i];
    auto depth = static_cast<double>(analysis.depth[i]);
    auto count = static_cast<double>(analysis.branches.counts[i]);
    switch (ins.kind) {
      case ir::OpKind::Plain:
      case ir::OpKind::CondJump:
        acc.add_instance(ins.type, depth, count);
        break;
      case ir::OpKind::Call:
        if (ins.call_kind != ir::CallKind::Internal) acc.add_instance(ins.type, depth, count);
        break;
      case ir::OpKind::Jump:
      case ir::OpKind::Return:
        break;
    }
  }
  return acc;
}

InterResult inter_vector(const ir::Program& program, const ir::CallGraph& cg, const ir::Vocabulary& vocab,
                         std::span<const cfg::MethodAnalysis> analyses) {
  const std::size_t n_types = vocab.size();
  InterResult result;
  result.summaries.assign(program.methods.size(), SemanticVector(n_types));

  for (std::size_t scc = 0; scc < cg.scc_order.size(); ++scc) {
    // Members of one component only read summaries of earlier components.
    for (std::size_t m : cg.scc_order[scc]) {
      const ir::Method& method = program.methods[m];
      const cfg::MethodAnalysis& a = analyses[m];
      Accumulator acc = intra_vector(method, vocab, a);
      for (std::size_t i = 0; i < method.instructions.size(); ++i) {
        const auto& ins = method.instructions[i];
        if (ins.kind != ir::OpKind::Call || ins.call_kind != ir::CallKind::Internal) continue;
        if (!a.cfg.reachable[i]) continue;
        auto depth = static_cast<double>(a.depth[i]);
        auto count = static_cast<double>(a.branches.counts[i]);
        if (cg.scc_of[ins.callee_index] == scc) {
          acc.add_instance(vocab.recursive_call(), depth, count);
        } else {
          acc.apply_summary(result.summaries[ins.callee_index], depth, count);
        }
      }
      result.summaries[m] = acc.average();
    }
  }

  Accumulator app(n_types);
  for (std::size_t e : program.entry_points) app.merge(result.summaries[e]);
  result.app = app.average();
  return result;
}

std::vector<cfg::MethodAnalysis> analyze_methods(const ir::Program& program) {
  const auto n = static_cast<std::ptrdiff_t>(program.methods.size());
  std::vector<cfg::MethodAnalysis> out(program.methods.size());
  std::vector<std::exception_ptr> errors(program.methods.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = cfg::analyze_method(program.methods[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

ProgramAnalysis analyze_program(const ir::Program& program, const ir::Vocabulary& vocab) {
  ProgramAnalysis pa;
  pa.methods = analyze_methods(program);
  pa.call_graph = ir::build_call_graph(program);
  pa.vectors = inter_vector(program, pa.call_graph, vocab, pa.methods);
  for (const auto& m : pa.methods) {
    pa.warnings.insert(pa.warnings.end(), m.cfg.warnings.begin(), m.cfg.warnings.end());
  }
  return pa;
}

}  // namespace lowrate::semvec
