#pragma once

// Semantic vectors: per instruction type (frequency, average loop depth,
// average enclosing-branch count), built per method and propagated over the
// call graph with callee summaries.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lowrate/cfg.hpp"
#include "lowrate/ir.hpp"

namespace lowrate::semvec {

struct AveragedSlot {
  std::uint64_t f = 0;
  double l = 0.0;
  double b = 0.0;
  friend bool operator==(const AveragedSlot&, const AveragedSlot&) = default;
};

struct AccumulatorSlot {
  std::uint64_t f = 0;
  double sum_l = 0.0;
  double sum_b = 0.0;
};

/// Averaged form, indexed by TypeId (slot(k) for k in 1..N).
class SemanticVector {
 public:
  SemanticVector() = default;
  explicit SemanticVector(std::size_t n) : slots_(n) {}

  std::size_t size() const { return slots_.size(); }
  const AveragedSlot& operator[](ir::TypeId id) const { return slots_.at(id.value - 1); }
  AveragedSlot& operator[](ir::TypeId id) { return slots_.at(id.value - 1); }
  std::span<const AveragedSlot> slots() const { return slots_; }
  std::uint64_t total_frequency() const;

  friend bool operator==(const SemanticVector&, const SemanticVector&) = default;

 private:
  std::vector<AveragedSlot> slots_;
};

/// Running (f, Σl, Σb) form used while a method is being summarized.
class Accumulator {
 public:
  explicit Accumulator(std::size_t n) : slots_(n) {}

  std::size_t size() const { return slots_.size(); }
  const AccumulatorSlot& operator[](ir::TypeId id) const { return slots_.at(id.value - 1); }

  void add_instance(ir::TypeId id, double depth, double branches);
  /// Splices a callee summary in at a call site with the given depth and branch count.
  void apply_summary(const SemanticVector& callee, double depth, double branches);
  /// Adds another accumulator slot-wise.
  void merge(const Accumulator& other);
  /// Adds an averaged vector with zero depth/branch offset (app-level merge).
  void merge(const SemanticVector& v) { apply_summary(v, 0.0, 0.0); }

  SemanticVector average() const;

 private:
  std::vector<AccumulatorSlot> slots_;
};

/// Vector of the method's own instructions. Internal calls are skipped; API and
/// unknown calls are counted under their type. Jumps and returns are not counted.
Accumulator intra_vector(const ir::Method& method, const ir::Vocabulary& vocab,
                         const cfg::MethodAnalysis& analysis);

struct InterResult {
  std::vector<SemanticVector> summaries;  // per method, averaged
  SemanticVector app;
};

/// Summarizes methods callee-first over the call graph and merges the entry
/// points into the app vector. `analyses` is indexed like program.methods.
InterResult inter_vector(const ir::Program& program, const ir::CallGraph& cg, const ir::Vocabulary& vocab,
                         std::span<const cfg::MethodAnalysis> analyses);

struct ProgramAnalysis {
  std::vector<cfg::MethodAnalysis> methods;
  ir::CallGraph call_graph;
  InterResult vectors;
  std::vector<std::string> warnings;
};

/// Runs the per-method analyses (in parallel) and the interprocedural sweep.
ProgramAnalysis analyze_program(const ir::Program& program, const ir::Vocabulary& vocab);

/// Parallel per-method analysis; rethrows the first failure in method order.
std::vector<cfg::MethodAnalysis> analyze_methods(const ir::Program& program);

}  // namespace lowrate::semvec
