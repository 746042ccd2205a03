#pragma once

// Instruction-level control-flow analyses for one method.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lowrate/common.hpp"
#include "lowrate/ir.hpp"

namespace lowrate::cfg {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = ~NodeId{0};

struct Edge {
  NodeId from;
  NodeId to;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class Digraph {
 public:
  Digraph() = default;
  explicit Digraph(std::size_t n) : succ_(n), pred_(n) {}

  std::size_t size() const { return succ_.size(); }
  /// Adds u->v unless already present.
  void add_edge(NodeId u, NodeId v);
  void remove_edge(NodeId u, NodeId v);
  bool has_edge(NodeId u, NodeId v) const;
  const std::vector<NodeId>& succ(NodeId n) const { return succ_[n]; }
  const std::vector<NodeId>& pred(NodeId n) const { return pred_[n]; }
  Digraph reversed() const;

 private:
  std::vector<std::vector<NodeId>> succ_;
  std::vector<std::vector<NodeId>> pred_;
};

/// Nodes 0..n-1 are instructions, then ENTRY = n and EXIT = n+1.
struct Cfg {
  Digraph graph;
  std::size_t instruction_count = 0;
  NodeId entry = 0;
  NodeId exit = 0;
  std::vector<bool> reachable;    // per node, from ENTRY
  std::vector<bool> conditional;  // per node, cond-jump instructions
  std::vector<std::string> warnings;

  bool is_instruction(NodeId n) const { return n < instruction_count; }
  std::string node_name(NodeId n) const;
};

Cfg build_cfg(const ir::Method& method);

/// Iterative fixed-point immediate dominators (Cooper, Harvey, Kennedy).
/// Result[root] and result[unreachable] are kNoNode.
std::vector<NodeId> immediate_dominators(const Digraph& graph, NodeId root);

/// Immediate post-dominators: dominators of the reversed graph rooted at `exit`.
std::vector<NodeId> immediate_post_dominators(const Digraph& graph, NodeId exit);

/// Reflexive dominance query over an idom array.
bool dominates(std::span<const NodeId> idom, NodeId a, NodeId b);

/// Edges (u,v) of reachable nodes where v dominates u, sorted.
std::vector<Edge> back_edges(const Cfg& cfg, std::span<const NodeId> idom);

/// Reachable part of the CFG with back edges removed and every node left
/// without successors wired to EXIT.
Digraph branch_graph(const Cfg& cfg, std::span<const Edge> back);

class IrreducibleError : public InputError {
 public:
  using InputError::InputError;
};

/// Per-instruction count of merged natural loops containing the instruction.
/// Throws IrreducibleError when a retreating edge is not a back edge.
std::vector<std::size_t> loop_depths(const Cfg& cfg, std::span<const Edge> back, std::span<const NodeId> idom);

struct BranchRegion {
  NodeId start;
  NodeId end;                 // immediate post-dominator of start; may be EXIT
  std::vector<NodeId> body;   // instruction nodes strictly between, sorted
};

struct BranchInfo {
  std::vector<std::size_t> counts;  // per instruction
  std::vector<BranchRegion> regions;
};

/// `acyclic` is branch_graph(cfg, back); `ipdom` its post-dominators.
BranchInfo branch_counts(const Cfg& cfg, const Digraph& acyclic, std::span<const Edge> back,
                         std::span<const NodeId> ipdom);

struct MethodAnalysis {
  Cfg cfg;
  std::vector<NodeId> idom;
  std::vector<Edge> back;
  Digraph acyclic;
  std::vector<NodeId> ipdom;
  std::vector<std::size_t> depth;
  BranchInfo branches;
};

MethodAnalysis analyze_method(const ir::Method& method);

/// Line-oriented `node: succ...` dump plus dominator, depth and count tables.
void dump(std::ostream& os, const std::string& method_name, const MethodAnalysis& analysis);

}  // namespace lowrate::cfg
