#include "lowrate/cfg.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace lowrate::cfg {

void Digraph::add_edge(NodeId u, NodeId v) {
  if (has_edge(u, v)) return;
  succ_[u].push_back(v);
  pred_[v].push_back(u);
}

void Digraph::remove_edge(NodeId u, NodeId v) {
  std::erase(succ_[u], v);
  std::erase(pred_[v], u);
}

bool Digraph::has_edge(NodeId u, NodeId v) const {
  const auto& s = succ_[u];
  return std::find(s.begin(), s.end(), v) != s.end();
}

Digraph Digraph::reversed() const {
  Digraph r(size());
  r.succ_ = pred_;
  r.pred_ = succ_;
  return r;
}

std::string Cfg::node_name(NodeId n) const {
  if (n == entry) return "ENTRY";
  if (n == exit) return "EXIT";
  return std::to_string(n);
}

Cfg build_cfg(const ir::Method& method) {
  const std::size_t n = method.instructions.size();
  Cfg cfg;
  cfg.instruction_count = n;
  cfg.entry = static_cast<NodeId>(n);
  cfg.exit = static_cast<NodeId>(n + 1);
  Digraph g(n + 2);
  cfg.conditional.assign(n + 2, false);

  // Falling off the end of the method behaves like `ret`.
  auto next = [&](std::size_t i) { return i + 1 < n ? static_cast<NodeId>(i + 1) : cfg.exit; };
  g.add_edge(cfg.entry, n == 0 ? cfg.exit : 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ins = method.instructions[i];
    auto u = static_cast<NodeId>(i);
    switch (ins.kind) {
      case ir::OpKind::Plain:
      case ir::OpKind::Call:
        g.add_edge(u, next(i));
        break;
      case ir::OpKind::CondJump:
        cfg.conditional[i] = true;
        g.add_edge(u, static_cast<NodeId>(ins.target));
        g.add_edge(u, next(i));
        break;
      case ir::OpKind::Jump:
        g.add_edge(u, static_cast<NodeId>(ins.target));
        break;
      case ir::OpKind::Return:
        g.add_edge(u, cfg.exit);
        break;
    }
  }

  cfg.reachable.assign(n + 2, false);
  std::vector<NodeId> work{cfg.entry};
  cfg.reachable[cfg.entry] = true;
  while (!work.empty()) {
    NodeId u = work.back();
    work.pop_back();
    for (NodeId v : g.succ(u)) {
      if (!cfg.reachable[v]) {
        cfg.reachable[v] = true;
        work.push_back(v);
      }
    }
  }
  cfg.reachable[cfg.exit] = true;  // EXIT stays even if no path reaches it
  for (std::size_t i = 0; i < n; ++i) {
    if (cfg.reachable[i]) continue;
    cfg.warnings.push_back("method '" + method.name + "': instruction " + std::to_string(i) +
                           " is unreachable and dropped");
    auto u = static_cast<NodeId>(i);
    for (NodeId v : std::vector<NodeId>(g.succ(u))) g.remove_edge(u, v);
  }
  cfg.graph = std::move(g);
  return cfg;
}

namespace {

/// Reverse postorder from `root`, walking `succ`.
std::vector<NodeId> reverse_postorder(const std::vector<std::vector<NodeId>>& succ_of, NodeId root) {
  const std::size_t n = succ_of.size();
  std::vector<NodeId> post;
  std::vector<bool> seen(n, false);
  std::vector<std::pair<NodeId, std::size_t>> stack{{root, 0}};
  seen[root] = true;
  while (!stack.empty()) {
    auto& [u, i] = stack.back();
    if (i < succ_of[u].size()) {
      NodeId v = succ_of[u][i++];
      if (!seen[v]) {
        seen[v] = true;
        stack.emplace_back(v, 0);
      }
    } else {
      post.push_back(u);
      stack.pop_back();
    }
  }
  std::reverse(post.begin(), post.end());
  return post;
}

std::vector<NodeId> dominators_impl(const std::vector<std::vector<NodeId>>& succ_of,
                                    const std::vector<std::vector<NodeId>>& pred_of, NodeId root) {
  const std::size_t n = succ_of.size();
  std::vector<NodeId> order = reverse_postorder(succ_of, root);
  std::vector<std::size_t> rank(n, 0);
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;

  std::vector<NodeId> idom(n, kNoNode);
  idom[root] = root;
  auto intersect = [&](NodeId a, NodeId b) {
    while (a != b) {
      while (rank[a] > rank[b]) a = idom[a];
      while (rank[b] > rank[a]) b = idom[b];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 1; i < order.size(); ++i) {
      NodeId u = order[i];
      NodeId best = kNoNode;
      for (NodeId p : pred_of[u]) {
        if (idom[p] == kNoNode) continue;
        best = best == kNoNode ? p : intersect(p, best);
      }
      if (best != idom[u]) {
        idom[u] = best;
        changed = true;
      }
    }
  }
  idom[root] = kNoNode;
  return idom;
}

std::vector<std::vector<NodeId>> succ_lists(const Digraph& g) {
  std::vector<std::vector<NodeId>> out(g.size());
  for (NodeId u = 0; u < g.size(); ++u) out[u] = g.succ(u);
  return out;
}

std::vector<std::vector<NodeId>> pred_lists(const Digraph& g) {
  std::vector<std::vector<NodeId>> out(g.size());
  for (NodeId u = 0; u < g.size(); ++u) out[u] = g.pred(u);
  return out;
}

}  // namespace

std::vector<NodeId> immediate_dominators(const Digraph& graph, NodeId root) {
  return dominators_impl(succ_lists(graph), pred_lists(graph), root);
}

std::vector<NodeId> immediate_post_dominators(const Digraph& graph, NodeId exit) {
  return dominators_impl(pred_lists(graph), succ_lists(graph), exit);
}

bool dominates(std::span<const NodeId> idom, NodeId a, NodeId b) {
  for (NodeId x = b; x != kNoNode; x = idom[x]) {
    if (x == a) return true;
  }
  return false;
}

std::vector<Edge> back_edges(const Cfg& cfg, std::span<const NodeId> idom) {
  std::vector<Edge> out;
  for (NodeId u = 0; u < cfg.graph.size(); ++u) {
    if (!cfg.reachable[u]) continue;
    for (NodeId v : cfg.graph.succ(u)) {
      if (dominates(idom, v, u)) out.push_back({u, v});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Digraph branch_graph(const Cfg& cfg, std::span<const Edge> back) {
  Digraph g(cfg.graph.size());
  for (NodeId u = 0; u < cfg.graph.size(); ++u) {
    if (!cfg.reachable[u]) continue;
    for (NodeId v : cfg.graph.succ(u)) {
      if (!std::binary_search(back.begin(), back.end(), Edge{u, v})) g.add_edge(u, v);
    }
  }
  for (NodeId u = 0; u < cfg.graph.size(); ++u) {
    if (u != cfg.exit && cfg.reachable[u] && g.succ(u).empty()) g.add_edge(u, cfg.exit);
  }
  return g;
}

std::vector<std::size_t> loop_depths(const Cfg& cfg, std::span<const Edge> back, std::span<const NodeId> idom) {
  const Digraph& g = cfg.graph;
  const std::size_t n = g.size();

  // Reducibility: every retreating edge of a DFS from ENTRY must be a back edge.
  {
    std::vector<char> state(n, 0);  // 0 new, 1 on stack, 2 done
    std::vector<std::pair<NodeId, std::size_t>> stack{{cfg.entry, 0}};
    state[cfg.entry] = 1;
    while (!stack.empty()) {
      auto& [u, i] = stack.back();
      if (i < g.succ(u).size()) {
        NodeId v = g.succ(u)[i++];
        if (state[v] == 1 && !dominates(idom, v, u)) {
          throw IrreducibleError("irreducible control flow: edge " + cfg.node_name(u) + " -> " +
                                 cfg.node_name(v) + " re-enters a cycle whose head does not dominate it");
        }
        if (state[v] == 0) {
          state[v] = 1;
          stack.emplace_back(v, 0);
        }
      } else {
        state[u] = 2;
        stack.pop_back();
      }
    }
  }

  std::map<NodeId, std::vector<bool>> loops;  // header -> merged body
  for (const Edge& e : back) {
    auto& body = loops.try_emplace(e.to, std::vector<bool>(n, false)).first->second;
    body[e.to] = true;
    std::vector<NodeId> work;
    if (!body[e.from]) {
      body[e.from] = true;
      work.push_back(e.from);
    }
    while (!work.empty()) {
      NodeId x = work.back();
      work.pop_back();
      for (NodeId p : g.pred(x)) {
        if (cfg.reachable[p] && !body[p]) {
          body[p] = true;
          work.push_back(p);
        }
      }
    }
  }
  std::vector<std::size_t> depth(cfg.instruction_count, 0);
  for (const auto& [header, body] : loops) {
    for (std::size_t i = 0; i < cfg.instruction_count; ++i) depth[i] += body[i] ? 1 : 0;
  }
  return depth;
}

BranchInfo branch_counts(const Cfg& cfg, const Digraph& acyclic, std::span<const Edge> back,
                         std::span<const NodeId> ipdom) {
  const std::size_t n = acyclic.size();
  BranchInfo info;
  info.counts.assign(cfg.instruction_count, 0);
  std::vector<bool> back_source(n, false);
  for (const Edge& e : back) back_source[e.from] = true;

  std::vector<char> fwd(n), bwd(n);
  std::vector<NodeId> work;
  for (NodeId s = 0; s < cfg.instruction_count; ++s) {
    if (!cfg.conditional[s] || !cfg.reachable[s] || back_source[s]) continue;
    NodeId e = ipdom[s];
    if (e == kNoNode) continue;

    std::fill(fwd.begin(), fwd.end(), 0);
    std::fill(bwd.begin(), bwd.end(), 0);
    fwd[s] = 1;
    work.assign({s});
    while (!work.empty()) {
      NodeId u = work.back();
      work.pop_back();
      if (u == e) continue;  // paths past e are outside the region
      for (NodeId v : acyclic.succ(u)) {
        if (!fwd[v]) {
          fwd[v] = 1;
          work.push_back(v);
        }
      }
    }
    bwd[e] = 1;
    work.assign({e});
    while (!work.empty()) {
      NodeId u = work.back();
      work.pop_back();
      for (NodeId p : acyclic.pred(u)) {
        if (!bwd[p]) {
          bwd[p] = 1;
          work.push_back(p);
        }
      }
    }
    BranchRegion region{s, e, {}};
    for (NodeId x = 0; x < cfg.instruction_count; ++x) {
      if (x != s && x != e && fwd[x] && bwd[x]) {
        region.body.push_back(x);
        ++info.counts[x];
      }
    }
    info.regions.push_back(std::move(region));
  }
  return info;
}

MethodAnalysis analyze_method(const ir::Method& method) {
  MethodAnalysis a;
  a.cfg = build_cfg(method);
  a.idom = immediate_dominators(a.cfg.graph, a.cfg.entry);
  a.back = back_edges(a.cfg, a.idom);
  try {
    a.depth = loop_depths(a.cfg, a.back, a.idom);
  } catch (const IrreducibleError& e) {
    throw IrreducibleError("method '" + method.name + "': " + e.what());
  }
  a.acyclic = branch_graph(a.cfg, a.back);
  a.ipdom = immediate_post_dominators(a.acyclic, a.cfg.exit);
  for (NodeId u = 0; u < a.cfg.instruction_count; ++u) {
    if (a.cfg.reachable[u] && a.ipdom[u] == kNoNode) {
      a.cfg.warnings.push_back("method '" + method.name + "': instruction " + std::to_string(u) +
                               " cannot reach EXIT; excluded from post-dominance");
    }
  }
  a.branches = branch_counts(a.cfg, a.acyclic, a.back, a.ipdom);
  return a;
}

void dump(std::ostream& os, const std::string& method_name, const MethodAnalysis& a) {
  const Cfg& cfg = a.cfg;
  auto name = [&](NodeId n) { return n == kNoNode ? std::string("-") : cfg.node_name(n); };
  os << "cfg " << method_name << "\n";
  for (NodeId u : std::vector<NodeId>{cfg.entry}) {
    os << name(u) << ":";
    for (NodeId v : cfg.graph.succ(u)) os << " " << name(v);
    os << "\n";
  }
  for (NodeId u = 0; u < cfg.instruction_count; ++u) {
    os << name(u) << ":";
    for (NodeId v : cfg.graph.succ(u)) os << " " << name(v);
    os << "\n";
  }
  os << "EXIT:\n";
  os << "idom " << method_name << "\n";
  for (NodeId u = 0; u < cfg.graph.size(); ++u) {
    if (u != cfg.entry && cfg.reachable[u]) os << name(u) << ": " << name(a.idom[u]) << "\n";
  }
  os << "ipdom " << method_name << "\n";
  for (NodeId u = 0; u < cfg.graph.size(); ++u) {
    if (u != cfg.exit && cfg.reachable[u]) os << name(u) << ": " << name(a.ipdom[u]) << "\n";
  }
  os << "back-edges " << method_name << "\n";
  for (const Edge& e : a.back) os << name(e.from) << ": " << name(e.to) << "\n";
  os << "depth-count " << method_name << "\n";
  for (NodeId u = 0; u < cfg.instruction_count; ++u) {
    os << u << ": " << a.depth[u] << " " << a.branches.counts[u] << "\n";
  }
}

}  // namespace lowrate::cfg
