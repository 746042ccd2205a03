#include "lowrate/ir.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "lowrate/common.hpp"

namespace lowrate::ir {

// ---------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary() { add_reserved(); }

void Vocabulary::add(const std::string& name, std::size_t line, std::string_view source) {
  if (ids_.contains(name)) {
    throw ParseError(source, line, "duplicate vocabulary name '" + name + "'");
  }
  names_.push_back(name);
  ids_.emplace(name, static_cast<std::uint32_t>(names_.size()));
}

void Vocabulary::add_reserved() {
  for (std::string_view reserved : {kUnknownApi, kRecursiveCall}) {
    if (!ids_.contains(std::string(reserved))) {
      add(std::string(reserved), 0, "<vocab>");
    }
  }
  unknown_api_ = TypeId{ids_.at(std::string(kUnknownApi))};
  recursive_call_ = TypeId{ids_.at(std::string(kRecursiveCall))};
}

Vocabulary Vocabulary::parse(std::string_view text, std::string_view source) {
  Vocabulary v;
  v.names_.clear();
  v.ids_.clear();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (split_ws(line).size() != 1) {
      throw ParseError(source, line_no, "expected one name per line");
    }
    v.add(std::string(line), line_no, source);
  }
  v.add_reserved();
  return v;
}

Vocabulary Vocabulary::from_names(const std::vector<std::string>& names) {
  Vocabulary v;
  v.names_.clear();
  v.ids_.clear();
  for (std::size_t i = 0; i < names.size(); ++i) v.add(names[i], i + 1, "<vocab>");
  v.add_reserved();
  return v;
}

std::optional<TypeId> Vocabulary::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return TypeId{it->second};
}

TypeId Vocabulary::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw InputError("unknown instruction type '" + std::string(name) + "'");
}

const std::string& Vocabulary::name(TypeId id) const {
  if (id.value == 0 || id.value > names_.size()) {
    throw InvariantError("type id out of range: " + std::to_string(id.value));
  }
  return names_[id.value - 1];
}

std::string Vocabulary::render() const {
  std::string out;
  for (const auto& n : names_) out += n + "\n";
  return out;
}

// ------------------------------------------------------------------- Program

std::optional<std::size_t> Program::find(std::string_view name) const {
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (methods[i].name == name) return i;
  }
  return std::nullopt;
}

namespace {

struct Token {
  std::string_view text;
  std::size_t line;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '{' || c == '}') {
      out.push_back({text.substr(i, 1), line});
      ++i;
    } else {
      std::size_t start = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) && text[i] != '{' &&
             text[i] != '}' && text[i] != '#') {
        ++i;
      }
      out.push_back({text.substr(start, i - start), line});
    }
  }
  return out;
}

bool is_keyword(std::string_view t) {
  return t == "method" || t == "entry" || t == "vocab" || t == "if" || t == "jump" || t == "call" ||
         t == "ret" || t == "{" || t == "}";
}

bool is_label_def(std::string_view t) { return t.size() > 1 && t.back() == ':'; }

bool valid_name(std::string_view t) {
  return !t.empty() && !is_keyword(t) && t.find(':') == std::string_view::npos;
}

class ProgramParser {
 public:
  ProgramParser(std::string_view text, const Vocabulary& vocab, std::string_view source)
      : tokens_(tokenize(text)), vocab_(vocab), source_(source) {}

  Program run() {
    Program p;
    std::vector<std::pair<std::string, std::size_t>> entries;
    if (peek_is("vocab")) {
      std::size_t line = next().line;
      bool any = false;
      while (!at_end() && !is_keyword(peek().text)) {
        Token t = next();
        if (!vocab_.find(t.text)) {
          throw ParseError(source_, t.line, "vocab names unknown type '" + std::string(t.text) + "'");
        }
        any = true;
      }
      if (!any) throw ParseError(source_, line, "empty vocab line");
    }
    while (!at_end()) {
      Token t = next();
      if (t.text == "entry") {
        bool any = false;
        while (!at_end() && !is_keyword(peek().text)) {
          Token n = next();
          entries.emplace_back(std::string(n.text), n.line);
          any = true;
        }
        if (!any) throw ParseError(source_, t.line, "entry directive needs at least one method name");
      } else if (t.text == "method") {
        parse_method(p);
      } else {
        throw ParseError(source_, t.line, "expected 'method' or 'entry', found '" + std::string(t.text) + "'");
      }
    }
    if (!entries.empty()) {
      p.explicit_entries = true;
      for (const auto& [name, line] : entries) {
        auto idx = p.find(name);
        if (!idx) throw ParseError(source_, line, "entry names unknown method '" + name + "'");
        if (std::find(p.entry_points.begin(), p.entry_points.end(), *idx) == p.entry_points.end()) {
          p.entry_points.push_back(*idx);
        }
      }
    }
    link_program(p, vocab_);
    return p;
  }

 private:
  bool at_end() const { return pos_ >= tokens_.size(); }
  const Token& peek() const { return tokens_[pos_]; }
  bool peek_is(std::string_view t) const { return !at_end() && peek().text == t; }
  Token next() {
    if (at_end()) {
      std::size_t line = tokens_.empty() ? 0 : tokens_.back().line;
      throw ParseError(source_, line, "unexpected end of input");
    }
    return tokens_[pos_++];
  }

  Token expect_name(std::string_view what) {
    Token t = next();
    if (!valid_name(t.text)) {
      throw ParseError(source_, t.line, "expected " + std::string(what) + ", found '" + std::string(t.text) + "'");
    }
    return t;
  }

  void parse_method(Program& p) {
    Token name = expect_name("method name");
    if (p.find(name.text)) {
      throw ParseError(source_, name.line, "duplicate method '" + std::string(name.text) + "'");
    }
    Token brace = next();
    if (brace.text != "{") throw ParseError(source_, brace.line, "expected '{' after method name");

    Method m;
    m.name = std::string(name.text);
    std::unordered_map<std::string, std::size_t> labels;
    std::vector<std::pair<std::string, std::size_t>> pending_labels;  // name, line
    struct Fixup {
      std::size_t instr;
      std::string label;
      std::size_t line;
    };
    std::vector<Fixup> fixups;

    auto bind_pending = [&](std::size_t index) {
      for (auto& [label, line] : pending_labels) {
        if (!labels.emplace(label, index).second) {
          throw ParseError(source_, line, "duplicate label '" + label + "' in method '" + m.name + "'");
        }
      }
      pending_labels.clear();
    };

    while (true) {
      Token t = next();
      if (t.text == "}") break;
      if (is_label_def(t.text)) {
        std::string label(t.text.substr(0, t.text.size() - 1));
        if (!valid_name(label)) throw ParseError(source_, t.line, "invalid label '" + label + "'");
        pending_labels.emplace_back(std::move(label), t.line);
        continue;
      }
      std::size_t index = m.instructions.size();
      bind_pending(index);
      Instruction ins;
      if (t.text == "ret") {
        ins.kind = OpKind::Return;
      } else if (t.text == "jump") {
        ins.kind = OpKind::Jump;
        Token l = expect_name("label");
        fixups.push_back({index, std::string(l.text), l.line});
      } else if (t.text == "if") {
        ins.kind = OpKind::CondJump;
        Token op = expect_name("comparison opcode");
        ins.type = opcode(op);
        Token l = expect_name("label");
        fixups.push_back({index, std::string(l.text), l.line});
      } else if (t.text == "call") {
        ins.kind = OpKind::Call;
        ins.callee = std::string(expect_name("callee name").text);
      } else if (valid_name(t.text)) {
        ins.kind = OpKind::Plain;
        ins.type = opcode(t);
      } else {
        throw ParseError(source_, t.line, "unexpected '" + std::string(t.text) + "' in method body");
      }
      m.instructions.push_back(std::move(ins));
    }
    if (!pending_labels.empty()) {
      throw ParseError(source_, pending_labels.front().second,
                       "label '" + pending_labels.front().first + "' is not followed by an instruction");
    }
    for (const auto& f : fixups) {
      auto it = labels.find(f.label);
      if (it == labels.end()) {
        throw ParseError(source_, f.line, "unresolved label '" + f.label + "' in method '" + m.name + "'");
      }
      Instruction& ins = m.instructions[f.instr];
      ins.target = it->second;
      if (ins.kind == OpKind::CondJump && ins.target == f.instr + 1) {
        throw ParseError(source_, f.line, "conditional jump to its own fallthrough ('" + f.label + "')");
      }
    }
    p.methods.push_back(std::move(m));
  }

  TypeId opcode(const Token& t) const {
    auto id = vocab_.find(t.text);
    if (!id) throw ParseError(source_, t.line, "unknown opcode '" + std::string(t.text) + "'");
    return *id;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const Vocabulary& vocab_;
  std::string_view source_;
};

}  // namespace

Program parse_program(std::string_view text, const Vocabulary& vocab, std::string_view source) {
  return ProgramParser(text, vocab, source).run();
}

void link_program(Program& program, const Vocabulary& vocab) {
  std::unordered_map<std::string_view, std::size_t> by_name;
  for (std::size_t i = 0; i < program.methods.size(); ++i) by_name.emplace(program.methods[i].name, i);
  for (auto& m : program.methods) {
    for (auto& ins : m.instructions) {
      if (ins.kind != OpKind::Call) continue;
      if (auto it = by_name.find(ins.callee); it != by_name.end()) {
        ins.call_kind = CallKind::Internal;
        ins.callee_index = it->second;
        ins.type = TypeId{};
      } else if (auto id = vocab.find(ins.callee)) {
        ins.call_kind = CallKind::Api;
        ins.callee_index = 0;
        ins.type = *id;
      } else {
        ins.call_kind = CallKind::Unknown;
        ins.callee_index = 0;
        ins.type = vocab.unknown_api();
      }
    }
  }
  if (program.explicit_entries) return;

  // Default roots: methods nobody else calls. When every method sits on a cycle
  // reachable from another method, fall back to the members of source SCCs.
  CallGraph cg = build_call_graph(program);
  program.entry_points.clear();
  for (std::size_t i = 0; i < program.methods.size(); ++i) {
    const auto& callers = cg.callers[i];
    bool only_self = std::all_of(callers.begin(), callers.end(), [i](std::size_t c) { return c == i; });
    if (only_self) program.entry_points.push_back(i);
  }
  std::vector<bool> covered(cg.scc_order.size(), false);
  std::function<void(std::size_t)> mark = [&](std::size_t scc) {
    if (covered[scc]) return;
    covered[scc] = true;
    for (std::size_t m : cg.scc_order[scc]) {
      for (std::size_t callee : cg.callees[m]) mark(cg.scc_of[callee]);
    }
  };
  for (std::size_t e : program.entry_points) mark(cg.scc_of[e]);
  for (std::size_t s = cg.scc_order.size(); s-- > 0;) {
    if (covered[s]) continue;
    bool is_source = true;
    for (std::size_t m : cg.scc_order[s]) {
      for (std::size_t caller : cg.callers[m]) {
        if (cg.scc_of[caller] != s) is_source = false;
      }
    }
    if (!is_source) continue;
    for (std::size_t m : cg.scc_order[s]) program.entry_points.push_back(m);
    mark(s);
  }
  std::sort(program.entry_points.begin(), program.entry_points.end());
}

std::string render_program(const Program& program, const Vocabulary& vocab) {
  std::string out;
  if (program.explicit_entries && !program.entry_points.empty()) {
    out += "entry";
    for (std::size_t e : program.entry_points) out += " " + program.methods[e].name;
    out += "\n";
  }
  for (const auto& m : program.methods) {
    std::set<std::size_t> targets;
    for (const auto& ins : m.instructions) {
      if (ins.kind == OpKind::CondJump || ins.kind == OpKind::Jump) targets.insert(ins.target);
    }
    out += "method " + m.name + " {\n";
    for (std::size_t i = 0; i < m.instructions.size(); ++i) {
      const auto& ins = m.instructions[i];
      out += targets.contains(i) ? "L" + std::to_string(i) + ": " : std::string("  ");
      switch (ins.kind) {
        case OpKind::Plain:
          out += vocab.name(ins.type);
          break;
        case OpKind::CondJump:
          out += "if " + vocab.name(ins.type) + " L" + std::to_string(ins.target);
          break;
        case OpKind::Jump:
          out += "jump L" + std::to_string(ins.target);
          break;
        case OpKind::Call:
          out += "call " + ins.callee;
          break;
        case OpKind::Return:
          out += "ret";
          break;
      }
      out += "\n";
    }
    out += "}\n";
  }
  return out;
}

// ---------------------------------------------------------------- Call graph

CallGraph build_call_graph(const Program& program) {
  const std::size_t n = program.methods.size();
  CallGraph cg;
  cg.callees.resize(n);
  cg.callers.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& ins : program.methods[i].instructions) {
      if (ins.kind == OpKind::Call && ins.call_kind == CallKind::Internal) {
        cg.callees[i].push_back(ins.callee_index);
      }
    }
    auto& c = cg.callees[i];
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    for (std::size_t callee : c) cg.callers[callee].push_back(i);
  }

  // Iterative Tarjan. Components complete in reverse topological order of the
  // condensation, which is exactly the callee-first order we want.
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::size_t counter = 0;
  cg.scc_of.assign(n, 0);
  struct Frame {
    std::size_t node;
    std::size_t next_edge;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    std::vector<Frame> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      const auto& out = cg.callees[f.node];
      if (f.next_edge < out.size()) {
        std::size_t w = out[f.next_edge++];
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.node] = std::min(low[f.node], index[w]);
        }
        continue;
      }
      std::size_t v = f.node;
      frames.pop_back();
      if (!frames.empty()) {
        low[frames.back().node] = std::min(low[frames.back().node], low[v]);
      }
      if (low[v] == index[v]) {
        std::vector<std::size_t> component;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          component.push_back(w);
          cg.scc_of[w] = cg.scc_order.size();
        } while (w != v);
        std::sort(component.begin(), component.end());
        cg.scc_order.push_back(std::move(component));
      }
    }
  }
  return cg;
}

}  // namespace lowrate::ir
