#pragma once

// Textual executable IR: vocabulary, program object model and call graph.
//
// Grammar (one file per app):
//   file      := vocab-line? directive* method*
//   vocab     := "vocab" name+           names the file relies on; each must be known
//   directive := "entry" name+
//   method    := "method" name "{" line* "}"
//   line      := [label ":"] instr
//   instr     := opcode | "if" opcode label | "jump" label | "call" name | "ret"
// `#` starts a comment. One instruction per line; a line holding only labels
// attaches them to the next instruction.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lowrate::ir {

/// 1-based instruction-type id; 0 is "none".
struct TypeId {
  std::uint32_t value = 0;
  friend bool operator==(TypeId, TypeId) = default;
  friend auto operator<=>(TypeId, TypeId) = default;
};

inline constexpr std::string_view kUnknownApi = "__unknown_api__";
inline constexpr std::string_view kRecursiveCall = "__recursive_call__";

class Vocabulary {
 public:
  Vocabulary();  // reserved names only
  /// Manifest form: one name per line, `#` comments, blank lines skipped.
  static Vocabulary parse(std::string_view text, std::string_view source = "<vocab>");
  static Vocabulary from_names(const std::vector<std::string>& names);

  std::size_t size() const { return names_.size(); }
  std::optional<TypeId> find(std::string_view name) const;
  TypeId at(std::string_view name) const;  // throws InputError when absent
  const std::string& name(TypeId id) const;
  const std::vector<std::string>& names() const { return names_; }

  TypeId unknown_api() const { return unknown_api_; }
  TypeId recursive_call() const { return recursive_call_; }

  std::string render() const;

 private:
  void add(const std::string& name, std::size_t line, std::string_view source);
  void add_reserved();

  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  TypeId unknown_api_;
  TypeId recursive_call_;
};

enum class OpKind { Plain, CondJump, Jump, Call, Return };

/// Resolution of a `call` instruction's target.
enum class CallKind { Internal, Api, Unknown };

struct Instruction {
  OpKind kind = OpKind::Plain;
  /// Plain/CondJump: its type. Call to Api/Unknown: the counted type.
  TypeId type;
  /// CondJump/Jump: target instruction index. The fallthrough of a CondJump is index+1.
  std::size_t target = 0;
  std::string callee;
  CallKind call_kind = CallKind::Api;
  /// Internal calls: index of the callee in Program::methods.
  std::size_t callee_index = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct Method {
  std::string name;
  std::vector<Instruction> instructions;

  friend bool operator==(const Method&, const Method&) = default;
};

struct Program {
  std::vector<Method> methods;  // file order
  std::vector<std::size_t> entry_points;
  /// Whether entry_points came from an `entry` directive.
  bool explicit_entries = false;

  std::optional<std::size_t> find(std::string_view name) const;

  friend bool operator==(const Program&, const Program&) = default;
};

Program parse_program(std::string_view text, const Vocabulary& vocab,
                      std::string_view source = "<program>");

/// Canonical text form; parse_program(render_program(p)) == p.
std::string render_program(const Program& program, const Vocabulary& vocab);

/// Resolves call kinds/indices and fills default entry points. Used by the
/// parser and by code that builds Programs in memory.
void link_program(Program& program, const Vocabulary& vocab);

struct CallGraph {
  std::vector<std::vector<std::size_t>> callees;  // deduplicated, sorted
  std::vector<std::vector<std::size_t>> callers;
  /// Strongly connected components, callees before callers.
  std::vector<std::vector<std::size_t>> scc_order;
  std::vector<std::size_t> scc_of;  // method -> position in scc_order
};

CallGraph build_call_graph(const Program& program);

}  // namespace lowrate::ir
