#pragma once

// Layout documents and layout vectors.
//
// Markup is a strict tag tree: `<Name ...>...</Name>`, `<Name .../>`, and the
// reference form `<ref target="doc"/>`. Attributes other than `target` are
// ignored; `<?...?>` prologs and `<!-- -->` comments are skipped.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lowrate::layout {

struct Element {
  std::string tag;
  std::optional<std::string> ref_target;  // set for reference elements
  std::vector<Element> children;
  friend bool operator==(const Element&, const Element&) = default;
};

struct LayoutDoc {
  std::string name;
  Element root;
  friend bool operator==(const LayoutDoc&, const LayoutDoc&) = default;
};

inline constexpr std::string_view kRefTag = "ref";

/// `source` names the input in diagnostics; defaults to the document name.
LayoutDoc parse_layout(std::string_view text, std::string name, std::string_view source = {});
std::string render_layout(const LayoutDoc& doc);

/// Known element types with ids 1..M; slots M+1 (legacy) and M+2 (custom) follow.
class UiVocabulary {
 public:
  UiVocabulary() = default;
  UiVocabulary(std::vector<std::string> names, std::vector<std::string> legacy_prefixes = {"android.support."});
  static UiVocabulary parse(std::string_view text, std::string_view source = "<ui-vocab>");

  std::size_t known_count() const { return names_.size(); }
  std::size_t slot_count() const { return names_.size() + 2; }
  std::size_t legacy_slot() const { return names_.size() + 1; }
  std::size_t custom_slot() const { return names_.size() + 2; }
  std::optional<std::size_t> find(std::string_view tag) const;
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& legacy_prefixes() const { return legacy_prefixes_; }
  std::string render() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<std::string> legacy_prefixes_;
};

/// Slot id in 1..M+2.
std::size_t classify_element(std::string_view tag, const UiVocabulary& vocab);

struct LayoutSlot {
  std::uint64_t n = 0;
  double d = 0.0;
  friend bool operator==(const LayoutSlot&, const LayoutSlot&) = default;
};

/// Averaged layout vector, slots indexed 1..M+2.
class LayoutVector {
 public:
  LayoutVector() = default;
  explicit LayoutVector(std::size_t slots) : slots_(slots) {}
  std::size_t size() const { return slots_.size(); }
  const LayoutSlot& operator[](std::size_t slot) const { return slots_.at(slot - 1); }
  LayoutSlot& operator[](std::size_t slot) { return slots_.at(slot - 1); }
  std::span<const LayoutSlot> slots() const { return slots_; }
  std::uint64_t total_count() const;
  friend bool operator==(const LayoutVector&, const LayoutVector&) = default;

 private:
  std::vector<LayoutSlot> slots_;
};

/// (n, Σdepth) accumulator for one document or a set of them.
class LayoutAccumulator {
 public:
  explicit LayoutAccumulator(std::size_t slots) : n_(slots, 0), sum_d_(slots, 0.0) {}
  void add(std::size_t slot, double depth) {
    n_.at(slot - 1) += 1;
    sum_d_.at(slot - 1) += depth;
  }
  /// Splices another document's accumulator in with every depth shifted by `offset`.
  void splice(const LayoutAccumulator& other, double offset);
  LayoutVector average() const;
  std::uint64_t n(std::size_t slot) const { return n_.at(slot - 1); }
  double sum_depth(std::size_t slot) const { return sum_d_.at(slot - 1); }

 private:
  std::vector<std::uint64_t> n_;
  std::vector<double> sum_d_;
};

/// App layout vector. Docs referenced by others contribute only through their
/// references; a reference at depth d places the target root at depth d.
/// Throws InputError on unresolved targets, duplicate names, or reference cycles.
LayoutVector layout_vector(std::span<const LayoutDoc> docs, const UiVocabulary& vocab);

}  // namespace lowrate::layout
