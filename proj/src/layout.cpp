#include "lowrate/layout.hpp"

#include <algorithm>
#include <functional>

#include "lowrate/common.hpp"

namespace lowrate::layout {

namespace {

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-' || c == ':' || c == '$';
}

class MarkupParser {
 public:
  MarkupParser(std::string_view text, std::string_view source) : text_(text), source_(source) {}

  Element run() {
    skip_misc();
    if (at_end()) fail("empty document");
    Element root = element();
    skip_misc();
    if (!at_end()) fail("content after the root element (multiple roots?)");
    return root;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  bool starts(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }

  std::size_t line_of(std::size_t pos) const {
    return static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + std::min(pos, text_.size()), '\n')) + 1;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(source_, line_of(pos_), msg); }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }

  /// Whitespace, comments and processing instructions.
  void skip_misc() {
    while (true) {
      skip_ws();
      if (starts("<!--")) {
        auto end = text_.find("-->", pos_ + 4);
        if (end == std::string_view::npos) fail("unterminated comment");
        pos_ = end + 3;
      } else if (starts("<?")) {
        auto end = text_.find("?>", pos_ + 2);
        if (end == std::string_view::npos) fail("unterminated processing instruction");
        pos_ = end + 2;
      } else {
        return;
      }
    }
  }

  std::string name() {
    std::size_t start = pos_;
    while (!at_end() && name_char(peek())) ++pos_;
    if (pos_ == start) fail("expected a tag name");
    return std::string(text_.substr(start, pos_ - start));
  }

  Element element() {
    std::size_t open_pos = pos_;
    if (at_end() || peek() != '<') fail("expected '<'");
    ++pos_;
    Element el;
    el.tag = name();
    bool self_closing = false;
    while (true) {
      skip_ws();
      if (at_end()) fail("unterminated tag <" + el.tag + ">");
      if (starts("/>")) {
        pos_ += 2;
        self_closing = true;
        break;
      }
      if (peek() == '>') {
        ++pos_;
        break;
      }
      std::string attr = name();
      skip_ws();
      if (at_end() || peek() != '=') fail("expected '=' after attribute " + attr);
      ++pos_;
      skip_ws();
      if (at_end() || (peek() != '"' && peek() != '\'')) fail("expected quoted value for attribute " + attr);
      char quote = peek();
      auto end = text_.find(quote, pos_ + 1);
      if (end == std::string_view::npos) fail("unterminated attribute value");
      std::string value(text_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end + 1;
      if (el.tag == kRefTag && attr == "target") el.ref_target = std::move(value);
    }
    if (el.tag == kRefTag && !el.ref_target) {
      pos_ = open_pos;
      fail("reference tag without target attribute");
    }
    if (self_closing) return el;

    while (true) {
      skip_misc();
      if (at_end()) {
        pos_ = open_pos;
        fail("element <" + el.tag + "> is never closed");
      }
      if (starts("</")) {
        std::size_t close_pos = pos_;
        pos_ += 2;
        std::string closing = name();
        skip_ws();
        if (at_end() || peek() != '>') fail("malformed closing tag");
        ++pos_;
        if (closing != el.tag) {
          pos_ = close_pos;
          fail("mismatched closing tag </" + closing + "> for <" + el.tag + "> opened at line " +
               std::to_string(line_of(open_pos)));
        }
        break;
      }
      if (peek() != '<') fail("unexpected text content");
      el.children.push_back(element());
    }
    if (el.ref_target && !el.children.empty()) {
      pos_ = open_pos;
      fail("reference tag must not have children");
    }
    return el;
  }

  std::string_view text_;
  std::string_view source_;
  std::size_t pos_ = 0;
};

void render_element(const Element& el, std::size_t depth, std::string& out) {
  out.append(2 * depth, ' ');
  if (el.ref_target) {
    out += "<" + std::string(kRefTag) + " target=\"" + *el.ref_target + "\"/>\n";
    return;
  }
  if (el.children.empty()) {
    out += "<" + el.tag + "/>\n";
    return;
  }
  out += "<" + el.tag + ">\n";
  for (const auto& c : el.children) render_element(c, depth + 1, out);
  out.append(2 * depth, ' ');
  out += "</" + el.tag + ">\n";
}

}  // namespace

LayoutDoc parse_layout(std::string_view text, std::string name, std::string_view source) {
  LayoutDoc doc;
  doc.root = MarkupParser(text, source.empty() ? std::string_view(name) : source).run();
  doc.name = std::move(name);
  return doc;
}

std::string render_layout(const LayoutDoc& doc) {
  std::string out;
  render_element(doc.root, 0, out);
  return out;
}

UiVocabulary::UiVocabulary(std::vector<std::string> names, std::vector<std::string> legacy_prefixes)
    : names_(std::move(names)), legacy_prefixes_(std::move(legacy_prefixes)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!ids_.emplace(names_[i], i + 1).second) {
      throw InputError("duplicate UI element name '" + names_[i] + "'");
    }
  }
}

UiVocabulary UiVocabulary::parse(std::string_view text, std::string_view source) {
  // One name per line; `legacy-prefix <p>` lines replace the default prefix list.
  std::vector<std::string> names;
  std::vector<std::string> prefixes;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto words = split_ws(line);
    if (words.empty()) continue;
    if (words[0] == "legacy-prefix") {
      if (words.size() != 2) throw ParseError(source, line_no, "legacy-prefix takes one argument");
      prefixes.emplace_back(words[1]);
      continue;
    }
    if (words.size() != 1) throw ParseError(source, line_no, "expected one name per line");
    if (std::find(names.begin(), names.end(), words[0]) != names.end()) {
      throw ParseError(source, line_no, "duplicate UI element name '" + std::string(words[0]) + "'");
    }
    names.emplace_back(words[0]);
  }
  if (prefixes.empty()) prefixes.emplace_back("android.support.");
  return UiVocabulary(std::move(names), std::move(prefixes));
}

std::optional<std::size_t> UiVocabulary::find(std::string_view tag) const {
  auto it = ids_.find(std::string(tag));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string UiVocabulary::render() const {
  std::string out;
  for (const auto& p : legacy_prefixes_) out += "legacy-prefix " + p + "\n";
  for (const auto& n : names_) out += n + "\n";
  return out;
}

std::size_t classify_element(std::string_view tag, const UiVocabulary& vocab) {
  if (auto id = vocab.find(tag)) return *id;
  for (const auto& prefix : vocab.legacy_prefixes()) {
    if (tag.starts_with(prefix)) return vocab.legacy_slot();
  }
  return vocab.custom_slot();
}

std::uint64_t LayoutVector::total_count() const {
  std::uint64_t total = 0;
  for (const auto& s : slots_) total += s.n;
  return total;
}

void LayoutAccumulator::splice(const LayoutAccumulator& other, double offset) {
  for (std::size_t k = 0; k < n_.size(); ++k) {
    n_[k] += other.n_[k];
    sum_d_[k] += other.sum_d_[k] + offset * static_cast<double>(other.n_[k]);
  }
}

LayoutVector LayoutAccumulator::average() const {
  LayoutVector v(n_.size());
  for (std::size_t k = 0; k < n_.size(); ++k) {
    if (n_[k] == 0) continue;
    v[k + 1] = LayoutSlot{n_[k], sum_d_[k] / static_cast<double>(n_[k])};
  }
  return v;
}

LayoutVector layout_vector(std::span<const LayoutDoc> docs, const UiVocabulary& vocab) {
  const std::size_t slots = vocab.slot_count();
  std::unordered_map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!by_name.emplace(docs[i].name, i).second) {
      throw InputError("duplicate layout document '" + docs[i].name + "'");
    }
  }

  std::vector<bool> referenced(docs.size(), false);
  std::vector<std::vector<std::size_t>> refs(docs.size());
  std::function<void(const Element&, std::size_t)> collect = [&](const Element& el, std::size_t doc) {
    if (el.ref_target) {
      auto it = by_name.find(*el.ref_target);
      if (it == by_name.end()) {
        throw InputError("layout '" + docs[doc].name + "' references unknown document '" + *el.ref_target + "'");
      }
      refs[doc].push_back(it->second);
      referenced[it->second] = true;
    }
    for (const auto& c : el.children) collect(c, doc);
  };
  for (std::size_t i = 0; i < docs.size(); ++i) collect(docs[i].root, i);

  // Summaries leaf-documents first; the DFS doubles as the cycle check.
  enum class Mark { New, Active, Done };
  std::vector<Mark> mark(docs.size(), Mark::New);
  std::vector<std::optional<LayoutAccumulator>> summary(docs.size());

  std::function<void(std::size_t)> summarize = [&](std::size_t d) {
    if (mark[d] == Mark::Done) return;
    if (mark[d] == Mark::Active) {
      throw InputError("layout reference cycle through document '" + docs[d].name + "'");
    }
    mark[d] = Mark::Active;
    for (std::size_t t : refs[d]) summarize(t);
    LayoutAccumulator acc(slots);
    std::function<void(const Element&, std::size_t)> walk = [&](const Element& el, std::size_t depth) {
      if (el.ref_target) {
        acc.splice(*summary[by_name.at(*el.ref_target)], static_cast<double>(depth));
        return;
      }
      acc.add(classify_element(el.tag, vocab), static_cast<double>(depth));
      for (const auto& c : el.children) walk(c, depth + 1);
    };
    walk(docs[d].root, 0);
    summary[d] = std::move(acc);
    mark[d] = Mark::Done;
  };

  LayoutAccumulator app(slots);
  for (std::size_t i = 0; i < docs.size(); ++i) summarize(i);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!referenced[i]) app.splice(*summary[i], 0.0);
  }
  return app.average();
}

}  // namespace lowrate::layout
