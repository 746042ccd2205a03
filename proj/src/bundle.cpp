#include "lowrate/bundle.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include "lowrate/common.hpp"

namespace lowrate::bundle {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMetaHeader = "lowrate-meta 1";
constexpr std::string_view kManifestHeader = "lowrate-manifest 1";
constexpr std::string_view kVectorsHeader = "lowrate-vectors 1";

/// Yields (line number, trimmed line) for non-blank, non-comment lines.
template <typename Fn>
void for_each_line(std::string_view text, Fn fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    fn(line_no, line);
  }
}

double parse_stars(std::string_view value, std::string_view source, std::size_t line) {
  double stars = 0.0;
  try {
    stars = parse_double(value);
  } catch (const InputError&) {
    throw ParseError(source, line, "stars '" + std::string(value) + "' is not a number");
  }
  if (!(stars >= 1.0 && stars <= 5.0)) {
    throw ParseError(source, line, "stars " + std::string(value) + " outside [1, 5]");
  }
  return stars;
}

bool valid_id(std::string_view id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

}  // namespace

BundleMeta parse_meta(std::string_view text, std::string_view source) {
  BundleMeta meta;
  bool header = false, has_id = false, has_stars = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header) {
      if (line != kMetaHeader) throw ParseError(source, line_no, "expected '" + std::string(kMetaHeader) + "'");
      header = true;
      return;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected key=value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key == "id") {
      if (!valid_id(value)) throw ParseError(source, line_no, "invalid app id '" + std::string(value) + "'");
      meta.id = std::string(value);
      has_id = true;
    } else if (key == "stars") {
      meta.stars = parse_stars(value, source, line_no);
      has_stars = true;
    }
  });
  if (!header) throw ParseError(source, 0, "empty meta file");
  if (!has_id) throw ParseError(source, 0, "missing id");
  if (!has_stars) throw ParseError(source, 0, "missing stars");
  return meta;
}

std::string render_meta(const BundleMeta& meta) {
  return std::string(kMetaHeader) + "\nid=" + meta.id + "\nstars=" + exact_decimal(meta.stars) + "\n";
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw InputError("failed writing " + path.string());
}

AppBundle load_app(const fs::path& dir, const ir::Vocabulary& vocab) {
  if (!fs::is_directory(dir)) throw InputError("bundle " + dir.string() + " is not a directory");
  AppBundle app;
  const fs::path meta_path = dir / "meta";
  app.meta = parse_meta(read_file(meta_path), meta_path.string());
  const fs::path program_path = dir / "program.sir";
  app.program = ir::parse_program(read_file(program_path), vocab, program_path.string());

  const fs::path layout_dir = dir / "layout";
  if (fs::is_directory(layout_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(layout_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".sxml") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      app.layouts.push_back(layout::parse_layout(read_file(f), f.stem().string(), f.string()));
    }
  }
  return app;
}

void write_app(const fs::path& dir, const BundleMeta& meta, const std::string& program_text,
               std::span<const layout::LayoutDoc> layouts) {
  std::error_code ec;
  fs::create_directories(dir / "layout", ec);
  if (ec) throw InputError("cannot create bundle directory " + dir.string() + ": " + ec.message());
  write_file(dir / "meta", render_meta(meta));
  write_file(dir / "program.sir", program_text);
  for (const layout::LayoutDoc& doc : layouts) write_file(dir / "layout" / (doc.name + ".sxml"), render_layout(doc));
}

AppAnalysis analyze_app(const AppBundle& app, const ir::Vocabulary& vocab, const layout::UiVocabulary& ui_vocab,
                        double star_threshold) {
  AppAnalysis out;
  semvec::ProgramAnalysis pa = semvec::analyze_program(app.program, vocab);
  out.warnings = std::move(pa.warnings);
  out.record.id = app.meta.id;
  out.record.stars = app.meta.stars;
  out.record.label = pipeline::label_for_stars(app.meta.stars, star_threshold);
  out.record.semantic = std::move(pa.vectors.app);
  out.record.layout = layout::layout_vector(app.layouts, ui_vocab);
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view text, std::string_view source) {
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  bool header = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header) {
      if (line != kManifestHeader) {
        throw ParseError(source, line_no, "expected '" + std::string(kManifestHeader) + "'");
      }
      header = true;
      return;
    }
    const auto fields = split_ws(line);
    if (fields.size() != 3) throw ParseError(source, line_no, "expected: id stars label");
    ManifestEntry e;
    e.id = std::string(fields[0]);
    if (!valid_id(e.id)) throw ParseError(source, line_no, "invalid app id '" + e.id + "'");
    if (!seen.insert(e.id).second) throw ParseError(source, line_no, "duplicate app id '" + e.id + "'");
    e.stars = parse_stars(fields[1], source, line_no);
    if (fields[2] == "0") {
      e.label = pipeline::kLow;
    } else if (fields[2] == "1") {
      e.label = pipeline::kNotLow;
    } else {
      throw ParseError(source, line_no, "label must be 0 or 1");
    }
    entries.push_back(std::move(e));
  });
  if (!header) throw ParseError(source, 0, "empty manifest");
  return entries;
}

std::string render_manifest(std::span<const ManifestEntry> entries) {
  std::string out(kManifestHeader);
  out += "\n";
  for (const ManifestEntry& e : entries) {
    out += e.id + "\t" + exact_decimal(e.stars) + "\t" + std::to_string(e.label) + "\n";
  }
  return out;
}

Corpus load_corpus_index(const fs::path& dir) {
  Corpus c;
  const fs::path manifest = dir / "manifest";
  c.manifest = parse_manifest(read_file(manifest), manifest.string());
  const fs::path vocab = dir / "vocab.txt";
  c.vocab = ir::Vocabulary::parse(read_file(vocab), vocab.string());
  const fs::path ui_vocab = dir / "ui_vocab.txt";
  c.ui_vocab = layout::UiVocabulary::parse(read_file(ui_vocab), ui_vocab.string());
  return c;
}

std::vector<pipeline::AppRecord> load_records(const fs::path& dir, const Corpus& corpus, double star_threshold) {
  const std::size_t n = corpus.manifest.size();
  std::vector<pipeline::AppRecord> records(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const ManifestEntry& e = corpus.manifest[i];
      const fs::path app_dir = dir / "apps" / e.id;
      AppBundle app = load_app(app_dir, corpus.vocab);
      if (app.meta.id != e.id || app.meta.stars != e.stars) {
        throw InputError("bundle " + app_dir.string() + " meta disagrees with the manifest");
      }
      records[i] = analyze_app(app, corpus.vocab, corpus.ui_vocab, star_threshold).record;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

std::string render_vectors(std::span<const pipeline::AppRecord> records) {
  std::string out(kVectorsHeader);
  out += "\n";
  for (const pipeline::AppRecord& r : records) {
    out += "sem " + r.id + " " + std::to_string(r.label) + " " + std::to_string(r.semantic.size());
    const auto sem = r.semantic.slots();
    for (std::size_t k = 0; k < sem.size(); ++k) {
      if (sem[k].f == 0) continue;
      out += " " + std::to_string(k + 1) + ":(" + std::to_string(sem[k].f) + ", " + fixed9(sem[k].l) + ", " +
             fixed9(sem[k].b) + ")";
    }
    out += "\nui " + r.id + " " + std::to_string(r.label) + " " + std::to_string(r.layout.size());
    const auto ui = r.layout.slots();
    for (std::size_t k = 0; k < ui.size(); ++k) {
      if (ui[k].n == 0) continue;
      out += " " + std::to_string(k + 1) + ":(" + std::to_string(ui[k].n) + ", " + fixed9(ui[k].d) + ")";
    }
    out += "\n";
  }
  return out;
}

}  // namespace lowrate::bundle
