#pragma once
// On-disk app bundles, corpus manifests and vector files.
//
//   <bundle>/meta          lowrate-meta 1, then key=value lines (id, stars)
//   <bundle>/program.sir   IR text
//   <bundle>/layout/*.sxml layout documents, named by file stem
//
//   <corpus>/manifest      lowrate-manifest 1, then "id<TAB>stars<TAB>label"
//   <corpus>/vocab.txt, <corpus>/ui_vocab.txt, <corpus>/apps/<id>/

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lowrate/ir.hpp"
#include "lowrate/layout.hpp"
#include "lowrate/pipeline.hpp"

namespace lowrate::bundle {

struct BundleMeta {
  std::string id;
  double stars = 0.0;
};

BundleMeta parse_meta(std::string_view text, std::string_view source = "<meta>");
std::string render_meta(const BundleMeta& meta);

struct AppBundle {
  BundleMeta meta;
  ir::Program program;
  std::vector<layout::LayoutDoc> layouts;  // sorted by name
};

/// Errors carry the offending file path.
AppBundle load_app(const std::filesystem::path& dir, const ir::Vocabulary& vocab);
void write_app(const std::filesystem::path& dir, const BundleMeta& meta, const std::string& program_text,
               std::span<const layout::LayoutDoc> layouts);

struct AppAnalysis {
  pipeline::AppRecord record;
  std::vector<std::string> warnings;
};

AppAnalysis analyze_app(const AppBundle& app, const ir::Vocabulary& vocab, const layout::UiVocabulary& ui_vocab,
                        double star_threshold = 3.0);

struct ManifestEntry {
  std::string id;
  double stars = 0.0;
  int label = pipeline::kNotLow;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

std::vector<ManifestEntry> parse_manifest(std::string_view text, std::string_view source = "<manifest>");
std::string render_manifest(std::span<const ManifestEntry> entries);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view text);

struct Corpus {
  ir::Vocabulary vocab;
  layout::UiVocabulary ui_vocab;
  std::vector<ManifestEntry> manifest;
};

/// Reads the manifest and the vocabularies stored next to it.
Corpus load_corpus_index(const std::filesystem::path& dir);

/// Loads and analyzes every app listed in the manifest (in parallel, manifest order).
std::vector<pipeline::AppRecord> load_records(const std::filesystem::path& dir, const Corpus& corpus,
                                              double star_threshold = 3.0);

/// Vector file: "lowrate-vectors 1", then per app a `sem` line with sparse
/// id:(f, l, b) entries and a `ui` line with sparse slot:(n, d) entries.
std::string render_vectors(std::span<const pipeline::AppRecord> records);

}  // namespace lowrate::bundle
