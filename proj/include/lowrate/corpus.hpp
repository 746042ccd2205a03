#pragma once
// Synthetic app generator with a planted class signal, plus the random
// program and layout-forest generators used by the oracle tests.
//
// Each app draws two latent quality scores, one per channel:
//   q = margin * strength * (low ? +1 : -1) + N(0, 1)
// The executable score shifts the API mix, how often heavy APIs sit inside
// loops, and loop/branch density. The UI score shifts the element mix, legacy
// and custom widget usage, and nesting depth. margin = 0 makes both classes
// draw from the same distribution.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lowrate/bundle.hpp"
#include "lowrate/common.hpp"
#include "lowrate/ir.hpp"
#include "lowrate/layout.hpp"

namespace lowrate::corpus {

struct ProgramShape {
  std::size_t methods_min = 4;
  std::size_t methods_max = 12;
  /// Instruction budget per method, before the closing `ret`.
  std::size_t method_budget_min = 8;
  std::size_t method_budget_max = 40;
  std::size_t max_nesting = 3;
  std::size_t block_min = 1;
  std::size_t block_max = 5;
  double loop_prob = 0.10;
  double if_prob = 0.14;
  double else_prob = 0.35;
  double early_return_prob = 0.05;
  double api_prob = 0.30;
  double unknown_prob = 0.03;
  double internal_call_prob = 0.10;
  /// Upper bound on a method's size with every internal call inlined.
  std::size_t max_expanded = 20000;
};

struct LayoutShape {
  std::size_t docs_min = 1;
  std::size_t docs_max = 4;
  std::size_t children_min = 1;
  std::size_t children_max = 4;
  std::size_t max_depth = 6;
  double container_prob = 0.30;
  double legacy_prob = 0.06;
  double custom_prob = 0.06;
  double ref_prob = 0.10;
};

struct CorpusSpec {
  std::uint64_t seed = 7;
  std::size_t apps = 1000;
  double low_share = 0.5;
  double margin = 1.0;
  double exec_strength = 1.7;
  double ui_strength = 1.1;
  ProgramShape program;
  LayoutShape layout;
};

/// Vocabularies the generator draws from, split by role.
struct GeneratorVocab {
  ir::Vocabulary vocab;
  layout::UiVocabulary ui;
  std::vector<ir::TypeId> plain;
  std::vector<ir::TypeId> cond;
  std::vector<std::string> apis;
  std::vector<int> api_signal;  // +1 heavier in low apps, -1 heavier in not-low apps, 0 neutral
  std::vector<std::string> containers;
  std::vector<std::string> widgets;
  std::vector<int> widget_signal;
  std::vector<std::string> legacy;
  std::vector<std::string> custom;
};

const GeneratorVocab& default_vocab();

/// Per-app draw weights; uniform profiles give the plain random generator.
struct ExecProfile {
  std::vector<double> plain;
  std::vector<double> cond;
  std::vector<double> api;
  std::vector<double> api_in_loop;  // multiplier applied at loop depth > 0
};

struct UiProfile {
  std::vector<double> containers;
  std::vector<double> widgets;
};

ExecProfile uniform_exec_profile(const GeneratorVocab& gv);
UiProfile uniform_ui_profile(const GeneratorVocab& gv);

/// Reducible program with an acyclic call graph (method i only calls j > i),
/// do-while loops whose bodies start with a plain instruction, non-empty if
/// bodies, and every method ending in `ret`.
ir::Program generate_program(Rng& rng, const GeneratorVocab& gv, const ProgramShape& shape,
                             const ExecProfile& profile);

/// Documents named d0, d1, ...; references only point to higher-numbered docs.
std::vector<layout::LayoutDoc> generate_layouts(Rng& rng, const GeneratorVocab& gv, const LayoutShape& shape,
                                                const UiProfile& profile);

struct GeneratedApp {
  bundle::BundleMeta meta;
  int label = 0;
  ir::Program program;
  std::vector<layout::LayoutDoc> layouts;
};

GeneratedApp generate_app(const CorpusSpec& spec, std::size_t index);
std::string app_id(std::size_t index);

/// Writes vocab.txt, ui_vocab.txt, manifest and apps/<id>/ under `out`.
std::vector<bundle::ManifestEntry> gen_corpus(const CorpusSpec& spec, const std::filesystem::path& out);

/// In-memory analysis of a generated corpus, identical to writing and loading it.
std::vector<pipeline::AppRecord> generate_records(const CorpusSpec& spec);

}  // namespace lowrate::corpus
