#pragma once
// Brute-force references for the summary-based analyses: full textual
// inlining for semantic vectors and full include expansion for layouts.

#include <optional>
#include <span>
#include <string>

#include "lowrate/ir.hpp"
#include "lowrate/layout.hpp"
#include "lowrate/semvec.hpp"

namespace lowrate::oracle {

/// Inlines every internal call into each entry point, analyzes the flat
/// method, and merges the entry points. Throws InputError on recursion or
/// when the inlined program would exceed `max_instructions`.
semvec::SemanticVector oracle_semantic_vector(const ir::Program& program, const ir::Vocabulary& vocab,
                                              std::size_t max_instructions = 5'000'000);

/// The flat method used for one entry point; exposed for tests.
ir::Method inline_method(const ir::Program& program, std::size_t method, std::size_t max_instructions = 5'000'000);

/// Expands every reference in the root documents and recounts directly.
layout::LayoutVector oracle_layout_vector(std::span<const layout::LayoutDoc> docs, const layout::UiVocabulary& vocab);

/// Frequencies and counts must match exactly; averages within `tolerance`.
/// Returns a description of the first differing slot.
inline constexpr double kAverageTolerance = 1e-9;
std::optional<std::string> first_difference(const semvec::SemanticVector& a, const semvec::SemanticVector& b,
                                            double tolerance = kAverageTolerance);
std::optional<std::string> first_difference(const layout::LayoutVector& a, const layout::LayoutVector& b,
                                            double tolerance = kAverageTolerance);

}  // namespace lowrate::oracle
