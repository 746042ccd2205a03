#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lowrate::pipeline {

/// Positive class is "low rating" (label 0).
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when nothing was predicted positive
  double recall = 0.0;     // 0 when there are no positives
};

Confusion confusion(std::span<const int> predicted, std::span<const int> actual);
Metrics metrics(const Confusion& c);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population form
};

MeanStd mean_std(std::span<const double> values);

/// Splits a permutation of 0..n-1 into k folds whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> partition_folds(std::span<const std::size_t> permutation, std::size_t k);

}  // namespace lowrate::pipeline
