#include "lowrate/metrics.hpp"

#include <cmath>

#include "lowrate/common.hpp"

namespace lowrate::pipeline {

Confusion confusion(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) throw InvariantError("prediction/label count mismatch");
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool pred_low = predicted[i] == 0;
    const bool is_low = actual[i] == 0;
    if (pred_low && is_low) ++c.tp;
    if (pred_low && !is_low) ++c.fp;
    if (!pred_low && is_low) ++c.fn;
    if (!pred_low && !is_low) ++c.tn;
  }
  return c;
}

Metrics metrics(const Confusion& c) {
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  return Metrics{ratio(c.tp + c.tn, c.total()), ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn)};
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

std::vector<std::vector<std::size_t>> partition_folds(std::span<const std::size_t> permutation, std::size_t k) {
  if (k == 0) throw InputError("fold count must be positive");
  const std::size_t n = permutation.size();
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(permutation.begin() + static_cast<std::ptrdiff_t>(pos),
                    permutation.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

}  // namespace lowrate::pipeline
