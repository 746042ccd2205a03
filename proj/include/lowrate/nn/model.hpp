#pragma once

// Feed-forward networks built from five layer types: a valid-padding stride-1
// convolution (first layer only), dense, batch normalization, tanh, and a
// dense softmax output. Backpropagation is exact; gradient_check compares it
// against central differences.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lowrate/nn/tensor.hpp"

namespace lowrate::nn {

enum class LayerKind { Conv, Dense, BatchNorm, Tanh, Softmax };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t units = 0;        // dense width, conv filter count, softmax classes
  std::size_t kernel_rows = 0;  // conv only
  std::size_t kernel_cols = 0;  // conv only
  double eps = 1e-5;            // batchnorm only
  double momentum = 0.9;        // batchnorm only

  static LayerSpec conv(std::size_t filters, std::size_t rows, std::size_t cols);
  static LayerSpec dense(std::size_t units);
  static LayerSpec batchnorm(double eps = 1e-5, double momentum = 0.9);
  static LayerSpec tanh();
  static LayerSpec softmax(std::size_t classes);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  /// Per-sample input is input_rows x input_cols, flattened row-major.
  std::size_t input_rows = 1;
  std::size_t input_cols = 0;
  std::vector<LayerSpec> layers;
  /// Index of the layer whose (post-activation) output is the extracted feature.
  std::size_t feature_layer = 0;

  std::size_t input_dim() const { return input_rows * input_cols; }
  std::size_t classes() const;
  std::size_t feature_dim() const;
  /// Output width of every layer; throws InvariantError when shapes do not chain.
  std::vector<std::size_t> output_dims() const;
  void validate() const { (void)output_dims(); }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Trainable tensors are empty when the layer kind has none.
struct LayerParams {
  Tensor weight;  // dense/softmax: [in x out]; conv: [filters x rows x cols]
  Tensor bias;
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ModelParams {
  std::vector<LayerParams> layers;
  std::uint64_t seed = 0;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Fan-in scaled uniform initialization, U(-sqrt(3/fan_in), sqrt(3/fan_in)).
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

/// Visits weight, bias, gamma, beta of each layer that has them.
void for_each_trainable(ModelParams& params, const std::function<void(std::size_t, const char*, Tensor&)>& fn);
void for_each_trainable(const ModelParams& params,
                        const std::function<void(std::size_t, const char*, const Tensor&)>& fn);
std::size_t trainable_count(const ModelParams& params);

enum class Mode { Train, Infer };

struct LayerCache {
  Tensor input;     // layer input [batch x in]
  Tensor output;    // layer output [batch x out]
  Tensor patches;   // conv im2col
  Tensor xhat;      // batchnorm
  std::vector<double> batch_mean, batch_var, inv_std;
};

struct ForwardResult {
  Tensor logits;
  Tensor probs;
  Tensor features;
  std::vector<LayerCache> cache;
};

/// `batch` is [batch x input_dim]. Throws InvariantError on shape mismatch.
ForwardResult forward(const ModelSpec& spec, const ModelParams& params, const Tensor& batch, Mode mode);

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
};

/// Mean cross entropy; probabilities are floored at 1e-12 before the log.
LossResult cross_entropy(const Tensor& probs, std::span<const int> labels);

/// Gradients w.r.t. every trainable tensor, laid out like ModelParams.
ModelParams backward(const ModelSpec& spec, const ModelParams& params, const ForwardResult& fwd,
                     const Tensor& grad_logits);

/// In-place softmax over each row.
void softmax_rows(Tensor& t);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "layer/name[index]"
};

/// Central-difference check of backward() on a train-mode loss. Parameters
/// are subsampled (seeded) once a tensor exceeds `per_tensor_limit` entries.
GradientCheck gradient_check(const ModelSpec& spec, const ModelParams& params, const Tensor& batch,
                             std::span<const int> labels, double step = 1e-5, std::size_t per_tensor_limit = 10000,
                             std::uint64_t seed = 1);

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric);
inline constexpr double kRelativeErrorFloor = 1e-6;

}  // namespace lowrate::nn
