#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lowrate/nn/model.hpp"

namespace lowrate::nn {

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 10;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// Mini-batch SGD with classical momentum. Shuffles every epoch from the
/// config seed; the last batch of an epoch may be partial. Deterministic.
TrainResult train(const ModelSpec& spec, const Tensor& inputs, std::span<const int> labels,
                  const TrainConfig& config);

/// Runs infer-mode forward in chunks and returns the requested outputs.
struct Inference {
  Tensor probs;
  Tensor features;
};
Inference infer(const ModelSpec& spec, const ModelParams& params, const Tensor& inputs,
                std::size_t chunk = 256);

/// Versioned text model file: spec, every parameter tensor in shortest
/// round-trip decimal, running statistics and the seed.
void save_model(std::ostream& os, const ModelSpec& spec, const ModelParams& params);
void load_model(std::istream& is, ModelSpec& spec, ModelParams& params, std::string_view source = "<model>");

}  // namespace lowrate::nn
