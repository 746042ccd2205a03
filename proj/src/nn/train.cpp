#include <algorithm>
#include <numeric>

#include "lowrate/common.hpp"
#include "lowrate/nn/train.hpp"

namespace lowrate::nn {

TrainResult train(const ModelSpec& spec, const Tensor& inputs, std::span<const int> labels,
                  const TrainConfig& config) {
  const std::size_t n = inputs.rows();
  if (n == 0) throw InputError("cannot train on an empty dataset");
  if (labels.size() != n) throw InvariantError("label count does not match input count");
  if (config.batch_size == 0) throw InputError("batch size must be positive");

  TrainResult result;
  result.params = init_params(spec, derive_seed(config.seed, {0}));
  ModelParams velocity = result.params;
  for_each_trainable(velocity, [](std::size_t, const char*, Tensor& t) { t.fill(0.0); });

  Rng rng(derive_seed(config.seed, {1}));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch_labels;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor batch = inputs.gather_rows(idx);
      batch_labels.clear();
      for (std::size_t i : idx) batch_labels.push_back(labels[i]);

      ForwardResult fwd = forward(spec, result.params, batch, Mode::Train);
      LossResult loss = cross_entropy(fwd.probs, batch_labels);
      ModelParams grads = backward(spec, result.params, fwd, loss.grad_logits);
      loss_sum += loss.loss;
      ++batches;

      // v = mu * v - lr * g;  p += v
      std::vector<Tensor*> grad_tensors;
      for_each_trainable(grads, [&](std::size_t, const char*, Tensor& t) { grad_tensors.push_back(&t); });
      std::size_t gi = 0;
      std::vector<Tensor*> vel_tensors;
      for_each_trainable(velocity, [&](std::size_t, const char*, Tensor& t) { vel_tensors.push_back(&t); });
      for_each_trainable(result.params, [&](std::size_t, const char*, Tensor& p) {
        auto g = grad_tensors[gi]->values();
        auto v = vel_tensors[gi]->values();
        auto w = p.values();
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = config.momentum * v[i] - config.learning_rate * g[i];
          w[i] += v[i];
        }
        ++gi;
      });

      for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& l = spec.layers[li];
        if (l.kind != LayerKind::BatchNorm) continue;
        LayerParams& p = result.params.layers[li];
        const LayerCache& c = fwd.cache[li];
        for (std::size_t j = 0; j < p.running_mean.size(); ++j) {
          p.running_mean[j] = l.momentum * p.running_mean[j] + (1.0 - l.momentum) * c.batch_mean[j];
          p.running_var[j] = l.momentum * p.running_var[j] + (1.0 - l.momentum) * c.batch_var[j];
        }
      }
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return result;
}

Inference infer(const ModelSpec& spec, const ModelParams& params, const Tensor& inputs, std::size_t chunk) {
  const std::size_t n = inputs.rows();
  Inference out;
  out.probs = Tensor::matrix(n, spec.classes());
  out.features = Tensor::matrix(n, spec.feature_dim());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    ForwardResult fwd = forward(spec, params, inputs.gather_rows(idx), Mode::Infer);
    for (std::size_t i = start; i < end; ++i) {
      auto p = fwd.probs.row(i - start);
      std::copy(p.begin(), p.end(), out.probs.row(i).begin());
      auto f = fwd.features.row(i - start);
      std::copy(f.begin(), f.end(), out.features.row(i).begin());
    }
  }
  return out;
}

}  // namespace lowrate::nn
