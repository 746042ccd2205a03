#include "lowrate/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "lowrate/common.hpp"
#include "lowrate/nn/kernels.hpp"

namespace lowrate::nn {

namespace k = kernels::parallel;

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv:
      return "conv";
    case LayerKind::Dense:
      return "dense";
    case LayerKind::BatchNorm:
      return "batchnorm";
    case LayerKind::Tanh:
      return "tanh";
    case LayerKind::Softmax:
      return "softmax";
  }
  return "?";
}

LayerSpec LayerSpec::conv(std::size_t filters, std::size_t rows, std::size_t cols) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.units = filters;
  s.kernel_rows = rows;
  s.kernel_cols = cols;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::batchnorm(double eps, double momentum) {
  LayerSpec s;
  s.kind = LayerKind::BatchNorm;
  s.eps = eps;
  s.momentum = momentum;
  return s;
}

LayerSpec LayerSpec::tanh() {
  LayerSpec s;
  s.kind = LayerKind::Tanh;
  return s;
}

LayerSpec LayerSpec::softmax(std::size_t classes) {
  LayerSpec s;
  s.kind = LayerKind::Softmax;
  s.units = classes;
  return s;
}

std::size_t ModelSpec::classes() const {
  if (layers.empty() || layers.back().kind != LayerKind::Softmax) {
    throw InvariantError("model must end with a softmax output layer");
  }
  return layers.back().units;
}

std::size_t ModelSpec::feature_dim() const { return output_dims().at(feature_layer); }

std::vector<std::size_t> ModelSpec::output_dims() const {
  if (layers.empty()) throw InvariantError("model has no layers");
  if (input_rows == 0 || input_cols == 0) throw InvariantError("model input shape is empty");
  if (feature_layer + 1 >= layers.size()) throw InvariantError("feature layer must precede the output layer");
  std::vector<std::size_t> dims;
  std::size_t width = input_dim();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
        if (i != 0) throw InvariantError("convolution is only supported as the first layer");
        if (l.kernel_rows != input_rows) throw InvariantError("conv kernel height must equal the input height");
        if (l.kernel_cols == 0 || l.kernel_cols > input_cols) throw InvariantError("conv kernel wider than input");
        if (l.units == 0) throw InvariantError("conv needs at least one filter");
        width = l.units * (input_cols - l.kernel_cols + 1);
        break;
      case LayerKind::Dense:
        if (l.units == 0) throw InvariantError("dense layer needs at least one unit");
        width = l.units;
        break;
      case LayerKind::Softmax:
        if (i + 1 != layers.size()) throw InvariantError("softmax must be the last layer");
        if (l.units < 2) throw InvariantError("softmax needs at least two classes");
        width = l.units;
        break;
      case LayerKind::BatchNorm:
        if (!(l.eps > 0.0) || !(l.momentum >= 0.0 && l.momentum < 1.0)) {
          throw InvariantError("batchnorm eps must be > 0 and momentum in [0, 1)");
        }
        break;
      case LayerKind::Tanh:
        break;
    }
    dims.push_back(width);
  }
  if (layers.back().kind != LayerKind::Softmax) throw InvariantError("model must end with a softmax output layer");
  return dims;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  const auto dims = spec.output_dims();
  ModelParams params;
  params.seed = seed;
  Rng rng(seed);
  std::size_t in = spec.input_dim();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams p;
    auto uniform_fill = [&](Tensor& t, std::size_t fan_in) {
      double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
      for (double& v : t.values()) v = rng.uniform(-limit, limit);
    };
    switch (l.kind) {
      case LayerKind::Conv:
        p.weight = Tensor({l.units, l.kernel_rows, l.kernel_cols});
        uniform_fill(p.weight, l.kernel_rows * l.kernel_cols);
        p.bias = Tensor({l.units});
        break;
      case LayerKind::Dense:
      case LayerKind::Softmax:
        p.weight = Tensor({in, l.units});
        uniform_fill(p.weight, in);
        p.bias = Tensor({l.units});
        break;
      case LayerKind::BatchNorm:
        p.gamma = Tensor({in}, 1.0);
        p.beta = Tensor({in}, 0.0);
        p.running_mean = Tensor({in}, 0.0);
        p.running_var = Tensor({in}, 1.0);
        break;
      case LayerKind::Tanh:
        break;
    }
    params.layers.push_back(std::move(p));
    in = dims[i];
  }
  return params;
}

namespace {

template <typename Params, typename Fn>
void visit_trainable(Params& params, Fn&& fn) {
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& l = params.layers[i];
    if (!l.weight.empty()) fn(i, "weight", l.weight);
    if (!l.bias.empty()) fn(i, "bias", l.bias);
    if (!l.gamma.empty()) fn(i, "gamma", l.gamma);
    if (!l.beta.empty()) fn(i, "beta", l.beta);
  }
}

}  // namespace

void for_each_trainable(ModelParams& params, const std::function<void(std::size_t, const char*, Tensor&)>& fn) {
  visit_trainable(params, fn);
}

void for_each_trainable(const ModelParams& params,
                        const std::function<void(std::size_t, const char*, const Tensor&)>& fn) {
  visit_trainable(params, fn);
}

std::size_t trainable_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_trainable(params, [&](std::size_t, const char*, const Tensor& t) { n += t.size(); });
  return n;
}

void softmax_rows(Tensor& t) {
  const std::size_t m = t.rows();
  const std::size_t n = t.cols();
  for (std::size_t i = 0; i < m; ++i) {
    auto row = t.row(i);
    double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
  }
}

ForwardResult forward(const ModelSpec& spec, const ModelParams& params, const Tensor& batch, Mode mode) {
  const auto dims = spec.output_dims();
  if (params.layers.size() != spec.layers.size()) throw InvariantError("parameters do not match the model spec");
  if (batch.rank() != 2 || batch.cols() != spec.input_dim()) {
    throw InvariantError("input batch has width " + std::to_string(batch.cols()) + ", model expects " +
                         std::to_string(spec.input_dim()));
  }
  const std::size_t m = batch.rows();
  if (m == 0) throw InvariantError("empty input batch");

  ForwardResult out;
  out.cache.resize(spec.layers.size());
  Tensor x = batch;
  std::size_t in = spec.input_dim();
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    const LayerParams& p = params.layers[li];
    LayerCache& c = out.cache[li];
    const std::size_t width = dims[li];
    Tensor y = Tensor::matrix(m, width);
    switch (l.kind) {
      case LayerKind::Conv: {
        const std::size_t rows = spec.input_rows, cols = spec.input_cols;
        const std::size_t kw = l.kernel_cols, positions = cols - kw + 1, patch = rows * kw;
        c.patches = Tensor::matrix(m * positions, patch);
        for (std::size_t b = 0; b < m; ++b) {
          for (std::size_t pos = 0; pos < positions; ++pos) {
            double* dst = c.patches.data() + (b * positions + pos) * patch;
            for (std::size_t r = 0; r < rows; ++r) {
              const double* src = x.data() + b * in + r * cols + pos;
              std::copy(src, src + kw, dst + r * kw);
            }
          }
        }
        Tensor z = Tensor::matrix(m * positions, l.units);
        k::matmul_nt(c.patches.values(), p.weight.values(), z.values(), m * positions, patch, l.units);
        k::add_row_bias(z.values(), p.bias.values(), m * positions, l.units);
        for (std::size_t b = 0; b < m; ++b) {
          for (std::size_t pos = 0; pos < positions; ++pos) {
            for (std::size_t f = 0; f < l.units; ++f) {
              y.at(b, f * positions + pos) = z.at(b * positions + pos, f);
            }
          }
        }
        break;
      }
      case LayerKind::Dense:
      case LayerKind::Softmax:
        k::matmul(x.values(), p.weight.values(), y.values(), m, in, width);
        k::add_row_bias(y.values(), p.bias.values(), m, width);
        break;
      case LayerKind::BatchNorm:
        if (mode == Mode::Train) {
          c.xhat = Tensor::matrix(m, width);
          c.batch_mean.assign(width, 0.0);
          c.batch_var.assign(width, 0.0);
          c.inv_std.assign(width, 0.0);
          k::batchnorm_train(x.values(), p.gamma.values(), p.beta.values(), l.eps, m, width, y.values(),
                             c.xhat.values(), c.batch_mean, c.batch_var, c.inv_std);
        } else {
          k::batchnorm_infer(x.values(), p.gamma.values(), p.beta.values(), p.running_mean.values(),
                             p.running_var.values(), l.eps, m, width, y.values());
        }
        break;
      case LayerKind::Tanh:
        k::tanh_forward(x.values(), y.values());
        break;
    }
    c.input = std::move(x);
    c.output = y;
    if (!c.output.all_finite()) {
      throw InvariantError("non-finite activation in layer " + std::to_string(li) + " (" + to_string(l.kind) + ")");
    }
    x = std::move(y);
    in = width;
  }
  out.features = out.cache[spec.feature_layer].output;
  out.logits = out.cache.back().output;
  out.probs = out.logits;
  softmax_rows(out.probs);
  return out;
}

LossResult cross_entropy(const Tensor& probs, std::span<const int> labels) {
  const std::size_t m = probs.rows();
  const std::size_t n = probs.cols();
  if (labels.size() != m) throw InvariantError("label count does not match batch size");
  LossResult r;
  r.grad_logits = probs;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto label = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || label >= n) throw InvariantError("label out of range");
    r.loss -= std::log(std::max(probs.at(i, label), 1e-12));
    r.grad_logits.at(i, label) -= 1.0;
  }
  r.loss *= inv_m;
  for (double& g : r.grad_logits.values()) g *= inv_m;
  return r;
}

ModelParams backward(const ModelSpec& spec, const ModelParams& params, const ForwardResult& fwd,
                     const Tensor& grad_logits) {
  const auto dims = spec.output_dims();
  ModelParams grads;
  grads.layers.resize(spec.layers.size());
  const std::size_t m = grad_logits.rows();
  Tensor g = grad_logits;
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const LayerSpec& l = spec.layers[li];
    const LayerParams& p = params.layers[li];
    const LayerCache& c = fwd.cache[li];
    LayerParams& d = grads.layers[li];
    const std::size_t width = dims[li];
    const std::size_t in = li == 0 ? spec.input_dim() : dims[li - 1];
    const bool need_input_grad = li > 0;
    Tensor gin;
    switch (l.kind) {
      case LayerKind::Conv: {
        const std::size_t kw = l.kernel_cols, positions = spec.input_cols - kw + 1, patch = spec.input_rows * kw;
        Tensor dz = Tensor::matrix(m * positions, l.units);
        for (std::size_t b = 0; b < m; ++b) {
          for (std::size_t pos = 0; pos < positions; ++pos) {
            for (std::size_t f = 0; f < l.units; ++f) {
              dz.at(b * positions + pos, f) = g.at(b, f * positions + pos);
            }
          }
        }
        d.weight = Tensor(p.weight.shape());
        d.bias = Tensor(p.bias.shape());
        k::matmul_tn(dz.values(), c.patches.values(), d.weight.values(), l.units, m * positions, patch);
        k::column_sums(dz.values(), d.bias.values(), m * positions, l.units);
        break;
      }
      case LayerKind::Dense:
      case LayerKind::Softmax:
        d.weight = Tensor(p.weight.shape());
        d.bias = Tensor(p.bias.shape());
        k::matmul_tn(c.input.values(), g.values(), d.weight.values(), in, m, width);
        k::column_sums(g.values(), d.bias.values(), m, width);
        if (need_input_grad) {
          gin = Tensor::matrix(m, in);
          k::matmul_nt(g.values(), p.weight.values(), gin.values(), m, width, in);
        }
        break;
      case LayerKind::BatchNorm:
        if (c.xhat.empty()) throw InvariantError("backward needs a train-mode forward pass");
        d.gamma = Tensor(p.gamma.shape());
        d.beta = Tensor(p.beta.shape());
        gin = Tensor::matrix(m, in);
        k::batchnorm_backward(g.values(), c.xhat.values(), p.gamma.values(), c.inv_std, m, width, gin.values(),
                              d.gamma.values(), d.beta.values());
        break;
      case LayerKind::Tanh:
        gin = Tensor::matrix(m, in);
        k::tanh_backward(g.values(), c.output.values(), gin.values());
        break;
    }
    if (!need_input_grad) break;
    g = std::move(gin);
  }
  return grads;
}

double relative_error(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradientCheck gradient_check(const ModelSpec& spec, const ModelParams& params, const Tensor& batch,
                             std::span<const int> labels, double step, std::size_t per_tensor_limit,
                             std::uint64_t seed) {
  auto loss_at = [&](const ModelParams& p) {
    return cross_entropy(forward(spec, p, batch, Mode::Train).probs, labels).loss;
  };
  ForwardResult fwd = forward(spec, params, batch, Mode::Train);
  ModelParams grads = backward(spec, params, fwd, cross_entropy(fwd.probs, labels).grad_logits);

  ModelParams probe = params;
  GradientCheck result;
  Rng rng(seed);
  for_each_trainable(probe, [&](std::size_t layer, const char* name, Tensor& t) {
    const Tensor* analytic = nullptr;
    for_each_trainable(grads, [&](std::size_t gl, const char* gname, const Tensor& gt) {
      if (gl == layer && std::string_view(gname) == name) analytic = &gt;
    });
    if (analytic == nullptr) throw InvariantError("missing gradient tensor");
    std::vector<std::size_t> indices;
    if (t.size() <= per_tensor_limit) {
      indices.resize(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) indices[i] = i;
    } else {
      for (std::size_t i = 0; i < per_tensor_limit; ++i) indices.push_back(rng.below(t.size()));
    }
    for (std::size_t idx : indices) {
      const double original = t[idx];
      t[idx] = original + step;
      const double up = loss_at(probe);
      t[idx] = original - step;
      const double down = loss_at(probe);
      t[idx] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error((*analytic)[idx], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst = std::to_string(layer) + "/" + name + "[" + std::to_string(idx) + "]";
      }
    }
  });
  return result;
}

}  // namespace lowrate::nn
