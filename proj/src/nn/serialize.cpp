#include <istream>
#include <ostream>
#include <sstream>

#include "lowrate/common.hpp"
#include "lowrate/nn/train.hpp"

namespace lowrate::nn {

namespace {

constexpr std::string_view kMagic = "lowrate-model";
constexpr int kVersion = 1;

void write_tensor(std::ostream& os, std::size_t layer, std::string_view name, const Tensor& t) {
  if (t.empty()) return;
  os << "tensor " << layer << " " << name << " " << t.rank();
  for (std::size_t d : t.shape()) os << " " << d;
  os << "\n";
  std::size_t col = 0;
  for (double v : t.values()) {
    os << (col == 0 ? "" : " ") << exact_decimal(v);
    if (++col == 16) {
      os << "\n";
      col = 0;
    }
  }
  if (col != 0) os << "\n";
}

class Reader {
 public:
  Reader(std::istream& is, std::string_view source) : is_(is), source_(source) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw ParseError(source_, 0, "unexpected end of model file");
    return w;
  }
  void expect(std::string_view w) {
    std::string got = word();
    if (got != w) throw ParseError(source_, 0, "expected '" + std::string(w) + "', found '" + got + "'");
  }
  std::size_t size() {
    std::string w = word();
    try {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(w, &pos);
      if (pos != w.size()) throw std::invalid_argument(w);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ParseError(source_, 0, "expected an unsigned integer, found '" + w + "'");
    }
  }
  double number() {
    std::string w = word();
    try {
      return parse_double(w);
    } catch (const InputError&) {
      throw ParseError(source_, 0, "expected a number, found '" + w + "'");
    }
  }
  std::string_view source() const { return source_; }

 private:
  std::istream& is_;
  std::string_view source_;
};

}  // namespace

void save_model(std::ostream& os, const ModelSpec& spec, const ModelParams& params) {
  spec.validate();
  os << kMagic << " " << kVersion << "\n";
  os << "seed " << params.seed << "\n";
  os << "input " << spec.input_rows << " " << spec.input_cols << "\n";
  os << "feature " << spec.feature_layer << "\n";
  os << "layers " << spec.layers.size() << "\n";
  for (const LayerSpec& l : spec.layers) {
    os << "layer " << to_string(l.kind);
    switch (l.kind) {
      case LayerKind::Conv:
        os << " " << l.units << " " << l.kernel_rows << " " << l.kernel_cols;
        break;
      case LayerKind::Dense:
      case LayerKind::Softmax:
        os << " " << l.units;
        break;
      case LayerKind::BatchNorm:
        os << " " << exact_decimal(l.eps) << " " << exact_decimal(l.momentum);
        break;
      case LayerKind::Tanh:
        break;
    }
    os << "\n";
  }
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const LayerParams& p = params.layers[i];
    write_tensor(os, i, "weight", p.weight);
    write_tensor(os, i, "bias", p.bias);
    write_tensor(os, i, "gamma", p.gamma);
    write_tensor(os, i, "beta", p.beta);
    write_tensor(os, i, "running_mean", p.running_mean);
    write_tensor(os, i, "running_var", p.running_var);
  }
  os << "end\n";
}

void load_model(std::istream& is, ModelSpec& spec, ModelParams& params, std::string_view source) {
  Reader r(is, source);
  r.expect(kMagic);
  if (std::size_t version = r.size(); version != kVersion) {
    throw ParseError(source, 0, "unsupported model format version " + std::to_string(version));
  }
  ModelSpec s;
  ModelParams p;
  r.expect("seed");
  {
    std::string w = r.word();
    try {
      p.seed = std::stoull(w);
    } catch (const std::exception&) {
      throw ParseError(source, 0, "bad seed '" + w + "'");
    }
  }
  r.expect("input");
  s.input_rows = r.size();
  s.input_cols = r.size();
  r.expect("feature");
  s.feature_layer = r.size();
  r.expect("layers");
  const std::size_t count = r.size();
  for (std::size_t i = 0; i < count; ++i) {
    r.expect("layer");
    std::string kind = r.word();
    if (kind == "conv") {
      std::size_t f = r.size(), rows = r.size(), cols = r.size();
      s.layers.push_back(LayerSpec::conv(f, rows, cols));
    } else if (kind == "dense") {
      s.layers.push_back(LayerSpec::dense(r.size()));
    } else if (kind == "softmax") {
      s.layers.push_back(LayerSpec::softmax(r.size()));
    } else if (kind == "batchnorm") {
      double eps = r.number();
      double momentum = r.number();
      s.layers.push_back(LayerSpec::batchnorm(eps, momentum));
    } else if (kind == "tanh") {
      s.layers.push_back(LayerSpec::tanh());
    } else {
      throw ParseError(source, 0, "unknown layer kind '" + kind + "'");
    }
  }
  try {
    s.validate();
  } catch (const InvariantError& e) {
    throw ParseError(source, 0, std::string("invalid model spec: ") + e.what());
  }

  // Shapes come from a fresh init; the file must supply every tensor exactly.
  p.layers = init_params(s, 0).layers;
  std::size_t expected = 0;
  for (const auto& l : p.layers) {
    for (const Tensor* t : {&l.weight, &l.bias, &l.gamma, &l.beta, &l.running_mean, &l.running_var}) {
      expected += t->empty() ? 0 : 1;
    }
  }
  std::size_t seen = 0;
  while (true) {
    std::string w = r.word();
    if (w == "end") break;
    if (w != "tensor") throw ParseError(source, 0, "expected 'tensor' or 'end', found '" + w + "'");
    std::size_t layer = r.size();
    std::string name = r.word();
    std::size_t rank = r.size();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.size();
    if (layer >= p.layers.size()) throw ParseError(source, 0, "tensor for unknown layer " + std::to_string(layer));
    LayerParams& lp = p.layers[layer];
    Tensor* target = name == "weight"         ? &lp.weight
                     : name == "bias"         ? &lp.bias
                     : name == "gamma"        ? &lp.gamma
                     : name == "beta"         ? &lp.beta
                     : name == "running_mean" ? &lp.running_mean
                     : name == "running_var"  ? &lp.running_var
                                              : nullptr;
    if (target == nullptr || target->empty() || target->shape() != shape) {
      throw ParseError(source, 0, "unexpected tensor " + std::to_string(layer) + "/" + name);
    }
    for (double& v : target->values()) v = r.number();
    ++seen;
  }
  if (seen != expected) throw ParseError(source, 0, "model file is missing parameter tensors");
  for (const auto& l : p.layers) {
    for (double v : l.running_var.values()) {
      if (!(v > 0.0)) throw ParseError(source, 0, "running variance must be positive");
    }
  }
  spec = std::move(s);
  params = std::move(p);
}

}  // namespace lowrate::nn
