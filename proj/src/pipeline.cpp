#include "lowrate/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lowrate/common.hpp"

namespace lowrate::pipeline {

namespace {

constexpr std::uint64_t kPartitionStream = 0x70617274;

std::uint64_t stage_seed(std::uint64_t seed, ModelKind kind) {
  return derive_seed(seed, {static_cast<std::uint64_t>(kind) + 1});
}

std::vector<int> labels_of(std::span<const AppRecord* const> records) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const AppRecord* r : records) labels.push_back(r->label);
  return labels;
}

void require_trainable(std::span<const int> labels, std::size_t classes, const std::string& what) {
  if (labels.empty()) throw InputError(what + ": no training records");
  std::set<int> seen;
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw InputError(what + ": label " + std::to_string(l) + " outside 0.." + std::to_string(classes - 1));
    }
    seen.insert(l);
  }
  if (seen.size() < 2) throw InputError(what + ": training set has a single class");
}

std::vector<nn::LayerSpec> hidden_stack(std::span<const std::size_t> widths) {
  std::vector<nn::LayerSpec> layers;
  for (std::size_t w : widths) {
    layers.push_back(nn::LayerSpec::dense(w));
    layers.push_back(nn::LayerSpec::batchnorm());
    layers.push_back(nn::LayerSpec::tanh());
  }
  return layers;
}

nn::ModelSpec conv_model(std::size_t rows, std::size_t types, std::span<const std::size_t> dense,
                         const Architecture& arch) {
  nn::ModelSpec spec;
  spec.input_rows = rows;
  spec.input_cols = padded_width(types, arch);
  spec.layers = {nn::LayerSpec::conv(arch.filters, rows, arch.filter_width), nn::LayerSpec::batchnorm(),
                 nn::LayerSpec::tanh()};
  for (auto& l : hidden_stack(dense)) spec.layers.push_back(l);
  spec.feature_layer = spec.layers.size() - 1;
  spec.layers.push_back(nn::LayerSpec::softmax(arch.classes));
  return spec;
}

nn::ModelSpec dense_model(std::size_t inputs, std::span<const std::size_t> dense, std::size_t classes) {
  nn::ModelSpec spec;
  spec.input_rows = 1;
  spec.input_cols = inputs;
  spec.layers = hidden_stack(dense);
  spec.feature_layer = spec.layers.size() - 1;
  spec.layers.push_back(nn::LayerSpec::softmax(classes));
  return spec;
}

std::size_t channel_width(ModelKind kind, const AppRecord& r) {
  return kind == ModelKind::Ui ? r.layout.size() : r.semantic.size();
}

}  // namespace

int label_for_stars(double stars, double threshold) { return stars < threshold ? kLow : kNotLow; }

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Exec: return "exec";
    case ModelKind::Ui: return "ui";
    case ModelKind::Fusion: return "fusion";
    case ModelKind::BowDense: return "bow-dense";
    case ModelKind::BowConv: return "bow-conv";
  }
  return "?";
}

std::size_t padded_width(std::size_t types, const Architecture& arch) {
  return std::max(types, arch.filter_width);
}

nn::ModelSpec model_spec(ModelKind kind, std::size_t types, const Architecture& arch) {
  nn::ModelSpec spec;
  switch (kind) {
    case ModelKind::Exec: spec = conv_model(3, types, arch.exec_dense, arch); break;
    case ModelKind::Ui: spec = conv_model(2, types, arch.ui_dense, arch); break;
    case ModelKind::BowConv: spec = conv_model(1, types, arch.bow_conv_dense, arch); break;
    case ModelKind::BowDense: spec = dense_model(types, arch.bow_dense, arch.classes); break;
    case ModelKind::Fusion: {
      const std::size_t exec_dim = arch.exec_dense.empty() ? arch.filters : arch.exec_dense.back();
      const std::size_t ui_dim = arch.ui_dense.empty() ? arch.filters : arch.ui_dense.back();
      spec = dense_model(exec_dim + ui_dim, arch.fusion_dense, 2);
      break;
    }
  }
  spec.validate();
  return spec;
}

nn::Tensor model_inputs(ModelKind kind, std::span<const AppRecord* const> records, const nn::ModelSpec& spec) {
  if (kind == ModelKind::Fusion) throw InvariantError("fusion inputs come from extracted features");
  const std::size_t width = spec.input_cols;
  nn::Tensor x = nn::Tensor::matrix(records.size(), spec.input_dim());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const AppRecord& r = *records[i];
    const std::size_t types = channel_width(kind, r);
    if (types > width || (kind == ModelKind::BowDense && types != width)) {
      throw InputError("record " + r.id + " has " + std::to_string(types) + " types; model expects " +
                       std::to_string(width));
    }
    auto row = x.row(i);
    if (kind == ModelKind::Ui) {
      const auto slots = r.layout.slots();
      for (std::size_t k = 0; k < slots.size(); ++k) {
        row[k] = static_cast<double>(slots[k].n);
        row[width + k] = slots[k].d;
      }
    } else {
      const auto slots = r.semantic.slots();
      for (std::size_t k = 0; k < slots.size(); ++k) {
        row[k] = static_cast<double>(slots[k].f);
        if (kind == ModelKind::Exec) {
          row[width + k] = slots[k].l;
          row[2 * width + k] = slots[k].b;
        }
      }
    }
  }
  return x;
}

void LeakageAudit::begin_round(std::size_t repeat, std::size_t fold, std::span<const std::string> held_out) {
  ++rounds_;
  round_ = "repeat " + std::to_string(repeat) + " fold " + std::to_string(fold);
  held_out_ = std::set<std::string>(held_out.begin(), held_out.end());
}

void LeakageAudit::touch(const std::string& stage, std::span<const AppRecord* const> records) {
  for (const AppRecord* r : records) {
    ++touches_;
    if (held_out_.count(r->id) != 0) violations_.push_back(round_ + ": " + stage + " consumed held-out " + r->id);
  }
}

TrainedModel pretrain(ModelKind kind, std::span<const AppRecord* const> records, const Hyper& hyper,
                      std::uint64_t seed, LeakageAudit* audit) {
  if (kind == ModelKind::Fusion) throw InvariantError("use train_fusion for the fusion model");
  const std::string what = "pretrain " + to_string(kind);
  if (records.empty()) throw InputError(what + ": no training records");
  const std::vector<int> labels = labels_of(records);
  require_trainable(labels, hyper.arch.classes, what);
  if (audit != nullptr) audit->touch(what, records);

  TrainedModel model;
  model.kind = kind;
  model.spec = model_spec(kind, channel_width(kind, *records.front()), hyper.arch);
  nn::TrainConfig config = hyper.train;
  config.seed = seed;
  nn::TrainResult fit = nn::train(model.spec, model_inputs(kind, records, model.spec), labels, config);
  model.params = std::move(fit.params);
  model.epoch_loss = std::move(fit.epoch_loss);
  return model;
}

nn::Tensor extract_features(const TrainedModel& model, std::span<const AppRecord* const> records) {
  return nn::infer(model.spec, model.params, model_inputs(model.kind, records, model.spec)).features;
}

nn::Tensor predict_probs(const TrainedModel& model, std::span<const AppRecord* const> records) {
  return nn::infer(model.spec, model.params, model_inputs(model.kind, records, model.spec)).probs;
}

nn::Tensor fusion_inputs(const nn::Tensor& exec_features, const nn::Tensor& ui_features) {
  if (exec_features.rows() != ui_features.rows()) {
    throw InputError("fusion: " + std::to_string(exec_features.rows()) + " exec feature rows vs " +
                     std::to_string(ui_features.rows()) + " ui feature rows");
  }
  const std::size_t a = exec_features.cols(), b = ui_features.cols();
  nn::Tensor x = nn::Tensor::matrix(exec_features.rows(), a + b);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    std::copy_n(exec_features.row(i).begin(), a, row.begin());
    std::copy_n(ui_features.row(i).begin(), b, row.begin() + static_cast<std::ptrdiff_t>(a));
  }
  return x;
}

TrainedModel train_fusion(const nn::Tensor& exec_features, const nn::Tensor& ui_features,
                          std::span<const int> labels, const Hyper& hyper, std::uint64_t seed) {
  require_trainable(labels, 2, "train fusion");
  nn::Tensor x = fusion_inputs(exec_features, ui_features);
  TrainedModel model;
  model.kind = ModelKind::Fusion;
  model.spec = model_spec(ModelKind::Fusion, 0, hyper.arch);
  if (x.cols() != model.spec.input_cols) {
    throw InputError("fusion: input dimension " + std::to_string(x.cols()) + ", expected " +
                     std::to_string(model.spec.input_cols));
  }
  if (labels.size() != x.rows()) throw InputError("fusion: label count does not match feature rows");
  nn::TrainConfig config = hyper.train;
  config.seed = seed;
  nn::TrainResult fit = nn::train(model.spec, x, labels, config);
  model.params = std::move(fit.params);
  model.epoch_loss = std::move(fit.epoch_loss);
  return model;
}

ModelBundle train_bundle(std::span<const AppRecord* const> records, const Hyper& hyper, std::uint64_t seed,
                         LeakageAudit* audit) {
  ModelBundle bundle;
  bundle.exec = pretrain(ModelKind::Exec, records, hyper, stage_seed(seed, ModelKind::Exec), audit);
  bundle.ui = pretrain(ModelKind::Ui, records, hyper, stage_seed(seed, ModelKind::Ui), audit);
  if (audit != nullptr) audit->touch("train fusion", records);
  bundle.fusion = train_fusion(extract_features(bundle.exec, records), extract_features(bundle.ui, records),
                               labels_of(records), hyper, stage_seed(seed, ModelKind::Fusion));
  return bundle;
}

namespace {

std::vector<Prediction> argmax_rows(const nn::Tensor& probs) {
  std::vector<Prediction> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto p = probs.row(i);
    out[i].probs.assign(p.begin(), p.end());
    out[i].label = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }
  return out;
}

}  // namespace

std::vector<Prediction> predict(const ModelBundle& bundle, std::span<const AppRecord* const> records) {
  nn::Tensor x = fusion_inputs(extract_features(bundle.exec, records), extract_features(bundle.ui, records));
  return argmax_rows(nn::infer(bundle.fusion.spec, bundle.fusion.params, x).probs);
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write model file " + path.string());
  nn::save_model(os, model.spec, model.params);
  if (!os) throw InputError("failed writing model file " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path, ModelKind kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read model file " + path.string());
  TrainedModel model;
  model.kind = kind;
  nn::load_model(is, model.spec, model.params, path.string());
  return model;
}

void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create model directory " + dir.string() + ": " + ec.message());
  save_model(dir / "exec.model", bundle.exec);
  save_model(dir / "ui.model", bundle.ui);
  save_model(dir / "fusion.model", bundle.fusion);
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  ModelBundle bundle;
  bundle.exec = load_model(dir / "exec.model", ModelKind::Exec);
  bundle.ui = load_model(dir / "ui.model", ModelKind::Ui);
  bundle.fusion = load_model(dir / "fusion.model", ModelKind::Fusion);
  const std::size_t fused = bundle.exec.spec.feature_dim() + bundle.ui.spec.feature_dim();
  if (bundle.fusion.spec.input_dim() != fused) {
    throw InputError("model bundle " + dir.string() + ": fusion input " +
                     std::to_string(bundle.fusion.spec.input_dim()) + " does not match features " +
                     std::to_string(fused));
  }
  return bundle;
}

std::string to_string(EvalConfig config) {
  switch (config) {
    case EvalConfig::Full: return "full";
    case EvalConfig::ExecOnly: return "exec-only";
    case EvalConfig::UiOnly: return "ui-only";
    case EvalConfig::BowDense: return "bow-dense";
    case EvalConfig::BowConv: return "bow-conv";
  }
  return "?";
}

EvalConfig parse_eval_config(std::string_view name) {
  for (EvalConfig c : {EvalConfig::Full, EvalConfig::ExecOnly, EvalConfig::UiOnly, EvalConfig::BowDense,
                       EvalConfig::BowConv}) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorKind::Usage, "unknown evaluation config '" + std::string(name) + "'");
}

std::vector<EvalReport> kfold_evaluate(std::span<const AppRecord> records, std::span<const EvalConfig> configs,
                                       const EvalOptions& options, LeakageAudit* audit) {
  if (options.k < 2) throw InputError("k-fold evaluation needs k >= 2");
  if (records.size() < options.k) {
    throw InputError("k-fold evaluation needs at least k=" + std::to_string(options.k) + " records, got " +
                     std::to_string(records.size()));
  }
  std::set<std::string> ids;
  for (const AppRecord& r : records) {
    if (!ids.insert(r.id).second) throw InputError("duplicate record id " + r.id);
  }

  auto wants = [&](EvalConfig c) { return std::find(configs.begin(), configs.end(), c) != configs.end(); };
  const bool need_exec = wants(EvalConfig::Full) || wants(EvalConfig::ExecOnly);
  const bool need_ui = wants(EvalConfig::Full) || wants(EvalConfig::UiOnly);

  std::vector<EvalReport> reports(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    reports[c].config = configs[c];
    reports[c].records = records.size();
    reports[c].k = options.k;
    reports[c].repeats = options.repeats;
    reports[c].seed = options.seed;
  }

  for (std::size_t repeat = 0; repeat < options.repeats; ++repeat) {
    std::vector<std::size_t> perm(records.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(options.seed, {repeat, kPartitionStream}));
    rng.shuffle(perm);
    const auto folds = partition_folds(perm, options.k);

    for (std::size_t fold = 0; fold < options.k; ++fold) {
      std::vector<const AppRecord*> train, test;
      std::vector<char> held(records.size(), 0);
      for (std::size_t i : folds[fold]) held[i] = 1;
      for (std::size_t i = 0; i < records.size(); ++i) (held[i] ? test : train).push_back(&records[i]);
      if (audit != nullptr) {
        std::vector<std::string> held_ids;
        for (const AppRecord* r : test) held_ids.push_back(r->id);
        audit->begin_round(repeat, fold, held_ids);
      }
      const std::vector<int> truth = labels_of(test);
      const std::uint64_t round_seed = derive_seed(options.seed, {repeat, fold});

      TrainedModel exec, ui;
      if (need_exec) exec = pretrain(ModelKind::Exec, train, options.hyper, stage_seed(round_seed, ModelKind::Exec), audit);
      if (need_ui) ui = pretrain(ModelKind::Ui, train, options.hyper, stage_seed(round_seed, ModelKind::Ui), audit);

      for (std::size_t c = 0; c < configs.size(); ++c) {
        std::vector<Prediction> pred;
        switch (configs[c]) {
          case EvalConfig::Full: {
            if (audit != nullptr) audit->touch("train fusion", train);
            ModelBundle bundle;
            bundle.exec = exec;
            bundle.ui = ui;
            bundle.fusion = train_fusion(extract_features(exec, train), extract_features(ui, train), labels_of(train),
                                         options.hyper, stage_seed(round_seed, ModelKind::Fusion));
            pred = predict(bundle, test);
            break;
          }
          case EvalConfig::ExecOnly: pred = argmax_rows(predict_probs(exec, test)); break;
          case EvalConfig::UiOnly: pred = argmax_rows(predict_probs(ui, test)); break;
          case EvalConfig::BowDense:
          case EvalConfig::BowConv: {
            const ModelKind kind = configs[c] == EvalConfig::BowDense ? ModelKind::BowDense : ModelKind::BowConv;
            TrainedModel bow = pretrain(kind, train, options.hyper, stage_seed(round_seed, kind), audit);
            pred = argmax_rows(predict_probs(bow, test));
            break;
          }
        }
        std::vector<int> labels;
        for (const Prediction& p : pred) labels.push_back(p.label);
        FoldResult result;
        result.repeat = repeat;
        result.fold = fold;
        result.confusion = confusion(labels, truth);
        result.metrics = metrics(result.confusion);
        reports[c].folds.push_back(result);
      }
    }
  }
  for (EvalReport& r : reports) summarize(r);
  return reports;
}

EvalReport kfold_evaluate(std::span<const AppRecord> records, EvalConfig config, const EvalOptions& options,
                          LeakageAudit* audit) {
  const EvalConfig configs[] = {config};
  return kfold_evaluate(records, configs, options, audit).front();
}

void summarize(EvalReport& report) {
  std::vector<double> acc, prec, rec;
  for (const FoldResult& f : report.folds) {
    acc.push_back(f.metrics.accuracy);
    prec.push_back(f.metrics.precision);
    rec.push_back(f.metrics.recall);
  }
  report.accuracy = mean_std(acc);
  report.precision = mean_std(prec);
  report.recall = mean_std(rec);
}

std::string render_report(const EvalReport& report) {
  std::ostringstream os;
  os << "lowrate-report 1\n";
  os << "config " << to_string(report.config) << "\n";
  os << "records " << report.records << "\n";
  os << "k " << report.k << "\n";
  os << "repeats " << report.repeats << "\n";
  os << "seed " << report.seed << "\n";
  for (const FoldResult& f : report.folds) {
    os << "fold " << f.repeat << " " << f.fold << " tp " << f.confusion.tp << " fp " << f.confusion.fp << " fn "
       << f.confusion.fn << " tn " << f.confusion.tn << " accuracy " << fixed9(f.metrics.accuracy) << " precision "
       << fixed9(f.metrics.precision) << " recall " << fixed9(f.metrics.recall) << "\n";
  }
  auto line = [&](const char* name, const MeanStd& m) {
    os << name << " mean " << fixed9(m.mean) << " stddev " << fixed9(m.stddev) << "\n";
  };
  line("accuracy", report.accuracy);
  line("precision", report.precision);
  line("recall", report.recall);
  return os.str();
}

std::string render_table(const EvalReport& report) {
  std::ostringstream os;
  os << "metric\tmean\tstddev\n";
  os << "accuracy\t" << fixed9(report.accuracy.mean) << "\t" << fixed9(report.accuracy.stddev) << "\n";
  os << "precision\t" << fixed9(report.precision.mean) << "\t" << fixed9(report.precision.stddev) << "\n";
  os << "recall\t" << fixed9(report.recall.mean) << "\t" << fixed9(report.recall.stddev) << "\n";
  return os.str();
}

}  // namespace lowrate::pipeline
