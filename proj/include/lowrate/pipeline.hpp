#pragma once
// Two-channel learning pipeline: an executable model over the semantic
// vector, a UI model over the layout vector, and a fusion classifier over
// their concatenated feature layers. Also k-fold evaluation and the baseline
// configurations that reuse the same building blocks.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lowrate/layout.hpp"
#include "lowrate/metrics.hpp"
#include "lowrate/nn/train.hpp"
#include "lowrate/semvec.hpp"

namespace lowrate::pipeline {

inline constexpr int kLow = 0;
inline constexpr int kNotLow = 1;

/// Low iff stars < threshold; the boundary value itself is not-low.
int label_for_stars(double stars, double threshold = 3.0);

struct AppRecord {
  std::string id;
  double stars = 0.0;
  int label = kNotLow;
  semvec::SemanticVector semantic;
  layout::LayoutVector layout;
};

enum class ModelKind { Exec, Ui, Fusion, BowDense, BowConv };
std::string to_string(ModelKind kind);

struct Architecture {
  std::size_t classes = 2;
  std::size_t filters = 10;
  std::size_t filter_width = 20;
  std::vector<std::size_t> exec_dense = {1000, 1000, 50};
  std::vector<std::size_t> ui_dense = {50};
  std::vector<std::size_t> fusion_dense = {100, 20};
  std::vector<std::size_t> bow_dense = {1000, 1000, 1000, 50};
  std::vector<std::size_t> bow_conv_dense = {1000, 1000, 50};
};

struct Hyper {
  Architecture arch;
  nn::TrainConfig train;
};

/// Input width for a conv model over `types` columns: short inputs are zero-padded.
std::size_t padded_width(std::size_t types, const Architecture& arch);

/// `types` is N for exec/bow models and M+2 for the UI model; fusion ignores it.
nn::ModelSpec model_spec(ModelKind kind, std::size_t types, const Architecture& arch);

/// One row per record, laid out as the model's input (rows x width, row-major):
/// exec is [f; l; b], ui is [n; d], bag-of-words is [f].
nn::Tensor model_inputs(ModelKind kind, std::span<const AppRecord* const> records, const nn::ModelSpec& spec);

/// Records which record ids each training stage consumed, so tests can prove
/// that no held-out record reached a fit.
class LeakageAudit {
 public:
  void begin_round(std::size_t repeat, std::size_t fold, std::span<const std::string> held_out);
  void touch(const std::string& stage, std::span<const AppRecord* const> records);
  std::size_t rounds() const { return rounds_; }
  std::size_t touches() const { return touches_; }
  std::size_t violations() const { return violations_.size(); }
  const std::vector<std::string>& violation_log() const { return violations_; }

 private:
  std::size_t rounds_ = 0;
  std::size_t touches_ = 0;
  std::string round_;
  std::set<std::string> held_out_;
  std::vector<std::string> violations_;
};

struct TrainedModel {
  ModelKind kind = ModelKind::Exec;
  nn::ModelSpec spec;
  nn::ModelParams params;
  std::vector<double> epoch_loss;
};

/// Trains a single-channel classifier (exec, ui or a bag-of-words baseline)
/// on the records' own labels.
TrainedModel pretrain(ModelKind kind, std::span<const AppRecord* const> records, const Hyper& hyper,
                      std::uint64_t seed, LeakageAudit* audit = nullptr);

/// Feature-layer activations, one row per record, in infer mode.
nn::Tensor extract_features(const TrainedModel& model, std::span<const AppRecord* const> records);

/// Class probabilities of a single-channel model, one row per record.
nn::Tensor predict_probs(const TrainedModel& model, std::span<const AppRecord* const> records);

/// Concatenates exec and ui feature rows.
nn::Tensor fusion_inputs(const nn::Tensor& exec_features, const nn::Tensor& ui_features);

TrainedModel train_fusion(const nn::Tensor& exec_features, const nn::Tensor& ui_features,
                          std::span<const int> labels, const Hyper& hyper, std::uint64_t seed);

struct ModelBundle {
  TrainedModel exec;
  TrainedModel ui;
  TrainedModel fusion;
};

/// Full three-stage fit. Seeds for the stages derive from `seed`.
ModelBundle train_bundle(std::span<const AppRecord* const> records, const Hyper& hyper, std::uint64_t seed,
                         LeakageAudit* audit = nullptr);

struct Prediction {
  int label = kNotLow;
  std::vector<double> probs;
};

std::vector<Prediction> predict(const ModelBundle& bundle, std::span<const AppRecord* const> records);

/// Models are written as exec.model, ui.model and fusion.model inside `dir`.
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path, ModelKind kind);
void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& dir);

enum class EvalConfig { Full, ExecOnly, UiOnly, BowDense, BowConv };
std::string to_string(EvalConfig config);
EvalConfig parse_eval_config(std::string_view name);

struct EvalOptions {
  std::size_t k = 10;
  std::size_t repeats = 10;
  std::uint64_t seed = 7;
  Hyper hyper;
};

struct FoldResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  Confusion confusion;
  Metrics metrics;
};

struct EvalReport {
  EvalConfig config = EvalConfig::Full;
  std::size_t records = 0;
  std::size_t k = 0;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;
  MeanStd accuracy;
  MeanStd precision;
  MeanStd recall;
};

/// Evaluates several configurations over the same splits. Models shared by
/// configurations (the exec and ui pre-trained models) are fit once per fold.
std::vector<EvalReport> kfold_evaluate(std::span<const AppRecord> records, std::span<const EvalConfig> configs,
                                       const EvalOptions& options, LeakageAudit* audit = nullptr);
EvalReport kfold_evaluate(std::span<const AppRecord> records, EvalConfig config, const EvalOptions& options,
                          LeakageAudit* audit = nullptr);

/// Fills the aggregate fields from `folds`.
void summarize(EvalReport& report);
std::string render_report(const EvalReport& report);
std::string render_table(const EvalReport& report);

}  // namespace lowrate::pipeline
