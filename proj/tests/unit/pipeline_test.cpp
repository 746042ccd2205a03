#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "lowrate/corpus.hpp"
#include "lowrate/metrics.hpp"
#include "lowrate/pipeline.hpp"
#include "test_support.hpp"

namespace lowrate::pipeline {
namespace {

Hyper small_hyper() {
  Hyper h;
  h.arch.filters = 3;
  h.arch.exec_dense = {16, 8};
  h.arch.ui_dense = {8};
  h.arch.fusion_dense = {8, 4};
  h.arch.bow_dense = {16, 8};
  h.arch.bow_conv_dense = {16, 8};
  h.train.epochs = 3;
  h.train.batch_size = 16;
  return h;
}

const std::vector<AppRecord>& small_corpus() {
  static const std::vector<AppRecord> records = [] {
    corpus::CorpusSpec spec;
    spec.apps = 60;
    spec.seed = 3;
    return corpus::generate_records(spec);
  }();
  return records;
}

std::vector<const AppRecord*> pointers(const std::vector<AppRecord>& records) {
  std::vector<const AppRecord*> out;
  for (const AppRecord& r : records) out.push_back(&r);
  return out;
}

TEST(Metrics, WorkedConfusion) {
  // 3 TP, 1 FP, 0 FN, 6 TN
  std::vector<int> pred = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  std::vector<int> act = {0, 0, 0, 1, 1, 1, 1, 1, 1, 1};
  Confusion c = confusion(pred, act);
  EXPECT_EQ(c, (Confusion{3, 1, 0, 6}));
  Metrics m = metrics(c);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.9);
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
}

TEST(Metrics, PerfectAndDegenerateClassifiers) {
  std::vector<int> labels = {0, 1, 0, 1, 1};
  Metrics perfect = metrics(confusion(labels, labels));
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);

  std::vector<int> never_low(5, kNotLow);
  Metrics none = metrics(confusion(never_low, labels));
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_DOUBLE_EQ(none.accuracy, 0.6);

  EXPECT_THROW(confusion(std::vector<int>{0}, std::vector<int>{0, 1}), InvariantError);
}

TEST(Metrics, PopulationStddev) {
  std::vector<double> v = {2, 4, 4, 4, 5, 5, 7, 9};
  MeanStd ms = mean_std(v);
  EXPECT_DOUBLE_EQ(ms.mean, 5.0);
  EXPECT_DOUBLE_EQ(ms.stddev, 2.0);
}

TEST(Metrics, FoldPartitionProperty) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = rng.between(2, 12);
    const std::size_t n = rng.between(k, 300);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    auto folds = partition_folds(perm, k);
    ASSERT_EQ(folds.size(), k);
    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      for (std::size_t i : f) ++seen[i];
    }
    EXPECT_LE(hi - lo, 1u);
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
}

TEST(Labels, ThresholdBoundaryIsNotLow) {
  EXPECT_EQ(label_for_stars(2.99), kLow);
  EXPECT_EQ(label_for_stars(3.0), kNotLow);
  EXPECT_EQ(label_for_stars(3.01), kNotLow);
  EXPECT_EQ(label_for_stars(1.0), kLow);
  EXPECT_EQ(label_for_stars(3.5, 4.0), kLow);
}

TEST(Architecture, SpecsMatchLayerStacks) {
  Architecture a;
  nn::ModelSpec exec = model_spec(ModelKind::Exec, 30, a);
  EXPECT_EQ(exec.input_rows, 3u);
  EXPECT_EQ(exec.input_cols, 30u);
  EXPECT_EQ(exec.layers.front().kind, nn::LayerKind::Conv);
  EXPECT_EQ(exec.layers.front().kernel_rows, 3u);
  EXPECT_EQ(exec.feature_dim(), 50u);
  EXPECT_EQ(exec.classes(), 2u);
  nn::ModelSpec ui = model_spec(ModelKind::Ui, 7, a);
  EXPECT_EQ(ui.input_rows, 2u);
  EXPECT_EQ(ui.input_cols, 20u);
  EXPECT_EQ(ui.feature_dim(), 50u);
  nn::ModelSpec fusion = model_spec(ModelKind::Fusion, 0, a);
  EXPECT_EQ(fusion.input_dim(), 100u);
  EXPECT_EQ(fusion.layers.back().kind, nn::LayerKind::Softmax);
  nn::ModelSpec bow = model_spec(ModelKind::BowDense, 30, a);
  EXPECT_EQ(bow.input_dim(), 30u);
  EXPECT_EQ(padded_width(5, a), 20u);
  EXPECT_EQ(padded_width(25, a), 25u);
}

TEST(Inputs, ExecRowsAreFrequencyDepthBranch) {
  const auto& recs = small_corpus();
  auto ptrs = pointers(recs);
  std::span<const AppRecord* const> one(ptrs.data(), 1);
  const std::size_t n = recs[0].semantic.size();
  nn::ModelSpec spec = model_spec(ModelKind::Exec, n, Architecture{});
  nn::Tensor x = model_inputs(ModelKind::Exec, one, spec);
  const auto slots = recs[0].semantic.slots();
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_EQ(x.at(0, k), static_cast<double>(slots[k].f));
    EXPECT_EQ(x.at(0, spec.input_cols + k), slots[k].l);
    EXPECT_EQ(x.at(0, 2 * spec.input_cols + k), slots[k].b);
  }
}

TEST(Pretrain, RejectsEmptyAndSingleClass) {
  std::vector<const AppRecord*> none;
  EXPECT_THROW(pretrain(ModelKind::Exec, none, small_hyper(), 1), InputError);
  std::vector<const AppRecord*> one_class;
  for (const AppRecord& r : small_corpus()) {
    if (r.label == kLow) one_class.push_back(&r);
  }
  ASSERT_FALSE(one_class.empty());
  EXPECT_THROW(pretrain(ModelKind::Exec, one_class, small_hyper(), 1), InputError);
}

TEST(Fusion, RejectsDimensionMismatch) {
  nn::Tensor a = nn::Tensor::matrix(4, 8), b = nn::Tensor::matrix(3, 8);
  std::vector<int> labels = {0, 1, 0, 1};
  EXPECT_THROW(train_fusion(a, b, labels, small_hyper(), 1), InputError);
  nn::Tensor c = nn::Tensor::matrix(4, 5);
  EXPECT_THROW(train_fusion(a, c, labels, small_hyper(), 1), InputError);
}

TEST(Bundle, FeaturesAreBoundedAndBatchIndependent) {
  auto ptrs = pointers(small_corpus());
  ModelBundle b = train_bundle(ptrs, small_hyper(), 11);
  nn::Tensor feats = extract_features(b.exec, ptrs);
  EXPECT_EQ(feats.cols(), 8u);
  for (double v : feats.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  auto all = predict(b, ptrs);
  for (std::size_t i = 0; i < ptrs.size(); i += 7) {
    std::span<const AppRecord* const> one(ptrs.data() + i, 1);
    auto single = predict(b, one);
    EXPECT_EQ(single[0].probs, all[i].probs);
    EXPECT_EQ(single[0].label, all[i].label);
    EXPECT_NEAR(all[i].probs[0] + all[i].probs[1], 1.0, 1e-12);
  }
}

TEST(Bundle, SaveLoadRoundTrip) {
  auto ptrs = pointers(small_corpus());
  ModelBundle b = train_bundle(ptrs, small_hyper(), 12);
  const auto dir = lowrate::testing::scratch_dir("bundle_roundtrip");
  save_bundle(dir, b);
  ModelBundle back = load_bundle(dir);
  EXPECT_EQ(back.exec.params, b.exec.params);
  EXPECT_EQ(back.fusion.spec, b.fusion.spec);
  auto p1 = predict(b, ptrs), p2 = predict(back, ptrs);
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(p1[i].probs, p2[i].probs);
}

TEST(Audit, FlagsHeldOutRecordsInTraining) {
  auto ptrs = pointers(small_corpus());
  LeakageAudit audit;
  std::vector<std::string> held = {ptrs[0]->id, ptrs[1]->id};
  audit.begin_round(0, 0, held);
  std::vector<const AppRecord*> clean(ptrs.begin() + 2, ptrs.end());
  audit.touch("clean", clean);
  EXPECT_EQ(audit.violations(), 0u);
  audit.touch("leaky", ptrs);
  EXPECT_EQ(audit.violations(), 2u);
  EXPECT_EQ(audit.touches(), clean.size() + ptrs.size());
}

TEST(Audit, KfoldNeverTrainsOnHeldOut) {
  LeakageAudit audit;
  EvalOptions opt;
  opt.k = 3;
  opt.repeats = 2;
  opt.hyper = small_hyper();
  std::vector<EvalConfig> configs = {EvalConfig::Full, EvalConfig::BowDense};
  auto reports = kfold_evaluate(small_corpus(), configs, opt, &audit);
  EXPECT_EQ(audit.rounds(), 6u);
  // exec, ui, fusion and bow-dense each consume the 40 training records of a round
  EXPECT_EQ(audit.touches(), 6u * 4u * 40u);
  EXPECT_EQ(audit.violations(), 0u);
  ASSERT_EQ(reports.size(), 2u);
  for (const EvalReport& r : reports) {
    EXPECT_EQ(r.folds.size(), 6u);
    std::size_t total = 0;
    for (const FoldResult& f : r.folds) total += f.confusion.total();
    EXPECT_EQ(total, 2 * small_corpus().size());
  }
}

TEST(Kfold, DeterministicAndRendered) {
  EvalOptions opt;
  opt.k = 3;
  opt.repeats = 1;
  opt.hyper = small_hyper();
  EvalReport a = kfold_evaluate(small_corpus(), EvalConfig::ExecOnly, opt);
  EvalReport b = kfold_evaluate(small_corpus(), EvalConfig::ExecOnly, opt);
  EXPECT_EQ(render_report(a), render_report(b));
  const std::string text = render_report(a);
  EXPECT_EQ(text.rfind("lowrate-report 1\n", 0), 0u);
  EXPECT_NE(text.find("config exec-only"), std::string::npos);
  EXPECT_NE(text.find("fold 0 2 tp"), std::string::npos);
  EXPECT_NE(text.find("accuracy mean"), std::string::npos);
  EXPECT_EQ(render_table(a).rfind("metric\tmean\tstddev\n", 0), 0u);
}

TEST(Kfold, RejectsTooFewRecordsAndBadK) {
  EvalOptions opt;
  opt.hyper = small_hyper();
  opt.k = 1;
  EXPECT_THROW(kfold_evaluate(small_corpus(), EvalConfig::Full, opt), InputError);
  opt.k = 100;
  EXPECT_THROW(kfold_evaluate(small_corpus(), EvalConfig::Full, opt), InputError);
}

TEST(Config, NamesRoundTrip) {
  for (EvalConfig c : {EvalConfig::Full, EvalConfig::ExecOnly, EvalConfig::UiOnly, EvalConfig::BowDense,
                       EvalConfig::BowConv}) {
    EXPECT_EQ(parse_eval_config(to_string(c)), c);
  }
  try {
    parse_eval_config("everything");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Usage);
  }
}

}  // namespace
}  // namespace lowrate::pipeline
