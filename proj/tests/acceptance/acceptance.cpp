// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "lowrate/bundle.hpp"
#include "lowrate/cfg.hpp"
#include "lowrate/corpus.hpp"
#include "lowrate/layout.hpp"
#include "lowrate/nn/train.hpp"
#include "lowrate/oracle.hpp"
#include "lowrate/pipeline.hpp"
#include "lowrate/semvec.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace lowrate;

namespace {

// Pinned tolerances and budgets.
constexpr double kOracleTolerance = 1e-9;
constexpr double kGradientTolerance = 1e-4;
constexpr double kC1Seconds = 1.0;
constexpr double kC3Seconds = 60.0;
constexpr double kC6Seconds = 30 * 60.0;
constexpr double kC6MinAccuracy = 0.90;
constexpr double kC7Low = 0.4;
constexpr double kC7High = 0.6;
constexpr double kC10Seconds = 1.0;
constexpr std::size_t kGradientSamplesPerTensor = 40;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " C" << id << " " << name << ": " << o.detail << std::endl;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<const pipeline::AppRecord*> pointers(const std::vector<pipeline::AppRecord>& records) {
  std::vector<const pipeline::AppRecord*> out;
  for (const auto& r : records) out.push_back(&r);
  return out;
}

Outcome c1_program_fixture() {
  const auto t0 = Clock::now();
  const fs::path dir = testing::fixture_dir() / "program1";
  const auto vocab = ir::Vocabulary::parse(bundle::read_file(dir / "vocab.txt"));
  const auto ui = layout::UiVocabulary::parse(bundle::read_file(dir / "ui_vocab.txt"));
  const auto app = bundle::load_app(dir, vocab);
  const auto rec = bundle::analyze_app(app, vocab, ui).record;
  const double secs = seconds_since(t0);
  const auto add = rec.semantic[vocab.at("add")];
  bool ok = add.f == 4 && add.l == 1.5 && add.b == 0.25 && secs < kC1Seconds;
  std::size_t nonzero = 0;
  for (const char* name : {"new", "list.add", "add", "cmp", "assign", "println"}) {
    nonzero += rec.semantic[vocab.at(name)].f > 0 ? 1 : 0;
  }
  ok = ok && nonzero == 6;
  return {ok, "add=(" + std::to_string(add.f) + ", " + fmt(add.l) + ", " + fmt(add.b) + ") nonzero types " +
                  std::to_string(nonzero) + "/6 in " + fmt(secs) + "s"};
}

Outcome c2_layout_fixture() {
  const fs::path dir = testing::fixture_dir() / "program1";
  const auto ui = layout::UiVocabulary::parse(bundle::read_file(dir / "ui_vocab.txt"));
  const auto app = bundle::load_app(dir, ir::Vocabulary::parse(bundle::read_file(dir / "vocab.txt")));
  const auto v = layout::layout_vector(app.layouts, ui);
  const auto ll = v[1];
  const auto legacy = v[ui.legacy_slot()];
  const auto custom = v[ui.custom_slot()];
  const bool ok = ll.n == 2 && ll.d == 0.5 && legacy.n == 2 && custom.n == 1;
  return {ok, "LinearLayout=(" + std::to_string(ll.n) + ", " + fmt(ll.d) + ") legacy n=" + std::to_string(legacy.n) +
                  " custom n=" + std::to_string(custom.n)};
}

Outcome c3_oracles() {
  const auto t0 = Clock::now();
  Rng rng(20260301);
  const auto& gv = corpus::default_vocab();
  std::size_t sem_bad = 0, ui_bad = 0;
  std::string first;
  for (int i = 0; i < 200; ++i) {
    const ir::Program p = testing::random_program(rng, 30, 400);
    const auto fast = semvec::analyze_program(p, gv.vocab).vectors.app;
    const auto slow = oracle::oracle_semantic_vector(p, gv.vocab);
    if (auto d = oracle::first_difference(fast, slow, kOracleTolerance)) {
      if (sem_bad++ == 0) first = "program " + std::to_string(i) + ": " + *d;
    }
  }
  for (int i = 0; i < 200; ++i) {
    const auto docs = testing::random_forest(rng);
    const auto fast = layout::layout_vector(docs, gv.ui);
    const auto slow = oracle::oracle_layout_vector(docs, gv.ui);
    if (auto d = oracle::first_difference(fast, slow, kOracleTolerance)) {
      if (ui_bad++ == 0 && first.empty()) first = "forest " + std::to_string(i) + ": " + *d;
    }
  }
  const double secs = seconds_since(t0);
  return {sem_bad == 0 && ui_bad == 0 && secs < kC3Seconds,
          "semantic mismatches " + std::to_string(sem_bad) + "/200, layout mismatches " + std::to_string(ui_bad) +
              "/200 in " + fmt(secs) + "s" + (first.empty() ? "" : " first: " + first)};
}

Outcome c4_dominators() {
  Rng rng(404);
  std::size_t bad = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = rng.between(2, 60);
    const cfg::Digraph g = testing::random_digraph(rng, n, rng.between(0, 2 * n));
    const auto root = static_cast<cfg::NodeId>(rng.below(n));
    const auto exit = static_cast<cfg::NodeId>(rng.below(n));
    if (cfg::immediate_dominators(g, root) != testing::brute_force_idom(g, root)) ++bad;
    if (cfg::immediate_post_dominators(g, exit) != testing::brute_force_idom(g.reversed(), exit)) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " mismatching idom/ipdom trees over 100 graphs"};
}

nn::Tensor random_batch(Rng& rng, std::size_t rows, std::size_t dim, double scale) {
  nn::Tensor t = nn::Tensor::matrix(rows, dim);
  for (double& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

Outcome c5_gradients() {
  using nn::LayerSpec;
  struct Case {
    std::string name;
    nn::ModelSpec spec;
  };
  auto spec = [](std::size_t rows, std::size_t cols, std::vector<LayerSpec> layers, std::size_t feature) {
    nn::ModelSpec s;
    s.input_rows = rows;
    s.input_cols = cols;
    s.layers = std::move(layers);
    s.feature_layer = feature;
    return s;
  };
  pipeline::Architecture arch;
  const std::size_t n = corpus::default_vocab().vocab.size();
  const std::size_t m2 = corpus::default_vocab().ui.slot_count();
  std::vector<Case> cases = {
      {"conv", spec(3, 24, {LayerSpec::conv(4, 3, 20), LayerSpec::softmax(2)}, 0)},
      {"dense", spec(1, 8, {LayerSpec::dense(6), LayerSpec::softmax(2)}, 0)},
      {"batchnorm", spec(1, 8, {LayerSpec::dense(6), LayerSpec::batchnorm(), LayerSpec::softmax(2)}, 1)},
      {"tanh", spec(1, 8, {LayerSpec::dense(6), LayerSpec::tanh(), LayerSpec::softmax(2)}, 1)},
      {"softmax", spec(1, 8, {LayerSpec::tanh(), LayerSpec::softmax(3)}, 0)},
      {"exec", pipeline::model_spec(pipeline::ModelKind::Exec, n, arch)},
      {"ui", pipeline::model_spec(pipeline::ModelKind::Ui, m2, arch)},
      {"fusion", pipeline::model_spec(pipeline::ModelKind::Fusion, 0, arch)},
  };
  Rng rng(55);
  bool ok = true;
  std::string detail;
  for (const Case& c : cases) {
    nn::ModelParams p = nn::init_params(c.spec, 9);
    nn::for_each_trainable(p, [&](std::size_t, const char* name, nn::Tensor& t) {
      if (std::string_view(name) == "gamma" || std::string_view(name) == "beta") {
        for (double& v : t.values()) v += rng.uniform(-0.2, 0.2);
      }
    });
    const nn::Tensor batch = random_batch(rng, 6, c.spec.input_dim(), 2.0);
    std::vector<int> labels(6);
    for (int& l : labels) l = static_cast<int>(rng.below(c.spec.classes()));
    const auto g = nn::gradient_check(c.spec, p, batch, labels, 1e-5, kGradientSamplesPerTensor, 3);
    const bool pass = g.max_relative_error < kGradientTolerance && g.checked > 0;
    ok = ok && pass;
    detail += (detail.empty() ? "" : ", ") + c.name + " " + fmt(g.max_relative_error) + " (" +
              std::to_string(g.checked) + " params)";
  }
  return {ok, "max relative error " + detail};
}

Outcome c6_c8_classification(Outcome& leakage) {
  const auto t0 = Clock::now();
  corpus::CorpusSpec spec;  // 1000 apps, seed 7, default margin
  const fs::path dir = testing::scratch_dir("c6_corpus");
  corpus::gen_corpus(spec, dir);
  const auto index = bundle::load_corpus_index(dir);
  const auto records = bundle::load_records(dir, index);
  pipeline::EvalOptions opt;
  opt.k = 10;
  opt.repeats = 1;
  opt.seed = 7;
  pipeline::LeakageAudit audit;
  const std::vector<pipeline::EvalConfig> configs = {pipeline::EvalConfig::Full, pipeline::EvalConfig::ExecOnly,
                                                     pipeline::EvalConfig::UiOnly};
  const auto reports = pipeline::kfold_evaluate(records, configs, opt, &audit);
  const double secs = seconds_since(t0);

  const double full = reports[0].accuracy.mean, exec = reports[1].accuracy.mean, ui = reports[2].accuracy.mean;
  const bool ok = full >= kC6MinAccuracy && full > exec && exec > ui && secs < kC6Seconds;

  const std::size_t expected_touches = opt.k * 3 * (records.size() - records.size() / opt.k);
  leakage = {audit.violations() == 0 && audit.rounds() == opt.k && audit.touches() == expected_touches,
             std::to_string(audit.violations()) + " violations over " + std::to_string(audit.rounds()) +
                 " rounds and " + std::to_string(audit.touches()) + " training-record touches" +
                 (audit.violations() == 0 ? "" : " first: " + audit.violation_log().front())};
  return {ok, "accuracy full " + fmt(full) + " (precision " + fmt(reports[0].precision.mean) + ", recall " +
                  fmt(reports[0].recall.mean) + "), exec-only " + fmt(exec) + ", ui-only " + fmt(ui) + " in " +
                  fmt(secs) + "s"};
}

Outcome c7_null_signal() {
  corpus::CorpusSpec spec;
  spec.margin = 0.0;
  const auto records = corpus::generate_records(spec);
  pipeline::EvalOptions opt;
  opt.k = 10;
  opt.repeats = 1;
  opt.seed = 7;
  const auto r = pipeline::kfold_evaluate(records, pipeline::EvalConfig::Full, opt);
  const double acc = r.accuracy.mean;
  return {acc >= kC7Low && acc <= kC7High, "margin 0 accuracy " + fmt(acc)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LOWRATE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome c9_determinism() {
  const fs::path dir = testing::scratch_dir("c9");
  const std::string corpus_dir = (dir / "corpus").string();
  if (run_cli("gen-corpus --apps 120 --out " + corpus_dir) != 0) return {false, "gen-corpus failed"};
  const std::string common = "evaluate --seed 7 --corpus " + corpus_dir +
                             " --config full --config bow-dense --folds 3 --repeats 2 --epochs 3 --out ";
  if (run_cli(common + (dir / "a.report").string()) != 0) return {false, "first evaluate failed"};
  if (run_cli(common + (dir / "b.report").string()) != 0) return {false, "second evaluate failed"};
  const std::string a = bundle::read_file(dir / "a.report"), b = bundle::read_file(dir / "b.report");
  const bool reports_equal = !a.empty() && a == b;

  corpus::CorpusSpec small;
  small.seed = 3;
  small.apps = 150;
  const auto records = corpus::generate_records(small);
  pipeline::Hyper hyper;
  hyper.train.epochs = 2;
  const auto ptrs = pointers(records);
  const auto bundle = pipeline::train_bundle(ptrs, hyper, 9);
  pipeline::save_bundle(dir / "models", bundle);
  const auto back = pipeline::load_bundle(dir / "models");
  pipeline::save_bundle(dir / "models2", back);
  bool models_equal = back.exec.params == bundle.exec.params && back.ui.params == bundle.ui.params &&
                      back.fusion.params == bundle.fusion.params && back.exec.spec == bundle.exec.spec;
  for (const char* f : {"exec.model", "ui.model", "fusion.model"}) {
    models_equal = models_equal && bundle::read_file(dir / "models" / f) == bundle::read_file(dir / "models2" / f);
  }
  return {reports_equal && models_equal, std::string("evaluate reports ") +
                                             (reports_equal ? "byte-identical" : "differ") + " (" +
                                             std::to_string(a.size()) + " bytes), model round trip " +
                                             (models_equal ? "bit-exact" : "differs")};
}

Outcome c10_throughput() {
  const auto& gv = corpus::default_vocab();
  corpus::ProgramShape shape;
  shape.methods_min = shape.methods_max = 50;
  shape.method_budget_min = shape.method_budget_max = 200;
  Rng rng(10000);
  ir::Program p = corpus::generate_program(rng, gv, shape, corpus::uniform_exec_profile(gv));
  const std::size_t count = testing::instruction_count(p);
  const auto t0 = Clock::now();
  const auto analysis = semvec::analyze_program(p, gv.vocab);
  const double secs = seconds_since(t0);
  const bool ok = count >= 10000 && p.methods.size() == 50 && secs < kC10Seconds &&
                  analysis.vectors.app.total_frequency() > 0;
  return {ok, std::to_string(p.methods.size()) + " methods, " + std::to_string(count) + " instructions analyzed in " +
                  fmt(secs) + "s"};
}

}  // namespace

int main() {
  report(1, "program fixture semantic vector", c1_program_fixture);
  report(2, "layout fixture vector", c2_layout_fixture);
  report(3, "oracle equivalence", c3_oracles);
  report(4, "dominator trees", c4_dominators);
  report(5, "gradient checks", c5_gradients);
  Outcome leakage{false, "not run"};
  report(6, "planted-signal classification", [&] { return c6_c8_classification(leakage); });
  report(7, "null-signal sanity", c7_null_signal);
  report(8, "no-leakage audit", [&] { return leakage; });
  report(9, "determinism", c9_determinism);
  report(10, "analysis throughput", c10_throughput);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
