// lowrate: analyze app bundles, generate corpora, train and evaluate models.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "lowrate/bundle.hpp"
#include "lowrate/cfg.hpp"
#include "lowrate/common.hpp"
#include "lowrate/corpus.hpp"
#include "lowrate/oracle.hpp"
#include "lowrate/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lowrate;

namespace {

struct Globals {
  std::uint64_t seed = 7;
  std::string vocab;
  std::string ui_vocab;
  std::string out;
};

struct Vocabs {
  ir::Vocabulary vocab;
  layout::UiVocabulary ui;
};

/// Explicit flags win, then the vocabularies stored in a corpus, then the built-in ones.
Vocabs resolve_vocabs(const Globals& g, const std::optional<fs::path>& corpus_dir) {
  Vocabs v{corpus::default_vocab().vocab, corpus::default_vocab().ui};
  if (corpus_dir) {
    bundle::Corpus c = bundle::load_corpus_index(*corpus_dir);
    v.vocab = std::move(c.vocab);
    v.ui = std::move(c.ui_vocab);
  }
  if (!g.vocab.empty()) v.vocab = ir::Vocabulary::parse(bundle::read_file(g.vocab), g.vocab);
  if (!g.ui_vocab.empty()) v.ui = layout::UiVocabulary::parse(bundle::read_file(g.ui_vocab), g.ui_vocab);
  return v;
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
  } else {
    bundle::write_file(g.out, text);
  }
}

std::string require_out(const Globals& g, const char* what) {
  if (g.out.empty()) throw Error(ErrorKind::Usage, std::string(what) + " needs --out");
  return g.out;
}

std::vector<pipeline::AppRecord> corpus_records(const Globals& g, const fs::path& dir) {
  bundle::Corpus c = bundle::load_corpus_index(dir);
  Vocabs v = resolve_vocabs(g, dir);
  c.vocab = std::move(v.vocab);
  c.ui_vocab = std::move(v.ui);
  return bundle::load_records(dir, c);
}

std::vector<const pipeline::AppRecord*> pointers(const std::vector<pipeline::AppRecord>& records) {
  std::vector<const pipeline::AppRecord*> out;
  for (const auto& r : records) out.push_back(&r);
  return out;
}

struct HyperFlags {
  std::size_t epochs = 10;
  std::size_t batch = 128;
  double lr = 0.01;
  double momentum = 0.9;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--lr", lr, "Learning rate")->capture_default_str();
    app->add_option("--momentum", momentum, "Momentum")->capture_default_str();
  }
  pipeline::Hyper hyper() const {
    pipeline::Hyper h;
    h.train.epochs = epochs;
    h.train.batch_size = batch;
    h.train.learning_rate = lr;
    h.train.momentum = momentum;
    return h;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Static low-rating app detector: vector extraction, model training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Run seed")->capture_default_str();
  app.add_option("--vocab", g.vocab, "Instruction vocabulary file");
  app.add_option("--ui-vocab", g.ui_vocab, "UI element vocabulary file");
  app.add_option("--out", g.out, "Output path");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Print semantic and layout vectors of app bundles");
  std::vector<std::string> analyze_bundles;
  bool dump_cfg = false;
  analyze->add_option("bundle", analyze_bundles, "App bundle directories")->required();
  analyze->add_flag("--dump-cfg", dump_cfg, "Also print per-method CFG, dominators, depths and branch counts");
  analyze->callback([&] {
    Vocabs v = resolve_vocabs(g, std::nullopt);
    std::vector<pipeline::AppRecord> records;
    std::ostringstream dumps;
    for (const auto& path : analyze_bundles) {
      bundle::AppBundle b = bundle::load_app(path, v.vocab);
      bundle::AppAnalysis a = bundle::analyze_app(b, v.vocab, v.ui);
      for (const auto& w : a.warnings) std::cerr << path << ": warning: " << w << "\n";
      if (dump_cfg) {
        for (std::size_t m = 0; m < b.program.methods.size(); ++m) {
          cfg::dump(dumps, b.program.methods[m].name, cfg::analyze_method(b.program.methods[m]));
        }
      }
      records.push_back(std::move(a.record));
    }
    emit(g, bundle::render_vectors(records) + dumps.str());
  });

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic corpus with a planted class signal");
  corpus::CorpusSpec spec;
  gen->add_option("--apps", spec.apps, "Number of apps")->capture_default_str();
  gen->add_option("--margin", spec.margin, "Class separation; 0 gives identical classes")->capture_default_str();
  gen->add_option("--low-share", spec.low_share, "Probability that an app is low rated")->capture_default_str();
  gen->callback([&] {
    spec.seed = g.seed;
    const auto manifest = corpus::gen_corpus(spec, require_out(g, "gen-corpus"));
    std::size_t low = 0;
    for (const auto& e : manifest) low += e.label == pipeline::kLow ? 1 : 0;
    std::cout << "wrote " << manifest.size() << " apps (" << low << " low) to " << g.out << "\n";
  });

  // pretrain-exec / pretrain-ui
  auto add_pretrain = [&](const char* name, pipeline::ModelKind kind, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    auto corpus_dir = std::make_shared<std::string>();
    auto hf = std::make_shared<HyperFlags>();
    sub->add_option("--corpus", *corpus_dir, "Corpus directory")->required();
    hf->add(sub);
    sub->callback([&, kind, corpus_dir, hf] {
      const std::string out = require_out(g, "pretrain");
      auto records = corpus_records(g, *corpus_dir);
      auto ptrs = pointers(records);
      pipeline::TrainedModel m = pipeline::pretrain(kind, ptrs, hf->hyper(), g.seed);
      pipeline::save_model(out, m);
      std::cout << "trained " << to_string(kind) << " model on " << records.size() << " apps; final loss "
                << fixed9(m.epoch_loss.back()) << "\n";
    });
  };
  add_pretrain("pretrain-exec", pipeline::ModelKind::Exec, "Pre-train the executable model");
  add_pretrain("pretrain-ui", pipeline::ModelKind::Ui, "Pre-train the UI model");

  // train-fusion
  auto* fusion = app.add_subcommand("train-fusion", "Train the fusion classifier and write a model bundle");
  std::string fusion_corpus, exec_model, ui_model;
  HyperFlags fusion_hyper;
  fusion->add_option("--corpus", fusion_corpus, "Corpus directory")->required();
  fusion->add_option("--exec-model", exec_model, "Pre-trained executable model")->required();
  fusion->add_option("--ui-model", ui_model, "Pre-trained UI model")->required();
  fusion_hyper.add(fusion);
  fusion->callback([&] {
    const std::string out = require_out(g, "train-fusion");
    auto records = corpus_records(g, fusion_corpus);
    auto ptrs = pointers(records);
    pipeline::ModelBundle b;
    b.exec = pipeline::load_model(exec_model, pipeline::ModelKind::Exec);
    b.ui = pipeline::load_model(ui_model, pipeline::ModelKind::Ui);
    std::vector<int> labels;
    for (const auto& r : records) labels.push_back(r.label);
    b.fusion = pipeline::train_fusion(pipeline::extract_features(b.exec, ptrs), pipeline::extract_features(b.ui, ptrs),
                                      labels, fusion_hyper.hyper(), g.seed);
    pipeline::save_bundle(out, b);
    std::cout << "wrote model bundle to " << out << "\n";
  });

  // predict
  auto* predict = app.add_subcommand("predict", "Classify app bundles with a trained model bundle");
  std::vector<std::string> predict_bundles;
  std::string models_dir;
  predict->add_option("bundle", predict_bundles, "App bundle directories")->required();
  predict->add_option("--models", models_dir, "Model bundle directory")->required();
  predict->callback([&] {
    Vocabs v = resolve_vocabs(g, std::nullopt);
    pipeline::ModelBundle mb = pipeline::load_bundle(models_dir);
    std::vector<pipeline::AppRecord> records;
    for (const auto& path : predict_bundles) {
      records.push_back(bundle::analyze_app(bundle::load_app(path, v.vocab), v.vocab, v.ui).record);
    }
    auto preds = pipeline::predict(mb, pointers(records));
    std::string text;
    for (std::size_t i = 0; i < records.size(); ++i) {
      text += records[i].id + "\tclass " + std::to_string(preds[i].label) + "\t" +
              (preds[i].label == pipeline::kLow ? "low" : "not-low");
      for (double p : preds[i].probs) text += "\t" + fixed9(p);
      text += "\n";
    }
    emit(g, text);
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Repeated k-fold evaluation");
  std::string eval_corpus;
  std::vector<std::string> config_names{"full"};
  std::size_t folds = 10, repeats = 10;
  HyperFlags eval_hyper;
  evaluate->add_option("--corpus", eval_corpus, "Corpus directory")->required();
  evaluate->add_option("--config", config_names, "full|exec-only|ui-only|bow-dense|bow-conv (repeatable)")
      ->capture_default_str();
  evaluate->add_option("--folds", folds, "k")->capture_default_str();
  evaluate->add_option("--repeats", repeats, "Fresh random partitions")->capture_default_str();
  eval_hyper.add(evaluate);
  evaluate->callback([&] {
    std::vector<pipeline::EvalConfig> configs;
    for (const auto& name : config_names) configs.push_back(pipeline::parse_eval_config(name));
    auto records = corpus_records(g, eval_corpus);
    pipeline::EvalOptions opt;
    opt.k = folds;
    opt.repeats = repeats;
    opt.seed = g.seed;
    opt.hyper = eval_hyper.hyper();
    auto reports = pipeline::kfold_evaluate(records, configs, opt);
    std::string text, table;
    for (const auto& r : reports) {
      text += pipeline::render_report(r);
      table += "# " + to_string(r.config) + "\n" + pipeline::render_table(r);
    }
    emit(g, text);
    if (!g.out.empty()) bundle::write_file(g.out + ".tsv", table);
    std::cerr << table;
  });

  // oracle-check
  auto* check = app.add_subcommand("oracle-check", "Compare summary-based vectors with the brute-force oracles");
  std::string check_corpus;
  check->add_option("corpus", check_corpus, "Corpus directory")->required();
  check->callback([&] {
    bundle::Corpus c = bundle::load_corpus_index(check_corpus);
    Vocabs v = resolve_vocabs(g, fs::path(check_corpus));
    std::size_t mismatches = 0;
    for (const auto& e : c.manifest) {
      bundle::AppBundle b = bundle::load_app(fs::path(check_corpus) / "apps" / e.id, v.vocab);
      bundle::AppAnalysis a = bundle::analyze_app(b, v.vocab, v.ui);
      const auto sem = oracle::oracle_semantic_vector(b.program, v.vocab);
      const auto ui = oracle::oracle_layout_vector(b.layouts, v.ui);
      if (auto d = oracle::first_difference(a.record.semantic, sem)) {
        ++mismatches;
        std::cerr << e.id << ": semantic vector differs from the inlining oracle at " << *d << "\n";
      }
      if (auto d = oracle::first_difference(a.record.layout, ui)) {
        ++mismatches;
        std::cerr << e.id << ": layout vector differs from the expansion oracle at " << *d << "\n";
      }
    }
    std::cout << "checked " << c.manifest.size() << " apps, " << mismatches << " mismatches\n";
    if (mismatches != 0) throw InvariantError("oracle-check found " + std::to_string(mismatches) + " mismatches");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "lowrate: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "lowrate: internal error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Invariant);
  }
}
