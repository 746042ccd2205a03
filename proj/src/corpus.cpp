#include "lowrate/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>

#include "lowrate/semvec.hpp"

namespace lowrate::corpus {

namespace fs = std::filesystem;

namespace {

using ir::Instruction;
using ir::OpKind;

std::size_t pick(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (r < weights[i]) return i;
    r -= weights[i];
  }
  return weights.size() - 1;
}

Instruction make(OpKind kind, ir::TypeId type = {}, std::size_t target = 0, std::string callee = {}) {
  Instruction ins;
  ins.kind = kind;
  ins.type = type;
  ins.target = target;
  ins.callee = std::move(callee);
  return ins;
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

std::vector<double> jitter(Rng& rng, std::size_t n, double sigma) {
  std::vector<double> w(n);
  for (double& x : w) x = std::exp(sigma * rng.normal());
  return w;
}

class MethodBuilder {
 public:
  MethodBuilder(Rng& rng, const GeneratorVocab& gv, const ProgramShape& shape, const ExecProfile& profile,
                const std::vector<std::string>& names, const std::vector<std::size_t>& expanded, std::size_t self)
      : rng_(rng), gv_(gv), shape_(shape), profile_(profile), names_(names), expanded_(expanded), self_(self) {}

  ir::Method build(std::size_t budget) {
    plain();
    while (code_.size() < budget) statement(0);
    code_.push_back(make(OpKind::Return));
    ++expanded_size_;
    return ir::Method{names_[self_], std::move(code_)};
  }

  std::size_t expanded_size() const { return expanded_size_; }

 private:
  void plain() {
    code_.push_back(make(OpKind::Plain, gv_.plain[pick(rng_, profile_.plain)]));
    ++expanded_size_;
  }

  void call(std::string callee) {
    code_.push_back(make(OpKind::Call, {}, 0, std::move(callee)));
    ++expanded_size_;
  }

  void block(std::size_t nest, bool first_plain) {
    const std::size_t count = rng_.between(shape_.block_min, shape_.block_max);
    for (std::size_t i = 0; i < count; ++i) {
      if (i == 0 && first_plain) {
        plain();
      } else {
        statement(nest);
      }
    }
  }

  void loop(std::size_t nest) {
    const std::size_t header = code_.size();
    ++loop_depth_;
    block(nest + 1, true);
    --loop_depth_;
    code_.push_back(make(OpKind::CondJump, cond_type(), header));
    ++expanded_size_;
  }

  void branch(std::size_t nest) {
    const std::size_t s = code_.size();
    code_.push_back(make(OpKind::CondJump, cond_type()));
    ++expanded_size_;
    block(nest + 1, false);
    if (rng_.chance(shape_.else_prob)) {
      const std::size_t j = code_.size();
      code_.push_back(make(OpKind::Jump));
      code_[s].target = code_.size();
      block(nest + 1, false);
      code_[j].target = code_.size();
      return;
    }
    if (rng_.chance(shape_.early_return_prob)) {
      code_.push_back(make(OpKind::Return));
      ++expanded_size_;
    }
    code_[s].target = code_.size();
  }

  ir::TypeId cond_type() { return gv_.cond[pick(rng_, profile_.cond)]; }

  void api_call() {
    std::vector<double> w = profile_.api;
    if (loop_depth_ > 0) {
      for (std::size_t k = 0; k < w.size(); ++k) w[k] *= profile_.api_in_loop[k];
    }
    call(gv_.apis[pick(rng_, w)]);
  }

  bool internal_call() {
    std::vector<std::size_t> options;
    for (std::size_t j = self_ + 1; j < names_.size(); ++j) {
      if (expanded_size_ + expanded_[j] <= shape_.max_expanded) options.push_back(j);
    }
    if (options.empty()) return false;
    const std::size_t j = options[rng_.below(options.size())];
    call(names_[j]);
    expanded_size_ += expanded_[j];
    return true;
  }

  void statement(std::size_t nest) {
    double r = rng_.uniform();
    const bool can_nest = nest < shape_.max_nesting;
    if (can_nest && r < shape_.loop_prob) return loop(nest);
    r -= shape_.loop_prob;
    if (can_nest && r < shape_.if_prob) return branch(nest);
    r -= shape_.if_prob;
    if (r < shape_.api_prob) return api_call();
    r -= shape_.api_prob;
    if (r < shape_.unknown_prob) return call("ext.lib" + std::to_string(rng_.below(8)) + ".invoke");
    r -= shape_.unknown_prob;
    if (r < shape_.internal_call_prob && internal_call()) return;
    plain();
  }

  Rng& rng_;
  const GeneratorVocab& gv_;
  const ProgramShape& shape_;
  const ExecProfile& profile_;
  const std::vector<std::string>& names_;
  const std::vector<std::size_t>& expanded_;
  std::size_t self_;
  std::vector<Instruction> code_;
  std::size_t loop_depth_ = 0;
  std::size_t expanded_size_ = 0;
};

class LayoutBuilder {
 public:
  LayoutBuilder(Rng& rng, const GeneratorVocab& gv, const LayoutShape& shape, const UiProfile& profile,
                std::size_t docs)
      : rng_(rng), gv_(gv), shape_(shape), profile_(profile), docs_(docs) {}

  layout::LayoutDoc build(std::size_t index) {
    layout::LayoutDoc doc;
    doc.name = "d" + std::to_string(index);
    doc.root.tag = container();
    fill(doc.root, 0, index);
    return doc;
  }

 private:
  std::string container() { return gv_.containers[pick(rng_, profile_.containers)]; }

  void fill(layout::Element& el, std::size_t depth, std::size_t doc) {
    const std::size_t count = rng_.between(shape_.children_min, shape_.children_max);
    for (std::size_t i = 0; i < count; ++i) {
      layout::Element child;
      if (doc + 1 < docs_ && rng_.chance(shape_.ref_prob)) {
        child.tag = std::string(layout::kRefTag);
        child.ref_target = "d" + std::to_string(rng_.between(doc + 1, docs_ - 1));
      } else if (depth + 1 < shape_.max_depth && rng_.chance(shape_.container_prob)) {
        child.tag = container();
        fill(child, depth + 1, doc);
      } else if (rng_.chance(shape_.legacy_prob)) {
        child.tag = gv_.legacy[rng_.below(gv_.legacy.size())];
      } else if (rng_.chance(shape_.custom_prob)) {
        child.tag = gv_.custom[rng_.below(gv_.custom.size())];
      } else {
        child.tag = gv_.widgets[pick(rng_, profile_.widgets)];
      }
      el.children.push_back(std::move(child));
    }
  }

  Rng& rng_;
  const GeneratorVocab& gv_;
  const LayoutShape& shape_;
  const UiProfile& profile_;
  std::size_t docs_;
};

GeneratorVocab make_default_vocab() {
  GeneratorVocab gv;
  const std::vector<std::string> plain = {
      "const",      "move",       "add",        "sub",         "mul",         "div",         "rem",
      "and",        "or",         "xor",        "shl",         "shr",         "neg",         "cast",
      "new",        "new-array",  "array-get",  "array-put",   "field-get",   "field-put",   "static-get",
      "static-put", "instanceof", "check-cast", "monitor-enter", "monitor-exit", "array-length"};
  const std::vector<std::string> cond = {"cmp-eq", "cmp-ne", "cmp-lt", "cmp-ge", "cmp-gt", "cmp-le", "cmp-null"};
  const std::vector<std::pair<std::string, int>> apis = {
      {"java.net.HttpURLConnection.connect", +1},
      {"java.io.FileInputStream.read", +1},
      {"android.graphics.BitmapFactory.decodeFile", +1},
      {"android.database.sqlite.SQLiteDatabase.query", +1},
      {"java.lang.Thread.sleep", +1},
      {"android.view.View.requestLayout", +1},
      {"android.os.AsyncTask.execute", -1},
      {"android.content.SharedPreferences.getString", -1},
      {"android.util.LruCache.get", -1},
      {"java.util.concurrent.ExecutorService.submit", -1},
      {"android.os.Handler.post", -1},
      {"android.widget.TextView.setText", 0},
      {"android.app.Activity.setContentView", 0},
      {"android.view.View.findViewById", 0},
      {"android.util.Log.d", 0},
      {"java.lang.StringBuilder.append", 0},
      {"java.util.ArrayList.add", 0},
      {"java.util.HashMap.get", 0},
      {"android.content.Intent.putExtra", 0},
      {"android.widget.Toast.makeText", 0},
      {"android.view.View.setOnClickListener", 0},
      {"java.lang.String.equals", 0},
      {"android.content.Context.getString", 0},
      {"java.util.List.size", 0}};

  std::vector<std::string> names = plain;
  names.insert(names.end(), cond.begin(), cond.end());
  for (const auto& [name, signal] : apis) {
    names.push_back(name);
    gv.apis.push_back(name);
    gv.api_signal.push_back(signal);
  }
  gv.vocab = ir::Vocabulary::from_names(names);
  for (const auto& n : plain) gv.plain.push_back(gv.vocab.at(n));
  for (const auto& n : cond) gv.cond.push_back(gv.vocab.at(n));

  gv.containers = {"LinearLayout", "RelativeLayout", "FrameLayout", "ScrollView",
                   "TableLayout",  "GridLayout",     "ConstraintLayout"};
  const std::vector<std::pair<std::string, int>> widgets = {
      {"AbsoluteLayout", +1}, {"WebView", +1},      {"ProgressBar", +1},   {"Gallery", +1},
      {"ListView", +1},       {"RecyclerView", -1}, {"CardView", -1},      {"ViewPager", -1},
      {"SearchView", -1},     {"TextView", 0},      {"Button", 0},         {"ImageView", 0},
      {"EditText", 0},        {"CheckBox", 0},      {"RadioButton", 0},    {"Switch", 0},
      {"Spinner", 0},         {"SeekBar", 0},       {"ImageButton", 0},    {"View", 0},
      {"Space", 0},           {"ToggleButton", 0},  {"RatingBar", 0}};
  std::vector<std::string> ui_names = gv.containers;
  for (const auto& [name, signal] : widgets) {
    gv.widgets.push_back(name);
    gv.widget_signal.push_back(signal);
    ui_names.push_back(name);
  }
  gv.ui = layout::UiVocabulary(ui_names);
  gv.legacy = {"android.support.v7.widget.RecyclerView", "android.support.v7.widget.CardView",
               "android.support.v4.view.ViewPager", "android.support.design.widget.FloatingActionButton",
               "android.support.v7.widget.Toolbar"};
  gv.custom = {"com.example.widget.FancyButton", "com.example.widget.ChartView", "com.vendor.ads.BannerView",
               "com.example.ui.ClockView", "org.sample.views.BadgeView"};
  return gv;
}

}  // namespace

const GeneratorVocab& default_vocab() {
  static const GeneratorVocab gv = make_default_vocab();
  return gv;
}

ExecProfile uniform_exec_profile(const GeneratorVocab& gv) {
  return ExecProfile{std::vector<double>(gv.plain.size(), 1.0), std::vector<double>(gv.cond.size(), 1.0),
                     std::vector<double>(gv.apis.size(), 1.0), std::vector<double>(gv.apis.size(), 1.0)};
}

UiProfile uniform_ui_profile(const GeneratorVocab& gv) {
  return UiProfile{std::vector<double>(gv.containers.size(), 1.0), std::vector<double>(gv.widgets.size(), 1.0)};
}

ir::Program generate_program(Rng& rng, const GeneratorVocab& gv, const ProgramShape& shape,
                             const ExecProfile& profile) {
  const std::size_t n = rng.between(shape.methods_min, shape.methods_max);
  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) names[i] = "m" + std::to_string(i);
  std::vector<std::size_t> expanded(n, 0);
  ir::Program program;
  program.methods.resize(n);
  // Callees first, so every call site knows its callee's inlined size.
  for (std::size_t i = n; i-- > 0;) {
    MethodBuilder b(rng, gv, shape, profile, names, expanded, i);
    program.methods[i] = b.build(rng.between(shape.method_budget_min, shape.method_budget_max));
    expanded[i] = b.expanded_size();
  }
  ir::link_program(program, gv.vocab);
  return program;
}

std::vector<layout::LayoutDoc> generate_layouts(Rng& rng, const GeneratorVocab& gv, const LayoutShape& shape,
                                                const UiProfile& profile) {
  const std::size_t docs = rng.between(shape.docs_min, shape.docs_max);
  LayoutBuilder b(rng, gv, shape, profile, docs);
  std::vector<layout::LayoutDoc> out;
  for (std::size_t d = 0; d < docs; ++d) out.push_back(b.build(d));
  return out;
}

std::string app_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "app-%05zu", index);
  return buf;
}

GeneratedApp generate_app(const CorpusSpec& spec, std::size_t index) {
  const GeneratorVocab& gv = default_vocab();
  Rng rng(derive_seed(spec.seed, {index}));
  GeneratedApp app;
  const bool low = rng.chance(spec.low_share);
  app.label = low ? pipeline::kLow : pipeline::kNotLow;
  app.meta.id = app_id(index);
  // Hundredths: low in [1.00, 2.99], not-low in [3.01, 5.00].
  app.meta.stars = static_cast<double>((low ? 100 : 301) + rng.below(200)) / 100.0;
  const double sign = low ? 1.0 : -1.0;
  const double q_exec = spec.margin * spec.exec_strength * sign + rng.normal();
  const double q_ui = spec.margin * spec.ui_strength * sign + rng.normal();

  ExecProfile ep;
  ep.plain = jitter(rng, gv.plain.size(), 0.3);
  ep.cond = jitter(rng, gv.cond.size(), 0.3);
  ep.api = jitter(rng, gv.apis.size(), 0.3);
  ep.api_in_loop.assign(gv.apis.size(), 1.0);
  for (std::size_t k = 0; k < gv.apis.size(); ++k) {
    ep.api[k] *= std::exp(0.5 * q_exec * gv.api_signal[k]);
    ep.api_in_loop[k] = std::exp(0.6 * q_exec * gv.api_signal[k]);
  }
  ProgramShape ps = spec.program;
  ps.loop_prob = clamp(ps.loop_prob * std::exp(0.3 * q_exec), 0.02, 0.3);
  ps.if_prob = clamp(ps.if_prob * std::exp(0.2 * q_exec), 0.03, 0.35);

  UiProfile up;
  up.containers = jitter(rng, gv.containers.size(), 0.3);
  up.widgets = jitter(rng, gv.widgets.size(), 0.3);
  for (std::size_t k = 0; k < gv.widgets.size(); ++k) up.widgets[k] *= std::exp(0.5 * q_ui * gv.widget_signal[k]);
  LayoutShape ls = spec.layout;
  ls.container_prob = clamp(ls.container_prob * std::exp(0.25 * q_ui), 0.05, 0.6);
  ls.legacy_prob = clamp(ls.legacy_prob * std::exp(0.4 * q_ui), 0.005, 0.3);
  ls.custom_prob = clamp(ls.custom_prob * std::exp(-0.3 * q_ui), 0.005, 0.3);

  app.program = generate_program(rng, gv, ps, ep);
  app.layouts = generate_layouts(rng, gv, ls, up);
  return app;
}

std::vector<bundle::ManifestEntry> gen_corpus(const CorpusSpec& spec, const fs::path& out) {
  const GeneratorVocab& gv = default_vocab();
  std::error_code ec;
  fs::create_directories(out / "apps", ec);
  if (ec) throw InputError("cannot create corpus directory " + out.string() + ": " + ec.message());
  bundle::write_file(out / "vocab.txt", gv.vocab.render());
  bundle::write_file(out / "ui_vocab.txt", gv.ui.render());

  std::vector<bundle::ManifestEntry> manifest(spec.apps);
  std::vector<std::exception_ptr> errors(spec.apps);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < spec.apps; ++i) {
    try {
      GeneratedApp app = generate_app(spec, i);
      bundle::write_app(out / "apps" / app.meta.id, app.meta, ir::render_program(app.program, gv.vocab),
                        app.layouts);
      manifest[i] = bundle::ManifestEntry{app.meta.id, app.meta.stars, app.label};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  bundle::write_file(out / "manifest", bundle::render_manifest(manifest));
  return manifest;
}

std::vector<pipeline::AppRecord> generate_records(const CorpusSpec& spec) {
  const GeneratorVocab& gv = default_vocab();
  std::vector<pipeline::AppRecord> records(spec.apps);
  std::vector<std::exception_ptr> errors(spec.apps);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < spec.apps; ++i) {
    try {
      GeneratedApp app = generate_app(spec, i);
      bundle::AppBundle b{app.meta, std::move(app.program), std::move(app.layouts)};
      records[i] = bundle::analyze_app(b, gv.vocab, gv.ui).record;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

}  // namespace lowrate::corpus
