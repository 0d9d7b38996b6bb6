#include "rdosr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "rdosr/config.hpp"
#include "rdosr/data.hpp"
#include "rdosr/errors.hpp"
#include "rdosr/model.hpp"
#include "rdosr/openset.hpp"

namespace fs = std::filesystem;

namespace rdosr::cli {

namespace {

constexpr const char* kCheckpointName = "model.ckpt";
constexpr const char* kManifestName = "manifest.txt";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> parse_class_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad class id '" + item + "' in --unknown");
    }
  }
  if (out.empty()) throw UsageError("--unknown needs at least one class id");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create directory " + dir.string());
}

// Config file (optional), then --set overrides, then explicit path flags.
RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets,
                         const std::string& cube, const std::string& labels) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!cube.empty()) cfg.cube = cube;
  if (!labels.empty()) cfg.labels = labels;
  if (cfg.cube.empty() || cfg.labels.empty())
    throw UsageError("cube and labels paths are required (flags or config keys)");
  cfg.train.validate();
  return cfg;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string out;
  data::SynthParams params;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.params.classes < 2) throw UsageError("--classes must be >= 2 for open-set experiments");
  const auto ds = data::synth_generate(a.params);
  ensure_dir(a.out);
  const fs::path cube = fs::path(a.out) / "cube.hsid";
  const fs::path labels = fs::path(a.out) / "labels.hsil";
  data::save_dataset(cube, labels, ds);
  out << "synth: wrote " << ds.size() << " labeled pixels (" << ds.class_count << " classes, "
      << ds.band_count << " bands) to " << cube.string() << " and " << labels.string() << "\n";
  return kOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string cube, labels, unknown, config, out;
  std::vector<std::string> sets;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve_config(a.config, a.sets, a.cube, a.labels);
  const auto unknown = parse_class_list(a.unknown);
  const auto ds = data::load_dataset(cfg.cube, cfg.labels);

  data::SplitSpec spec;
  spec.unknown_classes = std::set<int>(unknown.begin(), unknown.end());
  spec.train_fraction = cfg.train.train_fraction;
  spec.seed = cfg.train.seed;
  const auto parts = data::split(ds, spec);

  ensure_dir(a.out);
  FitReport report;
  RdosrModel model = fit(parts.train_known, cfg.train, {}, &report);
  model.known_classes = parts.known_classes;
  model.provenance.cube_digest = data::file_digest(cfg.cube);
  model.provenance.labels_digest = data::file_digest(cfg.labels);
  model.provenance.unknown_classes = std::vector<int>(spec.unknown_classes.begin(),
                                                      spec.unknown_classes.end());
  write_checkpoint(fs::path(a.out) / kCheckpointName, model);

  std::ofstream manifest(fs::path(a.out) / kManifestName);
  if (!manifest) throw UsageError("cannot write manifest in " + a.out);
  manifest << "# run configuration\n" << format_config(cfg.train);
  manifest << "cube=" << cfg.cube << "\nlabels=" << cfg.labels << "\n";
  manifest << "# derived\n"
           << "# unknown=" << join(model.provenance.unknown_classes) << "\n"
           << "# known_classes=" << join(model.known_classes) << "\n"
           << "# cube_digest=" << model.provenance.cube_digest << "\n"
           << "# labels_digest=" << model.provenance.labels_digest << "\n"
           << "# train_pixels=" << parts.train_known.size() << "\n"
           << "# stage1_epochs=" << report.stage1.epochs.size() << "\n"
           << "# stage1_accuracy=" << format_double(report.stage1_accuracy) << "\n"
           << "# final_stage1_loss=" << format_double(report.final_stage1_loss) << "\n"
           << "# stage2_epochs=" << report.stage2.epochs.size() << "\n"
           << "# final_stage2_loss=" << format_double(report.final_stage2_loss) << "\n";

  out << "train: L=" << model.classes() << " known classes, stage-1 accuracy "
      << fixed4(report.stage1_accuracy) << " after " << report.stage1.epochs.size()
      << " epochs; checkpoint " << (fs::path(a.out) / kCheckpointName).string() << "\n";
  return kOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string model, cube, labels, roc_out, hist_out;
  std::size_t bins = 50;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const RdosrModel model = read_checkpoint(fs::path(a.model) / kCheckpointName);
  const auto ds = data::load_dataset(a.cube, a.labels);
  if (ds.band_count != model.bands())
    throw UsageError("model expects " + std::to_string(model.bands()) + " bands, data has " +
                     std::to_string(ds.band_count));
  const auto hist = ds.class_histogram();
  for (int k : model.known_classes)
    if (static_cast<std::size_t>(k) > ds.class_count || hist[static_cast<std::size_t>(k)] == 0)
      throw UsageError("known class " + std::to_string(k) + " is absent from the data");

  Matrix known_pixels, unknown_pixels;
  std::vector<int> known_dense;
  std::set<int> unknown_present;
  const bool same_data = data::file_digest(a.cube) == model.provenance.cube_digest &&
                         data::file_digest(a.labels) == model.provenance.labels_digest;
  if (same_data) {
    // Training data: score only the held-out known pixels.
    data::SplitSpec spec;
    spec.unknown_classes = std::set<int>(model.provenance.unknown_classes.begin(),
                                         model.provenance.unknown_classes.end());
    spec.train_fraction = model.config.train_fraction;
    spec.seed = model.config.seed;
    const auto parts = data::split(ds, spec);
    known_pixels = parts.test_known.pixels;
    known_dense = parts.test_known.labels;
    unknown_pixels = parts.unknown_pool.pixels;
    unknown_present = spec.unknown_classes;
  } else {
    std::vector<std::size_t> ki, ui;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto it = std::find(model.known_classes.begin(), model.known_classes.end(), ds.labels[i]);
      if (it != model.known_classes.end()) {
        ki.push_back(i);
        known_dense.push_back(static_cast<int>(it - model.known_classes.begin()) + 1);
      } else {
        ui.push_back(i);
        unknown_present.insert(ds.labels[i]);
      }
    }
    known_pixels = ds.pixels.gather_rows(ki);
    unknown_pixels = ds.pixels.gather_rows(ui);
  }
  if (known_pixels.rows() == 0 || unknown_pixels.rows() == 0)
    throw UsageError("evaluation needs both known-class and unknown-class pixels");

  const auto sk = open_score(model, known_pixels);
  const auto su = open_score(model, unknown_pixels);
  const auto curve = openset::roc(sk, su);
  const auto pred = closed_predict(model, known_pixels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == known_dense[i];
  const std::size_t L = model.classes();
  const double open = openset::openness(L, L + unknown_present.size(), L);

  out << "auc=" << fixed4(curve.auc) << "\n"
      << "closed_accuracy=" << fixed4(static_cast<double>(hits) / static_cast<double>(pred.size()))
      << "\n"
      << "openness=" << fixed4(open) << "\n";

  if (!a.roc_out.empty()) openset::write_roc(a.roc_out, curve);
  if (!a.hist_out.empty()) {
    double lo = std::min(*std::min_element(sk.begin(), sk.end()),
                         *std::min_element(su.begin(), su.end()));
    double hi = std::max(*std::max_element(sk.begin(), sk.end()),
                         *std::max_element(su.begin(), su.end()));
    if (!(lo < hi)) hi = lo + 1.0;
    openset::write_histogram(a.hist_out, sk, su, a.bins, lo, hi);
  }
  return kOk;
}

// --- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string cube, labels, config, report;
  std::size_t jobs = 1;
  std::vector<std::string> sets;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(a.config, a.sets, a.cube, a.labels);
  const auto ds = data::load_dataset(cfg.cube, cfg.labels);
  openset::SweepOptions opts;
  opts.jobs = std::max<std::size_t>(1, a.jobs);
  const auto report = openset::sweep(ds, cfg.train, opts);
  openset::write_report(fs::path(a.report), report);
  for (const auto& r : report.rows)
    if (!r.auc) err << "sweep: " << r.error << "\n";
  out << "average_auc=" << fixed4(report.average_auc) << "\n";
  return report.all_succeeded() ? kOk : kPartial;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-set land-cover classification: training and evaluation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic linear-mixing dataset");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--classes", synth.params.classes, "number of classes")->required();
  s->add_option("--bands", synth.params.bands, "spectral bands")->required();
  s->add_option("--per-class", synth.params.per_class, "pixels per class")->required();
  s->add_option("--seed", synth.params.seed, "generator seed")->required();
  s->add_option("--bases-per-class", synth.params.bases_per_class, "bases owned by each class");
  s->add_option("--alpha", synth.params.dirichlet_alpha, "symmetric Dirichlet concentration");
  s->add_option("--noise", synth.params.noise_sigma, "Gaussian noise standard deviation");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train both stages and write a checkpoint");
  t->add_option("--cube", train.cube, "cube file");
  t->add_option("--labels", train.labels, "label file");
  t->add_option("--unknown", train.unknown, "comma-separated unknown class ids")->required();
  t->add_option("--config", train.config, "key=value configuration file");
  t->add_option("--set", train.sets, "override a configuration key (key=value)");
  t->add_option("--out", train.out, "output directory")->required();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "score a dataset with a trained model");
  e->add_option("--model", eval.model, "model directory")->required();
  e->add_option("--cube", eval.cube, "cube file")->required();
  e->add_option("--labels", eval.labels, "label file")->required();
  e->add_option("--roc-out", eval.roc_out, "write the ROC curve here");
  e->add_option("--hist-out", eval.hist_out, "write the score histogram here");
  e->add_option("--bins", eval.bins, "histogram bins")->check(CLI::PositiveNumber);

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "leave-one-class-out AUC sweep");
  w->add_option("--cube", sw.cube, "cube file");
  w->add_option("--labels", sw.labels, "label file");
  w->add_option("--config", sw.config, "key=value configuration file");
  w->add_option("--set", sw.sets, "override a configuration key (key=value)");
  w->add_option("--report", sw.report, "report CSV path")->required();
  w->add_option("--jobs", sw.jobs, "concurrent runs")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) return cmd_train(train, out);
    if (e->parsed()) return cmd_eval(eval, out);
    if (w->parsed()) return cmd_sweep(sw, out, err);
  } catch (const NumericalError& ex) {
    err << "error: " << ex.what() << "\n";
    return kNumerical;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace rdosr::cli
