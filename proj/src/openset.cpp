#include "rdosr/openset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "rdosr/errors.hpp"
#include "rdosr/kernels.hpp"

namespace rdosr::openset {

double openness(std::size_t n_train, std::size_t n_test, std::size_t n_target) {
  if (n_train < 1 || n_test < 1 || n_target < 1)
    throw DomainError("openness: class counts must be >= 1");
  if (2 * n_train > n_test + n_target)
    throw DomainError("openness: 2*n_train exceeds n_test + n_target");
  return 1.0 - std::sqrt(2.0 * static_cast<double>(n_train) /
                         static_cast<double>(n_test + n_target));
}

RocCurve roc(std::span<const double> scores_known, std::span<const double> scores_unknown) {
  if (scores_known.empty() || scores_unknown.empty())
    throw DomainError("roc: both score sets must be non-empty");
  std::vector<double> k(scores_known.begin(), scores_known.end());
  std::vector<double> u(scores_unknown.begin(), scores_unknown.end());
  for (double v : k)
    if (std::isnan(v)) throw NumericalError("roc: NaN score");
  for (double v : u)
    if (std::isnan(v)) throw NumericalError("roc: NaN score");
  std::sort(k.begin(), k.end(), std::greater<>());
  std::sort(u.begin(), u.end(), std::greater<>());

  const double nk = static_cast<double>(k.size());
  const double nu = static_cast<double>(u.size());
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t fp = 0, tp = 0;
  double twice_area = 0.0;  // in units of one (known, unknown) pair
  while (fp < k.size() || tp < u.size()) {
    const double t = std::max(fp < k.size() ? k[fp] : -INFINITY, tp < u.size() ? u[tp] : -INFINITY);
    const std::size_t fp0 = fp, tp0 = tp;
    while (fp < k.size() && k[fp] >= t) ++fp;
    while (tp < u.size() && u[tp] >= t) ++tp;
    twice_area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
    curve.points.push_back({static_cast<double>(fp) / nk, static_cast<double>(tp) / nu});
  }
  curve.auc = twice_area / (2.0 * nk * nu);
  return curve;
}

double auc_pairwise(std::span<const double> scores_known, std::span<const double> scores_unknown) {
  if (scores_known.empty() || scores_unknown.empty())
    throw DomainError("auc_pairwise: both score sets must be non-empty");
  double wins = 0.0;
  for (double uu : scores_unknown)
    for (double kk : scores_known) wins += uu > kk ? 1.0 : (uu == kk ? 0.5 : 0.0);
  return wins / (static_cast<double>(scores_known.size()) *
                 static_cast<double>(scores_unknown.size()));
}

std::vector<std::size_t> histogram(std::span<const double> scores, std::size_t bins, double lo,
                                   double hi) {
  if (bins < 1) throw DomainError("histogram: need at least one bin");
  if (!(lo < hi)) throw DomainError("histogram: range must satisfy lo < hi");
  std::vector<std::size_t> counts(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double s : scores) {
    const double pos = std::floor((s - lo) / width);
    std::size_t idx = 0;
    if (pos >= static_cast<double>(bins))
      idx = bins - 1;
    else if (pos > 0)
      idx = static_cast<std::size_t>(pos);
    counts[idx] += 1;
  }
  return counts;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

// The AUC comment sits just before the final (1,1) point.
void write_roc(std::ostream& out, const RocCurve& curve) {
  out << "fpr,tpr\n";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (i + 1 == curve.points.size()) out << "# auc=" << format_double(curve.auc) << "\n";
    out << format_double(curve.points[i].fpr) << "," << format_double(curve.points[i].tpr) << "\n";
  }
}

void write_roc(const std::filesystem::path& path, const RocCurve& curve) {
  auto out = open_out(path);
  write_roc(out, curve);
}

void write_histogram(std::ostream& out, std::span<const double> known,
                     std::span<const double> unknown, std::size_t bins, double lo, double hi) {
  const auto hk = histogram(known, bins, lo, hi);
  const auto hu = histogram(unknown, bins, lo, hi);
  const double width = (hi - lo) / static_cast<double>(bins);
  out << "bin_lo,bin_hi,count_known,count_unknown\n";
  for (std::size_t b = 0; b < bins; ++b) {
    const double blo = lo + width * static_cast<double>(b);
    const double bhi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
    out << format_double(blo) << "," << format_double(bhi) << "," << hk[b] << "," << hu[b] << "\n";
  }
}

void write_histogram(const std::filesystem::path& path, std::span<const double> known,
                     std::span<const double> unknown, std::size_t bins, double lo, double hi) {
  auto out = open_out(path);
  write_histogram(out, known, unknown, bins, lo, hi);
}

// --- sweep -----------------------------------------------------------------

bool SweepReport::all_succeeded() const {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.auc.has_value(); });
}

RunScores run_held_out(const data::HsiDataset& ds, int unknown_class, const TrainConfig& cfg,
                       const Architecture& arch) {
  TrainConfig run_cfg = cfg;
  run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(unknown_class);
  const auto parts =
      data::split(ds, {{unknown_class}, run_cfg.train_fraction, run_cfg.seed});

  RdosrModel model = fit(parts.train_known, run_cfg, arch);
  model.known_classes = parts.known_classes;
  model.provenance.unknown_classes = {unknown_class};

  RunScores out;
  out.unknown_class = unknown_class;
  out.known = open_score(model, parts.test_known.pixels);
  out.unknown = open_score(model, parts.unknown_pool.pixels);
  if (parts.test_known.size() > 0) {
    const auto pred = closed_predict(model, parts.test_known.pixels);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == parts.test_known.labels[i];
    out.closed_accuracy = static_cast<double>(hits) / static_cast<double>(pred.size());
  }
  return out;
}

SweepReport sweep(const data::HsiDataset& ds, const TrainConfig& cfg,
                  const SweepOptions& options) {
  if (ds.class_count < 2) throw DomainError("sweep: need at least two classes");
  cfg.validate();
  const std::size_t L = ds.class_count;
  SweepReport report;
  report.openness = openness(L - 1, L, L - 1);
  report.rows.resize(L);

  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, L);
  const int threads_per_job =
      std::max(1, kernels::max_threads() / static_cast<int>(jobs));

  auto worker = [&] {
    kernels::set_threads(threads_per_job);
    for (std::size_t i = next++; i < L; i = next++) {
      const int cls = static_cast<int>(i + 1);
      SweepRow& row = report.rows[i];
      row.unknown_class = cls;
      try {
        const RunScores scores = run_held_out(ds, cls, cfg, options.arch);
        row.auc = roc(scores.known, scores.unknown).auc;
        if (options.on_run) {
          std::lock_guard lock(callback_mutex);
          options.on_run(scores);
        }
      } catch (const std::exception& e) {
        row.error = "held-out class " + std::to_string(cls) + ": " + e.what();
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  double sum = 0.0;
  std::size_t ok = 0;
  for (const auto& r : report.rows)
    if (r.auc) {
      sum += *r.auc;
      ++ok;
    }
  report.average_auc = ok ? sum / static_cast<double>(ok) : 0.0;
  return report;
}

void write_report(std::ostream& out, const SweepReport& report) {
  out << "unknown_class,auc\n";
  for (const auto& r : report.rows)
    out << r.unknown_class << "," << (r.auc ? format_double(*r.auc) : std::string("failed")) << "\n";
  out << "average," << format_double(report.average_auc) << "\n";
}

void write_report(const std::filesystem::path& path, const SweepReport& report) {
  auto out = open_out(path);
  write_report(out, report);
}

}  // namespace rdosr::openset
