#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdosr/config.hpp"
#include "rdosr/data.hpp"
#include "rdosr/model.hpp"

namespace rdosr::openset {

// 1 - sqrt(2·n_train / (n_test + n_target)).
double openness(std::size_t n_train, std::size_t n_test, std::size_t n_target);

struct RocPoint {
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) ... (1,1)
  double auc = 0.0;
};

// Unknown is the positive class. One point per distinct score, thresholds
// descending; a sample counts as positive when its score is >= the threshold.
// The trapezoid AUC equals P(u > k) + ½·P(u = k).
RocCurve roc(std::span<const double> scores_known, std::span<const double> scores_unknown);

// Pairwise Mann-Whitney statistic, O(n·m). Used as a test oracle.
double auc_pairwise(std::span<const double> scores_known, std::span<const double> scores_unknown);

// Equal-width bins over [lo, hi]; out-of-range values land in the end bins.
std::vector<std::size_t> histogram(std::span<const double> scores, std::size_t bins, double lo,
                                   double hi);

void write_roc(std::ostream& out, const RocCurve& curve);
void write_roc(const std::filesystem::path& path, const RocCurve& curve);

// Shared bin edges for the known and unknown score distributions.
void write_histogram(std::ostream& out, std::span<const double> known,
                     std::span<const double> unknown, std::size_t bins, double lo, double hi);
void write_histogram(const std::filesystem::path& path, std::span<const double> known,
                     std::span<const double> unknown, std::size_t bins, double lo, double hi);

// --- leave-one-class-out sweep --------------------------------------------

struct SweepRow {
  int unknown_class = 0;
  std::optional<double> auc;  // empty when the run failed
  std::string error;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  double average_auc = 0.0;  // over successful rows
  double openness = 0.0;

  bool all_succeeded() const;
};

// Scores of one held-out run, kept for histograms and gap checks.
struct RunScores {
  int unknown_class = 0;
  std::vector<double> known;
  std::vector<double> unknown;
  double closed_accuracy = 0.0;
};

struct SweepOptions {
  std::size_t jobs = 1;
  Architecture arch{};
  // Receives each run's scores (called from worker threads, serialised).
  std::function<void(const RunScores&)> on_run;
};

// Result of training on every class except `unknown_class` and scoring the
// held-out known test pixels against the unknown pixels. The run seed is
// cfg.seed + unknown_class.
RunScores run_held_out(const data::HsiDataset& ds, int unknown_class, const TrainConfig& cfg,
                       const Architecture& arch = {});

// Each class in turn is unknown. Runs are independent and may execute
// concurrently; rows come back in class order.
SweepReport sweep(const data::HsiDataset& ds, const TrainConfig& cfg,
                  const SweepOptions& options = {});

void write_report(std::ostream& out, const SweepReport& report);
void write_report(const std::filesystem::path& path, const SweepReport& report);

}  // namespace rdosr::openset
