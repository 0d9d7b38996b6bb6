#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support/oracles.hpp"
#include "rdosr/errors.hpp"
#include "rdosr/openset.hpp"

using namespace rdosr;
using namespace rdosr::openset;

namespace {

std::vector<double> draw(std::size_t n, std::mt19937_64& rng, bool coarse) {
  std::vector<double> v(n);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  // Coarse values produce many ties.
  for (double& x : v) x = coarse ? std::floor(d(rng) * 8.0) / 8.0 : d(rng);
  return v;
}

}  // namespace

TEST_CASE("openness values") {
  CHECK(std::abs(openness(8, 9, 8) - 0.0299) < 1e-4);
  CHECK(std::abs(openness(7, 9, 7) - 0.0646) < 1e-4);
  CHECK(std::abs(openness(15, 16, 15) - 0.0163) < 1e-4);
  CHECK(std::abs(openness(20, 200, 20) - 0.5735) < 1e-4 + 1e-12);
  CHECK(openness(6, 6, 6) == 0.0);
  CHECK_THROWS_AS(openness(0, 3, 3), DomainError);
  CHECK_THROWS_AS(openness(5, 3, 3), DomainError);
}

TEST_CASE("roc examples") {
  const std::vector<double> k1{0.1, 0.2}, u1{0.8, 0.9};
  CHECK(roc(k1, u1).auc == 1.0);
  const std::vector<double> same{0.5, 0.5};
  CHECK(roc(same, same).auc == 0.5);
  const std::vector<double> k3{0.1, 0.5}, u3{0.3, 0.7};
  const auto curve = roc(k3, u3);
  CHECK(curve.auc == 0.75);
  REQUIRE(curve.points.size() == 5);
  CHECK(curve.points[1].fpr == 0.0);
  CHECK(curve.points[1].tpr == 0.5);
  CHECK(curve.points[2].fpr == 0.5);
  CHECK(curve.points[2].tpr == 0.5);

  const std::vector<double> empty, nan_scores{NAN};
  CHECK_THROWS_AS(roc(empty, u1), DomainError);
  CHECK_THROWS_AS(roc(k1, nan_scores), NumericalError);
}

TEST_CASE("curve AUC equals the pairwise statistic and keeps the curve invariants") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 1000; ++t) {
    const bool coarse = t % 2 == 0;
    const auto k = draw(1 + rng() % 200, rng, coarse);
    const auto u = draw(1 + rng() % 200, rng, coarse);
    const auto curve = roc(k, u);
    CHECK(std::abs(curve.auc - oracle::auc_pairs(k, u)) < 1e-12);
    CHECK(curve.auc >= 0.0);
    CHECK(curve.auc <= 1.0);
    CHECK(curve.points.front().fpr == 0.0);
    CHECK(curve.points.front().tpr == 0.0);
    CHECK(curve.points.back().fpr == 1.0);
    CHECK(curve.points.back().tpr == 1.0);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
      CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
    }
  }
}

TEST_CASE("AUC under monotone transforms and label swap") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    auto k = draw(50, rng, t % 2 == 0);
    auto u = draw(70, rng, t % 2 == 0);
    const double a = roc(k, u).auc;
    CHECK(std::abs(roc(u, k).auc - (1.0 - a)) < 1e-12);
    for (double& x : k) x = std::exp(3.0 * x) - 7.0;
    for (double& x : u) x = std::exp(3.0 * x) - 7.0;
    CHECK(std::abs(roc(k, u).auc - a) < 1e-12);
  }
}

TEST_CASE("library pairwise AUC agrees with the independent count") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 50; ++t) {
    const auto k = draw(30, rng, true), u = draw(40, rng, true);
    CHECK(auc_pairwise(k, u) == oracle::auc_pairs(k, u));
  }
}

TEST_CASE("histogram examples") {
  const std::vector<double> two{0.0, 1.0};
  CHECK(histogram(two, 2, 0.0, 1.0) == std::vector<std::size_t>{1, 1});
  const std::vector<double> flat(20, 0.3);
  const auto h = histogram(flat, 5, 0.0, 1.0);
  CHECK(h == std::vector<std::size_t>{0, 20, 0, 0, 0});
  const std::vector<double> outside{-5.0, 9.0};
  CHECK(histogram(outside, 3, 0.0, 1.0) == std::vector<std::size_t>{1, 0, 1});

  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<double> uniform(10000);
  for (double& x : uniform) x = d(rng);
  for (std::size_t c : histogram(uniform, 10, 0.0, 1.0)) {
    CHECK(c >= 850);
    CHECK(c <= 1150);
  }
  CHECK_THROWS_AS(histogram(two, 0, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(histogram(two, 2, 1.0, 1.0), DomainError);
}

TEST_CASE("export formats") {
  const std::vector<double> k{0.1, 0.5}, u{0.3, 0.7};
  std::ostringstream roc_out;
  write_roc(roc_out, roc(k, u));
  CHECK(roc_out.str() == "fpr,tpr\n0,0\n0,0.5\n0.5,0.5\n0.5,1\n# auc=0.75\n1,1\n");

  std::ostringstream hist;
  write_histogram(hist, k, u, 2, 0.0, 1.0);
  CHECK(hist.str() == "bin_lo,bin_hi,count_known,count_unknown\n0,0.5,1,1\n0.5,1,1,1\n");

  SweepReport rep;
  rep.rows = {{1, 0.5, ""}, {2, std::nullopt, "boom"}, {3, 1.0, ""}};
  rep.average_auc = 0.75;
  std::ostringstream sweep_out;
  write_report(sweep_out, rep);
  CHECK(sweep_out.str() == "unknown_class,auc\n1,0.5\n2,failed\n3,1\naverage,0.75\n");
  CHECK_FALSE(rep.all_succeeded());
}

TEST_CASE("sweep produces one row per class and is reproducible across job counts") {
  const auto ds = data::synth_generate({.classes = 3, .bands = 8, .per_class = 40, .seed = 6});
  TrainConfig cfg;
  cfg.epochs_stage1 = 20;
  cfg.epochs_stage2 = 5;
  cfg.batch_size = 32;
  SweepOptions opt;
  opt.arch.classifier_hidden = {8, 4};
  opt.arch.encoder_hidden = {3, 3};
  std::size_t seen = 0;
  opt.on_run = [&](const RunScores& s) {
    ++seen;
    CHECK(s.unknown.size() == 40);
    CHECK(s.known.size() == 40);
  };
  const auto a = sweep(ds, cfg, opt);
  CHECK(seen == 3);
  REQUIRE(a.rows.size() == 3);
  CHECK(a.all_succeeded());
  double mean = 0.0;
  for (const auto& r : a.rows) mean += *r.auc / 3.0;
  CHECK(a.average_auc == doctest::Approx(mean).epsilon(1e-15));
  CHECK(a.openness == doctest::Approx(openness(2, 3, 2)));

  opt.on_run = nullptr;
  opt.jobs = 3;
  const auto b = sweep(ds, cfg, opt);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(b.rows[i].unknown_class == a.rows[i].unknown_class);
    CHECK(*b.rows[i].auc == *a.rows[i].auc);
  }
}
