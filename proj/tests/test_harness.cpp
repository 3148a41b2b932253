#include <gtest/gtest.h>

#include <cmath>

#include "gestalt/harness.hpp"

using namespace gestalt;

TEST(Bins, PartitionTheLine) {
  EXPECT_EQ(nfa_bin(-1e9), 0);
  EXPECT_EQ(nfa_bin(-5.0), 1);
  EXPECT_EQ(nfa_bin(-5.0000001), 0);
  EXPECT_EQ(nfa_bin(-0.5), 5);
  EXPECT_EQ(nfa_bin(0.0), 6);
  EXPECT_EQ(nfa_bin(1.999), 7);
  EXPECT_EQ(nfa_bin(2.0), 8);
  EXPECT_EQ(nfa_bin(std::numeric_limits<double>::infinity()), 8);
  EXPECT_THROW(nfa_bin(std::nan("")), std::invalid_argument);
  // consecutive bins share their edges and each edge belongs to the upper bin
  for (int b = 0; b < kCurveBins; ++b) {
    const auto [lo, hi] = bin_edges(b);
    if (b > 0) {
      EXPECT_EQ(lo, bin_edges(b - 1).second);
    }
    if (std::isfinite(lo)) {
      EXPECT_EQ(nfa_bin(lo), b);
    }
    if (std::isfinite(hi)) {
      EXPECT_EQ(nfa_bin(std::nextafter(hi, lo)), b);
    }
  }
}

TEST(Bins, EveryTrialInExactlyOneBin) {
  std::vector<TrialResult> trials;
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    TrialResult t;
    t.best = LogNfa{rng.uniform(-9, 5)};
    t.detected = is_meaningful(t.best);
    trials.push_back(t);
  }
  trials.push_back(TrialResult{});  // +inf
  const BinnedCurve c = binned_curve(trials);
  ASSERT_EQ(c.bins.size(), static_cast<std::size_t>(kCurveBins));
  EXPECT_EQ(c.total(), trials.size());
  // the decision rule is NFA < 1: bins below -1 all detect, bins from 0 none
  for (int b = 0; b < 5; ++b) EXPECT_EQ(c.bins[b].rate.mean, 1.0);
  for (int b = 6; b < kCurveBins; ++b) EXPECT_EQ(c.bins[b].rate.mean, 0.0);
}

TEST(Stats, MeanCi) {
  const std::vector<double> xs{1, 2, 3, 4};
  const MeanCi m = mean_ci(xs);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.stddev, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_NEAR(m.half_width, 2 * std::sqrt(5.0 / 3.0) / 2, 1e-12);
  EXPECT_EQ(mean_ci(std::vector<double>{}).n, 0u);
}

TEST(Stats, Wilson) {
  // reference values: 8/10 -> [0.4902, 0.9433]
  const Proportion p = wilson(8, 10);
  EXPECT_NEAR(p.lo, 0.4902, 1e-4);
  EXPECT_NEAR(p.hi, 0.9433, 1e-4);
  const Proportion z = wilson(0, 20);
  EXPECT_EQ(z.lo, 0.0);
  EXPECT_NEAR(z.hi, 0.1611, 1e-4);
  EXPECT_EQ(wilson(20, 20).hi, 1.0);
  EXPECT_THROW(wilson(3, 2), std::invalid_argument);
}

TEST(Trend, FlagsOnlyClearIncreases) {
  DatasetReport rep;
  rep.cells = {{5, 0.0, wilson(10, 20)}, {5, 0.5, wilson(12, 20)}, {5, 1.0, wilson(19, 20)},
               {6, 0.0, wilson(0, 20)},  {6, 0.5, wilson(20, 20)}};
  // 12/20 -> 19/20 still overlaps ([0.39, 0.78] vs [0.76, 0.99]); 0 -> 20 does not,
  // and 19/20 -> 0/20 across lengths is not a pair
  const auto v = trend_violations(rep);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].first.length, 6u);
  EXPECT_GT(v[0].second.detection.lo, v[0].first.detection.hi);
}

TEST(H0, NeedsThirtyTrials) {
  H0Config cfg;
  cfg.trials = 10;
  EXPECT_THROW(h0_montecarlo(cfg), std::invalid_argument);
}

TEST(H0, SmallEpsilonLowersTheMean) {
  H0Config cfg;
  cfg.detector = DetectorKind::gabor;
  cfg.n = 80;
  cfg.trials = 40;
  cfg.epsilon = 0.01;
  const H0Report r = h0_montecarlo(cfg);
  EXPECT_TRUE(r.pass) << summary_line(r);
  EXPECT_EQ(r.counts.size(), 40u);
  EXPECT_EQ(summary_line(r).rfind("PASS h0 detector=gabor n=80", 0), 0u);
}

TEST(Dataset, ManifestRoundTripAndRun) {
  std::vector<StimulusRecord> recs;
  for (const auto& s : dataset_design(1, 3, 5, 120)) recs.push_back(generate(s));
  const std::string text = manifest_text(recs);
  const ManifestLoad load = load_manifest(text + "garbage\n{}\n");
  ASSERT_EQ(load.records.size(), recs.size());
  EXPECT_EQ(load.skipped.size(), 2u);
  EXPECT_EQ(manifest_text(load.records), text);

  const DatasetReport rep = run_dataset(load.records, {}, 2);
  EXPECT_EQ(rep.trials.size(), recs.size());
  EXPECT_EQ(rep.curve.total(), recs.size());
  EXPECT_EQ(rep.cells.size(), 72u);
  EXPECT_EQ(rep.by_jitter.size(), 9u);
  EXPECT_EQ(rep.false_alarms.trials, 3u);
  // same records, same answers
  const DatasetReport again = run_dataset(load.records);
  for (std::size_t k = 0; k < rep.trials.size(); ++k) EXPECT_EQ(rep.trials[k].best.value, again.trials[k].best.value);
  EXPECT_EQ(curve_csv(rep.curve), curve_csv(again.curve));
  EXPECT_EQ(curve_csv(rep.curve).substr(0, 4), "bin,");
}

TEST(Scenes, ClusterRates) {
  const SceneRates r = cluster_rates(5, 123);
  EXPECT_EQ(r.seeds, 5u);
  EXPECT_GE(r.first, 4u);
  EXPECT_EQ(r.second, 0u);
}
