#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gestalt/gabor_detect.hpp"
#include "gestalt/random.hpp"
#include "gestalt/stimulus.hpp"
#include "oracles.hpp"

using namespace gestalt;
constexpr double kPi = std::numbers::pi;

TEST(TauAligned, Examples) {
  EXPECT_TRUE(tau_aligned(0.7, 0.7, 1e-6));
  EXPECT_TRUE(tau_aligned(wrap_pi(0.7 + kPi), 0.7, 1e-6));
  EXPECT_TRUE(tau_aligned(0.02, kPi - 0.02, 0.05));
  EXPECT_FALSE(tau_aligned(0.9, 0.7, 0.1));
  EXPECT_FALSE(tau_aligned(wrap_pi(0.7 - 0.2), 0.7, 0.1));
  EXPECT_THROW(tau_aligned(0.1, 0.2, 0.0), std::invalid_argument);
  EXPECT_THROW(tau_aligned(0.1, 0.2, 2.0), std::invalid_argument);
}

TEST(TauAligned, Probability) {
  EXPECT_EQ(aligned_probability(kPi / 2), 1.0);
  EXPECT_DOUBLE_EQ(aligned_probability(kPi / 32), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(aligned_probability(kPi / 4), 0.5);
}

TEST(TauAligned, RightAngleNeverMeaningful) {
  Rng rng(2);
  GaborField f{{100, 100}, {}};
  for (int k = 0; k < 30; ++k) f.elements.push_back({5.0 + 3.0 * k, 50.0, 0.0});
  GaborDetectConfig cfg;
  cfg.precisions = {kPi / 2};
  EXPECT_TRUE(detect_gabor(f, cfg).detections.empty());
}

namespace {

// Three aligned elements alone in their rectangle, among 200.
GaborField three_aligned() {
  GaborField f{{496, 496}, {}};
  f.elements = {{100, 100, 0.0}, {130, 100, 0.0}, {160, 100, 0.0}};
  Rng rng(17);
  while (f.size() < 200) {
    const double x = rng.uniform(0, 496), y = rng.uniform(0, 496);
    if (std::abs(y - 100) < 40) continue;
    f.elements.push_back({x, y, rng.angle_pi()});
  }
  return f;
}

}  // namespace

// The reported value for this configuration is 99.5; ours depends on the
// precision family, which is not given there. With four precisions the
// smallest tail is (1/16)^3.
TEST(GaborNfa, ThreeAlignedNotMeaningful) {
  const GaborField f = three_aligned();
  const GaborDetection d = score_gabor_candidate(f, 0, 2);
  EXPECT_EQ(d.members.size(), 3u);
  const oracle::Real want = oracle::Real(200 * 199 / 2) * 4 * boost::multiprecision::pow(oracle::Real(1) / 16, 3);
  EXPECT_NEAR(d.nfa.value, oracle::log10_of(want), 1e-10);
  EXPECT_LT(std::abs(d.nfa.value - std::log10(99.5)), 1.0);
  EXPECT_FALSE(is_meaningful(d.nfa));
}

TEST(GaborNfa, TailAgainstOracle) {
  const StimulusRecord r = gen_positive({StimulusKind::positive, 200, {496, 496}, 7, kPi / 5, {}, {}, 42});
  const GaborDetectionReport rep = detect_gabor(r.field);
  ASSERT_TRUE(rep.best);
  const GaborDetection& d = *rep.best;
  double best = 0;
  for (double tau : default_precisions()) {
    int k = 0;
    for (std::size_t m : d.members) k += orientation_distance(r.field.elements[m].theta, d.axis) < tau;
    best = std::min(best, oracle::log10_of(oracle::summed_tail(static_cast<std::int64_t>(d.members.size()), k,
                                                               oracle::Real(2 * tau / kPi))));
  }
  EXPECT_NEAR(d.nfa.value, std::log10(200.0 * 199.0 / 2.0 * 4.0) + best, 1e-9);
  EXPECT_NEAR(rescore(r.field, d, d.members).value, d.nfa.value, 1e-12);
}

TEST(GaborDetect, PerfectSegmentOfTen) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const StimulusRecord r = gen_positive({StimulusKind::positive, 200, {496, 496}, 10, 0.0, {}, {}, derive_seed(9, s)});
    const GaborDetectionReport rep = detect_gabor(r.field);
    ASSERT_TRUE(rep.best);
    EXPECT_LE(rep.best_nfa.value, -3.0) << s;
    EXPECT_FALSE(rep.detections.empty());
    // the best rectangle sits on the planted segment
    const auto& e = r.field.elements;
    const Point mid{(e[rep.best->candidate.i].x + e[rep.best->candidate.j].x) / 2,
                    (e[rep.best->candidate.i].y + e[rep.best->candidate.j].y) / 2};
    EXPECT_LT(point_segment_distance(mid, r.truth->a, r.truth->b), 30.0) << s;
  }
}

TEST(GaborDetect, RotationInvariance) {
  const StimulusRecord r = gen_positive({StimulusKind::positive, 120, {496, 496}, 8, 0.3, {}, {}, 5});
  GaborDetectConfig cfg;
  cfg.width = 40.0;
  const double phi = 0.7, cx = 248, cy = 248;
  GaborField rot{{2000, 2000}, {}};
  for (const auto& g : r.field.elements) {
    const double dx = g.x - cx, dy = g.y - cy;
    rot.elements.push_back({1000 + dx * std::cos(phi) - dy * std::sin(phi), 1000 + dx * std::sin(phi) + dy * std::cos(phi),
                            wrap_pi(g.theta + phi)});
  }
  const auto a = detect_gabor(r.field, cfg), b = detect_gabor(rot, cfg);
  EXPECT_NEAR(a.best_nfa.value, b.best_nfa.value, 1e-9);
  EXPECT_EQ(a.detections.size(), b.detections.size());
}

TEST(GaborDetect, ThreadsDoNotChangeResults) {
  const StimulusRecord r = gen_positive({StimulusKind::positive, 200, {496, 496}, 9, 0.5, {}, {}, 3});
  GaborDetectConfig one, many;
  many.threads = 4;
  const auto a = detect_gabor(r.field, one), b = detect_gabor(r.field, many);
  EXPECT_EQ(a.best_nfa.value, b.best_nfa.value);
  ASSERT_EQ(a.detections.size(), b.detections.size());
  for (std::size_t k = 0; k < a.detections.size(); ++k) {
    EXPECT_EQ(a.detections[k].candidate.i, b.detections[k].candidate.i);
    EXPECT_EQ(a.detections[k].candidate.j, b.detections[k].candidate.j);
  }
}

TEST(GaborDetect, BestReportedEvenWhenNotMeaningful) {
  const GaborField f = three_aligned();
  const auto rep = detect_gabor(f);
  ASSERT_TRUE(rep.best);
  EXPECT_TRUE(std::isfinite(rep.best_nfa.value));
  for (const auto& d : rep.detections) EXPECT_LT(d.nfa.value, 0.0);
}

TEST(GaborDetect, Preconditions) {
  EXPECT_THROW(detect_gabor(GaborField{{10, 10}, {{1, 1, 0}}}), std::invalid_argument);
  GaborDetectConfig cfg;
  cfg.precisions.clear();
  EXPECT_THROW(detect_gabor(GaborField{{10, 10}, {{1, 1, 0}, {5, 5, 0}}}, cfg), std::invalid_argument);
  cfg = {};
  cfg.width = -1.0;
  EXPECT_THROW(detect_gabor(GaborField{{10, 10}, {{1, 1, 0}, {5, 5, 0}}}, cfg), std::invalid_argument);
}

TEST(GaborDetect, DefaultWidth) {
  GaborField f{{496, 496}, std::vector<GaborElement>(200)};
  EXPECT_NEAR(gabor_width(f, {}), 496.0 / std::sqrt(200.0), 1e-12);
}
