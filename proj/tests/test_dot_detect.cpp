#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "gestalt/dot_detect.hpp"
#include "gestalt/stimulus.hpp"
#include "oracles.hpp"

using namespace gestalt;

namespace {

// widths 1, 2, 4, ... <= L/4, counted by doubling from scratch
std::size_t oracle_width_count(double len) {
  std::size_t c = 0;
  for (double w = 1; w <= len / 4 + 1e-9; w += w) ++c;
  return c;
}

double oracle_mean_widths(const DotPattern& p) {
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double len = std::hypot(p.points[i].x - p.points[j].x, p.points[i].y - p.points[j].y);
      if (len == 0) continue;
      ++pairs;
      total += static_cast<double>(oracle_width_count(len));
    }
  return total / static_cast<double>(pairs);
}

DotPattern uniform(std::size_t n, std::uint64_t seed, Domain d = {512, 512}) {
  return gen_dot_scene(NoiseScene{n, d, seed});
}

oracle::P op(Point p) { return {p.x, p.y}; }

// n evenly spaced dots on y = y0 from x0 with the given step
void add_line(DotPattern& p, std::size_t n, double x0, double y0, double step) {
  for (std::size_t k = 0; k < n; ++k) p.points.push_back({x0 + step * static_cast<double>(k), y0});
}

}  // namespace

TEST(Widths, GeometricFamily) {
  EXPECT_EQ(widths_for_length(4.0), std::vector<double>({1.0}));
  EXPECT_EQ(widths_for_length(64.0), std::vector<double>({1, 2, 4, 8, 16}));
  EXPECT_TRUE(widths_for_length(3.9).empty());
  EXPECT_THROW(widths_for_length(10.0, {1.0, 4.0}), std::invalid_argument);
}

TEST(Widths, MeanMatchesIndependentRecount) {
  const DotPattern p = uniform(100, 11);
  const WidthSummary s = width_family(p);
  EXPECT_EQ(s.pairs, 4950u);
  EXPECT_NEAR(s.mean_widths, oracle_mean_widths(p), 1e-12);
}

TEST(RectCount, DefiningDotsIncluded) {
  const DotPattern p{{100, 100}, {{10, 10}, {60, 10}, {30, 80}}};
  EXPECT_EQ(count_in_rect(p, {0, 1, 1.0}), 2u);
  EXPECT_EQ(members_in_rect(p, {0, 1, 1.0}), std::vector<std::size_t>({0, 1}));
}

// 49 dots, five on the axis between the defining pair, as in the classic
// illustration of k(r, x) = 5.
TEST(RectCount, FiveInsideAmongFortyNine) {
  DotPattern p{{256, 256}, {}};
  add_line(p, 5, 40, 128, 15);
  Rng rng(3);
  while (p.size() < 49) {
    const Point q{rng.uniform(0, 256), rng.uniform(0, 256)};
    if (std::abs(q.y - 128) > 20) p.points.push_back(q);
  }
  EXPECT_EQ(count_in_rect(p, {0, 4, 4.0}), 5u);
}

TEST(RectCount, AgreesWithCornerOracle) {
  const DotPattern p = uniform(300, 5);
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (i == j) continue;
    const double width = std::pow(2.0, static_cast<int>(trial % 7));
    std::size_t want = 0;
    for (const Point& q : p.points) want += oracle::in_rectangle(op(p.points[i]), op(p.points[j]), width, op(q));
    EXPECT_EQ(count_in_rect(p, {i, j, width}), want) << i << " " << j << " " << width;
  }
}

TEST(LocalCount, Formula) {
  EXPECT_DOUBLE_EQ(local_count(0, 7, 0), 7.0);
  EXPECT_DOUBLE_EQ(local_count(3, 7, 5), 17.0);
  EXPECT_DOUBLE_EQ(local_count(5, 7, 3), 17.0);
}

TEST(LocalCount, BandsAgreeWithIndependentClassification) {
  const DotPattern p = uniform(400, 8);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (i == j) continue;
    const double w = std::pow(2.0, static_cast<int>(trial % 5));
    const LocalWindow lw = local_window(p, {i, j, w});
    const oracle::P a = op(p.points[i]), b = op(p.points[j]);
    std::size_t m2 = 0, left = 0, right = 0;
    for (const Point& q : p.points) {
      if (oracle::in_rectangle(a, b, w, op(q))) {
        ++m2;
      } else if (oracle::in_rectangle(a, b, 3 * w, op(q))) {
        const double side = (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x);
        ++(side > 0 ? left : right);
      }
    }
    EXPECT_EQ(lw.m2, m2);
    EXPECT_EQ(lw.m1, left);
    EXPECT_EQ(lw.m3, right);
    // with both flanks inside the domain, n(r, x) is the plain formula
    if (std::abs(lw.r1_area - lw.band_area) < 1e-9 && std::abs(lw.r3_area - lw.band_area) < 1e-9) {
      EXPECT_DOUBLE_EQ(local_count(lw), local_count(left, m2, right));
    }
  }
}

TEST(LocalCount, ClippedFlankIsRescaled) {
  // axis along the bottom edge: the lower flank is entirely outside, so the
  // upper flank stands for both
  DotPattern p{{100, 100}, {{10, 0}, {90, 0}, {50, 1.5}, {50, 1.2}}};
  const LocalWindow lw = local_window(p, {0, 1, 2.0});
  EXPECT_EQ(lw.m1, 2u);
  EXPECT_EQ(lw.m3, 0u);
  EXPECT_NEAR(lw.r3_area, 0.0, 1e-12);
  EXPECT_NEAR(local_count(lw), 2.0 * 2.0 + static_cast<double>(lw.m2), 1e-12);
}

TEST(DetectBasic, TwentyCollinearDots) {
  DotPattern p{{512, 512}, {}};
  add_line(p, 20, 56, 256, 20);
  const auto dets = detect_basic(p);
  ASSERT_FALSE(dets.empty());
  EXPECT_LT(dets.front().nfa.value, -5.0);
  // closed form for the end-to-end width-1 rectangle: all 18 free dots inside
  const double W = oracle_mean_widths(p);
  const double p_rect = 380.0 * 1.0 / (512.0 * 512.0);
  const double want = std::log10(20.0 * 19.0 * W / 2.0) + 18.0 * std::log10(p_rect);
  const DotDetection d = score_candidate(p, {0, 19, 1.0}, DetectMode::basic);
  EXPECT_NEAR(d.nfa.value, want, 1e-9);
  EXPECT_LE(dets.front().nfa.value, want + 1e-12);
  EXPECT_TRUE(std::is_sorted(dets.begin(), dets.end(), detection_less));
}

TEST(DetectBasic, ReportedNfaMatchesDirectScoring) {
  const DotPattern p = gen_dot_scene(PlantedScene{8, 40, 150.0, 1, {512, 512}, 4});
  const auto dets = detect_basic(p);
  ASSERT_FALSE(dets.empty());
  for (const auto& d : dets) {
    const DotDetection s = score_candidate(p, d.candidate, DetectMode::basic);
    EXPECT_NEAR(s.nfa.value, d.nfa.value, 1e-9);
    EXPECT_EQ(s.members, d.members);
    EXPECT_NEAR(rescore(p, d, d.members).value, d.nfa.value, 1e-12);
  }
}

// Twenty evenly spaced dots with empty flanks among N = 400 (a sheared block
// keeps the rest away), so that twenty boxes are among the tested partitions
// and all of them are occupied. Ten among a hundred sit right at NFA ~ 1.
TEST(DetectRefined, TwentyAlignedDotsBoxOracle) {
  DotPattern p{{512, 512}, {}};
  add_line(p, 20, 60, 480, 20);
  for (int r = 0; r < 19; ++r)
    for (int c = 0; c < 20; ++c) p.points.push_back({40.0 + 20.0 * c + 3.0 * r, 20.0 + 20.0 * r});
  ASSERT_EQ(p.size(), 400u);

  const DotDetection d = score_candidate(p, {0, 19, 1.0}, DetectMode::refined);
  // oracle: min over c in 2..21 of B(c, b_c, 1 - (1 - 1/(3c))^20)
  const double W = oracle_mean_widths(p);
  const double log_tests = std::log10(400.0 * 399.0 * W / 2.0 * 20.0);
  double best = 0;
  for (int c = 2; c <= 21; ++c) {
    int occupied = 0;
    for (int box = 0; box < c; ++box) {
      const double lo = 380.0 * box / c, hi = 380.0 * (box + 1) / c;
      for (int k = 0; k < 20; ++k) {
        const double t = 20.0 * k;
        if ((t >= lo && t < hi) || (box == c - 1 && t == 380.0)) {
          ++occupied;
          break;
        }
      }
    }
    const oracle::Real p0 = oracle::Real(1) / (3 * c);
    const oracle::Real p1 = 1 - boost::multiprecision::pow(1 - p0, 20);
    best = std::min(best, oracle::log10_of(oracle::summed_tail(c, occupied, p1)));
    if (c == 20) {
      EXPECT_EQ(occupied, 20);
    }
  }
  EXPECT_NEAR(d.nfa.value, log_tests + best, 1e-9);
  EXPECT_LT(d.nfa.value, 0.0);
  const auto dets = detect_refined(p);
  ASSERT_FALSE(dets.empty());
  EXPECT_LE(dets.front().nfa.value, d.nfa.value + 1e-12);
}

TEST(DetectRefined, ClustersRejected) {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const DotPattern p = gen_dot_scene(ClusterScene{2, 10, 5.0, 200.0, 30, {512, 512}, derive_seed(77, s)});
    EXPECT_FALSE(detect_basic(p).empty()) << s;
    EXPECT_TRUE(detect_refined(p).empty()) << s;
  }
}

TEST(DetectRefined, ReportedNfaMatchesDirectScoring) {
  DotPattern p{{512, 512}, {}};
  add_line(p, 20, 60, 480, 20);
  Rng rng(12);
  while (p.size() < 400) {
    const Point q{rng.uniform(0, 512), rng.uniform(0, 512)};
    if (std::abs(q.y - 480) > 30) p.points.push_back(q);
  }
  const auto dets = detect_refined(p);
  ASSERT_FALSE(dets.empty());
  for (const auto& d : dets) {
    const DotDetection s = score_candidate(p, d.candidate, DetectMode::refined);
    EXPECT_NEAR(s.nfa.value, d.nfa.value, 1e-9);
    EXPECT_NEAR(s.flank_estimate, d.flank_estimate, 1e-9);
    EXPECT_NEAR(rescore(p, d, d.members).value, d.nfa.value, 1e-9);
  }
}

// Scaling multiplies every tested width too, and widths start at one unit, so
// the number of tests may move; the per-rectangle probability may not.
TEST(Invariance, ScalingKeepsTails) {
  const DotPattern p = gen_dot_scene(PlantedScene{9, 30, 200.0, 1, {512, 512}, 21});
  DotPattern q{{1024, 1024}, {}};
  for (const Point& a : p.points) q.points.push_back({2 * a.x, 2 * a.y});
  // the basic hits give candidates to score both ways
  const auto dets = detect_dots(p, DetectMode::basic);
  ASSERT_FALSE(dets.empty());
  for (DetectMode mode : {DetectMode::basic, DetectMode::refined}) {
    for (std::size_t k = 0; k < std::min<std::size_t>(dets.size(), 25); ++k) {
      const DotDetection d = score_candidate(p, dets[k].candidate, mode);
      const DotDetection s = score_candidate(q, {d.candidate.i, d.candidate.j, 2 * d.candidate.width}, mode);
      EXPECT_NEAR(s.nfa.value - s.log10_tests, d.nfa.value - d.log10_tests, 1e-9);
      EXPECT_EQ(s.members, d.members);
    }
  }
}

TEST(Invariance, PermutationAndThreads) {
  const DotPattern p = gen_dot_scene(PlantedScene{9, 40, 200.0, 1, {512, 512}, 31});
  std::vector<std::size_t> perm(p.size());
  for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
  std::mt19937_64 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);
  DotPattern q{p.domain, {}};
  for (std::size_t k : perm) q.points.push_back(p.points[k]);

  for (DetectMode mode : {DetectMode::basic, DetectMode::refined}) {
    const auto a = detect_dots(p, mode);
    const auto b = detect_dots(q, mode);
    ASSERT_EQ(a.size(), b.size());
    std::vector<double> na, nb;
    for (const auto& d : a) na.push_back(d.nfa.value);
    for (const auto& d : b) nb.push_back(d.nfa.value);
    for (std::size_t k = 0; k < na.size(); ++k) EXPECT_NEAR(na[k], nb[k], 1e-9);

    DotDetectConfig cfg;
    cfg.threads = 3;
    const auto c = detect_dots(p, mode, cfg);
    ASSERT_EQ(a.size(), c.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].candidate, c[k].candidate);
      EXPECT_EQ(a[k].nfa.value, c[k].nfa.value);
    }
  }
}

TEST(Detect, Preconditions) {
  EXPECT_THROW(detect_basic(DotPattern{{10, 10}, {{1, 1}}}), std::invalid_argument);
  EXPECT_THROW(detect_refined(DotPattern{{10, 10}, {}}), std::invalid_argument);
  EXPECT_THROW(detect_basic(DotPattern{{0, 10}, {{1, 1}, {2, 2}}}), std::invalid_argument);
  // coincident dots are skipped, not scored
  EXPECT_TRUE(detect_basic(DotPattern{{10, 10}, {{1, 1}, {1, 1}}}).empty());
}

TEST(Detect, EpsilonMonotone) {
  const DotPattern p = gen_dot_scene(PlantedScene{8, 40, 150.0, 1, {512, 512}, 4});
  DotDetectConfig loose, strict;
  loose.epsilon = 10.0;
  strict.epsilon = 0.01;
  const auto a = detect_basic(p, loose), b = detect_basic(p), c = detect_basic(p, strict);
  EXPECT_GE(a.size(), b.size());
  EXPECT_GE(b.size(), c.size());
  for (const auto& d : c) EXPECT_LT(d.nfa.value, -2.0);
}
