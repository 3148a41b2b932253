#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gestalt/core_stats.hpp"
#include "oracles.hpp"

using namespace gestalt;

namespace {

double rel_err(double got, double want) {
  if (want == 0.0) return std::abs(got);
  return std::abs(got - want) / std::abs(want);
}

}  // namespace

TEST(BinomTail, MatchesEnumerationForSmallN) {
  for (int n = 0; n <= 12; ++n)
    for (int k = 0; k <= n; ++k)
      for (int i = 1; i <= 19; ++i) {
        const oracle::Real p = oracle::Real(i) / 20;
        const double want = static_cast<double>(oracle::enumerated_tail(n, k, p));
        const double got = binom_tail({n, k, 0.05 * i});
        EXPECT_LE(rel_err(got, want), 1e-9) << "n=" << n << " k=" << k << " p=" << 0.05 * i;
        EXPECT_LE(rel_err(static_cast<double>(binom_tail_exact({n, k, 0.05 * i})), want), 1e-12);
      }
}

TEST(BinomTail, WorkedValues) {
  EXPECT_DOUBLE_EQ(binom_tail({7, 0, 0.3}), 1.0);
  EXPECT_NEAR(binom_tail({5, 3, 0.5}), 0.5, 1e-15);
  EXPECT_NEAR(binom_tail({10, 10, 0.25}), std::pow(0.25, 10), 1e-20);
  EXPECT_NEAR(binom_tail({10, 10, 0.25}), 9.5367e-7, 1e-10);
}

TEST(BinomTail, EdgeProbabilities) {
  EXPECT_EQ(binom_tail_log10({10, 0, 0.0}), 0.0);
  EXPECT_EQ(binom_tail_log10({10, 1, 0.0}), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(binom_tail_log10({10, 10, 1.0}), 0.0);
  EXPECT_EQ(binom_tail_log10({0, 0, 0.4}), 0.0);
}

TEST(BinomTail, RejectsBadParameters) {
  EXPECT_THROW(binom_tail_log10({5, 6, 0.5}), std::invalid_argument);
  EXPECT_THROW(binom_tail_log10({5, -1, 0.5}), std::invalid_argument);
  EXPECT_THROW(binom_tail_log10({5, 2, -0.1}), std::invalid_argument);
  EXPECT_THROW(binom_tail_log10({5, 2, 1.1}), std::invalid_argument);
  EXPECT_THROW(binom_tail_log10({5, 2, std::nan("")}), std::invalid_argument);
  EXPECT_THROW(binom_tail_exact({31, 2, 0.5}), std::invalid_argument);
}

// Deep tails and large n, against 50-digit summation.
TEST(BinomTail, LargeNAgainstMultiprecision) {
  struct Case {
    std::int64_t n, k;
    double p;
  };
  const Case cases[] = {{200, 10, 0.01},   {200, 150, 0.5},   {1000, 3, 1e-4},   {1000, 900, 0.3},
                        {2000, 1, 1e-6},   {5000, 40, 0.002}, {5000, 2600, 0.5}, {625, 5, 7.6e-4},
                        {98, 2, 1.5e-5},   {300, 299, 0.9},   {300, 100, 0.35},  {3000, 2000, 0.001}};
  for (const auto& c : cases) {
    const oracle::Real p(c.p);
    const double want = oracle::log10_of(oracle::summed_tail(c.n, c.k, p));
    const double got = binom_tail_log10({c.n, c.k, c.p});
    EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, std::abs(want))) << c.n << " " << c.k << " " << c.p;
  }
}

TEST(BinomTail, ExtremeTailStaysFinite) {
  const double v = binom_tail_log10({5000, 5000, 1e-3});
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, 5000 * std::log10(1e-3), 1e-8);
}

TEST(BinomTail, MonotoneSweep) {
  for (int n : {1, 7, 40, 333}) {
    double prev_k = 1.0;
    for (int k = 0; k <= n; ++k) {
      const double v = binom_tail_log10({n, k, 0.37});
      EXPECT_LE(v, prev_k + 1e-12);
      prev_k = v;
    }
    for (int k : {0, 1, n / 2, n}) {
      double prev_p = -std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 100; ++i) {
        const double v = binom_tail_log10({n, k, i / 100.0});
        EXPECT_GE(v, prev_p - 1e-12) << n << " " << k << " " << i;
        prev_p = v;
      }
    }
  }
}

TEST(Nfa, Assembly) {
  EXPECT_DOUBLE_EQ(nfa_from(1.0, -3.0).value, -3.0);
  EXPECT_NEAR(nfa_from(1e6, -6.0).value, 0.0, 1e-12);
  EXPECT_THROW(nfa_from(0.0, -1.0), std::invalid_argument);
  EXPECT_THROW(nfa_from(-5.0, -1.0), std::invalid_argument);
  EXPECT_LT(nfa_from(10.0, -3.0), nfa_from(100.0, -3.0));
  EXPECT_LT(nfa_from(10.0, -4.0), nfa_from(10.0, -3.0));
}

// N = 49 dots, 5 of them in the rectangle (2 defining + 3), W = 8 widths.
TEST(Nfa, CrossCheckAgainstExactPath) {
  const double tests = 49.0 * 48.0 * 8.0 / 2.0;
  const double p = 60.0 * 4.0 / (256.0 * 256.0);
  const double fast = nfa_from(tests, binom_tail_log10({47, 3, p})).value;
  const oracle::Real exact = oracle::summed_tail(47, 3, oracle::Real(p)) * tests;
  EXPECT_NEAR(fast, oracle::log10_of(exact), 1e-10);
  // the extended-precision path agrees as well where it applies
  EXPECT_NEAR(std::log10(static_cast<double>(binom_tail_exact({30, 3, p}))), binom_tail_log10({30, 3, p}), 1e-10);
}

TEST(Nfa, Meaningfulness) {
  EXPECT_TRUE(is_meaningful(LogNfa{-5.0}));
  EXPECT_FALSE(is_meaningful(LogNfa{std::log10(99.5)}));
  EXPECT_FALSE(is_meaningful(LogNfa{0.0}));
  EXPECT_TRUE(is_meaningful(LogNfa{-1e-12}));
  EXPECT_TRUE(is_meaningful(LogNfa{-2.5}, 0.01));
  EXPECT_FALSE(is_meaningful(LogNfa{-2.0}, 0.01));
  EXPECT_FALSE(is_meaningful(LogNfa{-100.0}, 0.0));
  EXPECT_NEAR(LogNfa{-2.0}.nfa(), 0.01, 1e-15);
}
