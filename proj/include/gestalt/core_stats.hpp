// core_stats.hpp -- binomial tails and log10 NFA arithmetic.
//
// Every detector in this library reduces to the same shape of test:
//   NFA = (number of tests) * P[Bin(n, p) >= k]
// NFAs routinely reach 1e-50 and below, so everything is carried as log10.
#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gestalt {

/// Base-10 logarithm of a number of false alarms.
struct LogNfa {
  double value = 0.0;

  constexpr auto operator<=>(const LogNfa&) const = default;

  /// NFA on the linear scale; only meant for display.
  [[nodiscard]] double nfa() const { return std::pow(10.0, value); }
};

struct BinTailParams {
  std::int64_t n = 0;
  std::int64_t k = 0;
  double p = 0.0;
};

namespace detail {

inline void check_tail_params(const BinTailParams& b) {
  if (b.n < 0) throw std::invalid_argument("binomial tail: n must be non-negative");
  if (b.k < 0 || b.k > b.n)
    throw std::invalid_argument("binomial tail: k must lie in [0, n], got k=" +
                                std::to_string(b.k) + " n=" + std::to_string(b.n));
  if (!(b.p >= 0.0 && b.p <= 1.0))
    throw std::invalid_argument("binomial tail: p must lie in [0, 1]");
}

// ln[C(n,j) p^j q^(n-j)]
inline double log_term(double n, double j, double log_p, double log_q) {
  return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
         j * log_p + (n - j) * log_q;
}

constexpr double kSeriesEps = 1e-18;

}  // namespace detail

/// log10 P[Bin(n, p) >= k].
///
/// The sum is anchored on its largest term: above the mode the upper tail is
/// summed directly as t_k * (1 + r_k + r_k r_{k+1} + ...); below it the lower
/// tail is summed the same way and subtracted with log1p.
inline double binom_tail_log10(const BinTailParams& b) {
  detail::check_tail_params(b);
  const std::int64_t n = b.n, k = b.k;
  const double p = b.p;
  if (k == 0) return 0.0;
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return 0.0;

  const double q = 1.0 - p;
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double dn = static_cast<double>(n);
  const auto mode = static_cast<std::int64_t>(std::floor((dn + 1.0) * p));

  if (k > mode) {
    // terms decrease from j = k on
    double sum = 1.0, term = 1.0;
    for (std::int64_t j = k; j < n; ++j) {
      const double r = static_cast<double>(n - j) / static_cast<double>(j + 1) * (p / q);
      term *= r;
      sum += term;
      // remaining mass is bounded by a geometric series of ratio r
      if (r < 1.0 && term * r / (1.0 - r) < sum * detail::kSeriesEps) break;
    }
    const double lt = detail::log_term(dn, static_cast<double>(k), log_p, log_q);
    return (lt + std::log(sum)) / std::numbers::ln10;
  }

  // lower tail P[X <= k-1], terms decrease from j = k-1 downwards
  double sum = 1.0, term = 1.0;
  for (std::int64_t j = k - 1; j > 0; --j) {
    const double r = static_cast<double>(j) / static_cast<double>(n - j + 1) * (q / p);
    term *= r;
    sum += term;
    if (r < 1.0 && term * r / (1.0 - r) < sum * detail::kSeriesEps) break;
  }
  const double lower =
      std::exp(detail::log_term(dn, static_cast<double>(k - 1), log_p, log_q)) * sum;
  if (lower < 1.0) return std::log1p(-lower) / std::numbers::ln10;

  // only reachable through rounding on near-degenerate inputs
  double upper = 0.0;
  for (std::int64_t j = k; j <= n; ++j)
    upper += std::exp(detail::log_term(dn, static_cast<double>(j), log_p, log_q));
  return std::log10(upper);
}

/// P[Bin(n, p) >= k].
inline double binom_tail(const BinTailParams& b) {
  return std::pow(10.0, binom_tail_log10(b));
}

/// Direct summation in extended precision with exact integer binomial
/// coefficients. Limited to n <= 30 so that C(n, j) fits in 64 bits exactly.
inline long double binom_tail_exact(const BinTailParams& b) {
  detail::check_tail_params(b);
  if (b.n > 30) throw std::invalid_argument("binom_tail_exact: n must be <= 30");
  const long double p = b.p, q = 1.0L - static_cast<long double>(b.p);
  long double total = 0.0L;
  std::uint64_t coeff = 1;  // C(n, j)
  for (std::int64_t j = 0; j <= b.n; ++j) {
    if (j > 0) coeff = coeff * static_cast<std::uint64_t>(b.n - j + 1) / static_cast<std::uint64_t>(j);
    if (j >= b.k) {
      long double term = static_cast<long double>(coeff);
      for (std::int64_t a = 0; a < j; ++a) term *= p;
      for (std::int64_t a = j; a < b.n; ++a) term *= q;
      total += term;
    }
  }
  return total;
}

/// NFA assembly: log10(tests) + log10(tail).
inline LogNfa nfa_from(double tests, double tail_log10) {
  if (!(tests > 0.0)) throw std::invalid_argument("nfa_from: number of tests must be positive");
  return LogNfa{std::log10(tests) + tail_log10};
}

/// Same, for callers that already hold log10(tests).
inline LogNfa nfa_from_log(double log10_tests, double tail_log10) {
  return LogNfa{log10_tests + tail_log10};
}

/// NFA < epsilon, compared in the log domain.
inline bool is_meaningful(LogNfa nfa, double epsilon = 1.0) {
  if (!(epsilon > 0.0)) return false;
  return nfa.value < std::log10(epsilon);
}

}  // namespace gestalt
