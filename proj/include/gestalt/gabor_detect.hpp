// gabor_detect.hpp -- alignment detection in fields of oriented elements.
//
// Each pair of elements spans a rectangle of fixed width w. Inside it, n
// elements are counted and, for every angular precision tau of a finite
// family T, the k_tau of them whose orientation is within tau of the axis
// (modulo pi). Under the background model orientations are i.i.d. uniform on
// [0, pi), so an element is tau-aligned with probability 2 tau / pi:
//
//   NFA = N(N-1)/2 * #T * min_tau B(n, k_tau, 2 tau / pi)
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <iterator>
#include <optional>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "gestalt/core_stats.hpp"
#include "gestalt/geometry.hpp"
#include "gestalt/parallel.hpp"

namespace gestalt {

struct GaborElement {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // orientation in [0, pi)

  [[nodiscard]] Point position() const { return {x, y}; }
  friend bool operator==(const GaborElement&, const GaborElement&) = default;
};

struct GaborField {
  Domain domain;
  std::vector<GaborElement> elements;

  [[nodiscard]] std::size_t size() const { return elements.size(); }
};

inline std::vector<double> default_precisions() {
  constexpr double pi = std::numbers::pi;
  return {pi / 32.0, pi / 16.0, pi / 8.0, pi / 4.0};
}

struct GaborDetectConfig {
  std::optional<double> width;  // defaults to domain width / sqrt(N)
  std::vector<double> precisions = default_precisions();
  double epsilon = 1.0;
  unsigned threads = 1;
};

struct GaborCandidate {
  std::size_t i = 0;
  std::size_t j = 0;
  double width = 0.0;
  std::size_t inside = 0;            // n(r, g)
  std::vector<std::size_t> aligned;  // k_tau(r, g), one per precision
  std::size_t best_precision = 0;    // index of the minimizing tau
};

struct GaborDetection {
  GaborCandidate candidate;
  LogNfa nfa;
  std::vector<std::size_t> members;  // elements inside the rectangle, sorted
  double log10_tests = 0.0;
  double axis = 0.0;  // axis direction in [0, pi)
};

struct GaborDetectionReport {
  LogNfa best_nfa{std::numeric_limits<double>::infinity()};
  std::optional<GaborDetection> best;
  std::vector<GaborDetection> detections;  // NFA < epsilon, ascending
};

/// p(tau) = 2 tau / pi.
inline double aligned_probability(double tau) { return std::min(1.0, 2.0 * tau / std::numbers::pi); }

/// |theta - axis| modulo pi strictly below tau.
inline bool tau_aligned(double theta, double axis, double tau) {
  if (!(tau > 0.0 && tau <= std::numbers::pi / 2.0 + 1e-15))
    throw std::invalid_argument("tau must lie in (0, pi/2]");
  return orientation_distance(theta, axis) < tau;
}

inline double gabor_width(const GaborField& field, const GaborDetectConfig& cfg) {
  if (cfg.width) return *cfg.width;
  return field.domain.width / std::sqrt(static_cast<double>(field.size()));
}

inline double gabor_log10_tests(std::size_t n_elements, std::size_t n_precisions) {
  const double n = static_cast<double>(n_elements);
  return std::log10(n * (n - 1.0) / 2.0 * static_cast<double>(n_precisions));
}

namespace detail {

inline void require_gabor(const GaborField& field, const GaborDetectConfig& cfg) {
  if (field.size() < 2) throw std::invalid_argument("elements: at least 2 required");
  if (cfg.precisions.empty()) throw std::invalid_argument("precision family must not be empty");
  for (double tau : cfg.precisions)
    if (!(tau > 0.0 && tau <= std::numbers::pi / 2.0 + 1e-15)) throw std::invalid_argument("tau must lie in (0, pi/2]");
  if (cfg.width && !(*cfg.width > 0.0)) throw std::invalid_argument("width must be positive");
}

// min over tau of the tail, for the given members; fills counts when asked.
inline double min_tau_tail(std::span<const std::size_t> members, const GaborField& field, double axis,
                           std::span<const double> precisions, GaborCandidate* out) {
  double best = 0.0;
  std::size_t best_index = 0;
  for (std::size_t t = 0; t < precisions.size(); ++t) {
    std::size_t k = 0;
    for (std::size_t m : members)
      if (orientation_distance(field.elements[m].theta, axis) < precisions[t]) ++k;
    const double tail = binom_tail_log10({static_cast<std::int64_t>(members.size()), static_cast<std::int64_t>(k),
                                          aligned_probability(precisions[t])});
    if (out) out->aligned.push_back(k);
    if (tail < best) {
      best = tail;
      best_index = t;
    }
  }
  if (out) out->best_precision = best_index;
  return best;
}

inline bool gabor_less(const GaborDetection& a, const GaborDetection& b) {
  if (a.nfa != b.nfa) return a.nfa < b.nfa;
  if (a.members.size() != b.members.size()) return a.members.size() < b.members.size();
  return std::tie(a.candidate.i, a.candidate.j) < std::tie(b.candidate.i, b.candidate.j);
}

}  // namespace detail

/// Scores the rectangle spanned by elements i and j.
inline GaborDetection score_gabor_candidate(const GaborField& field, std::size_t i, std::size_t j,
                                            const GaborDetectConfig& cfg = {}) {
  detail::require_gabor(field, cfg);
  const AxisFrame f(field.elements.at(i).position(), field.elements.at(j).position());
  if (f.degenerate()) throw std::invalid_argument("candidate: defining elements coincide");
  GaborDetection det;
  det.candidate.i = i;
  det.candidate.j = j;
  det.candidate.width = gabor_width(field, cfg);
  det.axis = f.direction_mod_pi();
  for (std::size_t k = 0; k < field.size(); ++k) {
    const Point p = field.elements[k].position();
    if (f.within_length(f.along(p)) && std::abs(f.across(p)) <= det.candidate.width * 0.5 + kGeomTol)
      det.members.push_back(k);
  }
  det.candidate.inside = det.members.size();
  det.log10_tests = gabor_log10_tests(field.size(), cfg.precisions.size());
  det.nfa = nfa_from_log(det.log10_tests, detail::min_tau_tail(det.members, field, det.axis, cfg.precisions, &det.candidate));
  return det;
}

/// Sweeps all N(N-1)/2 pairs; reports the best NFA and all candidates with
/// NFA < epsilon.
inline GaborDetectionReport detect_gabor(const GaborField& field, const GaborDetectConfig& cfg = {}) {
  detail::require_gabor(field, cfg);
  const std::size_t n = field.size();
  const double width = gabor_width(field, cfg);
  const double half = width * 0.5 + kGeomTol;
  const double log_tests = gabor_log10_tests(n, cfg.precisions.size());
  const double log_eps = std::log10(cfg.epsilon);
  const auto& els = field.elements;

  std::vector<double> probs;
  for (double tau : cfg.precisions) probs.push_back(aligned_probability(tau));

  const unsigned workers = worker_count(n, cfg.threads);
  std::vector<std::vector<GaborDetection>> found(workers);
  std::vector<GaborDetection> best(workers);
  std::vector<char> has_best(workers, 0);
  std::vector<std::vector<std::size_t>> inside_buf(workers);
  std::vector<std::vector<double>> dev_buf(workers);

  parallel_for(n, cfg.threads, [&](std::size_t i, unsigned w) {
    auto& inside = inside_buf[w];
    auto& dev = dev_buf[w];
    for (std::size_t j = i + 1; j < n; ++j) {
      const AxisFrame f(els[i].position(), els[j].position());
      if (f.degenerate()) continue;
      const double axis = f.direction_mod_pi();
      inside.clear();
      dev.clear();
      for (std::size_t k = 0; k < n; ++k) {
        const Point p = els[k].position();
        if (!f.within_length(f.along(p)) || std::abs(f.across(p)) > half) continue;
        inside.push_back(k);
        dev.push_back(orientation_distance(els[k].theta, axis));
      }
      double tail = 0.0;
      for (std::size_t t = 0; t < probs.size(); ++t) {
        const auto k = std::count_if(dev.begin(), dev.end(), [&](double d) { return d < cfg.precisions[t]; });
        tail = std::min(tail, binom_tail_log10({static_cast<std::int64_t>(inside.size()), k, probs[t]}));
      }
      const LogNfa nfa = nfa_from_log(log_tests, tail);
      const bool meaningful = nfa.value < log_eps;
      const bool may_improve = !has_best[w] || nfa <= best[w].nfa;
      if (!meaningful && !may_improve) continue;

      GaborDetection det;
      det.candidate.i = i;
      det.candidate.j = j;
      det.candidate.width = width;
      det.candidate.inside = inside.size();
      det.members = inside;
      det.log10_tests = log_tests;
      det.axis = axis;
      det.nfa = nfa_from_log(log_tests, detail::min_tau_tail(det.members, field, axis, cfg.precisions, &det.candidate));
      if (may_improve && (!has_best[w] || detail::gabor_less(det, best[w]))) {
        best[w] = det;
        has_best[w] = 1;
      }
      if (meaningful) found[w].push_back(std::move(det));
    }
  });

  GaborDetectionReport report;
  for (unsigned w = 0; w < workers; ++w) {
    if (has_best[w] && (!report.best || detail::gabor_less(best[w], *report.best))) report.best = best[w];
    std::move(found[w].begin(), found[w].end(), std::back_inserter(report.detections));
  }
  if (report.best) report.best_nfa = report.best->nfa;
  std::sort(report.detections.begin(), report.detections.end(), detail::gabor_less);
  return report;
}

/// NFA of a detection restricted to a subset of its members.
inline LogNfa rescore(const GaborField& field, const GaborDetection& det, std::span<const std::size_t> members,
                      const GaborDetectConfig& cfg = {}) {
  return nfa_from_log(det.log10_tests, detail::min_tau_tail(members, field, det.axis, cfg.precisions, nullptr));
}

}  // namespace gestalt
