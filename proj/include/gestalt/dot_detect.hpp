// dot_detect.hpp -- a-contrario alignment detectors for dot patterns.
//
// Candidates are thin rectangles spanned by a pair of dots (the axis) and a
// width drawn from a geometric family. Two scoring models are provided:
//
//   basic    NFA = N(N-1)W/2 * B(N-2, k-2, S_r/S_D)
//            k counts every dot in the rectangle; the two dots that define the
//            rectangle are in it by construction, so the tail is taken over
//            the N-2 remaining dots.
//
//   refined  NFA = N(N-1)W sqrt(N)/2 * min_c B(c, b(c), p1)
//            with a local dot count n = 2 max(M1, M3) + M2 taken over the
//            candidate (R2) and the two flanking bands (R1, R3),
//            p0 = S_B/S_L = 1/(c(1+2 beta)) and p1 = 1 - (1-p0)^n. Counting
//            occupied boxes instead of dots makes a tight cluster weigh no
//            more than a single dot.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "gestalt/core_stats.hpp"
#include "gestalt/geometry.hpp"
#include "gestalt/parallel.hpp"

namespace gestalt {

struct DotPattern {
  Domain domain;
  std::vector<Point> points;

  [[nodiscard]] std::size_t size() const { return points.size(); }
};

/// Rectangle centred on the segment points[i] -> points[j], spanning it
/// exactly lengthwise and extending width/2 to each side.
struct RectCandidate {
  std::size_t i = 0;
  std::size_t j = 0;
  double width = 0.0;

  friend auto operator<=>(const RectCandidate&, const RectCandidate&) = default;
};

enum class DetectMode { basic, refined };

/// How the flank counts enter the local dot count n(r, x).
enum class DensityEstimate {
  max_of_sides,  // 2 max(M1, M3) + M2
  pooled,        // M1 + M2 + M3; single local density, kept for comparison
};

struct WidthFamily {
  double ratio = 2.0;  // geometric growth of tested widths, starting at 1
  double cap = 4.0;    // widths stay <= length / cap
};

struct DotDetectConfig {
  double epsilon = 1.0;
  WidthFamily widths{};
  double band_factor = 1.0;  // flank band width as a multiple of the candidate width
  DensityEstimate density = DensityEstimate::max_of_sides;
  unsigned threads = 1;
};

struct LocalWindow {
  RectCandidate candidate;
  double band_width = 0.0;
  std::size_t m1 = 0, m2 = 0, m3 = 0;
  double band_area = 0.0;  // nominal area of one flank
  double r1_area = 0.0;    // flank areas clipped to the domain
  double r3_area = 0.0;
};

struct BoxScore {
  int boxes = 0;
  int occupied = 0;
  double p1 = 0.0;
  double tail_log10 = 0.0;
};

struct DotDetection {
  RectCandidate candidate;
  LogNfa nfa;
  std::vector<std::size_t> members;  // sorted, boundary-inclusive
  DetectMode mode = DetectMode::basic;
  // scoring context fixed before looking at the members; used for rescoring
  double log10_tests = 0.0;
  double p = 0.0;               // basic: S_r / S_D
  double flank_estimate = 0.0;  // refined: n(r, x) - M2
};

struct WidthSummary {
  std::size_t pairs = 0;       // non-degenerate pairs
  std::size_t candidates = 0;  // sum of per-pair width counts
  double mean_widths = 0.0;    // W
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

inline void require_detectable(const DotPattern& pat) {
  if (pat.points.size() < 2) throw std::invalid_argument("points: at least 2 required");
  if (!(pat.domain.width > 0.0) || !(pat.domain.height > 0.0))
    throw std::invalid_argument("domain: width and height must be positive");
}

/// Tested widths for an axis of the given length: 1, g, g^2, ... <= length/cap.
inline std::vector<double> widths_for_length(double length, const WidthFamily& wf = {}) {
  if (!(wf.ratio > 1.0) || !(wf.cap > 0.0)) throw std::invalid_argument("width family: ratio must exceed 1 and cap be positive");
  std::vector<double> out;
  const double limit = length / wf.cap + kGeomTol;
  for (double w = 1.0; w <= limit; w *= wf.ratio) out.push_back(w);
  return out;
}

inline WidthSummary width_family(const DotPattern& pat, const WidthFamily& wf = {}) {
  WidthSummary s;
  const auto& pts = pat.points;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double len = distance(pts[i], pts[j]);
      if (len <= kGeomTol) continue;
      ++s.pairs;
      s.candidates += widths_for_length(len, wf).size();
    }
  s.mean_widths = s.pairs ? static_cast<double>(s.candidates) / static_cast<double>(s.pairs) : 0.0;
  return s;
}

inline bool in_candidate(const AxisFrame& f, double width, Point p) {
  return f.within_length(f.along(p)) && std::abs(f.across(p)) <= width * 0.5 + kGeomTol;
}

inline std::vector<std::size_t> members_in_rect(const DotPattern& pat, const RectCandidate& c) {
  const AxisFrame f(pat.points.at(c.i), pat.points.at(c.j));
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < pat.points.size(); ++k)
    if (in_candidate(f, c.width, pat.points[k])) out.push_back(k);
  return out;
}

/// k(r, x): dots inside the candidate, its two defining dots included.
inline std::size_t count_in_rect(const DotPattern& pat, const RectCandidate& c) {
  return members_in_rect(pat, c).size();
}

inline LocalWindow local_window(const DotPattern& pat, const RectCandidate& c, double band_factor = 1.0) {
  const AxisFrame f(pat.points.at(c.i), pat.points.at(c.j));
  LocalWindow lw;
  lw.candidate = c;
  lw.band_width = band_factor * c.width;
  const double half = c.width * 0.5;
  const double outer = half + lw.band_width;
  for (const Point& p : pat.points) {
    if (!f.within_length(f.along(p))) continue;
    const double d = f.across(p);
    const double ad = std::abs(d);
    if (ad <= half + kGeomTol)
      ++lw.m2;
    else if (ad <= outer + kGeomTol)
      ++(d > 0.0 ? lw.m1 : lw.m3);
  }
  lw.band_area = f.length() * lw.band_width;
  lw.r1_area = band_area_in_domain(f, half, outer, pat.domain);
  lw.r3_area = band_area_in_domain(f, -outer, -half, pat.domain);
  return lw;
}

namespace detail {

// Flank count rescaled to a full band; negative when the band lies outside
// the domain and carries no information.
inline double scaled_flank(std::size_t count, double clipped, double nominal) {
  if (!(nominal > 0.0) || clipped <= nominal * 1e-12) return -1.0;
  if (clipped >= nominal * (1.0 - 1e-12)) return static_cast<double>(count);
  return static_cast<double>(count) * nominal / clipped;
}

inline double flank_estimate(std::size_t m1, double a1, std::size_t m3, double a3, double nominal,
                             DensityEstimate how) {
  const double s1 = scaled_flank(m1, a1, nominal);
  const double s3 = scaled_flank(m3, a3, nominal);
  if (s1 < 0.0 && s3 < 0.0) return 0.0;
  if (s1 < 0.0) return 2.0 * s3;
  if (s3 < 0.0) return 2.0 * s1;
  return how == DensityEstimate::max_of_sides ? 2.0 * std::max(s1, s3) : s1 + s3;
}

}  // namespace detail

/// n(r, x) = max(M1, M3) * 2 + M2, taken literally.
inline double local_count(std::size_t m1, std::size_t m2, std::size_t m3) {
  return 2.0 * static_cast<double>(std::max(m1, m3)) + static_cast<double>(m2);
}

/// n(r, x) for a measured window; flanks partly outside the domain are
/// rescaled by area before the maximum is taken.
inline double local_count(const LocalWindow& lw, DensityEstimate how = DensityEstimate::max_of_sides) {
  return detail::flank_estimate(lw.m1, lw.r1_area, lw.m3, lw.r3_area, lw.band_area, how) +
         static_cast<double>(lw.m2);
}

inline double local_count(const DotPattern& pat, const RectCandidate& c, double band_factor = 1.0) {
  return local_count(local_window(pat, c, band_factor));
}

/// Box counts tried by the refined detector: {2, ..., ceil(sqrt N) + 1}.
inline std::vector<int> box_counts(std::size_t n_points) {
  const int top = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_points)))) + 1;
  std::vector<int> out;
  for (int c = 2; c <= top; ++c) out.push_back(c);
  return out;
}

/// Number of the c equal lengthwise cells of [0, length] hit by the positions.
inline int occupied_boxes(std::span<const double> along, double length, int c, std::vector<char>& scratch) {
  scratch.assign(static_cast<std::size_t>(c), 0);
  int occupied = 0;
  for (double t : along) {
    const double u = std::clamp(t / length, 0.0, 1.0);
    const int box = std::min(c - 1, static_cast<int>(u * c));
    if (!scratch[static_cast<std::size_t>(box)]) {
      scratch[static_cast<std::size_t>(box)] = 1;
      ++occupied;
    }
  }
  return occupied;
}

inline double box_probability(int c, double band_factor) { return 1.0 / (c * (1.0 + 2.0 * band_factor)); }

/// p1 = B(n, 1, p0) = 1 - (1 - p0)^n, with n possibly fractional after flank rescaling.
inline double occupancy_probability(double n, double p0) {
  if (n <= 0.0) return 0.0;
  return std::clamp(-std::expm1(n * std::log1p(-p0)), 0.0, 1.0);
}

inline double basic_log10_tests(std::size_t n_points, double mean_widths) {
  const double n = static_cast<double>(n_points);
  return std::log10(n * (n - 1.0) * mean_widths / 2.0);
}

inline double refined_log10_tests(std::size_t n_points, double mean_widths) {
  return basic_log10_tests(n_points, mean_widths) + 0.5 * std::log10(static_cast<double>(n_points));
}

/// Basic-mode tail for a rectangle holding `free_inside` dots besides its two
/// defining dots, out of N-2 free dots.
inline double basic_tail_log10(std::size_t n_points, std::size_t free_inside, double p) {
  return binom_tail_log10({static_cast<std::int64_t>(n_points) - 2, static_cast<std::int64_t>(free_inside),
                           std::clamp(p, 0.0, 1.0)});
}

/// min over c of B(c, b(c), p1(c)) together with the per-c scores.
inline std::vector<BoxScore> box_scores(std::span<const double> along, double length, double n_local,
                                        std::span<const int> boxes, double band_factor) {
  std::vector<BoxScore> out;
  out.reserve(boxes.size());
  std::vector<char> scratch;
  for (int c : boxes) {
    BoxScore s;
    s.boxes = c;
    s.occupied = occupied_boxes(along, length, c, scratch);
    s.p1 = occupancy_probability(n_local, box_probability(c, band_factor));
    s.tail_log10 = binom_tail_log10({c, s.occupied, s.p1});
    out.push_back(s);
  }
  return out;
}

inline double min_box_tail_log10(std::span<const double> along, double length, double n_local,
                                 std::span<const int> boxes, double band_factor, std::vector<char>& scratch) {
  double best = 0.0;
  for (int c : boxes) {
    const int b = occupied_boxes(along, length, c, scratch);
    const double p1 = occupancy_probability(n_local, box_probability(c, band_factor));
    best = std::min(best, binom_tail_log10({c, b, p1}));
  }
  return best;
}

/// Output order: ascending NFA, then fewer members, then (i, j, width).
inline bool detection_less(const DotDetection& a, const DotDetection& b) {
  if (a.nfa != b.nfa) return a.nfa < b.nfa;
  if (a.members.size() != b.members.size()) return a.members.size() < b.members.size();
  return a.candidate < b.candidate;
}

// ---------------------------------------------------------------------------
// Candidate sweep
// ---------------------------------------------------------------------------

namespace detail {

struct NearPoint {
  std::size_t index;
  double t;  // along the axis
  double d;  // signed offset
};

struct PairScratch {
  std::vector<NearPoint> near;
  std::vector<double> along;
  std::vector<char> boxes;
};

inline bool window_inside(const AxisFrame& f, double half_extent, const Domain& dom) {
  for (Point p : {f.at(0.0, half_extent), f.at(0.0, -half_extent), f.at(f.length(), half_extent),
                  f.at(f.length(), -half_extent)})
    if (!dom.contains(p)) return false;
  return true;
}

// Visits every non-degenerate pair with its width list and the dots lying
// within `reach * max_width` of the axis. Per-worker results are concatenated
// and sorted by the caller, so the output does not depend on the thread count.
template <class Visit>
void sweep_pairs(const DotPattern& pat, const WidthFamily& wf, double reach, unsigned threads, Visit&& visit) {
  const auto& pts = pat.points;
  const std::size_t n = pts.size();
  const unsigned workers = worker_count(n, threads);
  std::vector<PairScratch> scratch(workers);
  parallel_for(n, threads, [&](std::size_t i, unsigned w) {
    PairScratch& s = scratch[w];
    for (std::size_t j = i + 1; j < n; ++j) {
      const AxisFrame f(pts[i], pts[j]);
      if (f.degenerate()) continue;
      const auto widths = widths_for_length(f.length(), wf);
      if (widths.empty()) continue;
      const double limit = widths.back() * reach + kGeomTol;
      s.near.clear();
      for (std::size_t k = 0; k < n; ++k) {
        const double t = f.along(pts[k]);
        if (!f.within_length(t)) continue;
        const double d = f.across(pts[k]);
        if (std::abs(d) <= limit) s.near.push_back({k, t, d});
      }
      visit(i, j, f, widths, s, w);
    }
  });
}

inline std::vector<std::size_t> near_members(const std::vector<NearPoint>& near, double half) {
  std::vector<std::size_t> out;
  for (const auto& np : near)
    if (std::abs(np.d) <= half + kGeomTol) out.push_back(np.index);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<DotDetection> merge_sorted(std::vector<std::vector<DotDetection>>& parts) {
  std::vector<DotDetection> out;
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
  std::sort(out.begin(), out.end(), detection_less);
  return out;
}

}  // namespace detail

/// Every (pair, width) candidate with NFA < epsilon under the basic model,
/// sorted with detection_less.
inline std::vector<DotDetection> detect_basic(const DotPattern& pat, const DotDetectConfig& cfg = {}) {
  require_detectable(pat);
  const WidthSummary ws = width_family(pat, cfg.widths);
  if (ws.candidates == 0) return {};
  const std::size_t n = pat.size();
  const double log_tests = basic_log10_tests(n, ws.mean_widths);
  const double log_eps = std::log10(cfg.epsilon);
  const double area = pat.domain.area();

  std::vector<std::vector<DotDetection>> found(worker_count(n, cfg.threads));
  detail::sweep_pairs(pat, cfg.widths, 0.5, cfg.threads,
                      [&](std::size_t i, std::size_t j, const AxisFrame& f, const std::vector<double>& widths,
                          detail::PairScratch& s, unsigned w) {
                        for (double width : widths) {
                          std::size_t inside = 0;
                          for (const auto& np : s.near)
                            if (std::abs(np.d) <= width * 0.5 + kGeomTol) ++inside;
                          const double p = f.length() * width / area;
                          const LogNfa nfa = nfa_from_log(log_tests, basic_tail_log10(n, inside >= 2 ? inside - 2 : 0, p));
                          if (!(nfa.value < log_eps)) continue;
                          DotDetection det;
                          det.candidate = {i, j, width};
                          det.nfa = nfa;
                          det.members = detail::near_members(s.near, width * 0.5);
                          det.mode = DetectMode::basic;
                          det.log10_tests = log_tests;
                          det.p = p;
                          found[w].push_back(std::move(det));
                        }
                      });
  return detail::merge_sorted(found);
}

/// Every (pair, width) candidate with NFA < epsilon under the refined model.
inline std::vector<DotDetection> detect_refined(const DotPattern& pat, const DotDetectConfig& cfg = {}) {
  require_detectable(pat);
  if (!(cfg.band_factor > 0.0)) throw std::invalid_argument("band factor must be positive");
  const WidthSummary ws = width_family(pat, cfg.widths);
  if (ws.candidates == 0) return {};
  const std::size_t n = pat.size();
  const double log_tests = refined_log10_tests(n, ws.mean_widths);
  const double log_eps = std::log10(cfg.epsilon);
  const std::vector<int> boxes = box_counts(n);
  const double beta = cfg.band_factor;

  std::vector<std::vector<DotDetection>> found(worker_count(n, cfg.threads));
  detail::sweep_pairs(
      pat, cfg.widths, 0.5 + beta, cfg.threads,
      [&](std::size_t i, std::size_t j, const AxisFrame& f, const std::vector<double>& widths,
          detail::PairScratch& s, unsigned w) {
        for (double width : widths) {
          const double half = width * 0.5;
          const double outer = half + beta * width;
          std::size_t m1 = 0, m3 = 0;
          s.along.clear();
          for (const auto& np : s.near) {
            const double ad = std::abs(np.d);
            if (ad <= half + kGeomTol)
              s.along.push_back(np.t);
            else if (ad <= outer + kGeomTol)
              ++(np.d > 0.0 ? m1 : m3);
          }
          const double nominal = f.length() * beta * width;
          double a1 = nominal, a3 = nominal;
          if (!detail::window_inside(f, outer, pat.domain)) {
            a1 = band_area_in_domain(f, half, outer, pat.domain);
            a3 = band_area_in_domain(f, -outer, -half, pat.domain);
          }
          const double flank = detail::flank_estimate(m1, a1, m3, a3, nominal, cfg.density);
          const double n_local = flank + static_cast<double>(s.along.size());
          const double tail = min_box_tail_log10(s.along, f.length(), n_local, boxes, beta, s.boxes);
          const LogNfa nfa = nfa_from_log(log_tests, tail);
          if (!(nfa.value < log_eps)) continue;
          DotDetection det;
          det.candidate = {i, j, width};
          det.nfa = nfa;
          det.members = detail::near_members(s.near, half);
          det.mode = DetectMode::refined;
          det.log10_tests = log_tests;
          det.flank_estimate = flank;
          found[w].push_back(std::move(det));
        }
      });
  return detail::merge_sorted(found);
}

inline std::vector<DotDetection> detect_dots(const DotPattern& pat, DetectMode mode, const DotDetectConfig& cfg = {}) {
  return mode == DetectMode::basic ? detect_basic(pat, cfg) : detect_refined(pat, cfg);
}

/// Scores one candidate from scratch, with the pattern-level number of tests.
/// Independent of the sweep's pruning; the detection is returned whether or
/// not it is meaningful.
inline DotDetection score_candidate(const DotPattern& pat, const RectCandidate& c, DetectMode mode,
                                    const DotDetectConfig& cfg = {}) {
  require_detectable(pat);
  const WidthSummary ws = width_family(pat, cfg.widths);
  const std::size_t n = pat.size();
  const AxisFrame f(pat.points.at(c.i), pat.points.at(c.j));
  if (f.degenerate()) throw std::invalid_argument("candidate: defining dots coincide");
  DotDetection det;
  det.candidate = c;
  det.mode = mode;
  det.members = members_in_rect(pat, c);
  if (mode == DetectMode::basic) {
    det.log10_tests = basic_log10_tests(n, ws.mean_widths);
    det.p = f.length() * c.width / pat.domain.area();
    det.nfa = nfa_from_log(det.log10_tests, basic_tail_log10(n, det.members.size() >= 2 ? det.members.size() - 2 : 0, det.p));
  } else {
    det.log10_tests = refined_log10_tests(n, ws.mean_widths);
    const LocalWindow lw = local_window(pat, c, cfg.band_factor);
    det.flank_estimate = local_count(lw, cfg.density) - static_cast<double>(lw.m2);
    std::vector<double> along;
    for (std::size_t k : det.members) along.push_back(f.along(pat.points[k]));
    std::vector<char> scratch;
    const auto boxes = box_counts(n);
    const double tail = min_box_tail_log10(along, f.length(), det.flank_estimate + static_cast<double>(along.size()),
                                           boxes, cfg.band_factor, scratch);
    det.nfa = nfa_from_log(det.log10_tests, tail);
  }
  return det;
}

/// NFA of a detection restricted to a subset of its members, keeping the
/// rectangle, the number of tests and (refined mode) the flank estimate.
inline LogNfa rescore(const DotPattern& pat, const DotDetection& det, std::span<const std::size_t> members,
                      const DotDetectConfig& cfg = {}) {
  const RectCandidate& c = det.candidate;
  if (det.mode == DetectMode::basic) {
    const auto free = static_cast<std::size_t>(
        std::count_if(members.begin(), members.end(), [&](std::size_t k) { return k != c.i && k != c.j; }));
    return nfa_from_log(det.log10_tests, basic_tail_log10(pat.size(), free, det.p));
  }
  const AxisFrame f(pat.points.at(c.i), pat.points.at(c.j));
  std::vector<double> along;
  along.reserve(members.size());
  for (std::size_t k : members) along.push_back(f.along(pat.points.at(k)));
  std::vector<char> scratch;
  const auto boxes = box_counts(pat.size());
  const double tail = min_box_tail_log10(along, f.length(), det.flank_estimate + static_cast<double>(along.size()),
                                         boxes, cfg.band_factor, scratch);
  return nfa_from_log(det.log10_tests, tail);
}

}  // namespace gestalt
