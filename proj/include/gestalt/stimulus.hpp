// stimulus.hpp -- seeded generators for Gabor stimuli and dot scenes.
//
// All randomness flows through gestalt::Rng in a fixed order, so a spec and
// its seed reproduce the same record bit for bit. Generated numbers are
// rounded to 12 significant digits: what is written to disk is exactly what
// the in-process pipeline sees.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gestalt/dot_detect.hpp"
#include "gestalt/format.hpp"
#include "gestalt/gabor_detect.hpp"
#include "gestalt/geometry.hpp"
#include "gestalt/random.hpp"

namespace gestalt {

// ---------------------------------------------------------------------------
// Gabor stimuli
// ---------------------------------------------------------------------------

enum class StimulusKind { negative, positive };

/// The nine orientation jitter levels of the reference experiment.
inline constexpr std::array<double, 9> kJitterLevels = {
    0.0,
    std::numbers::pi / 5.0,
    std::numbers::pi / 4.0,
    std::numbers::pi / 3.0,
    std::numbers::pi / 2.0,
    2.0 * std::numbers::pi / 3.0,
    3.0 * std::numbers::pi / 4.0,
    4.0 * std::numbers::pi / 5.0,
    std::numbers::pi,
};

/// Planted segment lengths (element counts) of the reference experiment.
inline constexpr std::array<std::size_t, 8> kSegmentLengths = {3, 4, 5, 6, 7, 8, 9, 10};

struct StimulusSpec {
  StimulusKind kind = StimulusKind::negative;
  std::size_t n = 200;
  Domain domain{496.0, 496.0};
  std::size_t length = 10;  // planted elements (positive only)
  double jitter = 0.0;      // width of the orientation interval, radians
  std::optional<double> min_spacing;     // default: expected spacing / 2
  std::optional<double> planted_spacing; // default: expected spacing
  std::uint64_t seed = 0;

  /// sqrt(area / N): mean distance between neighbouring elements.
  [[nodiscard]] double expected_spacing() const { return std::sqrt(domain.area() / static_cast<double>(n)); }
  [[nodiscard]] double effective_min_spacing() const { return min_spacing.value_or(expected_spacing() / 2.0); }
  [[nodiscard]] double effective_planted_spacing() const { return planted_spacing.value_or(expected_spacing()); }
};

struct PlantedSegment {
  Point a;
  Point b;
  double direction = 0.0;            // in [0, pi)
  std::vector<std::size_t> members;  // indices into the field, in order from a to b
};

struct StimulusRecord {
  std::string id;
  StimulusSpec spec;
  GaborField field;
  std::optional<PlantedSegment> truth;
};

inline constexpr int kMaxPlacementAttempts = 100000;

namespace detail {

inline bool far_enough(Point p, const std::vector<Point>& placed, double min_spacing) {
  const double m2 = min_spacing * min_spacing;
  for (const Point& q : placed) {
    const double dx = p.x - q.x, dy = p.y - q.y;
    if (dx * dx + dy * dy < m2) return false;
  }
  return true;
}

inline void validate_spec(const StimulusSpec& s) {
  if (s.n < 1) throw std::invalid_argument("stimulus: n must be positive");
  if (!(s.domain.width > 0.0) || !(s.domain.height > 0.0)) throw std::invalid_argument("stimulus: empty domain");
  if (!(s.jitter >= 0.0 && s.jitter <= std::numbers::pi + 1e-9)) throw std::invalid_argument("stimulus: jitter must lie in [0, pi]");
  if (s.effective_min_spacing() < 0.0) throw std::invalid_argument("stimulus: negative min spacing");
  if (s.kind == StimulusKind::positive && (s.length < 2 || s.length > s.n))
    throw std::invalid_argument("stimulus: positive stimuli need 2 <= length <= n");
}

// Rejection sampling of `count` positions at distance >= min_spacing from
// each other and from everything already in `placed`.
inline void place_background(Rng& rng, const Domain& dom, std::size_t count, double min_spacing,
                             std::vector<Point>& placed) {
  for (std::size_t k = 0; k < count; ++k) {
    int attempts = 0;
    for (;;) {
      // rounded before the check so the spacing holds for the stored values
      const Point p{std::clamp(round_sig12(rng.uniform(0.0, dom.width)), 0.0, dom.width),
                    std::clamp(round_sig12(rng.uniform(0.0, dom.height)), 0.0, dom.height)};
      if (far_enough(p, placed, min_spacing)) {
        placed.push_back(p);
        break;
      }
      if (++attempts >= kMaxPlacementAttempts)
        throw std::runtime_error("stimulus: cannot place element " + std::to_string(k) +
                                 " at the requested minimum spacing");
    }
  }
}

// Fisher-Yates; permutation[new_index] = old_index.
inline std::vector<std::size_t> shuffled_order(Rng& rng, std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
  return order;
}

}  // namespace detail

// Generation depends only on the 12-digit rendering of the real-valued
// parameters, so a spec read back from a manifest regenerates the same record.
inline StimulusSpec normalized(StimulusSpec s) {
  s.jitter = round_sig12(s.jitter);
  s.domain = {round_sig12(s.domain.width), round_sig12(s.domain.height)};
  if (s.min_spacing) s.min_spacing = round_sig12(*s.min_spacing);
  if (s.planted_spacing) s.planted_spacing = round_sig12(*s.planted_spacing);
  return s;
}

inline double quantize_coord(double v, double hi) { return std::clamp(round_sig12(v), 0.0, hi); }

inline GaborElement quantize(const Point& p, double theta, const Domain& dom) {
  return {quantize_coord(p.x, dom.width), quantize_coord(p.y, dom.height), round_angle12(theta)};
}

inline std::string stimulus_id(const StimulusSpec& s) {
  char buf[96];
  if (s.kind == StimulusKind::negative)
    std::snprintf(buf, sizeof buf, "neg-n%zu-s%llu", s.n, static_cast<unsigned long long>(s.seed));
  else
    std::snprintf(buf, sizeof buf, "pos-n%zu-L%zu-J%.4f-s%llu", s.n, s.length, s.jitter,
                  static_cast<unsigned long long>(s.seed));
  return buf;
}

/// N elements, min-spacing rejection positions, orientations uniform on [0, pi).
inline StimulusRecord gen_negative(const StimulusSpec& raw) {
  const StimulusSpec spec = normalized(raw);
  detail::validate_spec(spec);
  if (spec.kind != StimulusKind::negative) throw std::invalid_argument("gen_negative: spec is not negative");
  Rng rng(spec.seed);
  std::vector<Point> pos;
  detail::place_background(rng, spec.domain, spec.n, spec.effective_min_spacing(), pos);
  StimulusRecord rec;
  rec.id = stimulus_id(spec);
  rec.spec = spec;
  rec.field.domain = spec.domain;
  for (const Point& p : pos) rec.field.elements.push_back(quantize(p, rng.angle_pi(), spec.domain));
  return rec;
}

/// L evenly spaced elements on a random segment, oriented uniformly within
/// [alpha - J/2, alpha + J/2] around the segment direction alpha, among
/// N - L background elements as in gen_negative. Element order is shuffled
/// so that indices carry no trace of the planted segment.
inline StimulusRecord gen_positive(const StimulusSpec& raw) {
  const StimulusSpec spec = normalized(raw);
  detail::validate_spec(spec);
  if (spec.kind != StimulusKind::positive) throw std::invalid_argument("gen_positive: spec is not positive");
  Rng rng(spec.seed);
  const double spacing = spec.effective_planted_spacing();
  const double margin = spec.effective_min_spacing();
  if (spacing + 1e-12 < margin) throw std::invalid_argument("stimulus: planted spacing below min spacing");
  const double seg_len = spacing * static_cast<double>(spec.length - 1);
  const Domain& dom = spec.domain;

  Point a{}, b{};
  double heading = 0.0;
  for (int attempts = 0;; ++attempts) {
    if (attempts >= kMaxPlacementAttempts) throw std::runtime_error("stimulus: planted segment does not fit the domain");
    heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    a = {rng.uniform(margin, dom.width - margin), rng.uniform(margin, dom.height - margin)};
    b = {a.x + seg_len * std::cos(heading), a.y + seg_len * std::sin(heading)};
    if (b.x >= margin && b.x <= dom.width - margin && b.y >= margin && b.y <= dom.height - margin) break;
  }
  const double direction = wrap_pi(heading);
  // Members are interpolated between the stored endpoints, then rounded:
  // each sits within 1e-9 of its exact uniformly spaced position.
  a = {quantize_coord(a.x, dom.width), quantize_coord(a.y, dom.height)};
  b = {quantize_coord(b.x, dom.width), quantize_coord(b.y, dom.height)};

  std::vector<Point> pos;
  std::vector<double> theta;
  for (std::size_t m = 0; m < spec.length; ++m) {
    const double t = static_cast<double>(m) / static_cast<double>(spec.length - 1);
    pos.push_back({quantize_coord(a.x + t * (b.x - a.x), dom.width), quantize_coord(a.y + t * (b.y - a.y), dom.height)});
    theta.push_back(wrap_pi(direction + spec.jitter * (rng.uniform01() - 0.5)));
  }
  detail::place_background(rng, dom, spec.n - spec.length, spec.effective_min_spacing(), pos);
  for (std::size_t k = spec.length; k < spec.n; ++k) theta.push_back(rng.angle_pi());

  const auto order = detail::shuffled_order(rng, spec.n);
  StimulusRecord rec;
  rec.id = stimulus_id(spec);
  rec.spec = spec;
  rec.field.domain = dom;
  PlantedSegment truth{a, b, round_angle12(direction), std::vector<std::size_t>(spec.length)};
  for (std::size_t k = 0; k < spec.n; ++k) {
    const std::size_t old = order[k];
    rec.field.elements.push_back(quantize(pos[old], theta[old], dom));
    if (old < spec.length) truth.members[old] = k;
  }
  rec.truth = std::move(truth);
  return rec;
}

inline StimulusRecord generate(const StimulusSpec& spec) {
  return spec.kind == StimulusKind::negative ? gen_negative(spec) : gen_positive(spec);
}

/// Balanced design: every (jitter, length) cell `per_cell` times plus
/// `negatives` negative stimuli. Seeds are derived from `base_seed`.
inline std::vector<StimulusSpec> dataset_design(std::size_t per_cell, std::size_t negatives, std::uint64_t base_seed,
                                                std::size_t n = 200, Domain domain = {496.0, 496.0}) {
  std::vector<StimulusSpec> out;
  std::uint64_t stream = 0;
  for (double jitter : kJitterLevels)
    for (std::size_t length : kSegmentLengths)
      for (std::size_t r = 0; r < per_cell; ++r) {
        StimulusSpec s;
        s.kind = StimulusKind::positive;
        s.n = n;
        s.domain = domain;
        s.length = length;
        s.jitter = jitter;
        s.seed = derive_seed(base_seed, stream++);
        out.push_back(s);
      }
  for (std::size_t r = 0; r < negatives; ++r) {
    StimulusSpec s;
    s.n = n;
    s.domain = domain;
    s.seed = derive_seed(base_seed, stream++);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dot scenes
// ---------------------------------------------------------------------------

/// Uniform i.i.d. dots: the background model itself.
struct NoiseScene {
  std::size_t n = 100;
  Domain domain{512.0, 512.0};
  std::uint64_t seed = 0;
};

/// `lines` planted alignments of `aligned` evenly spaced dots plus uniform noise.
struct PlantedScene {
  std::size_t aligned = 7;
  std::size_t noise = 20;
  double length = 120.0;  // planted segment length
  std::size_t lines = 1;
  Domain domain{512.0, 512.0};
  std::uint64_t seed = 0;
};

/// Tight clusters (uniform in a disc) with no alignment, plus uniform noise.
struct ClusterScene {
  std::size_t clusters = 2;
  std::size_t per_cluster = 10;
  double radius = 5.0;
  double separation = 200.0;  // distance between consecutive cluster centres
  std::size_t noise = 30;
  Domain domain{512.0, 512.0};
  std::uint64_t seed = 0;
};

/// rows x cols lattice with the given spacing, one spacing of margin.
struct GridScene {
  std::size_t rows = 7;
  std::size_t cols = 7;
  double spacing = 40.0;
};

/// A dense uniform block surrounded by sparse uniform dots.
struct DensityStepScene {
  std::size_t dense = 300;
  std::size_t sparse = 40;
  double block = 200.0;  // side of the dense square, centred in the domain
  Domain domain{512.0, 512.0};
  std::uint64_t seed = 0;
};

using DotSceneRecipe = std::variant<NoiseScene, PlantedScene, ClusterScene, GridScene, DensityStepScene>;

namespace detail {

inline void add_uniform(Rng& rng, const Domain& dom, std::size_t count, std::vector<Point>& pts) {
  for (std::size_t k = 0; k < count; ++k) pts.push_back({rng.uniform(0.0, dom.width), rng.uniform(0.0, dom.height)});
}

inline DotPattern make_scene(const NoiseScene& s) {
  Rng rng(s.seed);
  DotPattern p{s.domain, {}};
  add_uniform(rng, s.domain, s.n, p.points);
  return p;
}

inline DotPattern make_scene(const PlantedScene& s) {
  if (s.aligned < 2) throw std::invalid_argument("planted scene: need at least 2 aligned dots");
  if (!(s.length > 0.0) || s.length >= std::min(s.domain.width, s.domain.height))
    throw std::invalid_argument("planted scene: segment length must fit the domain");
  Rng rng(s.seed);
  DotPattern p{s.domain, {}};
  for (std::size_t line = 0; line < s.lines; ++line) {
    Point a{}, b{};
    for (int attempts = 0;; ++attempts) {
      if (attempts >= kMaxPlacementAttempts) throw std::runtime_error("planted scene: segment does not fit");
      const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
      a = {rng.uniform(0.0, s.domain.width), rng.uniform(0.0, s.domain.height)};
      b = {a.x + s.length * std::cos(heading), a.y + s.length * std::sin(heading)};
      if (s.domain.contains(b)) break;
    }
    for (std::size_t m = 0; m < s.aligned; ++m) {
      const double t = static_cast<double>(m) / static_cast<double>(s.aligned - 1);
      p.points.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  add_uniform(rng, s.domain, s.noise, p.points);
  return p;
}

inline DotPattern make_scene(const ClusterScene& s) {
  Rng rng(s.seed);
  DotPattern p{s.domain, {}};
  const double span = s.separation * static_cast<double>(s.clusters > 0 ? s.clusters - 1 : 0);
  const double pad = s.radius + 1.0;
  Point start{}, step{};
  for (int attempts = 0;; ++attempts) {
    if (attempts >= kMaxPlacementAttempts) throw std::runtime_error("cluster scene: clusters do not fit");
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    start = {rng.uniform(pad, s.domain.width - pad), rng.uniform(pad, s.domain.height - pad)};
    step = {s.separation * std::cos(heading), s.separation * std::sin(heading)};
    const Point end{start.x + span * std::cos(heading), start.y + span * std::sin(heading)};
    if (end.x >= pad && end.x <= s.domain.width - pad && end.y >= pad && end.y <= s.domain.height - pad) break;
  }
  for (std::size_t c = 0; c < s.clusters; ++c) {
    const Point centre{start.x + static_cast<double>(c) * step.x, start.y + static_cast<double>(c) * step.y};
    for (std::size_t k = 0; k < s.per_cluster; ++k) {
      // uniform in the disc
      const double r = s.radius * std::sqrt(rng.uniform01());
      const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
      p.points.push_back({centre.x + r * std::cos(a), centre.y + r * std::sin(a)});
    }
  }
  add_uniform(rng, s.domain, s.noise, p.points);
  return p;
}

inline DotPattern make_scene(const GridScene& s) {
  DotPattern p{{s.spacing * static_cast<double>(s.cols + 1), s.spacing * static_cast<double>(s.rows + 1)}, {}};
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t c = 0; c < s.cols; ++c)
      p.points.push_back({s.spacing * static_cast<double>(c + 1), s.spacing * static_cast<double>(r + 1)});
  return p;
}

inline DotPattern make_scene(const DensityStepScene& s) {
  if (!(s.block > 0.0) || s.block > std::min(s.domain.width, s.domain.height))
    throw std::invalid_argument("density step scene: block must fit the domain");
  Rng rng(s.seed);
  DotPattern p{s.domain, {}};
  const double x0 = (s.domain.width - s.block) / 2.0, y0 = (s.domain.height - s.block) / 2.0;
  for (std::size_t k = 0; k < s.dense; ++k)
    p.points.push_back({x0 + rng.uniform(0.0, s.block), y0 + rng.uniform(0.0, s.block)});
  for (std::size_t k = 0; k < s.sparse;) {
    const Point q{rng.uniform(0.0, s.domain.width), rng.uniform(0.0, s.domain.height)};
    if (q.x >= x0 && q.x <= x0 + s.block && q.y >= y0 && q.y <= y0 + s.block) continue;
    p.points.push_back(q);
    ++k;
  }
  return p;
}

}  // namespace detail

inline DotPattern gen_dot_scene(const DotSceneRecipe& recipe) {
  DotPattern p = std::visit([](const auto& s) { return detail::make_scene(s); }, recipe);
  for (Point& q : p.points) q = {quantize_coord(q.x, p.domain.width), quantize_coord(q.y, p.domain.height)};
  return p;
}

}  // namespace gestalt
