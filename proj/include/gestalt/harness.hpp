// harness.hpp -- batch experiments: false-alarm Monte Carlo, the
// NFA-binned detection curve, dataset runs and the reference scenarios.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gestalt/core_stats.hpp"
#include "gestalt/dot_detect.hpp"
#include "gestalt/filters.hpp"
#include "gestalt/format.hpp"
#include "gestalt/gabor_detect.hpp"
#include "gestalt/io.hpp"
#include "gestalt/parallel.hpp"
#include "gestalt/random.hpp"
#include "gestalt/stimulus.hpp"

namespace gestalt {

enum class DetectorKind { basic, refined, gabor };

inline DetectorKind parse_detector(std::string_view s) {
  if (s == "basic") return DetectorKind::basic;
  if (s == "refined") return DetectorKind::refined;
  if (s == "gabor") return DetectorKind::gabor;
  throw std::invalid_argument("unknown detector '" + std::string(s) + "'");
}

inline const char* to_string(DetectorKind d) {
  switch (d) {
    case DetectorKind::basic: return "basic";
    case DetectorKind::refined: return "refined";
    case DetectorKind::gabor: return "gabor";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Small statistics
// ---------------------------------------------------------------------------

/// Sample mean with the interval mean +- 2 s / sqrt(n).
struct MeanCi {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;      // sample standard deviation (n - 1)
  double half_width = 0.0;  // 2 s / sqrt(n)

  [[nodiscard]] double lo() const { return mean - half_width; }
  [[nodiscard]] double hi() const { return mean + half_width; }
};

inline MeanCi mean_ci(std::span<const double> xs) {
  MeanCi r;
  r.n = xs.size();
  if (r.n == 0) return r;
  double sum = 0.0;
  for (double x : xs) sum += x;
  r.mean = sum / static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(r.n - 1));
    r.half_width = 2.0 * r.stddev / std::sqrt(static_cast<double>(r.n));
  }
  return r;
}

struct Proportion {
  std::size_t hits = 0;
  std::size_t trials = 0;
  double rate = 0.0;
  double lo = 0.0;  // Wilson score interval, 95%
  double hi = 1.0;
};

inline Proportion wilson(std::size_t hits, std::size_t trials, double z = 1.959963984540054) {
  if (hits > trials) throw std::invalid_argument("wilson: more hits than trials");
  Proportion p{hits, trials, 0.0, 0.0, 1.0};
  if (trials == 0) return p;
  const double n = static_cast<double>(trials);
  const double ph = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double centre = (ph + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  p.rate = ph;
  p.lo = std::max(0.0, centre - half);
  p.hi = std::min(1.0, centre + half);
  return p;
}

// ---------------------------------------------------------------------------
// False-alarm Monte Carlo
// ---------------------------------------------------------------------------

struct H0Config {
  DetectorKind detector = DetectorKind::basic;
  std::size_t n = 100;
  std::size_t trials = 200;
  double epsilon = 1.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct H0Report {
  H0Config config;
  std::vector<double> counts;  // meaningful raw candidates per sample
  MeanCi stats;
  std::size_t fired = 0;       // samples with at least one detection
  bool pass = false;           // mean - 2 s / sqrt(n) <= epsilon
};

inline constexpr Domain kDotDomain{512.0, 512.0};
inline constexpr Domain kGaborDomain{496.0, 496.0};

/// Background samples: uniform dots in 512 x 512, or negative Gabor stimuli
/// in 496 x 496.
inline H0Report h0_montecarlo(const H0Config& cfg) {
  if (cfg.trials < 30) throw std::invalid_argument("h0_montecarlo: at least 30 trials required");
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("h0_montecarlo: epsilon must be positive");
  H0Report rep;
  rep.config = cfg;
  rep.counts.assign(cfg.trials, 0.0);
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t t, unsigned) {
    const std::uint64_t seed = derive_seed(cfg.seed, t);
    std::size_t count = 0;
    if (cfg.detector == DetectorKind::gabor) {
      StimulusSpec spec;
      spec.n = cfg.n;
      spec.domain = kGaborDomain;
      spec.seed = seed;
      GaborDetectConfig gc;
      gc.epsilon = cfg.epsilon;
      count = detect_gabor(gen_negative(spec).field, gc).detections.size();
    } else {
      const DotPattern p = gen_dot_scene(NoiseScene{cfg.n, kDotDomain, seed});
      DotDetectConfig dc;
      dc.epsilon = cfg.epsilon;
      count = detect_dots(p, cfg.detector == DetectorKind::basic ? DetectMode::basic : DetectMode::refined, dc).size();
    }
    rep.counts[t] = static_cast<double>(count);
  });
  rep.stats = mean_ci(rep.counts);
  rep.fired = static_cast<std::size_t>(std::count_if(rep.counts.begin(), rep.counts.end(), [](double c) { return c > 0; }));
  rep.pass = rep.stats.lo() <= cfg.epsilon;
  return rep;
}

inline std::string summary_line(const H0Report& r) {
  std::ostringstream os;
  os << (r.pass ? "PASS" : "FAIL") << " h0 detector=" << to_string(r.config.detector) << " n=" << r.config.n
     << " trials=" << r.config.trials << " epsilon=" << format_sig12(r.config.epsilon)
     << " mean=" << format_sig12(r.stats.mean) << " ci=" << format_sig12(r.stats.half_width)
     << " fired=" << r.fired;
  return os.str();
}

// ---------------------------------------------------------------------------
// Trials and the binned curve
// ---------------------------------------------------------------------------

struct TrialResult {
  std::string id;
  bool positive = false;
  std::size_t length = 0;
  double jitter = 0.0;
  LogNfa best{std::numeric_limits<double>::infinity()};  // +inf: no candidate at all
  bool detected = false;
  std::optional<double> localization_error;  // rectangle centre to planted segment
};

inline constexpr int kCurveBins = 9;

/// (-inf, -5), [-5, -4), ..., [1, 2), [2, +inf).
inline int nfa_bin(double log10_nfa) {
  if (std::isnan(log10_nfa)) throw std::invalid_argument("nfa_bin: NaN");
  if (log10_nfa < -5.0) return 0;
  if (log10_nfa >= 2.0) return kCurveBins - 1;
  return static_cast<int>(std::floor(log10_nfa)) + 6;
}

inline std::pair<double, double> bin_edges(int b) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (b < 0 || b >= kCurveBins) throw std::out_of_range("bin index");
  if (b == 0) return {-inf, -5.0};
  if (b == kCurveBins - 1) return {2.0, inf};
  return {static_cast<double>(b - 6), static_cast<double>(b - 5)};
}

struct CurveBin {
  double lo = 0.0, hi = 0.0;
  MeanCi rate;  // mean of the 0/1 detection answers in the bin
};

struct BinnedCurve {
  std::vector<CurveBin> bins;
  [[nodiscard]] std::size_t total() const {
    std::size_t n = 0;
    for (const auto& b : bins) n += b.rate.n;
    return n;
  }
};

inline BinnedCurve binned_curve(std::span<const TrialResult> trials) {
  std::vector<std::vector<double>> answers(kCurveBins);
  for (const auto& t : trials) answers[nfa_bin(t.best.value)].push_back(t.detected ? 1.0 : 0.0);
  BinnedCurve c;
  for (int b = 0; b < kCurveBins; ++b) {
    const auto [lo, hi] = bin_edges(b);
    c.bins.push_back({lo, hi, mean_ci(answers[b])});
  }
  return c;
}

inline TrialResult run_trial(const StimulusRecord& rec, const GaborDetectConfig& cfg) {
  TrialResult t;
  t.id = rec.id;
  t.positive = rec.spec.kind == StimulusKind::positive;
  t.length = t.positive ? rec.spec.length : 0;
  t.jitter = rec.spec.jitter;
  const GaborDetectionReport r = detect_gabor(rec.field, cfg);
  t.best = r.best_nfa;
  t.detected = is_meaningful(t.best, cfg.epsilon);
  if (t.detected && rec.truth && r.best) {
    const Point a = rec.field.elements[r.best->candidate.i].position();
    const Point b = rec.field.elements[r.best->candidate.j].position();
    t.localization_error = point_segment_distance({(a.x + b.x) / 2.0, (a.y + b.y) / 2.0}, rec.truth->a, rec.truth->b);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Manifests and dataset runs
// ---------------------------------------------------------------------------

struct ManifestLoad {
  std::vector<StimulusRecord> records;
  std::vector<std::pair<std::size_t, std::string>> skipped;  // (line, reason)
};

/// One stimulus record per line; malformed lines are skipped and reported.
inline ManifestLoad load_manifest(std::string_view text) {
  ManifestLoad out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.records.push_back(stimulus_from_json(parse_json(line)));
    } catch (const std::exception& e) {
      out.skipped.emplace_back(line_no, e.what());
    }
  }
  return out;
}

inline std::string manifest_text(std::span<const StimulusRecord> records) {
  std::string out;
  for (const auto& r : records) out += dump(to_json(r));
  return out;
}

struct RateCell {
  std::size_t length = 0;  // 0: all lengths pooled
  double jitter = 0.0;
  Proportion detection;
};

struct DatasetReport {
  std::vector<TrialResult> trials;
  BinnedCurve curve;
  std::vector<RateCell> cells;       // positives per (length, jitter), sorted
  std::vector<RateCell> by_jitter;   // positives pooled over lengths
  Proportion false_alarms;           // negatives
  std::size_t skipped = 0;
};

inline DatasetReport run_dataset(std::span<const StimulusRecord> records, const GaborDetectConfig& cfg = {},
                                 unsigned threads = 1) {
  DatasetReport rep;
  rep.trials.resize(records.size());
  GaborDetectConfig inner = cfg;
  inner.threads = 1;
  parallel_for(records.size(), threads, [&](std::size_t k, unsigned) { rep.trials[k] = run_trial(records[k], inner); });
  rep.curve = binned_curve(rep.trials);

  std::map<std::pair<std::size_t, double>, std::pair<std::size_t, std::size_t>> cells;
  std::map<double, std::pair<std::size_t, std::size_t>> jit;
  std::size_t neg = 0, neg_hits = 0;
  for (const auto& t : rep.trials) {
    if (!t.positive) {
      ++neg;
      neg_hits += t.detected;
      continue;
    }
    auto& c = cells[{t.length, t.jitter}];
    ++c.first;
    c.second += t.detected;
    auto& j = jit[t.jitter];
    ++j.first;
    j.second += t.detected;
  }
  for (const auto& [key, v] : cells) rep.cells.push_back({key.first, key.second, wilson(v.second, v.first)});
  for (const auto& [key, v] : jit) rep.by_jitter.push_back({0, key, wilson(v.second, v.first)});
  rep.false_alarms = wilson(neg_hits, neg);
  return rep;
}

/// Adjacent jitter levels (same length) where the detection rate increases
/// with jitter and the two Wilson intervals do not overlap.
inline std::vector<std::pair<RateCell, RateCell>> trend_violations(const DatasetReport& rep) {
  std::vector<std::pair<RateCell, RateCell>> out;
  for (std::size_t k = 0; k + 1 < rep.cells.size(); ++k) {
    const RateCell& a = rep.cells[k];
    const RateCell& b = rep.cells[k + 1];
    if (a.length != b.length) continue;
    if (b.detection.rate > a.detection.rate && b.detection.lo > a.detection.hi) out.emplace_back(a, b);
  }
  return out;
}

inline std::string curve_csv(const BinnedCurve& c) {
  std::string out = "bin,lo,hi,n,mean,std,ci_lo,ci_hi\n";
  for (std::size_t b = 0; b < c.bins.size(); ++b) {
    const auto& x = c.bins[b];
    auto edge = [](double v) { return std::isinf(v) ? std::string(v < 0 ? "-inf" : "inf") : format_sig12(v); };
    out += std::to_string(b) + "," + edge(x.lo) + "," + edge(x.hi) + "," + std::to_string(x.rate.n) + "," +
           format_sig12(x.rate.mean) + "," + format_sig12(x.rate.stddev) + "," + format_sig12(x.rate.lo()) + "," +
           format_sig12(x.rate.hi()) + "\n";
  }
  return out;
}

inline std::string rates_csv(const std::vector<RateCell>& cells) {
  std::string out = "length,jitter,trials,detected,rate,wilson_lo,wilson_hi\n";
  for (const auto& c : cells)
    out += std::to_string(c.length) + "," + format_sig12(c.jitter) + "," + std::to_string(c.detection.trials) + "," +
           std::to_string(c.detection.hits) + "," + format_sig12(c.detection.rate) + "," +
           format_sig12(c.detection.lo) + "," + format_sig12(c.detection.hi) + "\n";
  return out;
}

inline std::string trials_csv(const std::vector<TrialResult>& trials) {
  std::string out = "id,positive,length,jitter,log10_nfa,detected,localization_error\n";
  for (const auto& t : trials) {
    out += t.id + "," + (t.positive ? "1" : "0") + "," + std::to_string(t.length) + "," + format_sig12(t.jitter) + "," +
           (std::isinf(t.best.value) ? std::string("inf") : format_sig12(t.best.value)) + "," +
           (t.detected ? "1" : "0") + "," +
           (t.localization_error ? format_sig12(*t.localization_error) : std::string()) + "\n";
  }
  return out;
}

inline Json to_json(const Proportion& p) {
  return Json{{"trials", p.trials}, {"hits", p.hits}, {"rate", num(p.rate)}, {"wilson_lo", num(p.lo)},
              {"wilson_hi", num(p.hi)}};
}

inline Json to_json(const DatasetReport& rep) {
  Json bins = Json::array();
  for (const auto& b : rep.curve.bins) {
    Json jb{{"n", b.rate.n}, {"mean", num(b.rate.mean)}, {"std", num(b.rate.stddev)}, {"ci_lo", num(b.rate.lo())},
            {"ci_hi", num(b.rate.hi())}};
    jb["lo"] = std::isinf(b.lo) ? Json(nullptr) : num(b.lo);
    jb["hi"] = std::isinf(b.hi) ? Json(nullptr) : num(b.hi);
    bins.push_back(std::move(jb));
  }
  Json cells = Json::array();
  for (const auto& c : rep.cells) cells.push_back(Json{{"length", c.length}, {"jitter", num(c.jitter)}, {"detection", to_json(c.detection)}});
  Json jit = Json::array();
  for (const auto& c : rep.by_jitter) jit.push_back(Json{{"jitter", num(c.jitter)}, {"detection", to_json(c.detection)}});
  return Json{{"trials", rep.trials.size()},
              {"skipped", rep.skipped},
              {"curve", std::move(bins)},
              {"cells", std::move(cells)},
              {"by_jitter", std::move(jit)},
              {"false_alarms", to_json(rep.false_alarms)},
              {"trend_violations", trend_violations(rep).size()}};
}

// ---------------------------------------------------------------------------
// Reference scenarios
// ---------------------------------------------------------------------------

/// Planted 7-dot alignment (segment length 200) in a 512 x 512 domain; the
/// dense variant adds noise to the very same planted dots.
inline PlantedScene texture_scene(std::uint64_t seed, std::size_t noise) {
  return PlantedScene{7, noise, 200.0, 1, kDotDomain, seed};
}

inline ClusterScene cluster_scene(std::uint64_t seed) { return ClusterScene{2, 10, 5.0, 200.0, 30, kDotDomain, seed}; }

inline DensityStepScene density_step_scene(std::uint64_t seed) { return DensityStepScene{300, 40, 200.0, kDotDomain, seed}; }

/// Two lines of 11 dots among 78 noise dots: N = 100, so the longest box
/// partition has 11 boxes.
inline PlantedScene two_lines_scene(std::uint64_t seed) { return PlantedScene{11, 78, 300.0, 2, kDotDomain, seed}; }

struct SceneRates {
  std::size_t seeds = 0;
  std::size_t first = 0;   // texture: sparse scenes detected;  clusters: basic fired
  std::size_t second = 0;  // texture: dense scenes detected;   clusters: refined fired
};

inline SceneRates texture_rates(std::size_t seeds, std::uint64_t base = 0, unsigned threads = 1) {
  std::vector<char> sparse(seeds, 0), dense(seeds, 0);
  parallel_for(seeds, threads, [&](std::size_t s, unsigned) {
    const std::uint64_t seed = derive_seed(base, s);
    sparse[s] = !detect_basic(gen_dot_scene(texture_scene(seed, 20))).empty();
    dense[s] = !detect_basic(gen_dot_scene(texture_scene(seed, 600))).empty();
  });
  return {seeds, static_cast<std::size_t>(std::count(sparse.begin(), sparse.end(), 1)),
          static_cast<std::size_t>(std::count(dense.begin(), dense.end(), 1))};
}

inline SceneRates cluster_rates(std::size_t seeds, std::uint64_t base = 0, unsigned threads = 1) {
  std::vector<char> basic(seeds, 0), refined(seeds, 0);
  parallel_for(seeds, threads, [&](std::size_t s, unsigned) {
    const DotPattern p = gen_dot_scene(cluster_scene(derive_seed(base, s)));
    basic[s] = !detect_basic(p).empty();
    refined[s] = !detect_refined(p).empty();
  });
  return {seeds, static_cast<std::size_t>(std::count(basic.begin(), basic.end(), 1)),
          static_cast<std::size_t>(std::count(refined.begin(), refined.end(), 1))};
}

enum class Orientation { horizontal, vertical, oblique };

inline Orientation orientation_of(const DotPattern& p, const DotDetection& d, double tol = 1e-6) {
  const double a = AxisFrame(p.points[d.candidate.i], p.points[d.candidate.j]).direction_mod_pi();
  if (orientation_distance(a, 0.0) < tol) return Orientation::horizontal;
  if (orientation_distance(a, std::numbers::pi / 2.0) < tol) return Orientation::vertical;
  return Orientation::oblique;
}

struct FamilyCounts {
  std::size_t horizontal = 0, vertical = 0, oblique = 0;
};

inline FamilyCounts family_counts(const DotPattern& p, const std::vector<DotDetection>& dets) {
  FamilyCounts c;
  for (const auto& d : dets) {
    switch (orientation_of(p, d)) {
      case Orientation::horizontal: ++c.horizontal; break;
      case Orientation::vertical: ++c.vertical; break;
      case Orientation::oblique: ++c.oblique; break;
    }
  }
  return c;
}

struct GridOutcome {
  std::size_t side = 0;
  std::size_t raw = 0;
  FamilyCounts masking, exclusion;
  std::size_t violations = 0;  // pairwise masking within the masking output
};

/// side x side lattice, basic detector, both filters.
inline GridOutcome grid_outcome(std::size_t side = 10) {
  const DotPattern p = gen_dot_scene(GridScene{side, side, 40.0});
  const DotDetectConfig cfg;
  const auto raw = detect_basic(p, cfg);
  const auto masked = apply_filter(p, raw, cfg, FilterKind::masking);
  const auto excluded = apply_filter(p, raw, cfg, FilterKind::exclusion);
  GridOutcome g{side, raw.size(), family_counts(p, masked), family_counts(p, excluded), 0};
  g.violations = masking_violations(as_candidates(p, masked, cfg), cfg.epsilon).size();
  return g;
}

struct ScenarioCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ScenarioSuiteConfig {
  std::size_t seeds = 50;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

inline std::vector<ScenarioCheck> scenario_suite(const ScenarioSuiteConfig& cfg = {}) {
  std::vector<ScenarioCheck> out;
  auto pct = [](std::size_t k, std::size_t n) { return format_sig12(100.0 * static_cast<double>(k) / static_cast<double>(n)) + "%"; };

  const SceneRates tex = texture_rates(cfg.seeds, cfg.seed, cfg.threads);
  out.push_back({"texture-sparse-detected", tex.first * 100 >= 95 * tex.seeds, "detected in " + pct(tex.first, tex.seeds)});
  out.push_back({"texture-dense-silent", (tex.seeds - tex.second) * 100 >= 90 * tex.seeds,
                 "silent in " + pct(tex.seeds - tex.second, tex.seeds)});

  {
    std::size_t basic = 0, refined = 0, pooled = 0;
    DotDetectConfig pooled_cfg;
    pooled_cfg.density = DensityEstimate::pooled;
    const std::size_t n = std::min<std::size_t>(cfg.seeds, 5);
    for (std::size_t s = 0; s < n; ++s) {
      const DotPattern p = gen_dot_scene(density_step_scene(derive_seed(cfg.seed, s)));
      basic += !detect_basic(p).empty();
      refined += detect_refined(p).size();
      pooled += detect_refined(p, pooled_cfg).size();
    }
    out.push_back({"density-step", basic == n && refined == 0,
                   "basic fired on " + std::to_string(basic) + "/" + std::to_string(n) +
                       " scenes; refined detections: max-of-sides " + std::to_string(refined) + ", pooled " +
                       std::to_string(pooled)});
  }

  {
    const DotPattern p = gen_dot_scene(two_lines_scene(derive_seed(cfg.seed, 1)));
    const DotDetectConfig dc;
    const auto raw = detect_refined(p, dc);
    const auto kept = apply_filter(p, raw, dc, FilterKind::masking);
    // each kept rectangle must sit on one planted line, no line twice
    std::vector<int> hits(2, 0);
    bool clean = !kept.empty();
    for (const auto& d : kept) {
      std::size_t on[2] = {0, 0};
      for (std::size_t m : d.members)
        if (m < 22) ++on[m / 11];
      const int line = on[0] >= on[1] ? 0 : 1;
      clean = clean && on[line] >= 9 && ++hits[line] == 1;
    }
    clean = clean && hits[0] == 1 && hits[1] == 1;
    out.push_back({"two-lines-one-rectangle-each", clean,
                   std::to_string(raw.size()) + " raw, " + std::to_string(kept.size()) + " kept"});
  }

  const SceneRates clu = cluster_rates(cfg.seeds, cfg.seed, cfg.threads);
  out.push_back({"clusters", clu.first * 100 >= 80 * clu.seeds && clu.second * 100 <= 10 * clu.seeds,
                 "basic fired in " + pct(clu.first, clu.seeds) + ", refined in " + pct(clu.second, clu.seeds)});

  const GridOutcome g = grid_outcome(10);
  out.push_back({"grid-masking",
                 g.masking.horizontal >= 10 && g.masking.vertical >= 10 && g.violations == 0 &&
                     (g.exclusion.horizontal < 10 || g.exclusion.vertical < 10),
                 "masking H=" + std::to_string(g.masking.horizontal) + " V=" + std::to_string(g.masking.vertical) +
                     " O=" + std::to_string(g.masking.oblique) + "; exclusion H=" + std::to_string(g.exclusion.horizontal) +
                     " V=" + std::to_string(g.exclusion.vertical) + "; violations=" + std::to_string(g.violations)});
  return out;
}

inline Json to_json(const std::vector<ScenarioCheck>& checks) {
  Json out = Json::array();
  for (const auto& c : checks) out.push_back(Json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return out;
}

}  // namespace gestalt
