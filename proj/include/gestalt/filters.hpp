// filters.hpp -- glue between the detectors and the generic redundancy filters.
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gestalt/dot_detect.hpp"
#include "gestalt/gabor_detect.hpp"
#include "gestalt/masking.hpp"

namespace gestalt {

enum class FilterKind { none, exclusion, masking };

inline FilterKind parse_filter(std::string_view s) {
  if (s == "none") return FilterKind::none;
  if (s == "exclusion") return FilterKind::exclusion;
  if (s == "masking") return FilterKind::masking;
  throw std::invalid_argument("unknown filter '" + std::string(s) + "'");
}

inline DetectMode parse_mode(std::string_view s) {
  if (s == "basic") return DetectMode::basic;
  if (s == "refined") return DetectMode::refined;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

inline const char* to_string(FilterKind f) {
  switch (f) {
    case FilterKind::none: return "none";
    case FilterKind::exclusion: return "exclusion";
    case FilterKind::masking: return "masking";
  }
  return "?";
}

inline const char* to_string(DetectMode m) { return m == DetectMode::basic ? "basic" : "refined"; }

// The pattern and config are captured by reference: candidates must not
// outlive them.
inline std::vector<GestaltCandidate<DotDetection>> as_candidates(const DotPattern& pat,
                                                                 const std::vector<DotDetection>& dets,
                                                                 const DotDetectConfig& cfg) {
  std::vector<GestaltCandidate<DotDetection>> out;
  out.reserve(dets.size());
  for (const auto& d : dets) {
    GestaltCandidate<DotDetection> g;
    g.payload = d;
    g.nfa = d.nfa;
    g.members = d.members;
    g.key = {d.candidate.i, d.candidate.j, d.candidate.width};
    g.rescore = [&pat, &cfg, d](std::span<const std::size_t> m) { return rescore(pat, d, m, cfg); };
    out.push_back(std::move(g));
  }
  return out;
}

inline std::vector<GestaltCandidate<GaborDetection>> as_candidates(const GaborField& field,
                                                                   const std::vector<GaborDetection>& dets,
                                                                   const GaborDetectConfig& cfg) {
  std::vector<GestaltCandidate<GaborDetection>> out;
  out.reserve(dets.size());
  for (const auto& d : dets) {
    GestaltCandidate<GaborDetection> g;
    g.payload = d;
    g.nfa = d.nfa;
    g.members = d.members;
    g.key = {d.candidate.i, d.candidate.j, d.candidate.width};
    g.rescore = [&field, &cfg, d](std::span<const std::size_t> m) { return rescore(field, d, m, cfg); };
    out.push_back(std::move(g));
  }
  return out;
}

/// Applies a filter to raw detections. Accepted detections carry the NFA
/// and members they had when accepted (exclusion may have reduced both).
template <class Source, class Detection, class Config>
std::vector<Detection> apply_filter(const Source& src, const std::vector<Detection>& raw, const Config& cfg,
                                    FilterKind kind) {
  if (kind == FilterKind::none) return raw;
  auto pool = as_candidates(src, raw, cfg);
  auto kept = kind == FilterKind::exclusion ? exclusion_filter(std::move(pool), cfg.epsilon)
                                            : masking_filter(std::move(pool), cfg.epsilon);
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (auto& g : kept) {
    Detection d = std::move(g.payload);
    d.nfa = g.nfa;
    d.members = std::move(g.members);
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<DotDetection> detect_and_filter(const DotPattern& pat, DetectMode mode, FilterKind kind,
                                                   const DotDetectConfig& cfg = {}) {
  return apply_filter(pat, detect_dots(pat, mode, cfg), cfg, kind);
}

}  // namespace gestalt
