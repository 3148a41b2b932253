// pipeline.hpp -- detect + filter + serialize, shared by the command-line
// tool and the HTTP service so that both emit the same bytes.
#pragma once

#include <optional>
#include <string>

#include "gestalt/filters.hpp"
#include "gestalt/io.hpp"

namespace gestalt {

struct DetectRequest {
  DetectMode mode = DetectMode::basic;
  FilterKind filter = FilterKind::none;
  double epsilon = 1.0;
  double band_factor = 1.0;
  std::optional<double> width;  // Gabor rectangle width
  unsigned threads = 1;

  [[nodiscard]] DotDetectConfig dot_config() const {
    DotDetectConfig c;
    c.epsilon = epsilon;
    c.band_factor = band_factor;
    c.threads = threads;
    return c;
  }
  [[nodiscard]] GaborDetectConfig gabor_config() const {
    GaborDetectConfig c;
    c.epsilon = epsilon;
    c.width = width;
    c.threads = threads;
    return c;
  }
};

inline void validate(const DetectRequest& r) {
  if (!(r.epsilon > 0.0) || !std::isfinite(r.epsilon)) throw SchemaError("epsilon", "must be positive");
  if (!(r.band_factor > 0.0) || !std::isfinite(r.band_factor)) throw SchemaError("band_factor", "must be positive");
  if (r.width && (!(*r.width > 0.0) || !std::isfinite(*r.width))) throw SchemaError("width", "must be positive");
}

/// Optional fields of a "config" object; absent fields keep their defaults.
inline DetectRequest request_from_json(const Json& j) {
  DetectRequest r;
  if (j.is_null()) return r;
  if (!j.is_object()) throw SchemaError("config", "expected an object");
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_string()) throw SchemaError(std::string("config.") + key, "expected a string");
    return j[key].get<std::string>();
  };
  try {
    if (auto m = str("mode")) r.mode = parse_mode(*m);
  } catch (const std::invalid_argument& e) {
    throw SchemaError("config.mode", e.what());
  }
  try {
    if (auto f = str("filter")) r.filter = parse_filter(*f);
  } catch (const std::invalid_argument& e) {
    throw SchemaError("config.filter", e.what());
  }
  if (j.contains("epsilon")) r.epsilon = detail::number(j["epsilon"], "config.epsilon");
  if (j.contains("band_factor")) r.band_factor = detail::number(j["band_factor"], "config.band_factor");
  if (j.contains("width") && !j["width"].is_null()) r.width = detail::number(j["width"], "config.width");
  validate(r);
  return r;
}

inline Json to_json(const DetectRequest& r) {
  Json j{{"mode", to_string(r.mode)}, {"filter", to_string(r.filter)}, {"epsilon", num(r.epsilon)},
         {"band_factor", num(r.band_factor)}};
  if (r.width) j["width"] = num(*r.width);
  return j;
}

inline Json detect_document(const DotPattern& p, const DetectRequest& r) {
  validate(r);
  require_detectable(p);
  return detections_to_json(p, detect_and_filter(p, r.mode, r.filter, r.dot_config()));
}

inline Json detect_document(const GaborField& f, const DetectRequest& r) {
  validate(r);
  const GaborDetectConfig cfg = r.gabor_config();
  return detections_to_json(f, apply_filter(f, detect_gabor(f, cfg).detections, cfg, r.filter));
}

}  // namespace gestalt
