// io.hpp -- JSON and CSV formats shared by the command-line tools and the
// HTTP service.
//
//   dots     {"domain": {"width", "height"}, "points": [[x, y], ...]}
//   gabor    {"domain": {...}, "elements": [{"x", "y", "theta"}, ...]}
//   stimulus gabor object plus "id", "spec" and an optional "truth" block
//   results  [{"rect": {"ax", "ay", "bx", "by", "width"}, "log10_nfa", "members"}]
//
// Numbers are written with 12 significant digits.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gestalt/dot_detect.hpp"
#include "gestalt/format.hpp"
#include "gestalt/gabor_detect.hpp"
#include "gestalt/stimulus.hpp"

namespace gestalt {

using Json = nlohmann::ordered_json;

/// Input that does not match a format. what() starts with the offending
/// field, e.g. "points[3][1]: outside the domain".
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& msg)
      : std::runtime_error(field + ": " + msg), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline Json num(double v) { return round_sig12(v); }

namespace detail {

inline const Json& member(const Json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path.empty() ? "document" : path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

inline double number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(path, "not finite");
  return d;
}

inline std::uint64_t unsigned_integer(const Json& v, const std::string& path) {
  if (!v.is_number_unsigned()) throw SchemaError(path, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline const Json& array(const Json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path, "expected an array");
  return v;
}

inline void check_inside(double x, double y, const Domain& dom, const std::string& path) {
  if (x < 0.0 || x > dom.width) throw SchemaError(path, "x outside the domain");
  if (y < 0.0 || y > dom.height) throw SchemaError(path, "y outside the domain");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Domain, dot patterns, Gabor fields
// ---------------------------------------------------------------------------

inline Json to_json(const Domain& d) { return Json{{"width", num(d.width)}, {"height", num(d.height)}}; }

inline Domain domain_from_json(const Json& j, const std::string& path = "domain") {
  Domain d{detail::number(detail::member(j, "width", path), path + ".width"),
           detail::number(detail::member(j, "height", path), path + ".height")};
  if (!(d.width > 0.0)) throw SchemaError(path + ".width", "must be positive");
  if (!(d.height > 0.0)) throw SchemaError(path + ".height", "must be positive");
  return d;
}

inline Json to_json(const DotPattern& p) {
  Json pts = Json::array();
  for (const Point& q : p.points) pts.push_back(Json::array({num(q.x), num(q.y)}));
  return Json{{"domain", to_json(p.domain)}, {"points", std::move(pts)}};
}

inline DotPattern pattern_from_json(const Json& j) {
  DotPattern p;
  p.domain = domain_from_json(detail::member(j, "domain", ""));
  const Json& pts = detail::array(detail::member(j, "points", ""), "points");
  p.points.reserve(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const std::string path = "points[" + std::to_string(k) + "]";
    const Json& q = pts[k];
    if (!q.is_array() || q.size() != 2) throw SchemaError(path, "expected [x, y]");
    const double x = detail::number(q[0], path + "[0]");
    const double y = detail::number(q[1], path + "[1]");
    detail::check_inside(x, y, p.domain, path);
    p.points.push_back({x, y});
  }
  return p;
}

inline Json to_json(const GaborField& f) {
  Json els = Json::array();
  for (const GaborElement& e : f.elements)
    els.push_back(Json{{"x", num(e.x)}, {"y", num(e.y)}, {"theta", num(e.theta)}});
  return Json{{"domain", to_json(f.domain)}, {"elements", std::move(els)}};
}

inline GaborField field_from_json(const Json& j) {
  GaborField f;
  f.domain = domain_from_json(detail::member(j, "domain", ""));
  const Json& els = detail::array(detail::member(j, "elements", ""), "elements");
  f.elements.reserve(els.size());
  for (std::size_t k = 0; k < els.size(); ++k) {
    const std::string path = "elements[" + std::to_string(k) + "]";
    const Json& e = els[k];
    GaborElement g{detail::number(detail::member(e, "x", path), path + ".x"),
                   detail::number(detail::member(e, "y", path), path + ".y"),
                   detail::number(detail::member(e, "theta", path), path + ".theta")};
    detail::check_inside(g.x, g.y, f.domain, path);
    if (!(g.theta >= 0.0 && g.theta < std::numbers::pi)) throw SchemaError(path + ".theta", "must lie in [0, pi)");
    f.elements.push_back(g);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Stimulus records (one per manifest line)
// ---------------------------------------------------------------------------

inline Json to_json(const StimulusSpec& s) {
  Json j{{"kind", s.kind == StimulusKind::negative ? "negative" : "positive"},
         {"n", s.n},
         {"domain", to_json(s.domain)},
         {"length", s.length},
         {"jitter", num(s.jitter)},
         {"seed", s.seed}};
  if (s.min_spacing) j["min_spacing"] = num(*s.min_spacing);
  if (s.planted_spacing) j["planted_spacing"] = num(*s.planted_spacing);
  return j;
}

inline StimulusSpec spec_from_json(const Json& j, const std::string& path = "spec") {
  StimulusSpec s;
  const Json& kind = detail::member(j, "kind", path);
  if (kind == "negative")
    s.kind = StimulusKind::negative;
  else if (kind == "positive")
    s.kind = StimulusKind::positive;
  else
    throw SchemaError(path + ".kind", "expected \"negative\" or \"positive\"");
  s.n = detail::unsigned_integer(detail::member(j, "n", path), path + ".n");
  s.domain = domain_from_json(detail::member(j, "domain", path), path + ".domain");
  s.length = detail::unsigned_integer(detail::member(j, "length", path), path + ".length");
  s.jitter = detail::number(detail::member(j, "jitter", path), path + ".jitter");
  s.seed = detail::unsigned_integer(detail::member(j, "seed", path), path + ".seed");
  if (j.contains("min_spacing")) s.min_spacing = detail::number(j["min_spacing"], path + ".min_spacing");
  if (j.contains("planted_spacing")) s.planted_spacing = detail::number(j["planted_spacing"], path + ".planted_spacing");
  return s;
}

inline Json to_json(const PlantedSegment& t) {
  Json members = Json::array();
  for (std::size_t m : t.members) members.push_back(m);
  return Json{{"a", Json::array({num(t.a.x), num(t.a.y)})},
              {"b", Json::array({num(t.b.x), num(t.b.y)})},
              {"direction", num(t.direction)},
              {"members", std::move(members)}};
}

inline PlantedSegment truth_from_json(const Json& j, std::size_t n_elements) {
  auto point = [&](const char* key) {
    const Json& q = detail::member(j, key, "truth");
    const std::string path = std::string("truth.") + key;
    if (!q.is_array() || q.size() != 2) throw SchemaError(path, "expected [x, y]");
    return Point{detail::number(q[0], path + "[0]"), detail::number(q[1], path + "[1]")};
  };
  PlantedSegment t;
  t.a = point("a");
  t.b = point("b");
  t.direction = detail::number(detail::member(j, "direction", "truth"), "truth.direction");
  const Json& members = detail::array(detail::member(j, "members", "truth"), "truth.members");
  for (std::size_t k = 0; k < members.size(); ++k) {
    const std::string path = "truth.members[" + std::to_string(k) + "]";
    const auto m = detail::unsigned_integer(members[k], path);
    if (m >= n_elements) throw SchemaError(path, "index out of range");
    t.members.push_back(m);
  }
  return t;
}

inline Json to_json(const StimulusRecord& r) {
  Json j{{"id", r.id}, {"spec", to_json(r.spec)}};
  Json f = to_json(r.field);
  j["domain"] = std::move(f["domain"]);
  j["elements"] = std::move(f["elements"]);
  if (r.truth) j["truth"] = to_json(*r.truth);
  return j;
}

inline StimulusRecord stimulus_from_json(const Json& j) {
  StimulusRecord r;
  const Json& id = detail::member(j, "id", "");
  if (!id.is_string()) throw SchemaError("id", "expected a string");
  r.id = id.get<std::string>();
  r.spec = spec_from_json(detail::member(j, "spec", ""));
  r.field = field_from_json(j);
  if (j.contains("truth")) r.truth = truth_from_json(j["truth"], r.field.size());
  return r;
}

// ---------------------------------------------------------------------------
// Detection results
// ---------------------------------------------------------------------------

template <class Detection, class PositionOf>
Json detections_to_json(const std::vector<Detection>& dets, PositionOf&& position_of) {
  Json out = Json::array();
  for (const auto& d : dets) {
    const Point a = position_of(d.candidate.i), b = position_of(d.candidate.j);
    Json members = Json::array();
    for (std::size_t m : d.members) members.push_back(m);
    out.push_back(Json{{"rect", Json{{"ax", num(a.x)}, {"ay", num(a.y)}, {"bx", num(b.x)}, {"by", num(b.y)},
                                     {"width", num(d.candidate.width)}}},
                       {"log10_nfa", num(d.nfa.value)},
                       {"members", std::move(members)}});
  }
  return out;
}

inline Json detections_to_json(const DotPattern& p, const std::vector<DotDetection>& dets) {
  return detections_to_json(dets, [&](std::size_t k) { return p.points.at(k); });
}

inline Json detections_to_json(const GaborField& f, const std::vector<GaborDetection>& dets) {
  return detections_to_json(dets, [&](std::size_t k) { return f.elements.at(k).position(); });
}

/// Compact rendering plus a trailing newline: the byte format of every file
/// and response body.
inline std::string dump(const Json& j) { return j.dump() + "\n"; }

inline Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("document", std::string("invalid JSON (") + e.what() + ")");
  }
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Coordinate lists exported by stimulus tools: one "x,y" or "x,y,theta"
/// per line. Blank lines and lines starting with '#' are ignored, as is a
/// non-numeric first line (header). All lines must have the same arity.
struct CsvImport {
  std::vector<Point> points;
  std::vector<double> thetas;  // empty unless every line has a third column

  [[nodiscard]] bool oriented() const { return !thetas.empty(); }
};

inline CsvImport parse_coordinate_csv(std::string_view text) {
  CsvImport out;
  std::size_t arity = 0;
  std::size_t line_no = 0;
  bool first_content = true;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      std::string_view cell = rest.substr(0, comma);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      cols.push_back(cell);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const std::string where = "line " + std::to_string(line_no);
    std::vector<double> vals;
    try {
      for (auto c : cols) vals.push_back(parse_double(c));
    } catch (const std::invalid_argument&) {
      if (first_content) {
        first_content = false;
        continue;  // header
      }
      throw SchemaError(where, "expected numbers");
    }
    first_content = false;
    if (vals.size() != 2 && vals.size() != 3) throw SchemaError(where, "expected x,y or x,y,theta");
    if (arity == 0) arity = vals.size();
    if (vals.size() != arity) throw SchemaError(where, "inconsistent number of columns");
    out.points.push_back({vals[0], vals[1]});
    if (arity == 3) out.thetas.push_back(vals[2]);
  }
  return out;
}

inline DotPattern pattern_from_csv(std::string_view text, Domain domain) {
  const CsvImport c = parse_coordinate_csv(text);
  DotPattern p{domain, c.points};
  for (std::size_t k = 0; k < p.points.size(); ++k)
    detail::check_inside(p.points[k].x, p.points[k].y, domain, "points[" + std::to_string(k) + "]");
  return p;
}

inline GaborField field_from_csv(std::string_view text, Domain domain) {
  const CsvImport c = parse_coordinate_csv(text);
  if (!c.points.empty() && !c.oriented()) throw SchemaError("theta", "missing third column");
  GaborField f{domain, {}};
  for (std::size_t k = 0; k < c.points.size(); ++k) {
    const std::string path = "elements[" + std::to_string(k) + "]";
    detail::check_inside(c.points[k].x, c.points[k].y, domain, path);
    const double theta = c.thetas[k];
    if (!(theta >= 0.0 && theta < std::numbers::pi)) throw SchemaError(path + ".theta", "must lie in [0, pi)");
    f.elements.push_back({c.points[k].x, c.points[k].y, theta});
  }
  return f;
}

}  // namespace gestalt
