// geometry.hpp -- planar primitives shared by the dot and Gabor detectors.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace gestalt {

/// Absolute tolerance (length units) for every inclusion test.
inline constexpr double kGeomTol = 1e-9;

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Domain {
  double width = 0.0;
  double height = 0.0;

  [[nodiscard]] double area() const { return width * height; }
  [[nodiscard]] double diagonal() const { return std::hypot(width, height); }
  [[nodiscard]] bool contains(Point p) const {
    return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
  }
};

inline double distance(Point a, Point b) { return std::hypot(b.x - a.x, b.y - a.y); }

/// Orthonormal frame attached to a segment a->b: t runs along the segment
/// (0 at a, length at b), d is the signed offset to its left.
class AxisFrame {
 public:
  AxisFrame(Point a, Point b) : a_(a) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    length_ = std::hypot(dx, dy);
    if (length_ > 0.0) {
      ux_ = dx / length_;
      uy_ = dy / length_;
    }
  }

  [[nodiscard]] double length() const { return length_; }
  [[nodiscard]] bool degenerate() const { return length_ <= kGeomTol; }
  [[nodiscard]] double along(Point p) const { return (p.x - a_.x) * ux_ + (p.y - a_.y) * uy_; }
  [[nodiscard]] double across(Point p) const { return -(p.x - a_.x) * uy_ + (p.y - a_.y) * ux_; }
  [[nodiscard]] bool within_length(double t) const { return t >= -kGeomTol && t <= length_ + kGeomTol; }

  /// Axis direction folded into [0, pi).
  [[nodiscard]] double direction_mod_pi() const {
    double a = std::atan2(uy_, ux_);
    if (a < 0.0) a += std::numbers::pi;
    if (a >= std::numbers::pi) a -= std::numbers::pi;
    return a;
  }

  /// World position of frame coordinates (t, d).
  [[nodiscard]] Point at(double t, double d) const {
    return {a_.x + t * ux_ - d * uy_, a_.y + t * uy_ + d * ux_};
  }

 private:
  Point a_;
  double length_ = 0.0;
  double ux_ = 0.0, uy_ = 0.0;
};

using Polygon = std::vector<Point>;

inline double polygon_area(const Polygon& poly) {
  double s = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % n];
    s += p.x * q.y - q.x * p.y;
  }
  return std::abs(s) * 0.5;
}

/// Sutherland-Hodgman clip of a convex polygon against [0,w]x[0,h].
inline Polygon clip_to_domain(Polygon poly, const Domain& dom) {
  auto clip = [](const Polygon& in, auto inside, auto intersect) {
    Polygon out;
    for (std::size_t i = 0, n = in.size(); i < n; ++i) {
      const Point cur = in[i], prev = in[(i + n - 1) % n];
      const bool ci = inside(cur), pi = inside(prev);
      if (ci) {
        if (!pi) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (pi) {
        out.push_back(intersect(prev, cur));
      }
    }
    return out;
  };
  auto at_x = [](double x) {
    return [x](Point p, Point q) { return Point{x, p.y + (q.y - p.y) * (x - p.x) / (q.x - p.x)}; };
  };
  auto at_y = [](double y) {
    return [y](Point p, Point q) { return Point{p.x + (q.x - p.x) * (y - p.y) / (q.y - p.y), y}; };
  };
  poly = clip(poly, [](Point p) { return p.x >= 0.0; }, at_x(0.0));
  if (poly.empty()) return poly;
  poly = clip(poly, [&](Point p) { return p.x <= dom.width; }, at_x(dom.width));
  if (poly.empty()) return poly;
  poly = clip(poly, [](Point p) { return p.y >= 0.0; }, at_y(0.0));
  if (poly.empty()) return poly;
  return clip(poly, [&](Point p) { return p.y <= dom.height; }, at_y(dom.height));
}

/// Area of the band {0 <= t <= L, d0 <= d <= d1} of a frame inside the domain.
inline double band_area_in_domain(const AxisFrame& f, double d0, double d1, const Domain& dom) {
  Polygon band{f.at(0.0, d0), f.at(f.length(), d0), f.at(f.length(), d1), f.at(0.0, d1)};
  return polygon_area(clip_to_domain(std::move(band), dom));
}

/// Euclidean distance from p to the closed segment [a, b].
inline double point_segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return distance(p, Point{a.x + t * dx, a.y + t * dy});
}

/// Fold an angle into [0, pi).
inline double wrap_pi(double theta) {
  double r = std::fmod(theta, std::numbers::pi);
  if (r < 0.0) r += std::numbers::pi;
  if (r >= std::numbers::pi) r = 0.0;
  return r;
}

/// Distance between two orientations modulo pi, in [0, pi/2].
inline double orientation_distance(double a, double b) {
  const double d = wrap_pi(a - b);
  return std::min(d, std::numbers::pi - d);
}

}  // namespace gestalt
