#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <utility>

#include "podar/errors.hpp"

namespace podar {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

inline bool is_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

enum class ShapeKind { kPoint, kRectangle };

// Footprint of a body, centered on its position and aligned to its heading.
struct BodyGeometry {
  ShapeKind shape = ShapeKind::kPoint;
  double length = 0.0;  // extent along the heading, meters
  double width = 0.0;   // extent across the heading, meters

  static BodyGeometry point() { return {}; }

  static BodyGeometry rectangle(double length, double width) {
    if (!(length > 0.0) || !(width > 0.0)) {
      throw InvalidInputError("rectangle extents must be positive");
    }
    return {ShapeKind::kRectangle, length, width};
  }
};

struct Pose {
  Vec2 position;
  double heading = 0.0;  // radians
};

namespace detail {

inline void check_rectangle(const BodyGeometry& g) {
  if (g.shape == ShapeKind::kRectangle && (!(g.length > 0.0) || !(g.width > 0.0))) {
    throw InvalidInputError("degenerate rectangle: extents must be positive");
  }
}

inline std::array<Vec2, 4> rectangle_corners(const BodyGeometry& g, const Pose& pose) {
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  const double hx = 0.5 * g.length;
  const double hy = 0.5 * g.width;
  const auto corner = [&](double dx, double dy) {
    return Vec2{pose.position.x + c * dx - s * dy, pose.position.y + s * dx + c * dy};
  };
  return {corner(hx, hy), corner(hx, -hy), corner(-hx, -hy), corner(-hx, hy)};
}

// Gap from a point to an oriented rectangle, evaluated in the body frame.
inline double rectangle_point_distance(const BodyGeometry& g, const Pose& pose, Vec2 p) {
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  const Vec2 rel = p - pose.position;
  const double local_x = c * rel.x + s * rel.y;
  const double local_y = -s * rel.x + c * rel.y;
  const double dx = std::max(std::abs(local_x) - 0.5 * g.length, 0.0);
  const double dy = std::max(std::abs(local_y) - 0.5 * g.width, 0.0);
  return std::hypot(dx, dy);
}

inline double segment_distance(Vec2 p1, Vec2 q1, Vec2 p2, Vec2 q2) {
  const Vec2 d1 = q1 - p1;
  const Vec2 d2 = q2 - p2;
  const Vec2 r = p1 - p2;
  const double a = dot(d1, d1);
  const double e = dot(d2, d2);
  const double f = dot(d2, r);

  double s = 0.0;
  double t = 0.0;
  if (a == 0.0 && e == 0.0) {
    // both segments are points
  } else if (a == 0.0) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = dot(d1, r);
    if (e == 0.0) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = dot(d1, d2);
      const double denom = a * e - b * b;
      if (denom != 0.0) {
        s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      }
      t = b * s + f;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > e) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      } else {
        t /= e;
      }
    }
  }
  const Vec2 c1 = p1 + d1 * s;
  const Vec2 c2 = p2 + d2 * t;
  return norm(c1 - c2);
}

inline std::pair<double, double> project_onto(std::span<const Vec2> pts, Vec2 axis) {
  double lo = dot(pts[0], axis);
  double hi = lo;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double v = dot(pts[i], axis);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

// Separating-axis test on the four box axes; touching counts as overlap.
inline bool rectangles_overlap(std::span<const Vec2> a, std::span<const Vec2> b) {
  const std::array<Vec2, 4> axes = {
      a[1] - a[0], a[3] - a[0], b[1] - b[0], b[3] - b[0]};
  for (const Vec2 edge : axes) {
    const Vec2 axis{-edge.y, edge.x};
    const auto [alo, ahi] = project_onto(a, axis);
    const auto [blo, bhi] = project_onto(b, axis);
    if (ahi < blo || bhi < alo) {
      return false;
    }
  }
  return true;
}

inline double rectangle_rectangle_distance(const BodyGeometry& ga, const Pose& pa,
                                           const BodyGeometry& gb, const Pose& pb) {
  const std::array<Vec2, 4> ca = rectangle_corners(ga, pa);
  const std::array<Vec2, 4> cb = rectangle_corners(gb, pb);
  if (rectangles_overlap(ca, cb)) {
    return 0.0;
  }
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, segment_distance(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4]));
    }
  }
  return best;
}

}  // namespace detail

// Euclidean gap between two body contours; zero when they touch or overlap.
inline double contour_distance(const BodyGeometry& ga, const Pose& pa,
                               const BodyGeometry& gb, const Pose& pb) {
  detail::check_rectangle(ga);
  detail::check_rectangle(gb);
  const bool a_rect = ga.shape == ShapeKind::kRectangle;
  const bool b_rect = gb.shape == ShapeKind::kRectangle;
  if (a_rect && b_rect) {
    return detail::rectangle_rectangle_distance(ga, pa, gb, pb);
  }
  if (a_rect) {
    return detail::rectangle_point_distance(ga, pa, pb.position);
  }
  if (b_rect) {
    return detail::rectangle_point_distance(gb, pb, pa.position);
  }
  return norm(pa.position - pb.position);
}

}  // namespace podar
