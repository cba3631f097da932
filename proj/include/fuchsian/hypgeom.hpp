#pragma once

// Hyperbolic-plane primitives in the hyperboloid model.
//
// Points live on the upper sheet of <x,x> = -1 for the Minkowski form
// <x,y> = -x0*y0 + x1*y1 + x2*y2. Geodesics are intersections with planes
// through the origin, so every incidence question is a small linear-algebra
// problem. Orientation of a triple (a,b,c) is the sign of det[a b c].

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "fuchsian/config.hpp"
#include "fuchsian/errors.hpp"

namespace fuchsian {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 operator-(const Vec3& a) { return {-a[0], -a[1], -a[2]}; }

inline double mdot(const Vec3& a, const Vec3& b) { return -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// J * (a x b): Minkowski-orthogonal to a and b; <mcross(a,b), x> = det[a b x].
inline Vec3 mcross(const Vec3& a, const Vec3& b) {
  Vec3 c = cross(a, b);
  return {-c[0], c[1], c[2]};
}

inline double det3(const Vec3& a, const Vec3& b, const Vec3& c) {
  return a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
         a[2] * (b[0] * c[1] - b[1] * c[0]);
}

struct HPoint {
  Vec3 x{1.0, 0.0, 0.0};

  static HPoint origin() { return {}; }

  /// Point at distance r from the origin in direction phi.
  static HPoint polar(double r, double phi) {
    return {{std::cosh(r), std::sinh(r) * std::cos(phi), std::sinh(r) * std::sin(phi)}};
  }

  /// Rescale back onto the hyperboloid; used after long products of maps.
  HPoint normalized() const {
    double n = std::sqrt(std::max(-mdot(x, x), 1e-300));
    Vec3 y = (1.0 / n) * x;
    if (y[0] < 0) y = -y;
    return {y};
  }

  bool is_valid(double tol = 1e-12) const {
    return std::abs(mdot(x, x) + 1.0) <= tol * std::max(1.0, x[0] * x[0]) && x[0] >= 1.0 - tol;
  }
};

/// A unit tangent vector at a point.
struct HDirection {
  HPoint base;
  Vec3 v{0.0, 1.0, 0.0};

  bool is_valid(double tol = 1e-12) const {
    double scale = std::max(1.0, base.x[0] * base.x[0]);
    return base.is_valid(tol) && std::abs(mdot(v, v) - 1.0) <= tol * scale &&
           std::abs(mdot(v, base.x)) <= tol * scale;
  }
};

inline double distance(const HPoint& a, const HPoint& b) {
  // 4 sinh^2(d/2) = <a-b, a-b>; stable for nearby points.
  Vec3 d = a.x - b.x;
  double q = std::max(0.0, mdot(d, d));
  return 2.0 * std::asinh(0.5 * std::sqrt(q));
}

/// Unit tangent at a pointing toward b (a != b).
inline Vec3 unit_tangent(const HPoint& a, const HPoint& b) {
  double c = -mdot(a.x, b.x);
  Vec3 t = b.x - c * a.x;
  double n = std::sqrt(std::max(mdot(t, t), 1e-300));
  return (1.0 / n) * t;
}

/// Tangent at p obtained by rotating u a quarter turn counterclockwise.
inline Vec3 left_normal(const HPoint& p, const Vec3& u) { return mcross(p.x, u); }

inline Vec3 rotate(const HPoint& p, const Vec3& u, double angle) {
  return std::cos(angle) * u + std::sin(angle) * left_normal(p, u);
}

/// Project u onto the tangent plane at p and rescale to unit length.
inline Vec3 retangent(const HPoint& p, const Vec3& u) {
  Vec3 t = u + mdot(u, p.x) * p.x;
  return (1.0 / std::sqrt(std::max(mdot(t, t), 1e-300))) * t;
}

/// Follow the geodesic from p in unit direction u for arc length t.
inline HPoint exp_map(const HPoint& p, const Vec3& u, double t) {
  return {std::cosh(t) * p.x + std::sinh(t) * u};
}

/// Velocity of that geodesic after arc length t.
inline Vec3 transport_along(const HPoint& p, const Vec3& u, double t) {
  return std::sinh(t) * p.x + std::cosh(t) * u;
}

/// Angle in [0, pi] between two unit tangents at the same point.
inline double angle_between(const Vec3& u, const Vec3& v) {
  return std::acos(std::clamp(mdot(u, v), -1.0, 1.0));
}

/// Angle at vertex b of the hyperbolic triangle (a, b, c).
inline double vertex_angle(const HPoint& a, const HPoint& b, const HPoint& c) {
  return angle_between(unit_tangent(b, a), unit_tangent(b, c));
}

// ---------------------------------------------------------------------------
// Isometries: 3x3 matrices M with M^T J M = J.

struct Isometry {
  std::array<Vec3, 3> rows{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};

  static Isometry identity() { return {}; }

  Vec3 apply(const Vec3& v) const {
    return {rows[0][0] * v[0] + rows[0][1] * v[1] + rows[0][2] * v[2],
            rows[1][0] * v[0] + rows[1][1] * v[1] + rows[1][2] * v[2],
            rows[2][0] * v[0] + rows[2][1] * v[1] + rows[2][2] * v[2]};
  }
  HPoint apply(const HPoint& p) const { return {apply(p.x)}; }

  Isometry operator*(const Isometry& o) const {
    Isometry r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r.rows[i][j] = rows[i][0] * o.rows[0][j] + rows[i][1] * o.rows[1][j] + rows[i][2] * o.rows[2][j];
    return r;
  }

  /// Inverse via J M^T J.
  Isometry inverse() const {
    static constexpr std::array<double, 3> s{-1.0, 1.0, 1.0};
    Isometry r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.rows[i][j] = s[i] * rows[j][i] * s[j];
    return r;
  }

  double determinant() const { return det3(rows[0], rows[1], rows[2]); }

  /// The isometry taking the orthonormal frame (p, u, left_normal(p,u)) to
  /// (q, w, +/-left_normal(q,w)); `flip` selects the orientation-reversing one.
  static Isometry from_frames(const HPoint& p, const Vec3& u, const HPoint& q, const Vec3& w, bool flip = false) {
    Vec3 n1 = left_normal(p, u);
    Vec3 n2 = left_normal(q, w);
    if (flip) n2 = -n2;
    // F columns: p, u, n1. F^{-1} = J F^T J.
    std::array<Vec3, 3> src{p.x, u, n1};
    std::array<Vec3, 3> dst{q.x, w, n2};
    static constexpr std::array<double, 3> s{-1.0, 1.0, 1.0};
    // Metric signs of the frame vectors: <p,p> = -1, <u,u> = <n,n> = 1.
    static constexpr std::array<double, 3> g{-1.0, 1.0, 1.0};
    Isometry r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += dst[k][i] * g[k] * src[k][j] * s[j];
        r.rows[i][j] = acc;
      }
    return r;
  }
};

// ---------------------------------------------------------------------------
// Geodesic arcs.

struct GeodesicArc {
  HPoint a;
  HPoint b;
  double length = 0.0;
  Vec3 tangent_a{};  // unit tangent at a toward b
  Vec3 normal{};     // <normal, x> > 0 iff x lies left of a -> b

  GeodesicArc() = default;
  GeodesicArc(const HPoint& from, const HPoint& to)
      : a(from), b(to), length(distance(from, to)), tangent_a(unit_tangent(from, to)), normal(mcross(from.x, to.x)) {}

  HPoint point_at(double s) const { return exp_map(a, tangent_a, s); }
  Vec3 tangent_at(double s) const { return transport_along(a, tangent_a, s); }
  /// Signed arc parameter of a point already known to lie on the line.
  double parameter_of(const HPoint& p) const { return std::asinh(mdot(p.x, tangent_a)); }
};

enum class CrossStatus { Hit, Miss, Tangent };

struct CrossResult {
  CrossStatus status = CrossStatus::Miss;
  HPoint point;
  double angle = 0.0;   // in (0, pi), against the arc direction a -> b
  double ray_t = 0.0;   // distance travelled along the ray
  double arc_s = 0.0;   // parameter along the arc from a
};

/// First forward intersection of the ray from `start` with `arc`.
///
/// A hit whose incidence angle is within `tol.tangent_angle` of 0 or pi, or a
/// ray running along the arc's own geodesic, is reported as Tangent.
inline CrossResult geodesic_cross_side(const HDirection& start, const GeodesicArc& arc,
                                       const Tolerances& tol = default_tolerances()) {
  CrossResult res;
  const double nn = std::sqrt(std::max(mdot(arc.normal, arc.normal), 1e-300));
  const double alpha = mdot(arc.normal, start.base.x) / nn;
  const double beta = mdot(arc.normal, start.v) / nn;
  if (std::abs(beta) < tol.tangent_angle && std::abs(alpha) < tol.geometric) {
    res.status = CrossStatus::Tangent;
    return res;
  }
  if (std::abs(beta) <= std::abs(alpha)) return res;  // no root with |tanh t| < 1
  const double th = -alpha / beta;
  if (th <= 0.0) return res;
  const double t = std::atanh(th);
  if (t <= tol.geometric) return res;
  HPoint x = exp_map(start.base, start.v, t);
  double s = arc.parameter_of(x);
  if (s < -tol.geometric || s > arc.length + tol.geometric) return res;
  Vec3 ray_dir = transport_along(start.base, start.v, t);
  Vec3 arc_dir = arc.tangent_at(s);
  double ang = angle_between(ray_dir, arc_dir);
  res.point = x;
  res.angle = ang;
  res.ray_t = t;
  res.arc_s = std::clamp(s, 0.0, arc.length);
  res.status = (ang < tol.tangent_angle || ang > std::numbers::pi - tol.tangent_angle) ? CrossStatus::Tangent
                                                                                        : CrossStatus::Hit;
  return res;
}

/// Intersection point of two geodesic lines given by their normals, if they meet.
inline std::optional<HPoint> line_intersection(const Vec3& n1, const Vec3& n2) {
  Vec3 p = mcross(n1, n2);
  double q = mdot(p, p);
  if (!(q < 0.0)) return std::nullopt;
  HPoint r{(1.0 / std::sqrt(-q)) * p};
  if (r.x[0] < 0) r.x = -r.x;
  return r;
}

// ---------------------------------------------------------------------------
// Polygons.

inline double triangle_area(const HPoint& a, const HPoint& b, const HPoint& c) {
  return std::numbers::pi - vertex_angle(c, a, b) - vertex_angle(a, b, c) - vertex_angle(b, c, a);
}

/// Compact convex hyperbolic polygon, vertices counterclockwise. Side k
/// runs from vertex k to vertex k+1; angle k is the interior angle at vertex k.
struct HyperbolicPolygon {
  std::vector<HPoint> vertices;
  std::vector<double> angles;
  std::vector<double> side_lengths;
  std::optional<double> inradius;  // present iff the polygon is normal

  std::size_t size() const { return vertices.size(); }
  GeodesicArc side(std::size_t k) const { return {vertices[k], vertices[(k + 1) % size()]}; }

  /// Gauss-Bonnet: (n-2)pi - sum of angles.
  double area() const {
    double s = 0.0;
    for (double a : angles) s += a;
    return (static_cast<double>(size()) - 2.0) * std::numbers::pi - s;
  }

  /// Fan triangulation from vertex 0 with angles measured from coordinates.
  double triangulated_area() const {
    double s = 0.0;
    for (std::size_t k = 1; k + 1 < size(); ++k) s += triangle_area(vertices[0], vertices[k], vertices[k + 1]);
    return s;
  }

  HPoint centroid_hint() const {
    Vec3 acc{0, 0, 0};
    for (const auto& v : vertices) acc = acc + v.x;
    return HPoint{acc}.normalized();
  }
};

/// Measure angles and sides from vertex coordinates; throws if the vertices
/// are not a convex counterclockwise polygon.
inline HyperbolicPolygon make_polygon(std::vector<HPoint> vertices, const Tolerances& tol = default_tolerances()) {
  const std::size_t n = vertices.size();
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "polygon needs at least 3 vertices");
  HyperbolicPolygon P;
  P.vertices = std::move(vertices);
  P.angles.resize(n);
  P.side_lengths.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const HPoint& prev = P.vertices[(k + n - 1) % n];
    const HPoint& cur = P.vertices[k];
    const HPoint& next = P.vertices[(k + 1) % n];
    if (det3(prev.x, cur.x, next.x) <= 0.0)
      throw Error(ErrorKind::InvalidArgument, "polygon is not convex and counterclockwise");
    P.angles[k] = vertex_angle(prev, cur, next);
    P.side_lengths[k] = distance(cur, next);
    if (P.angles[k] <= 0.0 || P.angles[k] >= std::numbers::pi || P.side_lengths[k] <= tol.geometric)
      throw Error(ErrorKind::InvalidArgument, "degenerate polygon corner");
  }
  return P;
}

/// The unique polygon with the given interior angles that has an inscribed
/// circle tangent to all sides. The incenter is the origin.
///
/// About the incenter the polygon splits into 2n right triangles; the one at
/// vertex i has angle alpha_i/2 there and central angle beta_i with
/// cos(alpha_i/2) = cosh(r) sin(beta_i). The inradius solves sum beta_i = pi.
inline HyperbolicPolygon solve_normal_polygon(std::span<const double> angles,
                                              const Tolerances& tol = default_tolerances()) {
  using std::numbers::pi;
  const std::size_t n = angles.size();
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "polygon needs at least 3 vertices");
  double sum = 0.0;
  for (double a : angles) {
    if (!(a > 0.0 && a < pi)) throw Error(ErrorKind::InvalidArgument, "angles must lie in (0, pi)");
    sum += a;
  }
  if (sum >= (static_cast<double>(n) - 2.0) * pi - 1e-14)
    throw Error(ErrorKind::AngleSumTooLarge, "angle sum must be below (n-2)pi for a hyperbolic polygon");

  auto residual = [&](double r) {
    double s = 0.0;
    for (double a : angles) s += std::asin(std::min(1.0, std::cos(0.5 * a) / std::cosh(r)));
    return s - pi;
  };
  double lo = 0.0, hi = 1.0;
  if (!(residual(lo) > 0.0)) throw Error(ErrorKind::NoSolution, "central-angle equation has no root");
  while (residual(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e3) throw Error(ErrorKind::NoSolution, "central-angle equation has no root");
  }
  double r = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    r = 0.5 * (lo + hi);
    double f = residual(r);
    if (f == 0.0 || hi - lo < 1e-16) break;
    if (f > 0.0) lo = r; else hi = r;
  }
  if (std::abs(residual(r)) > 1e-12) throw Error(ErrorKind::NoSolution, "bisection did not converge");

  std::vector<double> beta(n);
  for (std::size_t i = 0; i < n; ++i) beta[i] = std::asin(std::min(1.0, std::cos(0.5 * angles[i]) / std::cosh(r)));

  std::vector<HPoint> verts(n);
  double phi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Right triangle (incenter, vertex, tangent point): cosh(rho) = cot(A) cot(B).
    double cosh_rho = 1.0 / (std::tan(0.5 * angles[i]) * std::tan(beta[i]));
    verts[i] = HPoint::polar(std::acosh(std::max(1.0, cosh_rho)), phi);
    phi += beta[i] + beta[(i + 1) % n];
  }
  HyperbolicPolygon P = make_polygon(std::move(verts), tol);
  P.inradius = r;
  return P;
}

/// Realize a polygon from interior angles and side lengths by walking its
/// boundary; throws InvalidArgument when the data do not close up.
inline HyperbolicPolygon polygon_from_angles_and_lengths(std::span<const double> angles,
                                                         std::span<const double> lengths,
                                                         const Tolerances& tol = default_tolerances()) {
  const std::size_t n = angles.size();
  if (n < 3 || lengths.size() != n) throw Error(ErrorKind::DimensionMismatch, "need n angles and n side lengths");
  // Walk forward and backward from corner 0 and meet halfway: rounding grows
  // like exp(arc length walked), so this halves the exponent.
  std::vector<HPoint> verts(n);
  const HPoint o = HPoint::origin();
  const Vec3 u0{0.0, 1.0, 0.0};
  verts[0] = o;
  const std::size_t h = n / 2;
  HPoint p = o;
  Vec3 u = u0;
  for (std::size_t k = 0; k < h; ++k) {
    HPoint q = exp_map(p, u, lengths[k]);
    Vec3 w = transport_along(p, u, lengths[k]);
    p = q.normalized();
    verts[k + 1] = p;
    u = retangent(p, rotate(p, retangent(p, w), std::numbers::pi - angles[k + 1]));
  }
  HPoint meet_fwd = p;
  p = o;
  u = rotate(o, u0, angles[0]);
  for (std::size_t k = n; k-- > h;) {  // side k, walked from corner k+1 back to corner k
    HPoint q = exp_map(p, u, lengths[k]);
    Vec3 w = transport_along(p, u, lengths[k]);
    p = q.normalized();
    if (k > h) verts[k] = p;
    u = retangent(p, rotate(p, retangent(p, w), -(std::numbers::pi - angles[k])));
  }
  double gap = distance(p, meet_fwd);
  double scale = 0.0, fwd = 0.0, bwd = 0.0;
  for (std::size_t k = 0; k < n; ++k) (k < h ? fwd : bwd) += lengths[k];
  scale = std::max(fwd, bwd);
  if (gap > tol.geometric * std::max(1.0, std::exp(scale)))
    throw Error(ErrorKind::InvalidArgument, "angles and side lengths do not close up");
  HyperbolicPolygon P = make_polygon(std::move(verts), tol);
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(P.angles[k] - angles[k]) > 1e-8 || std::abs(P.side_lengths[k] - lengths[k]) > 1e-8)
      throw Error(ErrorKind::InvalidArgument, "angles and side lengths do not close up");
  }
  return P;
}

/// (n-2)pi - sum(angles), cross-checked against the triangulated area.
inline double polygon_area(const HyperbolicPolygon& P, const Tolerances& tol = default_tolerances()) {
  double a = P.area();
  double t = P.triangulated_area();
  if (std::abs(a - t) > tol.geometric * std::max(1.0, std::abs(a)))
    throw Error(ErrorKind::InvalidArgument, "Gauss-Bonnet area disagrees with triangulated area");
  return a;
}

}  // namespace fuchsian
