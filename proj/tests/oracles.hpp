#pragma once

// Reference computations used only by tests. They deliberately avoid the
// library's own algorithms.

#include <cmath>
#include <limits>
#include <vector>

#include "fuchsian/hypgeom.hpp"

namespace oracle {

/// Distance travelled from `p` along unit direction `u` before leaving the
/// convex polygon, found by marching and bisection on the half-plane tests.
inline double dense_ray_exit(const std::vector<fuchsian::HPoint>& verts, const fuchsian::HPoint& p,
                             const fuchsian::Vec3& u) {
  using namespace fuchsian;
  const std::size_t n = verts.size();
  auto inside = [&](double t) {
    Vec3 x = std::cosh(t) * p.x + std::sinh(t) * u;
    for (std::size_t j = 0; j < n; ++j)
      if (det3(verts[j].x, verts[(j + 1) % n].x, x) < 0) return false;
    return true;
  };
  double step = 1e-3, t = step;
  while (inside(t)) t += step;
  double lo = t - step, hi = t;
  for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
    double mid = 0.5 * (lo + hi);
    (inside(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle

#include <complex>
#include <stdexcept>
#include <utility>
#include <numbers>
#include <string>

namespace oracle {

using cplx = std::complex<double>;

/// 2x2 complex matrix in SU(1,1), acting on the Poincare disc.
struct SU11 {
  cplx a{1}, b{0}, c{0}, d{1};
  SU11 operator*(const SU11& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  SU11 inverse() const { return {d, -b, -c, a}; }
  double trace_abs() const { return std::abs(a + d); }
  double translation_length() const {
    double t = 0.5 * trace_abs();
    return t <= 1.0 ? 0.0 : 2.0 * std::acosh(t);
  }
};

inline SU11 rotation(double phi) {
  return {std::polar(1.0, phi / 2), 0.0, 0.0, std::polar(1.0, -phi / 2)};
}

inline SU11 translation(double dist, double phi) {
  SU11 T{std::cosh(dist / 2), std::sinh(dist / 2), std::sinh(dist / 2), std::cosh(dist / 2)};
  return rotation(phi) * T * rotation(-phi);
}

/// Side pairings of the regular octagon with corners at polar angles k*pi/4:
/// g_j translates by twice the inradius toward the midpoint of side j.
inline SU11 bolza_generator(int j) {
  const double pi = std::numbers::pi;
  double r = std::acosh(1.0 + std::sqrt(2.0));
  return translation(2 * r, (j + 0.5) * pi / 4);
}

/// Holonomy of a word of tokens e<j><+|->, multiplied in word order.
inline SU11 bolza_holonomy(const std::vector<std::pair<int, int>>& letters) {
  SU11 h;
  for (auto [j, s] : letters) h = h * (s > 0 ? bolza_generator(j) : bolza_generator(j).inverse());
  return h;
}

inline std::string bolza_word(const std::vector<std::pair<int, int>>& letters) {
  std::string w;
  for (auto [j, s] : letters) w += "e" + std::to_string(j) + (s > 0 ? "+ " : "- ");
  return w;
}

/// Moebius action on the disc.
inline cplx act(const SU11& g, cplx z) { return (g.a * z + g.b) / (g.c * z + g.d); }

/// Attracting and repelling fixed points on the unit circle of a hyperbolic g.
inline std::pair<cplx, cplx> fixed_points(const SU11& g) {
  // c z^2 + (d - a) z - b = 0
  cplx disc = std::sqrt((g.d - g.a) * (g.d - g.a) + 4.0 * g.b * g.c);
  cplx z1 = (g.a - g.d + disc) / (2.0 * g.c), z2 = (g.a - g.d - disc) / (2.0 * g.c);
  // attracting: |derivative| < 1, derivative = 1 / (c z + d)^2
  if (std::abs(g.c * z1 + g.d) > std::abs(g.c * z2 + g.d)) return {z1, z2};
  return {z2, z1};
}

inline cplx klein(cplx z) { return 2.0 * z / (1.0 + std::norm(z)); }

inline double cross2(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

/// Euclidean segment/convex-polygon intersection (polygon counterclockwise).
inline bool segment_meets_polygon(cplx p, cplx q, const std::vector<cplx>& poly) {
  auto inside = [&](cplx x) {
    for (std::size_t k = 0; k < poly.size(); ++k)
      if (cross2(poly[(k + 1) % poly.size()] - poly[k], x - poly[k]) < 0) return false;
    return true;
  };
  if (inside(p) || inside(q)) return true;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    cplx a = poly[k], b = poly[(k + 1) % poly.size()];
    double d1 = cross2(q - p, a - p), d2 = cross2(q - p, b - p);
    double d3 = cross2(b - a, p - a), d4 = cross2(b - a, q - a);
    if (d1 * d2 <= 0 && d3 * d4 <= 0) return true;
  }
  return false;
}

/// Geometric intersection number of two primitive Bolza classes, counted as
/// translates of axis(h) crossing a fundamental segment of axis(g). Tiles of
/// the octagon tiling are tracked as group elements: the tile across side j
/// of uP is u g_j P, across side j+4 it is u g_j^-1 P.
class AxisLinking {
 public:
  AxisLinking() {
    const double pi = std::numbers::pi;
    double rho = std::acosh(3 + 2 * std::sqrt(2.0));
    for (int k = 0; k < 8; ++k) verts_.push_back(std::polar(std::tanh(rho / 2), k * pi / 4));
    for (int j = 0; j < 4; ++j) gens_.push_back(bolza_generator(j));
    for (int j = 0; j < 4; ++j) gens_.push_back(bolza_generator(j).inverse());
  }

  long count(const SU11& g0, const SU11& h0) const {
    SU11 g = into_base_tile(g0), h = into_base_tile(h0);
    auto [ga, gr] = fixed_points(g);
    auto [ha, hr] = fixed_points(h);
    cplx x = base_point_on_axis(gr, ga);
    cplx y = base_point_on_axis(hr, ha);
    auto Tg = tiles_along(klein(x), klein(act(g, x)));
    auto Th = tiles_along(klein(y), klein(act(h, y)));
    cplx kx = klein(x), kgx = klein(act(g, x));
    std::vector<std::pair<cplx, cplx>> seen;
    long n = 0;
    for (const auto& u : Tg)
      for (const auto& t : Th) {
        SU11 k = u * t.inverse();
        cplx e1 = act(k, ha), e2 = act(k, hr);
        bool dup = false;
        for (auto& [s1, s2] : seen)
          if ((std::abs(s1 - e1) < 1e-9 && std::abs(s2 - e2) < 1e-9) ||
              (std::abs(s1 - e2) < 1e-9 && std::abs(s2 - e1) < 1e-9))
            dup = true;
        if (dup) continue;
        seen.push_back({e1, e2});
        // chords (gr, ga) and (e1, e2) cross iff their endpoints interleave
        double s1 = cross2(ga - gr, e1 - gr), s2 = cross2(ga - gr, e2 - gr);
        if (s1 * s2 >= 0) continue;
        // crossing point of the two Klein chords, and its place on [x, gx)
        cplx d1 = ga - gr, d2 = e2 - e1;
        double tt = cross2(e1 - gr, d2) / cross2(d1, d2);
        cplx c = gr + tt * d1;
        double px = std::real((kx - gr) * std::conj(d1)), pgx = std::real((kgx - gr) * std::conj(d1));
        double pc = std::real((c - gr) * std::conj(d1));
        if (pc >= px && pc < pgx) ++n;
      }
    return n;
  }

  /// True when the closed geodesic of g passes within eps of an octagon corner.
  bool passes_near_vertex(const SU11& g0, double eps = 1e-7) const {
    SU11 g = into_base_tile(g0);
    auto [ga, gr] = fixed_points(g);
    cplx x = base_point_on_axis(gr, ga);
    for (const auto& u : tiles_along(klein(x), klein(act(g, x))))
      for (cplx v : verts_) {
        cplx w = klein(act(u, v));
        // Euclidean distance to the chord is a fine proxy for a near-hit test
        double d = std::abs(cross2(ga - gr, w - gr)) / std::abs(ga - gr);
        if (d < eps) return true;
      }
    return false;
  }

 private:
  std::vector<cplx> tile(const SU11& u) const {
    std::vector<cplx> poly;
    for (cplx v : verts_) poly.push_back(klein(act(u, v)));
    return poly;
  }

  static bool same(const SU11& a, const SU11& b) {
    // SU(1,1) elements up to sign
    double p = std::abs(a.a - b.a) + std::abs(a.b - b.b) + std::abs(a.c - b.c) + std::abs(a.d - b.d);
    double m = std::abs(a.a + b.a) + std::abs(a.b + b.b) + std::abs(a.c + b.c) + std::abs(a.d + b.d);
    return std::min(p, m) < 1e-7 * (1 + std::abs(a.a));
  }

  /// Group elements of the tiles meeting the Klein segment [p, q], by BFS.
  std::vector<SU11> tiles_along(cplx p, cplx q) const {
    std::vector<SU11> found, frontier;
    SU11 id;
    if (!segment_meets_polygon(p, q, tile(id))) throw std::runtime_error("segment misses the base tile");
    found.push_back(id);
    frontier.push_back(id);
    while (!frontier.empty()) {
      std::vector<SU11> next;
      for (const auto& u : frontier)
        for (const auto& s : gens_) {
          SU11 w = u * s;
          bool known = false;
          for (const auto& f : found)
            if (same(f, w)) known = true;
          if (known || !segment_meets_polygon(p, q, tile(w))) continue;
          found.push_back(w);
          next.push_back(w);
        }
      frontier = next;
    }
    return found;
  }

  /// Conjugate g so that its axis meets the base tile.
  SU11 into_base_tile(const SU11& g) const {
    std::vector<SU11> frontier{SU11{}}, seen{SU11{}};
    for (int depth = 0; depth < 12; ++depth) {
      std::vector<SU11> next;
      for (const auto& u : frontier) {
        SU11 c = u.inverse() * g * u;
        auto [a, r] = fixed_points(c);
        if (segment_meets_polygon(klein(r), klein(a), tile(SU11{}))) return c;
        for (const auto& s : gens_) {
          SU11 w = u * s;
          bool known = false;
          for (const auto& f : seen)
            if (same(f, w)) known = true;
          if (known) continue;
          seen.push_back(w);
          next.push_back(w);
        }
      }
      frontier = next;
    }
    throw std::runtime_error("axis not found near the base tile");
  }

  /// A point of the axis inside the base tile: the midpoint of the chord
  /// piece clipped to the tile, mapped back to the disc.
  cplx base_point_on_axis(cplx r, cplx a) const {
    auto poly = tile(SU11{});
    double lo = 1, hi = 0;
    for (int i = 0; i <= 4000; ++i) {
      double t = i / 4000.0;
      cplx x = r + t * (a - r);
      bool in = true;
      for (std::size_t k = 0; k < poly.size(); ++k)
        if (cross2(poly[(k + 1) % poly.size()] - poly[k], x - poly[k]) < 0) in = false;
      if (in) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
      }
    }
    if (lo > hi) throw std::runtime_error("axis misses the base tile");
    cplx k = r + 0.5 * (lo + hi) * (a - r);
    // Klein -> disc
    return k / (1.0 + std::sqrt(std::max(0.0, 1.0 - std::norm(k))));
  }

  std::vector<cplx> verts_;
  std::vector<SU11> gens_;
};

/// Corners h_k p of a fundamental octagon for the Bolza side pairings, where p
/// is the regular corner at polar angle 0 moved by distance t in direction
/// pi - phi. Any such octagon that is convex carries an Exactly2Pi metric.
inline std::vector<cplx> shifted_bolza_corners(double t, double phi) {
  const double pi = std::numbers::pi;
  auto g = [](int j) { return bolza_generator(j); };
  auto gi = [](int j) { return bolza_generator(j).inverse(); };
  SU11 I;
  const SU11 h[8] = {I,
                     g(1) * gi(2) * g(3),
                     g(1) * gi(0),
                     g(3),
                     gi(0) * g(1) * gi(2) * g(3),
                     gi(0),
                     gi(2) * g(3),
                     gi(2) * g(1) * gi(0)};
  double rho = std::acosh(3 + 2 * std::sqrt(2.0));
  cplx p = act(translation(t, pi - phi), cplx(std::tanh(rho / 2), 0.0));
  std::vector<cplx> out;
  for (const auto& hk : h) out.push_back(act(hk, p));
  return out;
}

inline fuchsian::HPoint from_disc(cplx z) {
  double s = 1.0 - std::norm(z);
  return {{(1.0 + std::norm(z)) / s, 2.0 * z.real() / s, 2.0 * z.imag() / s}};
}

}  // namespace oracle
