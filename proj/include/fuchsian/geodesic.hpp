#pragma once

// Geodesics in a piecewise hyperbolic complex: chamber-by-chamber flow, the
// symbolic coding by edge vectors, and closed geodesics by straightening a
// gallery.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fuchsian/complex.hpp"
#include "fuchsian/config.hpp"
#include "fuchsian/errors.hpp"
#include "fuchsian/hypgeom.hpp"

namespace fuchsian {

/// Unit vector based at an interior edge point, pointing into `chamber`
/// across side `side`. Direction = cos(angle) * inward normal + sin(angle) * edge tangent.
struct EdgeVector {
  int edge = -1;
  double position = 0.0;
  int chamber = -1;
  int side = -1;
  double angle = 0.0;
};

inline HDirection direction_of(const MetricAssignment& M, const EdgeVector& v) {
  HPoint p = M.edge_point(v.chamber, v.side, v.position);
  Vec3 n = M.inward_normal(v.chamber, v.side, v.position);
  Vec3 t = M.edge_tangent(v.chamber, v.side, v.position);
  return {p, std::cos(v.angle) * n + std::sin(v.angle) * t};
}

/// Where a ray inside a chamber leaves it.
struct ChamberExit {
  int side = -1;
  double length = 0.0;     // distance travelled inside the chamber
  double position = 0.0;   // edge parameter of the exit point
  double angle = 0.0;      // angle of the continuing direction from the far side's inward normal
  HPoint point;
  Vec3 direction{};        // velocity at the exit point
};

/// First exit of the ray `d` from chamber `c`, ignoring side `skip`.
/// Throws VertexHit for exits within tol.vertex_hit of a corner, Tangent for
/// grazing exits.
inline ChamberExit exit_chamber(const Complex& C, const MetricAssignment& M, int c, const HDirection& d, int skip,
                                const Tolerances& tol = default_tolerances()) {
  const int n = static_cast<int>(C.chambers[c].size());
  double best = std::numeric_limits<double>::infinity();
  double second = best;
  int best_k = -1;
  CrossResult best_hit;
  bool best_tangent = false;
  for (int k = 0; k < n; ++k) {
    if (k == skip) continue;
    const GeodesicArc& arc = M.side_arc(c, k);
    CrossResult r = geodesic_cross_side(d, arc, tol);
    if (r.status == CrossStatus::Miss) continue;
    if (r.status == CrossStatus::Tangent && r.ray_t == 0.0) continue;  // ray along the side's own line
    if (r.ray_t < best) {
      second = best;
      best = r.ray_t;
      best_k = k;
      best_hit = r;
      best_tangent = r.status == CrossStatus::Tangent;
    } else if (r.ray_t < second) {
      second = r.ray_t;
    }
  }
  if (best_k < 0) throw Error(ErrorKind::VertexHit, "ray leaves the chamber through a corner");
  const GeodesicArc& arc = M.side_arc(c, best_k);
  if (best_hit.arc_s < tol.vertex_hit || best_hit.arc_s > arc.length - tol.vertex_hit ||
      second - best < tol.vertex_hit)
    throw Error(ErrorKind::VertexHit, "ray leaves the chamber through a corner");
  if (best_tangent) throw Error(ErrorKind::Tangent, "ray grazes a side");
  ChamberExit ex;
  ex.side = best_k;
  ex.length = best;
  ex.point = best_hit.point;
  ex.position = M.edge_param(c, best_k, best_hit.arc_s);
  ex.direction = transport_along(d.base, d.v, best);
  Vec3 nin = M.inward_normal(c, best_k, ex.position);
  Vec3 t = M.edge_tangent(c, best_k, ex.position);
  ex.angle = std::atan2(mdot(ex.direction, t), -mdot(ex.direction, nin));
  if (std::abs(ex.angle) > std::numbers::pi / 2 - tol.tangent_angle) throw Error(ErrorKind::Tangent, "ray grazes a side");
  return ex;
}

struct FlowStep {
  EdgeVector in;
  int out_side = -1;
  int out_edge = -1;
  double out_position = 0.0;
  double out_angle = 0.0;   // angle of the continuation, measured on the far side
  double segment_length = 0.0;
  HPoint entry_point;
  HPoint exit_point;
};

inline FlowStep flow_through_chamber(const Complex& C, const MetricAssignment& M, const EdgeVector& v,
                                     const Tolerances& tol = default_tolerances()) {
  HDirection d = direction_of(M, v);
  ChamberExit ex = exit_chamber(C, M, v.chamber, d, v.side, tol);
  FlowStep s;
  s.in = v;
  s.out_side = ex.side;
  s.out_edge = C.chambers[v.chamber].sides[ex.side].edge;
  s.out_position = ex.position;
  s.out_angle = ex.angle;
  s.segment_length = ex.length;
  s.entry_point = d.base;
  s.exit_point = ex.point;
  return s;
}

/// F(v): one vector per other chamber side glued along the exit edge.
inline std::vector<EdgeVector> continuations(const Complex& C, const FlowStep& s) {
  std::vector<EdgeVector> out;
  for (const Incidence& inc : C.edges[s.out_edge].incidences) {
    if (inc.chamber == s.in.chamber && inc.side == s.out_side) continue;
    out.push_back({s.out_edge, s.out_position, inc.chamber, inc.side, s.out_angle});
  }
  return out;
}

/// I(v): the reversed vector at the exit point, pointing back into the chamber.
inline EdgeVector involution(const FlowStep& s) {
  return {s.out_edge, s.out_position, s.in.chamber, s.out_side, -s.out_angle};
}

using BranchChooser = std::function<std::size_t(const std::vector<EdgeVector>&)>;

inline BranchChooser first_branch() {
  return [](const std::vector<EdgeVector>&) { return std::size_t{0}; };
}

/// A finite piece of a symbolic orbit: w_0..w_n with segment lengths t_{w_i}.
struct SymbolicWord {
  std::vector<EdgeVector> vectors;
  std::vector<double> lengths;
  std::vector<std::size_t> branch_counts;  // |F(w_i)| used for each transition
  double offset = 0.0;                     // suspension time inside w_0's segment
  double total_length() const {
    double s = 0;
    for (double t : lengths) s += t;
    return s;
  }
};

inline SymbolicWord code_geodesic(const Complex& C, const MetricAssignment& M, const EdgeVector& start,
                                  std::size_t steps, const BranchChooser& choose,
                                  const Tolerances& tol = default_tolerances()) {
  SymbolicWord w;
  w.vectors.push_back(start);
  EdgeVector cur = start;
  for (std::size_t i = 0; i < steps; ++i) {
    FlowStep s;
    try {
      s = flow_through_chamber(C, M, cur, tol);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " at step " + std::to_string(i), static_cast<int>(i));
    }
    auto F = continuations(C, s);
    if (F.empty()) throw Error(ErrorKind::NotClosed, "trajectory leaves the patch at step " + std::to_string(i),
                               static_cast<int>(i));
    std::size_t k = choose(F);
    w.lengths.push_back(s.segment_length);
    w.branch_counts.push_back(F.size());
    cur = F[k];
    w.vectors.push_back(cur);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Galleries and closed geodesics.

/// Passage from chamber `from.chamber` through its side `from.side` into
/// `to.chamber` through side `to.side`; both sides carry the same edge.
struct Crossing {
  Incidence from;
  Incidence to;
  bool operator==(const Crossing&) const = default;
};

inline Crossing reversed(const Crossing& x) { return {x.to, x.from}; }

struct ParsedWord {
  int start_chamber = 0;
  std::vector<Crossing> crossings;
};

/// Token syntax: optional leading `@<chamber>`, then `e<id><+|->[@<chamber>]`
/// per crossing. The sign is the orientation with which the current chamber
/// carries the edge; `@` names the chamber entered when several are possible.
inline ParsedWord parse_word(const Complex& C, const std::string& text) {
  ParsedWord W;
  std::istringstream is(text);
  std::string tok;
  bool first = true;
  int cur = 0;
  while (is >> tok) {
    if (first && tok.size() > 1 && tok[0] == '@') {
      cur = C.chamber_index(tok.substr(1));
      if (cur < 0) throw Error(ErrorKind::ParseError, "unknown chamber in '" + tok + "'");
      W.start_chamber = cur;
      first = false;
      continue;
    }
    first = false;
    std::string target;
    auto at = tok.find('@');
    std::string head = tok;
    if (at != std::string::npos) {
      target = tok.substr(at + 1);
      head = tok.substr(0, at);
    }
    if (head.size() < 2 || (head.back() != '+' && head.back() != '-'))
      throw Error(ErrorKind::ParseError, "bad crossing token '" + tok + "'");
    int sign = head.back() == '+' ? 1 : -1;
    std::string id = head.substr(0, head.size() - 1);
    int e = C.edge_index(id);
    if (e < 0 && id.size() > 1 && id[0] == 'e') e = C.edge_index(id.substr(1));
    if (e < 0) throw Error(ErrorKind::ParseError, "unknown edge in '" + tok + "'");
    const Chamber& ch = C.chambers[cur];
    int side = -1;
    for (std::size_t k = 0; k < ch.size(); ++k)
      if (ch.sides[k].edge == e && ch.sides[k].orient == sign) {
        side = static_cast<int>(k);
        break;
      }
    if (side < 0) throw Error(ErrorKind::ParseError, "chamber " + ch.id + " has no side " + head);
    int tc = -1;
    if (!target.empty()) {
      tc = C.chamber_index(target);
      if (tc < 0) throw Error(ErrorKind::ParseError, "unknown chamber in '" + tok + "'");
    }
    std::vector<Incidence> options;
    for (const auto& inc : C.edges[e].incidences) {
      if (inc.chamber == cur && inc.side == side) continue;
      if (tc >= 0 && inc.chamber != tc) continue;
      options.push_back(inc);
    }
    if (options.empty()) throw Error(ErrorKind::ParseError, "no chamber across '" + tok + "'");
    if (options.size() > 1 && tc < 0)
      throw Error(ErrorKind::ParseError, "crossing '" + tok + "' is ambiguous; name the chamber with @");
    W.crossings.push_back({{cur, side}, options.front()});
    cur = options.front().chamber;
  }
  if (cur != W.start_chamber) throw Error(ErrorKind::NotClosed, "word does not return to its start chamber");
  return W;
}

inline std::string format_word(const Complex& C, const std::vector<Crossing>& g) {
  std::string s;
  if (!g.empty()) s = "@" + C.chambers[g.front().from.chamber].id;
  for (const auto& x : g) {
    const Side& sd = C.chambers[x.from.chamber].sides[x.from.side];
    s += " e" + C.edges[sd.edge].id + (sd.orient > 0 ? "+" : "-") + "@" + C.chambers[x.to.chamber].id;
  }
  return s;
}

/// Gallery traversed backwards.
inline std::vector<Crossing> invert_gallery(const std::vector<Crossing>& g) {
  std::vector<Crossing> r;
  for (auto it = g.rbegin(); it != g.rend(); ++it) r.push_back(reversed(*it));
  return r;
}

/// Piece of a closed geodesic inside one chamber (chamber coordinates).
struct GeodesicPiece {
  int chamber = -1;
  int entry_side = -1;
  int exit_side = -1;
  double entry_position = 0.0;
  double exit_position = 0.0;
  HPoint a;
  HPoint b;
  double length = 0.0;
  bool entry_at_vertex = false;
  bool exit_at_vertex = false;
};

struct ClosedGeodesic {
  std::vector<Crossing> gallery;
  std::vector<double> positions;        // edge parameter at each crossing
  std::vector<GeodesicPiece> pieces;    // piece j lies in gallery[j].from.chamber
  double length = 0.0;
  std::string word;                     // the certified gallery as a crossing word
  double max_angle_mismatch = 0.0;      // at crossings away from vertices
  double min_vertex_link_distance = std::numeric_limits<double>::infinity();
  int vertex_passages = 0;
  double stationarity_gap = 0.0;        // length change under one more pass
  int reroutes = 0;
};

namespace detail {

class Straightener {
 public:
  Straightener(const Complex& C, const MetricAssignment& M, const Tolerances& tol) : C_(C), M_(M), tol_(tol) {}

  ClosedGeodesic run(std::vector<Crossing> g, std::vector<double> s = {}) {
    if (s.size() != g.size()) s.clear();
    bool fresh_positions = s.empty();
    reduce(g, s, fresh_positions);
    int reroutes = 0;
    for (int round = 0; round < 500; ++round) {
      if (g.empty()) throw Error(ErrorKind::DegenerateClass, "gallery reduces to nothing");
      if (s.empty()) s = midpoints(g);
      minimize(g, s);
      snap_to_corners(g, s);
      if (total_length(g, s) < 1e-6) throw Error(ErrorKind::DegenerateClass, "loop shrinks to a point");
      if (!reroute_once(g, s)) {
        ClosedGeodesic out = assemble(g, s);
        out.reroutes = reroutes;
        return out;
      }
      ++reroutes;
      reduce(g, s, false);
    }
    throw Error(ErrorKind::NoSolution, "straightening did not settle");
  }

 private:
  const Complex& C_;
  const MetricAssignment& M_;
  const Tolerances& tol_;

  double edge_len(const Crossing& x) const { return M_.edge_length(C_.chambers[x.from.chamber].sides[x.from.side].edge); }

  std::vector<double> midpoints(const std::vector<Crossing>& g) const {
    std::vector<double> s;
    for (const auto& x : g) s.push_back(0.5 * edge_len(x));
    return s;
  }

  /// Remove immediate backtracks and fold double passages through one edge.
  static void reduce(std::vector<Crossing>& g, std::vector<double>& s, bool positions_empty) {
    bool changed = true;
    while (changed && !g.empty()) {
      changed = false;
      const std::size_t n = g.size();
      for (std::size_t j = 0; j < n && !changed; ++j) {
        std::size_t k = (j + 1) % n;
        if (n == 1) break;
        if (!(g[j].to == g[k].from)) continue;
        if (g[k].to == g[j].from) {
          // backtrack: drop both
          std::vector<Crossing> ng;
          std::vector<double> ns;
          for (std::size_t i = 0; i < n; ++i)
            if (i != j && i != k) {
              ng.push_back(g[i]);
              if (!positions_empty) ns.push_back(s[i]);
            }
          g = ng;
          s = ns;
        } else {
          // fold: X -> Y -> Z through the same edge becomes X -> Z
          g[j].to = g[k].to;
          g.erase(g.begin() + static_cast<long>(k));
          if (!positions_empty) s.erase(s.begin() + static_cast<long>(k));
        }
        changed = true;
      }
    }
  }

  // Piece j: entry on gallery[j-1].to, exit on gallery[j].from.
  struct Term {
    double f = 0, gp = 0, gq = 0, hpp = 0, hqq = 0, hpq = 0;
    bool degenerate = false;
  };

  // Smoothed term sqrt(d^2 + eps^2); eps = 0 is the plain distance.
  Term term(const Crossing& in, double sp, const Crossing& out, double sq, double eps) const {
    const int c = out.from.chamber;
    HPoint x = M_.edge_point(c, in.to.side, sp);
    Vec3 xd = M_.edge_tangent(c, in.to.side, sp);
    HPoint y = M_.edge_point(c, out.from.side, sq);
    Vec3 yd = M_.edge_tangent(c, out.from.side, sq);
    Term t;
    double d = distance(x, y);
    double cpq = -mdot(xd, yd);
    if (d < 1e-7) {
      if (eps == 0.0) {
        t.f = d;
        t.degenerate = true;
        return t;
      }
      t.f = std::hypot(d, eps);
      t.hpp = t.hqq = 1.0 / eps;
      t.hpq = cpq / eps;
      return t;
    }
    double w = std::sinh(d), cc = std::cosh(d);
    double cp = -mdot(xd, y.x), cq = -mdot(x.x, yd);
    double w3 = w * w * w;
    double dp = cp / w, dq = cq / w;
    double dpp = cc * (w * w - cp * cp) / w3;
    double dqq = cc * (w * w - cq * cq) / w3;
    double dpq = (cpq * w * w - cc * cp * cq) / w3;
    double h = std::hypot(d, eps);
    double r = d / h, k = eps * eps / (h * h * h);
    t.f = h;
    t.gp = r * dp;
    t.gq = r * dq;
    t.hpp = k * dp * dp + r * dpp;
    t.hqq = k * dq * dq + r * dqq;
    t.hpq = k * dp * dq + r * dpq;
    return t;
  }

  double total_length(const std::vector<Crossing>& g, const std::vector<double>& s, double eps = 0.0) const {
    const std::size_t n = g.size();
    double L = 0;
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t i = (j + n - 1) % n;
      HPoint x = M_.edge_point(g[j].from.chamber, g[i].to.side, s[i]);
      HPoint y = M_.edge_point(g[j].from.chamber, g[j].from.side, s[j]);
      L += eps == 0.0 ? distance(x, y) : std::hypot(distance(x, y), eps);
    }
    return L;
  }

  /// Continuation in the smoothing parameter; zero-length pieces make the
  /// plain objective non-smooth and stall Newton at vertices.
  void minimize(const std::vector<Crossing>& g, std::vector<double>& s) const {
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8, 0.0}) minimize_at(g, s, eps);
  }

  /// Projected Newton on the box of crossing positions.
  void minimize_at(const std::vector<Crossing>& g, std::vector<double>& s, double eps) const {
    const int n = static_cast<int>(g.size());
    std::vector<double> hi(n);
    for (int j = 0; j < n; ++j) hi[j] = edge_len(g[j]);
    auto clampv = [&](std::vector<double>& v) {
      for (int j = 0; j < n; ++j) v[j] = std::clamp(v[j], 0.0, hi[j]);
    };
    clampv(s);
    double f = total_length(g, s, eps);
    for (int it = 0; it < 500; ++it) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
      for (int j = 0; j < n; ++j) {
        int i = (j + n - 1) % n;
        Term t = term(g[i], s[i], g[j], s[j], eps);
        if (t.degenerate) {
          // Both ends at one corner: moving either end inward lengthens at unit rate.
          grad[i] += s[i] <= 0.5 * hi[i] ? 1.0 : -1.0;
          grad[j] += s[j] <= 0.5 * hi[j] ? 1.0 : -1.0;
          continue;
        }
        grad[i] += t.gp;
        grad[j] += t.gq;
        H(i, i) += t.hpp;
        H(j, j) += t.hqq;
        H(i, j) += t.hpq;
        H(j, i) += t.hpq;
      }
      const double eps_b = 1e-14;
      std::vector<int> free;
      for (int j = 0; j < n; ++j) {
        bool at_lo = s[j] <= eps_b * std::max(1.0, hi[j]);
        bool at_hi = s[j] >= hi[j] - eps_b * std::max(1.0, hi[j]);
        if ((at_lo && grad[j] > 0) || (at_hi && grad[j] < 0)) continue;
        free.push_back(j);
      }
      double pg = 0;
      for (int j : free) pg = std::max(pg, std::abs(grad[j]));
      if (free.empty() || pg < 1e-13) return;
      const int m = static_cast<int>(free.size());
      Eigen::MatrixXd Hf(m, m);
      Eigen::VectorXd gf(m);
      for (int a = 0; a < m; ++a) {
        gf[a] = grad[free[a]];
        for (int b = 0; b < m; ++b) Hf(a, b) = H(free[a], free[b]);
      }
      Eigen::VectorXd d;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hf);
      bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
      if (ok) {
        d = ldlt.solve(-gf);
        ok = d.allFinite() && d.dot(gf) < 0;
      }
      if (!ok) {
        double lam = 1e-8 + Hf.diagonal().cwiseAbs().maxCoeff();
        Eigen::MatrixXd R = Hf + lam * Eigen::MatrixXd::Identity(m, m);
        Eigen::LDLT<Eigen::MatrixXd> l2(R);
        d = l2.solve(-gf);
        if (!d.allFinite() || d.dot(gf) >= 0) d = -gf;
      }
      std::vector<double> dir(n, 0.0);
      for (int a = 0; a < m; ++a) dir[free[a]] = d[a];
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        std::vector<double> trial(n);
        for (int j = 0; j < n; ++j) trial[j] = s[j] + step * dir[j];
        clampv(trial);
        double ft = total_length(g, trial, eps);
        double decrease = 0;
        for (int j = 0; j < n; ++j) decrease += grad[j] * (s[j] - trial[j]);
        if (ft <= f - 1e-4 * decrease && ft <= f) {
          double change = 0;
          for (int j = 0; j < n; ++j) change = std::max(change, std::abs(trial[j] - s[j]));
          s = trial;
          moved = change > 0;
          bool tiny = f - ft < 1e-16 * std::max(1.0, f) && change < 1e-14;
          f = ft;
          if (tiny) return;
          break;
        }
        step *= 0.5;
      }
      if (!moved) return;
    }
  }

  /// Smoothing leaves vertex passages a few 1e-8 off the corner; move them
  /// onto it when that does not lengthen the loop.
  void snap_to_corners(const std::vector<Crossing>& g, std::vector<double>& s) const {
    std::vector<double> t = s;
    bool any = false;
    for (std::size_t j = 0; j < g.size(); ++j) {
      double L = edge_len(g[j]);
      if (t[j] > 0 && t[j] < 1e-6 * L) {
        t[j] = 0;
        any = true;
      } else if (t[j] < L && t[j] > L * (1 - 1e-6)) {
        t[j] = L;
        any = true;
      }
    }
    if (!any) return;
    double f0 = total_length(g, s);
    minimize_at(g, t, 0.0);
    if (total_length(g, t) <= f0 + 1e-12 * std::max(1.0, f0)) s = t;
  }

  int vertex_at(const Crossing& x, double s, double L) const {
    const Edge& E = C_.edges[C_.chambers[x.from.chamber].sides[x.from.side].edge];
    double tolv = tol_.vertex_hit * std::max(1.0, L);
    if (s <= tolv) return E.from;
    if (s >= L - tolv) return E.to;
    return -1;
  }

  /// Corner index of chamber c where side k's point at edge parameter s sits.
  int corner_of(int c, int k, double s) const {
    double sigma = M_.side_param(c, k, s);
    int n = static_cast<int>(C_.chambers[c].size());
    return sigma < 0.5 * M_.side_arc(c, k).length ? k : (k + 1) % n;
  }

  struct CornerDir {
    int chamber, corner;
    int node_next, node_prev;     // link nodes of side k and side k-1 at this corner
    double to_next, to_prev;      // angles from the direction to those sides
  };

  CornerDir corner_direction(const VertexLink& L, int c, int corner, const HPoint& toward) const {
    const auto& ch = C_.chambers[c];
    int n = static_cast<int>(ch.size());
    const auto& P = M_.polygon(c);
    HPoint V = P.vertices[corner];
    Vec3 u = unit_tangent(V, toward);
    const Side& next = ch.sides[corner];
    const Side& prev = ch.sides[(corner + n - 1) % n];
    CornerDir d;
    d.chamber = c;
    d.corner = corner;
    d.node_next = L.node(next.edge, edge_end_at_side_start(next));
    d.node_prev = L.node(prev.edge, edge_end_at_side_end(prev));
    d.to_next = angle_between(u, unit_tangent(V, P.vertices[(corner + 1) % n]));
    d.to_prev = angle_between(u, unit_tangent(V, P.vertices[(corner + n - 1) % n]));
    return d;
  }

  /// Side of chamber c at `corner` that carries link node `node`.
  int side_for_node(const VertexLink& L, int c, int corner, int node) const {
    const auto& ch = C_.chambers[c];
    int n = static_cast<int>(ch.size());
    const Side& next = ch.sides[corner];
    if (L.node(next.edge, edge_end_at_side_start(next)) == node) return corner;
    return (corner + n - 1) % n;
  }

  struct Run {
    std::size_t first = 0, count = 0;
    int vertex = -1;
  };

  std::vector<Run> vertex_runs(const std::vector<Crossing>& g, const std::vector<double>& s) const {
    const std::size_t n = g.size();
    std::vector<int> vtx(n);
    for (std::size_t j = 0; j < n; ++j) vtx[j] = vertex_at(g[j], s[j], edge_len(g[j]));
    auto piece_len = [&](std::size_t j) {  // piece in chamber gallery[j].from.chamber
      std::size_t i = (j + n - 1) % n;
      HPoint x = M_.edge_point(g[j].from.chamber, g[i].to.side, s[i]);
      HPoint y = M_.edge_point(g[j].from.chamber, g[j].from.side, s[j]);
      return distance(x, y);
    };
    // Runs are linked by zero-length pieces; start each run after a positive piece.
    std::vector<Run> runs;
    std::size_t start = n;
    for (std::size_t j = 0; j < n; ++j)
      if (vtx[j] >= 0 && piece_len(j) > 1e-9) {
        start = j;
        break;
      }
    if (start == n) return runs;
    for (std::size_t off = 0; off < n;) {
      std::size_t j = (start + off) % n;
      if (vtx[j] < 0) {
        ++off;
        continue;
      }
      Run r{j, 1, vtx[j]};
      while (off + r.count < n) {
        std::size_t k = (j + r.count) % n;
        if (vtx[k] >= 0 && piece_len(k) <= 1e-9) ++r.count;
        else break;
      }
      runs.push_back(r);
      off += r.count;
    }
    return runs;
  }

  struct RunCheck {
    double link_distance = 0;
    std::vector<Crossing> detour;  // shortest link route, when shorter than pi
  };

  RunCheck check_run(const std::vector<Crossing>& g, const std::vector<double>& s, const Run& r) const {
    const std::size_t n = g.size();
    const std::size_t j0 = r.first;
    const std::size_t j1 = (r.first + r.count - 1) % n;
    const Crossing& xin = g[j0];
    const Crossing& xout = g[j1];
    const int A = xin.from.chamber;
    const int B = xout.to.chamber;
    const int cornerA = corner_of(A, xin.from.side, s[j0]);
    const int cornerB = corner_of(B, xout.to.side, s[j1]);
    // Far ends of the incoming and outgoing pieces.
    std::size_t ip = (j0 + n - 1) % n;
    HPoint pin = M_.edge_point(A, g[ip].to.side, s[ip]);
    std::size_t on = (j1 + 1) % n;
    HPoint pout = M_.edge_point(B, g[on].from.side, s[on]);

    VertexLink L = vertex_link(C_, r.vertex, &M_);
    CornerDir da = corner_direction(L, A, cornerA, pin);
    CornerDir db = corner_direction(L, B, cornerB, pout);
    std::vector<int> via;
    auto dist = link_dijkstra(L.graph, {{da.node_next, da.to_next}, {da.node_prev, da.to_prev}}, &via);
    double best = std::numeric_limits<double>::infinity();
    int end_node = -1;
    if (dist[db.node_next] + db.to_next < best) {
      best = dist[db.node_next] + db.to_next;
      end_node = db.node_next;
    }
    if (dist[db.node_prev] + db.to_prev < best) {
      best = dist[db.node_prev] + db.to_prev;
      end_node = db.node_prev;
    }
    bool direct = false;
    if (A == B && cornerA == cornerB) {
      double dd = std::abs(da.to_next - db.to_next);
      if (dd < best) {
        best = dd;
        direct = true;
      }
    }
    RunCheck rc;
    rc.link_distance = best;
    if (best >= std::numbers::pi - tol_.cycle_sum) return rc;
    if (direct) return rc;  // detour stays empty: the run collapses
    // Walk back from end_node to a seed node of A's corner.
    std::vector<int> nodes{end_node};
    std::vector<int> ledges;
    int cur = end_node;
    while (via[cur] >= 0) {
      int e = via[cur];
      ledges.push_back(e);
      cur = L.graph.other(e, cur);
      nodes.push_back(cur);
    }
    std::reverse(nodes.begin(), nodes.end());
    std::reverse(ledges.begin(), ledges.end());
    // Chambers along the route: A, corners of ledges, B.
    std::vector<std::pair<int, int>> ch{{A, cornerA}};
    for (int e : ledges) ch.push_back({L.corner[e].chamber, L.corner[e].side});
    ch.push_back({B, cornerB});
    for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
      int node = nodes[i];
      Crossing x;
      x.from = {ch[i].first, side_for_node(L, ch[i].first, ch[i].second, node)};
      x.to = {ch[i + 1].first, side_for_node(L, ch[i + 1].first, ch[i + 1].second, node)};
      rc.detour.push_back(x);
    }
    return rc;
  }

  /// Replace the first run that fails the link test by its shorter route.
  bool reroute_once(std::vector<Crossing>& g, std::vector<double>& s) const {
    for (const Run& r : vertex_runs(g, s)) {
      RunCheck rc = check_run(g, s, r);
      if (rc.link_distance >= std::numbers::pi - tol_.cycle_sum) continue;
      const std::size_t n = g.size();
      // Rotate so the run starts at index 0.
      std::rotate(g.begin(), g.begin() + static_cast<long>(r.first), g.end());
      std::rotate(s.begin(), s.begin() + static_cast<long>(r.first), s.end());
      std::vector<Crossing> ng(rc.detour);
      std::vector<double> ns;
      for (const auto& x : rc.detour) ns.push_back(0.5 * edge_len(x));
      for (std::size_t j = r.count; j < n; ++j) {
        ng.push_back(g[j]);
        ns.push_back(s[j]);
      }
      g = ng;
      s = ns;
      return true;
    }
    return false;
  }

  ClosedGeodesic assemble(const std::vector<Crossing>& g, const std::vector<double>& s) const {
    ClosedGeodesic out;
    out.gallery = g;
    out.positions = s;
    const std::size_t n = g.size();
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t i = (j + n - 1) % n;
      GeodesicPiece p;
      p.chamber = g[j].from.chamber;
      p.entry_side = g[i].to.side;
      p.exit_side = g[j].from.side;
      p.entry_position = s[i];
      p.exit_position = s[j];
      p.a = M_.edge_point(p.chamber, p.entry_side, s[i]);
      p.b = M_.edge_point(p.chamber, p.exit_side, s[j]);
      p.length = distance(p.a, p.b);
      p.entry_at_vertex = vertex_at(g[i], s[i], edge_len(g[i])) >= 0;
      p.exit_at_vertex = vertex_at(g[j], s[j], edge_len(g[j])) >= 0;
      out.length += p.length;
      out.pieces.push_back(p);
    }
    // Matched angles across free crossings.
    for (std::size_t j = 0; j < n; ++j) {
      const GeodesicPiece& p = out.pieces[j];
      const GeodesicPiece& q = out.pieces[(j + 1) % n];
      if (p.exit_at_vertex || p.length < 1e-12 || q.length < 1e-12) continue;
      Vec3 d1 = -1.0 * unit_tangent(p.b, p.a);
      Vec3 t1 = M_.edge_tangent(p.chamber, p.exit_side, s[j]);
      Vec3 d2 = unit_tangent(q.a, q.b);
      Vec3 t2 = M_.edge_tangent(q.chamber, q.entry_side, s[j]);
      double a1 = std::asin(std::clamp(mdot(d1, t1), -1.0, 1.0));
      double a2 = std::asin(std::clamp(mdot(d2, t2), -1.0, 1.0));
      out.max_angle_mismatch = std::max(out.max_angle_mismatch, std::abs(a1 - a2));
    }
    for (const Run& r : vertex_runs(g, s)) {
      RunCheck rc = check_run(g, s, r);
      out.min_vertex_link_distance = std::min(out.min_vertex_link_distance, rc.link_distance);
      ++out.vertex_passages;
    }
    std::vector<double> s2 = s;
    minimize_at(g, s2, 0.0);
    out.stationarity_gap = std::abs(total_length(g, s2) - out.length);
    out.word = format_word(C_, g);
    return out;
  }
};

}  // namespace detail

/// Geodesic representative of the free homotopy class of a closed gallery.
inline ClosedGeodesic marked_length(const Complex& C, const MetricAssignment& M, const std::vector<Crossing>& gallery,
                                    const Tolerances& tol = default_tolerances(),
                                    const std::vector<double>& initial_positions = {}) {
  if (C.mode != Mode::Closed) throw Error(ErrorKind::InvalidArgument, "marked length needs a closed complex");
  if (gallery.empty()) throw Error(ErrorKind::DegenerateClass, "empty word");
  for (std::size_t j = 0; j < gallery.size(); ++j)
    if (gallery[j].to.chamber != gallery[(j + 1) % gallery.size()].from.chamber)
      throw Error(ErrorKind::NotClosed, "consecutive crossings do not share a chamber");
  detail::Straightener S(C, M, tol);
  return S.run(gallery, initial_positions);
}

inline ClosedGeodesic marked_length(const Complex& C, const MetricAssignment& M, const std::string& word,
                                    const Tolerances& tol = default_tolerances()) {
  ParsedWord W = parse_word(C, word);
  return marked_length(C, M, W.crossings, tol);
}

}  // namespace fuchsian
