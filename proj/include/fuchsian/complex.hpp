#pragma once

// Labelled polygonal 2-complexes (closed quotients or finite patches), their
// piecewise hyperbolic metrics, vertex links and walls.
//
// Conventions. Chamber side k runs from corner k to corner k+1 (counter-
// clockwise in the chamber's polygon). A side stores (edge, orientation);
// orientation +1 means the edge's from-vertex sits at corner k. Positions on
// an edge are arc length from its from-vertex.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fuchsian/config.hpp"
#include "fuchsian/errors.hpp"
#include "fuchsian/hypgeom.hpp"
#include "fuchsian/mgon.hpp"

namespace fuchsian {

enum class Mode { Closed, Patch };

struct Incidence {
  int chamber = -1;
  int side = -1;
  bool operator==(const Incidence&) const = default;
  auto operator<=>(const Incidence&) const = default;
};

struct Vertex {
  std::string id;
  std::optional<int> declared_m;
};

struct Edge {
  std::string id;
  int label = 0;
  int q = 0;
  int from = -1;
  int to = -1;
  std::vector<Incidence> incidences;  // in chamber order, then side order
};

struct Side {
  int edge = -1;
  int orient = 1;
};

struct Chamber {
  std::string id;
  std::vector<Side> sides;
  std::vector<int> corners;  // vertex at corner k (start of side k)
  std::size_t size() const { return sides.size(); }
};

struct Complex {
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::vector<Chamber> chambers;
  Mode mode = Mode::Closed;
  std::vector<int> vertex_m;  // 0 when undetermined
  std::vector<std::string> warnings;

  int vertex_index(const std::string& id) const { return lookup(vertex_ids_, id); }
  int edge_index(const std::string& id) const { return lookup(edge_ids_, id); }
  int chamber_index(const std::string& id) const { return lookup(chamber_ids_, id); }

  int side_start(int c, int k) const { return chambers[c].corners[k]; }
  int side_end(int c, int k) const {
    const auto& ch = chambers[c];
    return ch.corners[(k + 1) % ch.size()];
  }

  std::map<std::string, int> vertex_ids_, edge_ids_, chamber_ids_;

 private:
  static int lookup(const std::map<std::string, int>& m, const std::string& id) {
    auto it = m.find(id);
    return it == m.end() ? -1 : it->second;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& s) {
  auto p = s.find('#');
  return p == std::string::npos ? s : s.substr(0, p);
}

inline int parse_int(const std::string& tok, int line) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, "expected integer, got '" + tok + "'", line);
  }
}

inline double parse_real(const std::string& tok, int line) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, "expected number, got '" + tok + "'", line);
  }
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

/// Iterate non-empty lines as (section, content, line number).
template <class F>
void for_each_section_line(const std::string& text, F&& f) {
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error(ErrorKind::ParseError, "unterminated section header", line);
      section = trim(s.substr(1, s.size() - 2));
      f(section, std::string(), line, true);
      continue;
    }
    if (section.empty()) throw Error(ErrorKind::ParseError, "content before the first section", line);
    f(section, s, line, false);
  }
}

}  // namespace detail

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Links.

struct VertexLink {
  int vertex = -1;
  LinkGraph graph;
  std::vector<std::pair<int, int>> node_end;   // node -> (edge, end: 0 from / 1 to)
  std::vector<Incidence> corner;               // link edge -> (chamber, corner k)
  std::map<std::pair<int, int>, int> node_of;  // (edge, end) -> node

  int node(int edge, int end) const {
    auto it = node_of.find({edge, end});
    return it == node_of.end() ? -1 : it->second;
  }
};

/// The end of side k's edge that sits at corner k (start) or corner k+1.
inline int edge_end_at_side_start(const Side& s) { return s.orient > 0 ? 0 : 1; }
inline int edge_end_at_side_end(const Side& s) { return s.orient > 0 ? 1 : 0; }

/// Link of v without weights; corners become link edges.
inline VertexLink combinatorial_link(const Complex& C, int v) {
  VertexLink L;
  L.vertex = v;
  for (int e = 0; e < static_cast<int>(C.edges.size()); ++e) {
    const Edge& E = C.edges[e];
    for (int end = 0; end < 2; ++end) {
      if ((end == 0 ? E.from : E.to) != v) continue;
      int n = L.graph.add_vertex(E.label);
      L.node_end.push_back({e, end});
      L.node_of[{e, end}] = n;
    }
  }
  for (int c = 0; c < static_cast<int>(C.chambers.size()); ++c) {
    const Chamber& ch = C.chambers[c];
    const int n = static_cast<int>(ch.size());
    for (int k = 0; k < n; ++k) {
      if (ch.corners[k] != v) continue;
      const Side& prev = ch.sides[(k + n - 1) % n];
      const Side& next = ch.sides[k];
      int a = L.node(prev.edge, edge_end_at_side_end(prev));
      int b = L.node(next.edge, edge_end_at_side_start(next));
      L.graph.add_edge(a, b);
      L.corner.push_back({c, k});
    }
  }
  return L;
}

/// Link gon parameter: a declared value wins, else half the link girth.
inline int link_m(const Complex& C, int v, const VertexLink& L) {
  if (C.vertices[v].declared_m) return *C.vertices[v].declared_m;
  int g = detail::girth(L.graph);
  return (g > 0 && g % 2 == 0) ? g / 2 : 0;
}

// ---------------------------------------------------------------------------
// Parsing and structural validation.

inline void validate_structure(Complex& C) {
  // Incidences and chamber closure.
  for (auto& E : C.edges) E.incidences.clear();
  for (int c = 0; c < static_cast<int>(C.chambers.size()); ++c) {
    Chamber& ch = C.chambers[c];
    const int n = static_cast<int>(ch.size());
    if (n < 3) throw Error(ErrorKind::IncidenceError, "chamber " + ch.id + " has fewer than 3 sides");
    ch.corners.assign(n, -1);
    for (int k = 0; k < n; ++k) {
      const Side& s = ch.sides[k];
      const Edge& E = C.edges[s.edge];
      ch.corners[k] = s.orient > 0 ? E.from : E.to;
    }
    for (int k = 0; k < n; ++k) {
      const Side& s = ch.sides[k];
      const Edge& E = C.edges[s.edge];
      int end = s.orient > 0 ? E.to : E.from;
      if (end != ch.corners[(k + 1) % n])
        throw Error(ErrorKind::IncidenceError, "chamber " + ch.id + ": sides " + std::to_string(k) + " and " +
                                                   std::to_string((k + 1) % n) + " do not share a vertex");
      C.edges[s.edge].incidences.push_back({c, k});
    }
  }
  for (const auto& E : C.edges) {
    int cnt = static_cast<int>(E.incidences.size());
    if (C.mode == Mode::Closed && cnt != E.q)
      throw Error(ErrorKind::IncidenceError, "edge " + E.id + " lies on " + std::to_string(cnt) +
                                                 " chamber sides but q = " + std::to_string(E.q));
    if (C.mode == Mode::Patch && cnt > E.q)
      throw Error(ErrorKind::IncidenceError, "edge " + E.id + " lies on " + std::to_string(cnt) +
                                                 " chamber sides, more than q = " + std::to_string(E.q));
    if (cnt == 0) C.warnings.push_back("edge " + E.id + " lies on no chamber");
  }

  // Labels: cyclic 1..k around each chamber.
  int kmax = 0;
  for (const auto& E : C.edges) kmax = std::max(kmax, E.label);
  for (const auto& ch : C.chambers) {
    const int n = static_cast<int>(ch.size());
    for (int k = 0; k < n; ++k) {
      int a = C.edges[ch.sides[k].edge].label;
      int b = C.edges[ch.sides[(k + 1) % n].edge].label;
      int d = ((b - a) % kmax + kmax) % kmax;
      if (d != 1 && d != kmax - 1)
        throw Error(ErrorKind::LabelError, "chamber " + ch.id + ": labels " + std::to_string(a) + " and " +
                                               std::to_string(b) + " are not cyclically consecutive");
    }
  }
  C.vertex_m.assign(C.vertices.size(), 0);
  for (int v = 0; v < static_cast<int>(C.vertices.size()); ++v) {
    std::set<int> labels;
    for (const auto& E : C.edges)
      if (E.from == v || E.to == v) labels.insert(E.label);
    if (labels.size() > 2) C.warnings.push_back("vertex " + C.vertices[v].id + " meets more than two edge labels");
    VertexLink L = combinatorial_link(C, v);
    C.vertex_m[v] = link_m(C, v, L);
  }
}

/// Parse the line-oriented complex format:
///   [mode] closed|patch
///   [vertices]  id [m=<m>]
///   [edges]     id label q v_from v_to
///   [chambers]  id: (edge,+) (edge,-) ...
inline Complex parse_complex(const std::string& text) {
  Complex C;
  bool mode_seen = false;
  struct PendingChamber {
    std::string id;
    std::vector<std::pair<std::string, int>> sides;
    int line;
  };
  std::vector<PendingChamber> pending;
  struct PendingEdge {
    std::string id, from, to;
    int label, q, line;
  };
  std::vector<PendingEdge> pedges;

  detail::for_each_section_line(text, [&](const std::string& sec, const std::string& s, int line, bool header) {
    if (header) {
      if (sec != "vertices" && sec != "edges" && sec != "chambers" && sec != "mode")
        throw Error(ErrorKind::ParseError, "unknown section [" + sec + "]", line);
      return;
    }
    auto tok = detail::split_ws(s);
    if (sec == "mode") {
      if (tok.size() != 1 || (tok[0] != "closed" && tok[0] != "patch"))
        throw Error(ErrorKind::ParseError, "mode must be 'closed' or 'patch'", line);
      C.mode = tok[0] == "closed" ? Mode::Closed : Mode::Patch;
      mode_seen = true;
    } else if (sec == "vertices") {
      if (tok.empty() || tok.size() > 2) throw Error(ErrorKind::ParseError, "expected 'id [m=<m>]'", line);
      Vertex V{tok[0], std::nullopt};
      if (tok.size() == 2) {
        if (tok[1].rfind("m=", 0) != 0) throw Error(ErrorKind::ParseError, "expected m=<m>", line);
        V.declared_m = detail::parse_int(tok[1].substr(2), line);
        if (*V.declared_m < 1) throw Error(ErrorKind::ParseError, "m must be positive", line);
      }
      if (C.vertex_ids_.count(V.id)) throw Error(ErrorKind::ParseError, "duplicate vertex " + V.id, line);
      C.vertex_ids_[V.id] = static_cast<int>(C.vertices.size());
      C.vertices.push_back(V);
    } else if (sec == "edges") {
      if (tok.size() != 5) throw Error(ErrorKind::ParseError, "expected 'id label q v_from v_to'", line);
      PendingEdge E{tok[0], tok[3], tok[4], detail::parse_int(tok[1], line), detail::parse_int(tok[2], line), line};
      if (E.label < 1) throw Error(ErrorKind::ParseError, "labels start at 1", line);
      if (E.q < 1) throw Error(ErrorKind::ParseError, "branching number must be >= 1", line);
      pedges.push_back(E);
    } else if (sec == "chambers") {
      auto colon = s.find(':');
      if (colon == std::string::npos) throw Error(ErrorKind::ParseError, "expected 'id: (edge,+)...'", line);
      PendingChamber P{detail::trim(s.substr(0, colon)), {}, line};
      if (P.id.empty()) throw Error(ErrorKind::ParseError, "missing chamber id", line);
      std::string rest = s.substr(colon + 1);
      std::size_t pos = 0;
      while (true) {
        pos = rest.find_first_not_of(" \t", pos);
        if (pos == std::string::npos) break;
        if (rest[pos] != '(') throw Error(ErrorKind::ParseError, "expected '(' in chamber side list", line);
        auto close = rest.find(')', pos);
        if (close == std::string::npos) throw Error(ErrorKind::ParseError, "unterminated '('", line);
        std::string inner = rest.substr(pos + 1, close - pos - 1);
        auto comma = inner.find(',');
        if (comma == std::string::npos) throw Error(ErrorKind::ParseError, "expected (edge,sign)", line);
        std::string eid = detail::trim(inner.substr(0, comma));
        std::string sg = detail::trim(inner.substr(comma + 1));
        if (sg != "+" && sg != "-") throw Error(ErrorKind::ParseError, "orientation must be + or -", line);
        P.sides.push_back({eid, sg == "+" ? 1 : -1});
        pos = close + 1;
      }
      if (P.sides.empty()) throw Error(ErrorKind::ParseError, "chamber without sides", line);
      pending.push_back(P);
    }
  });
  if (!mode_seen) throw Error(ErrorKind::ParseError, "missing [mode] section");

  for (const auto& P : pedges) {
    int a = C.vertex_index(P.from), b = C.vertex_index(P.to);
    if (a < 0 || b < 0) throw Error(ErrorKind::ParseError, "edge " + P.id + " uses an undeclared vertex", P.line);
    if (C.edge_ids_.count(P.id)) throw Error(ErrorKind::ParseError, "duplicate edge " + P.id, P.line);
    C.edge_ids_[P.id] = static_cast<int>(C.edges.size());
    C.edges.push_back({P.id, P.label, P.q, a, b, {}});
  }
  for (const auto& P : pending) {
    if (C.chamber_ids_.count(P.id)) throw Error(ErrorKind::ParseError, "duplicate chamber " + P.id, P.line);
    Chamber ch;
    ch.id = P.id;
    for (const auto& [eid, sg] : P.sides) {
      int e = C.edge_index(eid);
      if (e < 0) throw Error(ErrorKind::ParseError, "chamber " + P.id + " uses undeclared edge " + eid, P.line);
      ch.sides.push_back({e, sg});
    }
    C.chamber_ids_[P.id] = static_cast<int>(C.chambers.size());
    C.chambers.push_back(std::move(ch));
  }
  validate_structure(C);
  return C;
}

// ---------------------------------------------------------------------------
// Metrics.

/// Per-chamber hyperbolic polygons with matched glued edge lengths.
class MetricAssignment {
 public:
  MetricAssignment() = default;

  /// Builds gluing maps eagerly; throws InvalidArgument when glued sides
  /// disagree with the edge lengths.
  MetricAssignment(const Complex& C, std::vector<HyperbolicPolygon> polys, std::vector<double> edge_length,
                   const Tolerances& tol = default_tolerances())
      : polygons_(std::move(polys)), edge_length_(std::move(edge_length)) {
    if (polygons_.size() != C.chambers.size() || edge_length_.size() != C.edges.size())
      throw Error(ErrorKind::DimensionMismatch, "metric does not match the complex");
    for (std::size_t c = 0; c < C.chambers.size(); ++c) {
      const auto& ch = C.chambers[c];
      if (polygons_[c].size() != ch.size())
        throw Error(ErrorKind::DimensionMismatch, "chamber " + ch.id + " polygon has the wrong number of sides");
      for (std::size_t k = 0; k < ch.size(); ++k) {
        double L = edge_length_[ch.sides[k].edge];
        if (std::abs(polygons_[c].side_lengths[k] - L) > tol.geometric * std::max(1.0, L))
          throw Error(ErrorKind::InvalidArgument, "chamber " + ch.id + " side " + std::to_string(k) +
                                                      " does not match the length of edge " +
                                                      C.edges[ch.sides[k].edge].id);
      }
    }
    sides_.resize(C.chambers.size());
    for (std::size_t c = 0; c < C.chambers.size(); ++c)
      for (std::size_t k = 0; k < C.chambers[c].size(); ++k) sides_[c].push_back(polygons_[c].side(k));
    orient_.resize(C.chambers.size());
    for (std::size_t c = 0; c < C.chambers.size(); ++c)
      for (const auto& s : C.chambers[c].sides) orient_[c].push_back(s.orient);
    for (const auto& E : C.edges)
      for (const auto& a : E.incidences)
        for (const auto& b : E.incidences)
          if (!(a == b)) glue_[{a, b}] = compute_glue(a, b);
  }

  const HyperbolicPolygon& polygon(int c) const { return polygons_[c]; }
  const std::vector<HyperbolicPolygon>& polygons() const { return polygons_; }
  double edge_length(int e) const { return edge_length_[e]; }
  const std::vector<double>& edge_lengths() const { return edge_length_; }
  double corner_angle(int c, int k) const { return polygons_[c].angles[k]; }
  const GeodesicArc& side_arc(int c, int k) const { return sides_[c][k]; }
  int orient(int c, int k) const { return orient_[c][k]; }

  /// Arc parameter along side k for edge position s.
  double side_param(int c, int k, double s) const {
    return orient_[c][k] > 0 ? s : sides_[c][k].length - s;
  }
  double edge_param(int c, int k, double sigma) const { return side_param(c, k, sigma); }

  HPoint edge_point(int c, int k, double s) const { return sides_[c][k].point_at(side_param(c, k, s)); }

  /// Unit tangent along the edge direction (from -> to) at position s.
  Vec3 edge_tangent(int c, int k, double s) const {
    Vec3 t = sides_[c][k].tangent_at(side_param(c, k, s));
    return orient_[c][k] > 0 ? t : -t;
  }

  /// Unit normal at position s pointing into chamber c.
  Vec3 inward_normal(int c, int k, double s) const {
    double sg = side_param(c, k, s);
    return left_normal(sides_[c][k].point_at(sg), sides_[c][k].tangent_at(sg));
  }

  /// Isometry taking chamber `to.chamber` coordinates into `from.chamber`
  /// coordinates, gluing side `to.side` onto side `from.side`.
  const Isometry& glue(const Incidence& from, const Incidence& to) const { return glue_.at({from, to}); }

 private:
  Isometry compute_glue(const Incidence& x, const Incidence& y) const {
    HPoint px = edge_point(x.chamber, x.side, 0.0);
    Vec3 tx = edge_tangent(x.chamber, x.side, 0.0);
    HPoint py = edge_point(y.chamber, y.side, 0.0);
    Vec3 ty = edge_tangent(y.chamber, y.side, 0.0);
    // Inward normal is +left for orient +1 and -left for orient -1; it must
    // land on the outward normal of x.
    bool flip = orient_[x.chamber][x.side] * orient_[y.chamber][y.side] > 0;
    return Isometry::from_frames(py, ty, px, tx, flip);
  }

  std::vector<HyperbolicPolygon> polygons_;
  std::vector<double> edge_length_;
  std::vector<std::vector<GeodesicArc>> sides_;
  std::vector<std::vector<int>> orient_;
  std::map<std::pair<Incidence, Incidence>, Isometry> glue_;
};

/// Parse a metric file:
///   [edge_lengths]     id value
///   [chambers.angles]  id: a1 .. an | normal [a1 .. an]
/// `normal` alone uses pi/m_v at each corner; with angles it builds the
/// normal polygon with those angles. Explicit angles without `normal` are
/// realized from the angles and the edge lengths.
inline MetricAssignment parse_metric(const std::string& text, const Complex& C,
                                     const Tolerances& tol = default_tolerances()) {
  std::vector<std::optional<double>> lengths(C.edges.size());
  struct Row {
    bool normal = false;
    std::vector<double> angles;
    int line = 0;
  };
  std::vector<std::optional<Row>> rows(C.chambers.size());
  detail::for_each_section_line(text, [&](const std::string& sec, const std::string& s, int line, bool header) {
    if (header) {
      if (sec != "edge_lengths" && sec != "chambers.angles")
        throw Error(ErrorKind::ParseError, "unknown section [" + sec + "]", line);
      return;
    }
    if (sec == "edge_lengths") {
      auto tok = detail::split_ws(s);
      if (tok.size() != 2) throw Error(ErrorKind::ParseError, "expected 'id value'", line);
      int e = C.edge_index(tok[0]);
      if (e < 0) throw Error(ErrorKind::ParseError, "unknown edge " + tok[0], line);
      double v = detail::parse_real(tok[1], line);
      if (!(v > 0)) throw Error(ErrorKind::ParseError, "edge length must be positive", line);
      lengths[e] = v;
    } else {
      auto colon = s.find(':');
      if (colon == std::string::npos) throw Error(ErrorKind::ParseError, "expected 'id: angles'", line);
      int c = C.chamber_index(detail::trim(s.substr(0, colon)));
      if (c < 0) throw Error(ErrorKind::ParseError, "unknown chamber", line);
      auto tok = detail::split_ws(s.substr(colon + 1));
      Row r;
      r.line = line;
      std::size_t i = 0;
      if (!tok.empty() && tok[0] == "normal") {
        r.normal = true;
        i = 1;
      }
      for (; i < tok.size(); ++i) r.angles.push_back(detail::parse_real(tok[i], line));
      if (!r.normal && r.angles.empty()) throw Error(ErrorKind::ParseError, "missing angles", line);
      rows[c] = r;
    }
  });

  std::vector<HyperbolicPolygon> polys(C.chambers.size());
  for (std::size_t c = 0; c < C.chambers.size(); ++c) {
    const auto& ch = C.chambers[c];
    if (!rows[c]) throw Error(ErrorKind::ParseError, "no angles for chamber " + ch.id);
    Row r = *rows[c];
    if (r.normal && r.angles.empty()) {
      for (int v : ch.corners) {
        if (C.vertex_m[v] <= 0)
          throw Error(ErrorKind::ParseError, "vertex " + C.vertices[v].id + " has no gon parameter for 'normal'",
                      r.line);
        r.angles.push_back(std::numbers::pi / C.vertex_m[v]);
      }
    }
    if (r.angles.size() != ch.size())
      throw Error(ErrorKind::ParseError, "chamber " + ch.id + " needs " + std::to_string(ch.size()) + " angles",
                  r.line);
    try {
      if (r.normal) {
        polys[c] = solve_normal_polygon(r.angles, tol);
      } else {
        std::vector<double> L(ch.size());
        for (std::size_t k = 0; k < ch.size(); ++k) {
          auto& len = lengths[ch.sides[k].edge];
          if (!len) throw Error(ErrorKind::ParseError, "edge " + C.edges[ch.sides[k].edge].id + " has no length");
          L[k] = *len;
        }
        polys[c] = polygon_from_angles_and_lengths(r.angles, L, tol);
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ParseError) throw;
      throw Error(ErrorKind::ParseError, "chamber " + ch.id + ": " + e.what(), r.line);
    }
    for (std::size_t k = 0; k < ch.size(); ++k) {
      auto& len = lengths[ch.sides[k].edge];
      if (!len) len = polys[c].side_lengths[k];
    }
  }
  std::vector<double> L(C.edges.size());
  for (std::size_t e = 0; e < C.edges.size(); ++e) {
    if (!lengths[e]) throw Error(ErrorKind::ParseError, "edge " + C.edges[e].id + " has no length");
    L[e] = *lengths[e];
  }
  try {
    return MetricAssignment(C, std::move(polys), std::move(L), tol);
  } catch (const Error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

/// Same polygons as `M` with lengths re-read from them: convenience for
/// programmatic metrics.
inline MetricAssignment metric_from_polygons(const Complex& C, std::vector<HyperbolicPolygon> polys,
                                             const Tolerances& tol = default_tolerances()) {
  std::vector<double> L(C.edges.size(), 0.0);
  for (std::size_t c = 0; c < C.chambers.size(); ++c)
    for (std::size_t k = 0; k < C.chambers[c].size(); ++k) L[C.chambers[c].sides[k].edge] = polys[c].side_lengths[k];
  return MetricAssignment(C, std::move(polys), std::move(L), tol);
}

inline VertexLink vertex_link(const Complex& C, int v, const MetricAssignment* M = nullptr) {
  VertexLink L = combinatorial_link(C, v);
  L.graph.m = C.vertex_m[v];
  if (M) {
    L.graph.weights.clear();
    for (const auto& inc : L.corner) L.graph.weights.push_back(M->corner_angle(inc.chamber, inc.side));
  }
  return L;
}

/// Metric distances in a weighted link from a set of (node, initial distance) seeds.
inline std::vector<double> link_dijkstra(const LinkGraph& G, const std::vector<std::pair<int, double>>& seeds,
                                         std::vector<int>* via_edge = nullptr) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(G.num_vertices(), inf);
  std::vector<int> via(G.num_vertices(), -1);
  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  for (auto [n, d0] : seeds)
    if (d0 < d[n]) {
      d[n] = d0;
      pq.push({d0, n});
    }
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > d[u]) continue;
    for (auto [v, e] : G.adj[u]) {
      double nd = du + G.weights[e];
      if (nd < d[v] - 1e-15) {
        d[v] = nd;
        via[v] = e;
        pq.push({nd, v});
      }
    }
  }
  if (via_edge) *via_edge = via;
  return d;
}

enum class LinkMode { AtLeast2Pi, Exactly2Pi };

struct LinkFailure {
  int vertex = -1;
  std::string reason;
  std::vector<Incidence> corners;  // witness cycle or corner
  double value = 0.0;
};

struct LinkVertexReport {
  int vertex = -1;
  int m = 0;
  bool thick = false;
  bool mgon_checked = false;
  bool mgon_passed = false;
  int girth = 0;
  int diameter = 0;
  std::size_t cycles = 0;
  bool passed = true;
};

struct LargeLinkReport {
  LinkMode mode = LinkMode::AtLeast2Pi;
  bool passed = true;
  std::vector<LinkVertexReport> vertices;
  std::vector<LinkFailure> failures;
};

/// Checks every 2m-cycle of every vertex link against 2pi. In Exactly2Pi mode
/// thick links must also have every corner equal to pi/m.
inline LargeLinkReport check_large_link(const Complex& C, const MetricAssignment& M, LinkMode mode,
                                        const Tolerances& tol = default_tolerances()) {
  LargeLinkReport R;
  R.mode = mode;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int v = 0; v < static_cast<int>(C.vertices.size()); ++v) {
    VertexLink L = vertex_link(C, v, &M);
    LinkVertexReport vr;
    vr.vertex = v;
    vr.m = L.graph.m;
    if (vr.m <= 0) {
      R.vertices.push_back(vr);
      continue;
    }
    bool thick = L.graph.num_vertices() > 0;
    for (std::size_t n = 0; n < L.graph.num_vertices(); ++n)
      if (L.graph.adj[n].size() < 3) thick = false;
    vr.thick = thick;
    auto cycles = enumerate_cycles(L.graph, 2 * vr.m);
    vr.cycles = cycles.size();
    for (const auto& cyc : cycles) {
      double s = 0.0;
      for (int e : cyc.edges) s += L.graph.weights[e];
      bool bad = mode == LinkMode::AtLeast2Pi ? s < two_pi - tol.cycle_sum : std::abs(s - two_pi) > tol.cycle_sum;
      if (bad) {
        LinkFailure f;
        f.vertex = v;
        f.reason = mode == LinkMode::AtLeast2Pi ? "cycle shorter than 2pi" : "cycle length differs from 2pi";
        for (int e : cyc.edges) f.corners.push_back(L.corner[e]);
        f.value = s;
        R.failures.push_back(f);
        vr.passed = false;
        break;
      }
    }
    if (mode == LinkMode::Exactly2Pi && thick) {
      const double target = std::numbers::pi / vr.m;
      for (std::size_t e = 0; e < L.graph.num_edges(); ++e)
        if (std::abs(L.graph.weights[e] - target) > tol.cycle_sum) {
          LinkFailure f;
          f.vertex = v;
          f.reason = "corner angle differs from pi/m";
          f.corners = {L.corner[e]};
          f.value = L.graph.weights[e];
          R.failures.push_back(f);
          vr.passed = false;
          break;
        }
    }
    if (!vr.passed) R.passed = false;
    R.vertices.push_back(vr);
  }
  return R;
}

inline double total_volume(const Complex& C, const MetricAssignment& M, const Tolerances& tol = default_tolerances()) {
  double v = 0.0;
  for (std::size_t c = 0; c < C.chambers.size(); ++c) v += polygon_area(M.polygon(static_cast<int>(c)), tol);
  return v;
}

struct BalanceReport {
  double lhs = 0.0;              // sum of curvature integrals
  double rhs = 0.0;              // -|P| pi (n-2) + sum of angles
  double imbalance = 0.0;        // rhs - lhs
  double link_volume = 0.0;      // sum over vertices of link volumes = sum of angles
  bool holds = false;
};

/// Gauss-Bonnet bookkeeping over all chambers of an n-gon complex.
inline BalanceReport gauss_bonnet_balance(int n, int chamber_count, const std::vector<std::vector<double>>& angles,
                                          const std::vector<double>& curvature_integrals,
                                          const Tolerances& tol = default_tolerances()) {
  if (n < 3 || chamber_count < 0 || static_cast<int>(angles.size()) != chamber_count ||
      static_cast<int>(curvature_integrals.size()) != chamber_count)
    throw Error(ErrorKind::DimensionMismatch, "table sizes do not match the chamber count");
  BalanceReport r;
  for (const auto& row : angles) {
    if (static_cast<int>(row.size()) != n) throw Error(ErrorKind::DimensionMismatch, "angle row of wrong length");
    for (double a : row) r.link_volume += a;
  }
  for (double k : curvature_integrals) r.lhs += k;
  r.rhs = -chamber_count * std::numbers::pi * (n - 2) + r.link_volume;
  r.imbalance = r.rhs - r.lhs;
  r.holds = std::abs(r.imbalance) <= tol.geometric * std::max(1.0, std::abs(r.rhs));
  return r;
}

// ---------------------------------------------------------------------------
// Walls.

struct WallStep {
  int edge = -1;
  int dir = 1;  // +1 travels from -> to
};

struct WallSegment {
  std::vector<WallStep> steps;
  bool closed = false;         // revisited its first (edge, direction)
  bool hit_boundary = false;   // patch boundary reached
};

/// Link nodes opposite `node`: combinatorial distance m and metric distance pi.
inline std::vector<int> antipodal_nodes(const VertexLink& L, int node, const Tolerances& tol = default_tolerances()) {
  auto comb = detail::bfs_distances(L.graph, node);
  auto met = link_dijkstra(L.graph, {{node, 0.0}});
  std::vector<int> out;
  for (std::size_t n = 0; n < L.graph.num_vertices(); ++n)
    if (comb[n] == L.graph.m && std::abs(met[n] - std::numbers::pi) <= tol.cycle_sum) out.push_back(static_cast<int>(n));
  return out;
}

/// Follow straight continuation from `start_edge` (in its from -> to direction).
/// `choose` picks among several antipodal continuations (default: lowest).
inline WallSegment trace_wall(const Complex& C, const MetricAssignment& M, int start_edge,
                              const Tolerances& tol = default_tolerances(), std::size_t max_steps = 100000) {
  WallSegment W;
  std::map<int, VertexLink> links;
  std::map<int, bool> regular;
  auto link_at = [&](int v) -> const VertexLink& {
    auto it = links.find(v);
    if (it == links.end()) it = links.emplace(v, vertex_link(C, v, &M)).first;
    return it->second;
  };
  auto vertex_ok = [&](int v) {
    auto it = regular.find(v);
    if (it != regular.end()) return it->second;
    const VertexLink& L = link_at(v);
    bool ok = L.graph.m > 0;
    if (ok) {
      for (const auto& cyc : enumerate_cycles(L.graph, 2 * L.graph.m)) {
        double s = 0.0;
        for (int e : cyc.edges) s += L.graph.weights[e];
        if (std::abs(s - 2.0 * std::numbers::pi) > tol.cycle_sum) ok = false;
      }
    }
    regular[v] = ok;
    return ok;
  };

  std::set<std::pair<int, int>> seen;
  WallStep cur{start_edge, 1};
  while (W.steps.size() < max_steps) {
    if (!seen.insert({cur.edge, cur.dir}).second) {
      W.closed = true;
      break;
    }
    W.steps.push_back(cur);
    const Edge& E = C.edges[cur.edge];
    int v = cur.dir > 0 ? E.to : E.from;
    int end = cur.dir > 0 ? 1 : 0;
    const VertexLink& L = link_at(v);
    std::vector<int> opp;
    if (L.graph.m > 0) opp = antipodal_nodes(L, L.node(cur.edge, end), tol);
    if (opp.empty() || !vertex_ok(v)) {
      if (C.mode == Mode::Patch && opp.empty()) {
        W.hit_boundary = true;
        break;
      }
      throw Error(ErrorKind::SingularVertex, "no straight continuation at vertex " + C.vertices[v].id);
    }
    auto [e2, end2] = L.node_end[opp.front()];
    cur = {e2, end2 == 0 ? 1 : -1};
  }
  return W;
}

}  // namespace fuchsian
