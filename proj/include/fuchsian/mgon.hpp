#pragma once

// Finite generalized m-gons: bipartite graphs of girth 2m and diameter m.
// Vertex links of a building are of this kind. Graphs here may carry
// parallel edges because links of small complexes can.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fuchsian/errors.hpp"

namespace fuchsian {

struct LinkGraph {
  std::vector<int> color;                   // label of each vertex
  std::vector<std::array<int, 2>> edges;
  std::vector<double> weights;              // empty, or one per edge
  std::vector<std::vector<std::pair<int, int>>> adj;  // (neighbour, edge id)
  int m = 0;

  int add_vertex(int c) {
    color.push_back(c);
    adj.emplace_back();
    return static_cast<int>(color.size()) - 1;
  }

  int add_edge(int u, int v) {
    int id = static_cast<int>(edges.size());
    edges.push_back({u, v});
    adj[u].push_back({v, id});
    adj[v].push_back({u, id});
    return id;
  }

  int add_edge(int u, int v, double w) {
    if (weights.size() != edges.size()) throw Error(ErrorKind::InvalidArgument, "mixing weighted and unweighted edges");
    int id = add_edge(u, v);
    weights.push_back(w);
    return id;
  }

  std::size_t num_vertices() const { return color.size(); }
  std::size_t num_edges() const { return edges.size(); }
  bool weighted() const { return !edges.empty() && weights.size() == edges.size(); }
  int other(int e, int v) const { return edges[e][0] == v ? edges[e][1] : edges[e][0]; }

  /// Some edge joining u and v, or -1.
  int edge_between(int u, int v) const {
    for (auto [w, e] : adj[u])
      if (w == v) return e;
    return -1;
  }
};

struct MgonReport {
  int m = 0;
  int girth = 0;      // 0 when acyclic
  int diameter = 0;
  bool thick = false;
  bool regular = false;
  std::map<int, std::set<int>> degrees_by_color;
  bool passed = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<int> bfs_distances(const LinkGraph& G, int s) {
  std::vector<int> dist(G.num_vertices(), -1);
  std::deque<int> q{s};
  dist[s] = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (auto [v, e] : G.adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  return dist;
}

/// Shortest cycle through any vertex, multigraph aware (parallel edges give 2).
inline int girth(const LinkGraph& G) {
  int best = std::numeric_limits<int>::max();
  const int n = static_cast<int>(G.num_vertices());
  for (int s = 0; s < n; ++s) {
    std::vector<int> dist(n, -1), via(n, -1);
    std::deque<int> q{s};
    dist[s] = 0;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (auto [v, e] : G.adj[u]) {
        if (e == via[u]) continue;
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          via[v] = e;
          q.push_back(v);
        } else {
          best = std::min(best, dist[u] + dist[v] + 1);
        }
      }
    }
  }
  return best == std::numeric_limits<int>::max() ? 0 : best;
}

}  // namespace detail

/// Girth/diameter/regularity report. Throws NotBipartite or Disconnected.
inline MgonReport validate_generalized_mgon(const LinkGraph& G, int m) {
  MgonReport r;
  r.m = m;
  const int n = static_cast<int>(G.num_vertices());
  if (n == 0) throw Error(ErrorKind::Disconnected, "empty graph");
  std::set<int> colors(G.color.begin(), G.color.end());
  std::vector<int> side(n, -1);
  for (int s = 0; s < n; ++s) {
    if (side[s] >= 0) continue;
    side[s] = 0;
    std::deque<int> q{s};
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (auto [v, e] : G.adj[u]) {
        if (side[v] < 0) {
          side[v] = 1 - side[u];
          q.push_back(v);
        } else if (side[v] == side[u]) {
          throw Error(ErrorKind::NotBipartite, "graph has an odd cycle");
        }
      }
    }
  }
  if (colors.size() <= 2) {
    for (const auto& e : G.edges)
      if (G.color[e[0]] == G.color[e[1]]) throw Error(ErrorKind::NotBipartite, "edge joins two vertices of one colour");
  } else {
    r.warnings.push_back("colour column has more than two classes; graph bipartition used");
  }

  auto d0 = detail::bfs_distances(G, 0);
  if (std::any_of(d0.begin(), d0.end(), [](int d) { return d < 0; }))
    throw Error(ErrorKind::Disconnected, "graph is not connected");
  for (int s = 0; s < n; ++s) {
    auto d = detail::bfs_distances(G, s);
    r.diameter = std::max(r.diameter, *std::max_element(d.begin(), d.end()));
  }
  r.girth = detail::girth(G);

  bool thick = true;
  for (int v = 0; v < n; ++v) {
    int deg = static_cast<int>(G.adj[v].size());
    r.degrees_by_color[colors.size() <= 2 ? G.color[v] : side[v]].insert(deg);
    if (deg < 3) thick = false;
  }
  r.thick = thick;
  r.regular = std::all_of(r.degrees_by_color.begin(), r.degrees_by_color.end(),
                          [](const auto& kv) { return kv.second.size() == 1; });
  r.passed = r.girth == 2 * m && r.diameter == m;
  static const std::set<int> feit_higman{2, 3, 4, 6, 8};
  if (r.thick && !feit_higman.count(m))
    r.warnings.push_back("thick generalized " + std::to_string(m) + "-gon violates Feit-Higman");
  if (!r.regular) r.warnings.push_back("vertex degrees are not constant per colour");
  return r;
}

// ---------------------------------------------------------------------------
// Constructions.

inline LinkGraph complete_bipartite(int p, int q) {
  LinkGraph G;
  for (int i = 0; i < p; ++i) G.add_vertex(0);
  for (int j = 0; j < q; ++j) G.add_vertex(1);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < q; ++j) G.add_edge(i, p + j);
  G.m = 2;
  return G;
}

namespace detail {

/// Arithmetic in GF(q) for the supported desk-scale orders.
class FiniteField {
 public:
  explicit FiniteField(int q) : q_(q) {
    switch (q) {
      case 2: case 3: case 5: case 7: prime_ = true; break;
      case 4: poly_ = 0b111; degree_ = 2; break;      // x^2 + x + 1
      case 8: poly_ = 0b1011; degree_ = 3; break;     // x^3 + x + 1
      default: throw Error(ErrorKind::UnsupportedOrder, "no supported field of order " + std::to_string(q));
    }
  }
  int order() const { return q_; }
  int add(int a, int b) const { return prime_ ? (a + b) % q_ : (a ^ b); }
  int mul(int a, int b) const {
    if (prime_) return (a * b) % q_;
    int r = 0;
    for (int i = 0; i < degree_; ++i)
      if (b >> i & 1) r ^= a << i;
    for (int i = 2 * degree_ - 2; i >= degree_; --i)
      if (r >> i & 1) r ^= poly_ << (i - degree_);
    return r;
  }

 private:
  int q_;
  bool prime_ = false;
  int poly_ = 0;
  int degree_ = 1;
};

}  // namespace detail

/// Point-line incidence graph of PG(2, q). Points have colour 0, lines 1.
inline LinkGraph projective_plane(int q) {
  detail::FiniteField F(q);
  std::vector<std::array<int, 3>> reps;  // first nonzero coordinate is 1
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b)
      for (int c = 0; c < q; ++c) {
        std::array<int, 3> v{a, b, c};
        int lead = v[0] ? v[0] : v[1] ? v[1] : v[2];
        if (lead == 1) reps.push_back(v);
      }
  const int n = static_cast<int>(reps.size());
  LinkGraph G;
  for (int i = 0; i < n; ++i) G.add_vertex(0);
  for (int i = 0; i < n; ++i) G.add_vertex(1);
  for (int p = 0; p < n; ++p)
    for (int l = 0; l < n; ++l) {
      int s = F.add(F.add(F.mul(reps[p][0], reps[l][0]), F.mul(reps[p][1], reps[l][1])), F.mul(reps[p][2], reps[l][2]));
      if (s == 0) G.add_edge(p, n + l);
    }
  G.m = 3;
  return G;
}

struct IncidenceKind {
  enum Type { CompleteBipartite, ProjectivePlane } type = CompleteBipartite;
  int p = 0;  // first part size, or plane order
  int q = 0;  // second part size
};

/// Build and validate; throws UnsupportedOrder for planes of other orders.
inline LinkGraph build_incidence_mgon(const IncidenceKind& kind) {
  LinkGraph G = kind.type == IncidenceKind::CompleteBipartite ? complete_bipartite(kind.p, kind.q)
                                                              : projective_plane(kind.p);
  auto rep = validate_generalized_mgon(G, G.m);
  if (!rep.passed) throw Error(ErrorKind::InvalidArgument, "constructed graph failed m-gon validation");
  return G;
}

// ---------------------------------------------------------------------------
// Text exchange format.
//
//   m <m>
//   <vertex> <colour> <neighbour> <neighbour> ...
//
// Vertices are 0..N-1, one line each. Every edge is listed from both ends;
// repeat a neighbour for parallel edges. A neighbour written n:w carries the
// edge weight w, and then every edge must carry one, equal at both ends.
// '#' starts a comment.

inline LinkGraph parse_link_graph(const std::string& text) {
  struct Row {
    int colour = 0;
    std::vector<std::pair<int, std::optional<double>>> nbrs;
    int line = 0;
    bool seen = false;
  };
  std::vector<Row> rows;
  int m = 0;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  auto to_int = [&](const std::string& t) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(t, &used);
    } catch (...) {
      used = 0;
    }
    if (used != t.size() || t.empty()) throw Error(ErrorKind::ParseError, "expected an integer, got '" + t + "'", line);
    return v;
  };
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "m") {
      if (tok.size() != 2) throw Error(ErrorKind::ParseError, "expected 'm <m>'", line);
      m = to_int(tok[1]);
      continue;
    }
    if (tok.size() < 2) throw Error(ErrorKind::ParseError, "expected '<vertex> <colour> <neighbours...>'", line);
    int v = to_int(tok[0]);
    if (v < 0) throw Error(ErrorKind::ParseError, "negative vertex id", line);
    if (static_cast<std::size_t>(v) >= rows.size()) rows.resize(v + 1);
    if (rows[v].seen) throw Error(ErrorKind::ParseError, "vertex " + tok[0] + " listed twice", line);
    rows[v].seen = true;
    rows[v].line = line;
    rows[v].colour = to_int(tok[1]);
    for (std::size_t i = 2; i < tok.size(); ++i) {
      auto colon = tok[i].find(':');
      std::optional<double> w;
      if (colon != std::string::npos) {
        try {
          std::size_t used = 0;
          w = std::stod(tok[i].substr(colon + 1), &used);
          if (used != tok[i].size() - colon - 1) throw std::invalid_argument("trailing");
        } catch (...) {
          throw Error(ErrorKind::ParseError, "bad weight in '" + tok[i] + "'", line);
        }
      }
      rows[v].nbrs.push_back({to_int(tok[i].substr(0, colon)), w});
    }
  }
  if (m < 1) throw Error(ErrorKind::ParseError, "missing 'm <m>' line");
  LinkGraph G;
  for (std::size_t v = 0; v < rows.size(); ++v) {
    if (!rows[v].seen) throw Error(ErrorKind::ParseError, "vertex " + std::to_string(v) + " is not listed");
    G.add_vertex(rows[v].colour);
  }
  bool weighted = false, unweighted = false;
  for (const auto& r : rows)
    for (const auto& [u, w] : r.nbrs) (w ? weighted : unweighted) = true;
  if (weighted && unweighted) throw Error(ErrorKind::ParseError, "either every edge carries a weight or none does");
  const int n = static_cast<int>(rows.size());
  for (int v = 0; v < n; ++v) {
    std::map<int, std::vector<std::optional<double>>> mine;
    for (const auto& [u, w] : rows[v].nbrs) {
      if (u < 0 || u >= n) throw Error(ErrorKind::ParseError, "unknown neighbour " + std::to_string(u), rows[v].line);
      if (u == v) throw Error(ErrorKind::ParseError, "self-loop at vertex " + std::to_string(v), rows[v].line);
      mine[u].push_back(w);
    }
    for (auto& [u, ws] : mine) {
      std::vector<std::optional<double>> theirs;
      for (const auto& [x, w] : rows[u].nbrs)
        if (x == v) theirs.push_back(w);
      auto key = [](const std::optional<double>& a) { return a.value_or(0.0); };
      auto cmp = [&](const auto& a, const auto& b) { return key(a) < key(b); };
      std::sort(ws.begin(), ws.end(), cmp);
      std::sort(theirs.begin(), theirs.end(), cmp);
      if (theirs.size() != ws.size())
        throw Error(ErrorKind::ParseError,
                    "edge " + std::to_string(v) + "-" + std::to_string(u) + " is not listed from both ends",
                    rows[v].line);
      for (std::size_t i = 0; i < ws.size(); ++i)
        if (key(ws[i]) != key(theirs[i]))
          throw Error(ErrorKind::ParseError,
                      "edge " + std::to_string(v) + "-" + std::to_string(u) + " has different weights at its ends",
                      rows[v].line);
      if (v < u)
        for (const auto& w : ws) weighted ? G.add_edge(v, u, *w) : G.add_edge(v, u);
    }
  }
  G.m = m;
  return G;
}

inline std::string format_link_graph(const LinkGraph& G) {
  std::ostringstream out;
  out.precision(17);
  out << "m " << G.m << "\n";
  for (std::size_t v = 0; v < G.num_vertices(); ++v) {
    out << v << ' ' << G.color[v];
    for (auto [u, e] : G.adj[v]) {
      out << ' ' << u;
      if (G.weighted()) out << ':' << G.weights[e];
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Cycles.

/// A closed walk stored as vertices v0..v_{L-1} and edges, edge i joining v_i, v_{i+1}.
struct Cycle {
  std::vector<int> vertices;
  std::vector<int> edges;
};

/// All simple cycles with exactly `length` edges, each reported once.
/// Cycles start at their smallest vertex; the direction is fixed by
/// requiring first edge id < last edge id.
inline std::vector<Cycle> enumerate_cycles(const LinkGraph& G, int length) {
  std::vector<Cycle> out;
  const int n = static_cast<int>(G.num_vertices());
  std::vector<char> on_path(n, 0);
  std::vector<int> vs, es;
  for (int s = 0; s < n; ++s) {
    auto dist = detail::bfs_distances(G, s);
    std::function<void(int)> dfs = [&](int u) {
      int depth = static_cast<int>(es.size());
      for (auto [v, e] : G.adj[u]) {
        if (!es.empty() && e == es.back()) continue;
        if (v == s) {
          if (depth + 1 == length && length >= 2 && es.front() < e) {
            Cycle c{vs, es};
            c.edges.push_back(e);
            out.push_back(std::move(c));
          }
          continue;
        }
        if (v < s || on_path[v]) continue;
        if (dist[v] < 0 || depth + 1 + dist[v] > length) continue;
        on_path[v] = 1;
        vs.push_back(v);
        es.push_back(e);
        dfs(v);
        vs.pop_back();
        es.pop_back();
        on_path[v] = 0;
      }
    };
    on_path[s] = 1;
    vs = {s};
    es.clear();
    dfs(s);
    on_path[s] = 0;
  }
  return out;
}

struct ApartmentCount {
  long long enumerated = 0;
  double formula = 0.0;          // q_i^{m/2} q_{i+1}^{m/2}
  double formula_minus_one = 0.0; // same with q - 1 branch factors
};

/// Exhaustive count of 2m-cycles through edge `e`, next to the closed-form
/// estimates built from the two vertex degrees.
inline ApartmentCount count_apartments_through_edge(const LinkGraph& G, int e) {
  if (e < 0 || e >= static_cast<int>(G.num_edges())) throw Error(ErrorKind::InvalidArgument, "edge out of range");
  ApartmentCount r;
  for (const auto& c : enumerate_cycles(G, 2 * G.m))
    if (std::find(c.edges.begin(), c.edges.end(), e) != c.edges.end()) ++r.enumerated;
  double qa = static_cast<double>(G.adj[G.edges[e][0]].size());
  double qb = static_cast<double>(G.adj[G.edges[e][1]].size());
  double h = 0.5 * G.m;
  r.formula = std::pow(qa, h) * std::pow(qb, h);
  r.formula_minus_one = std::pow(qa - 1, h) * std::pow(qb - 1, h);
  return r;
}

namespace detail {

/// Calls fn on every path with exactly `len` edges from s to t whose interior
/// avoids `blocked` and whose first step is not `avoid_first`, until fn
/// returns true.
inline bool for_each_path_of_length(const LinkGraph& G, int s, int t, int len, const std::set<int>& blocked,
                                    int avoid_first, const std::function<bool(const std::vector<int>&)>& fn) {
  auto dist_t = bfs_distances(G, t);
  std::vector<int> path{s};
  std::set<int> used{s};
  std::function<bool(int)> dfs = [&](int u) -> bool {
    int depth = static_cast<int>(path.size()) - 1;
    if (depth == len) return u == t && fn(path);
    for (auto [v, e] : G.adj[u]) {
      if (depth == 0 && v == avoid_first) continue;
      if (v == t) {
        if (depth + 1 == len) {
          path.push_back(v);
          if (fn(path)) return true;
          path.pop_back();
        }
        continue;
      }
      if (used.count(v) || blocked.count(v)) continue;
      if (dist_t[v] < 0 || depth + 1 + dist_t[v] > len) continue;
      path.push_back(v);
      used.insert(v);
      if (dfs(v)) return true;
      used.erase(v);
      path.pop_back();
    }
    return false;
  };
  if (s == t && len == 0) return fn(path);
  return dfs(s);
}

inline std::optional<std::vector<int>> path_of_length(const LinkGraph& G, int s, int t, int len,
                                                      const std::set<int>& blocked, int avoid_first = -1) {
  std::optional<std::vector<int>> out;
  for_each_path_of_length(G, s, t, len, blocked, avoid_first, [&](const std::vector<int>& p) {
    out = p;
    return true;
  });
  return out;
}

inline void require_embedded_path(const LinkGraph& G, const std::vector<int>& path) {
  std::set<int> seen;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path[i] < 0 || path[i] >= static_cast<int>(G.num_vertices()))
      throw Error(ErrorKind::NotEmbedded, "path vertex out of range");
    if (!seen.insert(path[i]).second) throw Error(ErrorKind::NotEmbedded, "path repeats a vertex");
    if (i > 0 && G.edge_between(path[i - 1], path[i]) < 0)
      throw Error(ErrorKind::NotEmbedded, "consecutive path vertices are not adjacent");
  }
}

}  // namespace detail

/// True iff `cycle` is a simple closed vertex sequence of G (implicitly closed).
inline bool is_embedded_cycle(const LinkGraph& G, const std::vector<int>& cycle) {
  if (cycle.size() < 2) return false;
  std::set<int> seen(cycle.begin(), cycle.end());
  if (seen.size() != cycle.size()) return false;
  for (std::size_t i = 0; i < cycle.size(); ++i)
    if (G.edge_between(cycle[i], cycle[(i + 1) % cycle.size()]) < 0) return false;
  return true;
}

/// True iff the vertex path appears in the cycle as consecutive vertices,
/// in either direction.
inline bool cycle_contains_path(const std::vector<int>& cycle, const std::vector<int>& path) {
  const std::size_t L = cycle.size();
  if (path.size() > L + 1 || path.empty()) return false;
  for (int dir : {1, -1})
    for (std::size_t start = 0; start < L; ++start) {
      bool ok = true;
      for (std::size_t i = 0; i < path.size() && ok; ++i) {
        long idx = (static_cast<long>(start) + dir * static_cast<long>(i)) % static_cast<long>(L);
        if (idx < 0) idx += static_cast<long>(L);
        ok = cycle[idx] == path[i];
      }
      if (ok) return true;
    }
  return false;
}

/// Extend an embedded path (vertex list, p = size-1 edges, p <= 2m) to an
/// embedded cycle containing it. For p > m+1 the construction glues two
/// apartments: a = v0..vm, b = vm..vp, c closes a into an apartment while
/// leaving vm away from b, c' is the first 2m+1-p edges of c, and d closes
/// b.c' into a second apartment. The result is a.b.d.(c minus c') with
/// backtracks cancelled.
inline std::vector<int> extend_interval_to_cycle(const LinkGraph& G, const std::vector<int>& path) {
  const int m = G.m;
  if (path.size() < 2) throw Error(ErrorKind::NotEmbedded, "path needs at least one edge");
  const int p = static_cast<int>(path.size()) - 1;
  if (p > 2 * m) throw Error(ErrorKind::PathTooLong, "path longer than 2m");
  detail::require_embedded_path(G, path);

  auto fail = [](const std::string& why) { return Error(ErrorKind::ExtensionFailed, why); };

  if (p <= m + 1) {
    std::set<int> blocked(path.begin() + 1, path.end() - 1);
    auto back = detail::path_of_length(G, path.back(), path.front(), 2 * m - p, blocked);
    if (!back) throw fail("no return path closing an apartment");
    std::vector<int> cyc(path.begin(), path.end());
    cyc.insert(cyc.end(), back->begin() + 1, back->end() - 1);
    if (!is_embedded_cycle(G, cyc)) throw fail("apartment closure is not embedded");
    return cyc;
  }

  const int vm = path[m];
  const int vp = path[p];
  std::vector<int> a(path.begin(), path.begin() + m + 1);
  std::vector<int> b(path.begin() + m, path.end());
  std::set<int> a_inner(a.begin() + 1, a.end() - 1);
  const int cp_len = 2 * m + 1 - p;

  // c closes a into an apartment leaving v_m away from b; d closes b.c' into
  // a second one. Any admissible pair whose glued walk is embedded will do.
  std::vector<int> result;
  bool any_c = false, any_d = false;
  detail::for_each_path_of_length(G, vm, path[0], m, a_inner, path[m + 1], [&](const std::vector<int>& c) {
    for (std::size_t i = 1; i < c.size(); ++i)
      if (std::find(b.begin(), b.end(), c[i]) != b.end()) return false;
    any_c = true;
    std::vector<int> cprime(c.begin(), c.begin() + cp_len + 1);
    const int y = cprime.back();
    std::set<int> bc_inner(b.begin(), b.end() - 1);
    bc_inner.insert(cprime.begin(), cprime.end() - 1);
    return detail::for_each_path_of_length(G, vp, y, m - 1, bc_inner, -1, [&](const std::vector<int>& d) {
      any_d = true;
      // Walk a, b, d, then c from y back to v0; cancel backtracks.
      std::vector<int> walk(a.begin(), a.end());
      walk.insert(walk.end(), b.begin() + 1, b.end());
      walk.insert(walk.end(), d.begin() + 1, d.end());
      walk.insert(walk.end(), c.begin() + cp_len + 1, c.end() - 1);
      std::vector<int> red;
      for (int v : walk) {
        if (red.size() >= 2 && red[red.size() - 2] == v) {
          red.pop_back();
          continue;
        }
        red.push_back(v);
      }
      while (red.size() >= 3 && red[1] == red.back()) {  // cyclic backtrack at the seam
        red.pop_back();
        red.erase(red.begin());
      }
      if (!is_embedded_cycle(G, red) || static_cast<int>(red.size()) < p || !cycle_contains_path(red, path))
        return false;
      result = std::move(red);
      return true;
    });
  });
  if (!result.empty()) return result;
  // Some paths admit no gluing whose walk stays embedded; close them by the
  // shortest return avoiding the path instead.
  std::set<int> inner(path.begin() + 1, path.end() - 1);
  std::vector<int> prev(G.num_vertices(), -1);
  std::deque<int> q{vp};
  prev[vp] = vp;
  while (!q.empty() && prev[path[0]] < 0) {
    int u = q.front();
    q.pop_front();
    for (auto [v, e] : G.adj[u]) {
      if (prev[v] >= 0 || inner.count(v)) continue;
      if (u == vp && v == path[p - 1]) continue;
      prev[v] = u;
      q.push_back(v);
    }
  }
  if (prev[path[0]] >= 0 && path[0] != vp) {
    std::vector<int> cyc(path.begin(), path.end());
    std::vector<int> back;
    for (int v = prev[path[0]]; v != vp; v = prev[v]) back.push_back(v);
    cyc.insert(cyc.end(), back.rbegin(), back.rend());
    if (is_embedded_cycle(G, cyc) && cycle_contains_path(cyc, path)) return cyc;
  }
  if (!any_c) throw fail("no apartment through a branching away from b");
  if (!any_d) throw fail("no apartment through b and c'");
  throw fail("glued apartments do not give an embedded cycle");
}

// ---------------------------------------------------------------------------
// Equal-angle rigidity.

struct RigidityReport {
  bool all_cycles_equal_2pi = true;
  bool all_edges_pi_over_m = true;
  bool implication_holds = true;            // cycles => edges
  std::optional<Cycle> witness_cycle;       // a 2m-cycle whose weight is not 2pi
  std::optional<int> witness_edge;          // an edge whose weight is not pi/m
  std::size_t cycles_checked = 0;
};

/// Check every 2m-cycle for total weight 2pi and every edge for pi/m.
/// `cycles` may be supplied to reuse one enumeration across many weightings.
inline RigidityReport check_equal_angle_rigidity(const LinkGraph& G, double tol = 1e-9,
                                                 const std::vector<Cycle>* cycles = nullptr) {
  if (!G.weighted()) throw Error(ErrorKind::InvalidArgument, "rigidity check needs edge weights");
  std::vector<Cycle> own;
  if (!cycles) {
    own = enumerate_cycles(G, 2 * G.m);
    cycles = &own;
  }
  RigidityReport r;
  r.cycles_checked = cycles->size();
  for (const auto& c : *cycles) {
    double s = 0.0;
    for (int e : c.edges) s += G.weights[e];
    if (std::abs(s - 2.0 * std::numbers::pi) > tol) {
      r.all_cycles_equal_2pi = false;
      r.witness_cycle = c;
      break;
    }
  }
  const double target = std::numbers::pi / G.m;
  for (std::size_t e = 0; e < G.num_edges(); ++e)
    if (std::abs(G.weights[e] - target) > tol) {
      r.all_edges_pi_over_m = false;
      r.witness_edge = static_cast<int>(e);
      break;
    }
  r.implication_holds = !r.all_cycles_equal_2pi || r.all_edges_pi_over_m;
  return r;
}

}  // namespace fuchsian
