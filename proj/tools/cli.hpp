#pragma once

// Command-line driver. Every subcommand writes one text report: a header of
// `# key<TAB>value` lines (version, seed, workers, tolerances, config, input
// digests) followed by `[section]` blocks of tab-separated rows.
//
// Exit codes: 0 pass, 1 semantic failure, 2 input error.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fuchsian/complex.hpp"
#include "fuchsian/geodesic.hpp"
#include "fuchsian/hypgeom.hpp"
#include "fuchsian/liouville.hpp"
#include "fuchsian/mgon.hpp"
#include "fuchsian/pairing.hpp"

#ifndef FUCHSIAN_VERSION
#define FUCHSIAN_VERSION "0.0.0"
#endif

namespace fuchsian::cli {

constexpr std::uint64_t kDefaultSeed = 42;

enum Exit { kPass = 0, kFail = 1, kInputError = 2 };

/// Round-trip decimal: 17 significant digits.
inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// A report under construction. Rows are joined with tabs.
class Report {
 public:
  explicit Report(std::string command) : command_(std::move(command)) {}

  void config(const std::string& key, const std::string& value) { config_.emplace_back(key, value); }
  void input(const std::string& path, const std::string& text) { inputs_.emplace_back(path, sha256_hex(text)); }
  void section(const std::string& name) { body_ << "[" << name << "]\n"; }

  template <class... T>
  void row(const T&... cells) {
    bool first = true;
    ((body_ << (first ? "" : "\t") << cell(cells), first = false), ...);
    body_ << "\n";
  }

  std::string str(std::uint64_t seed, unsigned workers, const Tolerances& tol) const {
    std::ostringstream os;
    os << "# fuchsian\t" << FUCHSIAN_VERSION << "\n";
    os << "# command\t" << command_ << "\n";
    os << "# seed\t" << seed << "\n";
    os << "# workers\t" << workers << "\n";
    os << "# tolerance\talgebraic=" << fmt(tol.algebraic) << " geometric=" << fmt(tol.geometric)
       << " tangent_angle=" << fmt(tol.tangent_angle) << " vertex_hit=" << fmt(tol.vertex_hit)
       << " sample_margin=" << fmt(tol.sample_margin) << " cycle_sum=" << fmt(tol.cycle_sum)
       << " window_cap=" << tol.window_cap << " crossing_angle_floor=" << fmt(tol.crossing_angle_floor) << "\n";
    for (const auto& [k, v] : config_) os << "# config\t" << k << "=" << v << "\n";
    for (const auto& [p, d] : inputs_) os << "# input\t" << p << "\tsha256=" << d << "\n";
    os << body_.str();
    return os.str();
  }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double x) { return fmt(x); }
  static std::string cell(bool b) { return b ? "yes" : "no"; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I i) {
    return std::to_string(i);
  }

  std::string command_;
  std::vector<std::pair<std::string, std::string>> config_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::ostringstream body_;
};

/// Parsed `[section]` blocks of a report; header lines keyed by name.
struct ParsedReport {
  std::map<std::string, std::vector<std::string>> header;
  std::map<std::string, std::vector<std::vector<std::string>>> sections;
};

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::optional<ParsedReport> parse_report(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# fuchsian\t", 0) != 0) return std::nullopt;
  ParsedReport R;
  std::string sec;
  do {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      auto cells = split_tabs(line.substr(2));
      if (cells.size() >= 2) R.header[cells[0]].push_back(cells[1]);
    } else if (line.front() == '[' && line.back() == ']') {
      sec = line.substr(1, line.size() - 2);
      R.sections[sec];
    } else {
      R.sections[sec].push_back(split_tabs(line));
    }
  } while (std::getline(is, line));
  return R;
}

// ---------------------------------------------------------------------------
// Shared plumbing.

struct Common {
  std::uint64_t seed = kDefaultSeed;
  unsigned workers = 1;
  std::string out;
  Tolerances tol = default_tolerances();
};

/// Input problems map to exit 2, everything else to exit 1.
inline bool is_input_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::ParseError:
    case ErrorKind::IncidenceError:
    case ErrorKind::LabelError:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NotClosed:
      return true;
    default:
      return false;
  }
}

struct Loaded {
  std::string complex_text, metric_text;
  Complex C;
  std::optional<MetricAssignment> M;
};

inline Loaded load_inputs(Report& rep, const std::string& complex_path, const std::string& metric_path,
                          const Tolerances& tol) {
  Loaded L;
  L.complex_text = read_text_file(complex_path);
  rep.input(complex_path, L.complex_text);
  L.C = parse_complex(L.complex_text);
  if (!metric_path.empty()) {
    L.metric_text = read_text_file(metric_path);
    rep.input(metric_path, L.metric_text);
    L.M = parse_metric(L.metric_text, L.C, tol);
  }
  return L;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

inline std::string join(const std::vector<double>& v, const std::string& sep) {
  std::vector<std::string> s;
  for (double x : v) s.push_back(fmt(x));
  return join(s, sep);
}

inline std::string corners_text(const Complex& C, const std::vector<Incidence>& corners) {
  std::vector<std::string> s;
  for (const auto& c : corners) s.push_back(C.chambers[c.chamber].id + ":" + std::to_string(c.side));
  return join(s, " ");
}

// ---------------------------------------------------------------------------
// Subcommands. Each fills `rep` and returns an exit code.

struct ValidateArgs {
  std::string complex_path, metric_path;
  std::string require = "exactly";
};

inline int cmd_validate(const ValidateArgs& a, const Common& c, Report& rep) {
  rep.config("complex", a.complex_path);
  rep.config("metric", a.metric_path.empty() ? "-" : a.metric_path);
  rep.config("require", a.require);
  auto L = load_inputs(rep, a.complex_path, a.metric_path, c.tol);
  const Complex& C = L.C;
  bool ok = true;
  rep.section("complex");
  rep.row("mode", C.mode == Mode::Closed ? "closed" : "patch");
  rep.row("vertices", C.vertices.size());
  rep.row("edges", C.edges.size());
  rep.row("chambers", C.chambers.size());
  rep.row("incidence", "pass");
  for (const auto& w : C.warnings) rep.row("warning", w);

  rep.section("links");
  rep.row("vertex", "m", "nodes", "thick", "girth", "diameter", "mgon");
  for (int v = 0; v < static_cast<int>(C.vertices.size()); ++v) {
    VertexLink VL = vertex_link(C, v);
    bool thick = VL.graph.num_vertices() > 0;
    for (const auto& adj : VL.graph.adj)
      if (adj.size() < 3) thick = false;
    std::string verdict = "undetermined";
    int girth = 0, diam = 0;
    if (C.vertex_m[v] > 0) {
      try {
        auto r = validate_generalized_mgon(VL.graph, C.vertex_m[v]);
        girth = r.girth;
        diam = r.diameter;
        verdict = r.passed ? "pass" : "fail";
        // a patch link may be a proper part of a generalized m-gon
        if (!r.passed && C.mode == Mode::Closed) ok = false;
      } catch (const Error& e) {
        verdict = std::string("fail: ") + e.what();
        if (C.mode == Mode::Closed) ok = false;
      }
    }
    rep.row(C.vertices[v].id, C.vertex_m[v], VL.graph.num_vertices(), thick, girth, diam, verdict);
  }

  if (L.M) {
    const MetricAssignment& M = *L.M;
    auto at_least = check_large_link(C, M, LinkMode::AtLeast2Pi, c.tol);
    auto exactly = check_large_link(C, M, LinkMode::Exactly2Pi, c.tol);
    rep.section("metric");
    rep.row("chamber", "area", "angles", "side_lengths");
    for (std::size_t ch = 0; ch < C.chambers.size(); ++ch) {
      const auto& P = M.polygon(static_cast<int>(ch));
      rep.row(C.chambers[ch].id, polygon_area(P, c.tol), join(P.angles, " "), join(P.side_lengths, " "));
    }
    rep.section("failures");
    rep.row("mode", "vertex", "reason", "value", "corners");
    for (const auto* R : {&at_least, &exactly})
      for (const auto& f : R->failures)
        rep.row(R->mode == LinkMode::AtLeast2Pi ? "at-least-2pi" : "exactly-2pi", C.vertices[f.vertex].id,
                f.reason, f.value, corners_text(C, f.corners));
    rep.section("verdict");
    rep.row("at_least_2pi", at_least.passed ? "pass" : "fail");
    rep.row("exactly_2pi", exactly.passed ? "pass" : "fail");
    rep.row("volume", total_volume(C, M, c.tol));
    if (a.require == "exactly" && !exactly.passed) ok = false;
    if (a.require == "at-least" && !at_least.passed) ok = false;
  } else {
    rep.section("verdict");
  }
  rep.row("result", ok ? "pass" : "fail");
  return ok ? kPass : kFail;
}

struct SolvePolygonArgs {
  std::vector<double> angles;
  std::vector<double> lengths;
  int regular = 0;
  double angle = 0.0;
};

inline int cmd_solve_polygon(const SolvePolygonArgs& a, const Common& c, Report& rep) {
  std::vector<double> angles = a.angles;
  if (a.regular > 0) angles.assign(static_cast<std::size_t>(a.regular), a.angle);
  if (angles.empty()) throw Error(ErrorKind::ParseError, "give --angles or --regular with --angle");
  rep.config("angles", join(angles, ","));
  rep.config("lengths", a.lengths.empty() ? "-" : join(a.lengths, ","));
  HyperbolicPolygon P;
  try {
    P = a.lengths.empty() ? solve_normal_polygon(angles, c.tol) : polygon_from_angles_and_lengths(angles, a.lengths, c.tol);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DimensionMismatch) throw;
    rep.section("result");
    rep.row("status", "fail");
    rep.row("error", e.what());
    return kFail;
  }
  rep.section("polygon");
  rep.row("sides", P.size());
  rep.row("normal", P.inradius.has_value());
  if (P.inradius) rep.row("inradius", *P.inradius);
  rep.row("area", polygon_area(P, c.tol));
  rep.row("area_triangulated", P.triangulated_area());
  rep.section("corners");
  rep.row("k", "angle", "side_length", "x0", "x1", "x2", "tangency_distance");
  for (std::size_t k = 0; k < P.size(); ++k) {
    const auto& V = P.vertices[k];
    double tdist = 0.0;
    // right triangle incenter, tangency point, corner: tanh(VT) = tanh(OV) cos(alpha / 2)
    if (P.inradius) tdist = std::atanh(std::tanh(distance(HPoint::origin(), V)) * std::cos(P.angles[k] / 2));
    rep.row(k, P.angles[k], P.side_lengths[k], V.x[0], V.x[1], V.x[2], tdist);
  }
  rep.section("result");
  rep.row("status", "pass");
  return kPass;
}

struct ValidateLinkArgs {
  std::string graph_path;
  int m = 0;
  std::size_t paths = 0;
  std::vector<int> extend;
};

inline int cmd_validate_link(const ValidateLinkArgs& a, const Common& c, Report& rep) {
  rep.config("graph", a.graph_path);
  rep.config("m", a.m > 0 ? std::to_string(a.m) : "file");
  rep.config("paths", std::to_string(a.paths));
  std::vector<std::string> ext;
  for (int v : a.extend) ext.push_back(std::to_string(v));
  rep.config("extend", ext.empty() ? "-" : join(ext, ","));
  std::string text = read_text_file(a.graph_path);
  rep.input(a.graph_path, text);
  LinkGraph G = parse_link_graph(text);
  if (a.m > 0) G.m = a.m;
  bool ok = true;
  rep.section("graph");
  rep.row("vertices", G.num_vertices());
  rep.row("edges", G.num_edges());
  rep.row("m", G.m);
  MgonReport r;
  try {
    r = validate_generalized_mgon(G, G.m);
  } catch (const Error& e) {
    rep.section("result");
    rep.row("status", "fail");
    rep.row("error", e.what());
    return kFail;
  }
  rep.section("mgon");
  rep.row("girth", r.girth);
  rep.row("diameter", r.diameter);
  rep.row("thick", r.thick);
  rep.row("regular", r.regular);
  for (const auto& [col, degs] : r.degrees_by_color) {
    std::vector<std::string> d;
    for (int x : degs) d.push_back(std::to_string(x));
    rep.row("degrees", col, join(d, ","));
  }
  for (const auto& w : r.warnings) rep.row("warning", w);
  rep.row("generalized_mgon", r.passed ? "pass" : "fail");
  ok = ok && r.passed;

  auto cycles = enumerate_cycles(G, 2 * G.m);
  rep.section("apartments");
  rep.row("cycles", cycles.size());
  rep.row("edge", "enumerated", "formula", "formula_q_minus_1");
  for (int e = 0; e < static_cast<int>(G.num_edges()); ++e) {
    auto ac = count_apartments_through_edge(G, e);
    rep.row(e, ac.enumerated, ac.formula, ac.formula_minus_one);
  }

  if (G.weighted()) {
    auto rr = check_equal_angle_rigidity(G, c.tol.cycle_sum, &cycles);
    rep.section("rigidity");
    rep.row("cycles_checked", rr.cycles_checked);
    rep.row("all_cycles_2pi", rr.all_cycles_equal_2pi);
    rep.row("all_edges_pi_over_m", rr.all_edges_pi_over_m);
    rep.row("implication_holds", rr.implication_holds);
    if (rr.witness_edge) rep.row("witness_edge", *rr.witness_edge);
    if (rr.witness_cycle) {
      std::vector<std::string> v;
      for (int x : rr.witness_cycle->vertices) v.push_back(std::to_string(x));
      rep.row("witness_cycle", join(v, " "));
    }
    ok = ok && rr.implication_holds;
  }

  if (!a.extend.empty() || a.paths > 0) {
    rep.section("extensions");
    rep.row("path", "cycle", "status");
    auto one = [&](const std::vector<int>& path) {
      std::vector<std::string> ps;
      for (int x : path) ps.push_back(std::to_string(x));
      try {
        auto cyc = extend_interval_to_cycle(G, path);
        std::vector<std::string> cs;
        for (int x : cyc) cs.push_back(std::to_string(x));
        bool good = is_embedded_cycle(G, cyc) && cycle_contains_path(cyc, path);
        rep.row(join(ps, " "), join(cs, " "), good ? "pass" : "fail");
        return good;
      } catch (const Error& e) {
        rep.row(join(ps, " "), "-", std::string("fail: ") + e.what());
        return false;
      }
    };
    if (!a.extend.empty()) ok = one(a.extend) && ok;
    std::mt19937_64 rng = block_rng(c.seed, 31, 0);
    std::size_t failed = 0;
    for (std::size_t i = 0; i < a.paths; ++i) {
      int len = 1 + static_cast<int>(rng() % (2 * static_cast<unsigned>(G.m)));
      std::vector<int> path;
      for (int attempt = 0; attempt < 1000 && static_cast<int>(path.size()) != len + 1; ++attempt) {
        path = {static_cast<int>(rng() % G.num_vertices())};
        std::set<int> used{path[0]};
        while (static_cast<int>(path.size()) <= len) {
          std::vector<int> opts;
          for (auto [v, e] : G.adj[path.back()])
            if (!used.count(v)) opts.push_back(v);
          if (opts.empty()) break;
          path.push_back(opts[rng() % opts.size()]);
          used.insert(path.back());
        }
      }
      if (!one(path)) ++failed;
    }
    if (a.paths > 0) {
      rep.section("extension_summary");
      rep.row("random_paths", a.paths);
      rep.row("failed", failed);
    }
    ok = ok && failed == 0;
  }
  rep.section("result");
  rep.row("status", ok ? "pass" : "fail");
  return ok ? kPass : kFail;
}

struct GeometryArgs {
  std::string complex_path, metric_path;
};

struct MlsArgs : GeometryArgs {
  std::vector<std::string> words;
};

inline int cmd_mls(const MlsArgs& a, const Common& c, Report& rep) {
  rep.config("complex", a.complex_path);
  rep.config("metric", a.metric_path);
  rep.config("words", join(a.words, ";"));
  auto L = load_inputs(rep, a.complex_path, a.metric_path, c.tol);
  bool ok = true;
  rep.section("marked_length");
  rep.row("word", "length", "gallery", "max_angle_mismatch", "min_vertex_link_distance", "vertex_passages",
          "stationarity_gap", "status");
  for (const auto& w : a.words) {
    try {
      auto g = marked_length(L.C, *L.M, w, c.tol);
      double link = std::isfinite(g.min_vertex_link_distance) ? g.min_vertex_link_distance : -1.0;
      rep.row(w, g.length, g.word, g.max_angle_mismatch, link, g.vertex_passages, g.stationarity_gap, "pass");
    } catch (const Error& e) {
      if (is_input_error(e.kind())) throw;
      rep.row(w, "-", "-", "-", "-", "-", "-", std::string("fail: ") + e.what());
      ok = false;
    }
  }
  return ok ? kPass : kFail;
}

struct LiouvilleArgs : GeometryArgs {
  std::size_t n = 100000;
  double time = 10.0;
  std::size_t steps = 0;
};

inline int cmd_liouville(const LiouvilleArgs& a, const Common& c, Report& rep) {
  rep.config("complex", a.complex_path);
  rep.config("metric", a.metric_path);
  rep.config("n", std::to_string(a.n));
  rep.config("time", fmt(a.time));
  rep.config("steps", std::to_string(a.steps));
  auto L = load_inputs(rep, a.complex_path, a.metric_path, c.tol);
  LiouvilleSampler S(L.C, *L.M, c.tol);
  auto R = sample_liouville_segments(S, a.n, a.time, c.seed, c.workers);
  rep.section("summary");
  rep.row("statistic", "value", "stderr", "expected");
  rep.row("n", R.n, "-", "-");
  rep.row("total_mass", R.total_mass, "-", "-");
  rep.row("mean_t", R.mean_t, R.mean_t_stderr, 2 * std::numbers::pi * total_volume(L.C, *L.M, c.tol) / R.total_mass);
  rep.row("crossings_per_time", R.crossings_per_time, "-", "-");
  rep.row("renewal", R.renewal, "-", 1.0);
  rep.row("mean_cos", R.mean_cos, R.mean_cos_stderr, std::numbers::pi / 4);
  rep.row("mean_log_branch_probability", R.mean_log_branch_probability, "-", "-");
  rep.row("resampled", R.resampled, "-", "-");
  bool ok = true;
  if (a.steps > 0) {
    auto T = verify_stationarity(S, MarkovKernel{}, a.n, a.steps, c.seed, c.workers);
    rep.section("stationarity");
    rep.row("steps", T.steps);
    rep.row("tests", T.tests);
    rep.row("chi2", T.chi2);
    rep.row("chi2_p", T.chi2_p);
    rep.row("ks_min_p", T.ks_min_p);
    rep.row("moment_z", T.moment_z);
    rep.row("moment_p", T.moment_p);
    rep.row("resampled", T.resampled);
    rep.row("verdict", T.passed ? "pass" : "fail");
    ok = T.passed;
  }
  return ok ? kPass : kFail;
}

struct IntersectArgs : GeometryArgs {
  std::string mode = "closed-closed";
  std::string alpha, beta;
  std::string metric1_path;
  std::size_t n = 100000;
  std::vector<double> schedule{10.0, 20.0, 40.0};
  std::size_t classes = 200;
};

inline void estimate_rows(Report& rep, const std::string& name, const Estimate& e) {
  rep.row(name, e.value, e.stderr_, e.target, e.n, e.resampled, e.dropped, e.windows, e.max_weight);
}

inline int cmd_intersect(const IntersectArgs& a, const Common& c, Report& rep) {
  rep.config("complex", a.complex_path);
  rep.config("metric", a.metric_path);
  rep.config("mode", a.mode);
  rep.config("alpha", a.alpha.empty() ? "-" : a.alpha);
  rep.config("beta", a.beta.empty() ? "-" : a.beta);
  rep.config("n", std::to_string(a.n));
  if (a.mode == "continuity") {
    rep.config("metric1", a.metric1_path);
    rep.config("schedule", join(a.schedule, ","));
    rep.config("classes", std::to_string(a.classes));
  }
  auto L = load_inputs(rep, a.complex_path, a.metric_path, c.tol);
  const Complex& C = L.C;
  const MetricAssignment& M = *L.M;
  auto need = [](const std::string& w, const char* what) {
    if (w.empty()) throw Error(ErrorKind::ParseError, std::string("mode needs --") + what);
  };
  if (a.mode == "closed-closed") {
    need(a.alpha, "alpha");
    need(a.beta, "beta");
    auto ga = marked_length(C, M, a.alpha, c.tol);
    auto gb = marked_length(C, M, a.beta, c.tol);
    auto R = intersect_closed_closed(C, M, ga, gb, c.tol);
    rep.section("estimate");
    rep.row("value", "stderr", "crossings", "vertex_crossings", "dropped");
    rep.row(R.value, 0.0, R.crossings.size(), R.vertex_crossings, R.dropped);
    rep.section("crossings");
    rep.row("index", "chamber", "x0", "x1", "x2", "angle", "piece_alpha", "piece_beta", "at_vertex", "status",
            "window_chambers", "weight", "p");
    for (std::size_t i = 0; i < R.crossings.size(); ++i) {
      const auto& x = R.crossings[i];
      std::vector<std::string> ch;
      for (int w : x.window.chambers) ch.push_back(C.chambers[w].id);
      rep.row(i, C.chambers[x.chamber].id, x.point.x[0], x.point.x[1], x.point.x[2], x.angle, x.piece_a, x.piece_b,
              x.at_vertex, x.at_vertex ? "vertex" : to_string(x.status), join(ch, " "), x.window.weight,
              x.contribution);
    }
    return kPass;
  }
  LiouvilleSampler S(C, M, c.tol);
  const std::vector<std::string> cols{"estimator", "value", "stderr", "target", "n", "resampled", "dropped",
                                      "windows", "max_weight"};
  if (a.mode == "liouville-closed") {
    need(a.beta, "beta");
    auto gb = marked_length(C, M, a.beta, c.tol);
    auto e = intersect_liouville_closed(S, gb, a.n, c.seed, c.workers);
    rep.section("estimate");
    rep.row(join(cols, "\t"));
    estimate_rows(rep, "liouville-closed", e);
    return kPass;
  }
  if (a.mode == "liouville-liouville") {
    auto V = intersect_liouville_liouville(S, a.n, c.seed, c.workers);
    rep.section("estimate");
    rep.row(join(cols, "\t"));
    estimate_rows(rep, "direct", V.direct);
    estimate_rows(rep, "windowed", V.windowed);
    rep.section("agreement");
    rep.row("volume", V.volume);
    rep.row("difference_stderr", V.difference_stderr);
    rep.row("combined_z", V.combined_z);
    return kPass;
  }
  if (a.mode == "continuity") {
    need(a.metric1_path, "metric1");
    std::string t1 = read_text_file(a.metric1_path);
    rep.input(a.metric1_path, t1);
    MetricAssignment M1 = parse_metric(t1, C, c.tol);
    ContinuityConfig cfg;
    cfg.schedule = a.schedule;
    cfg.classes = a.classes;
    cfg.liouville_n = a.n;
    cfg.seed = c.seed;
    cfg.workers = c.workers;
    auto R = continuity_experiment(C, M, M1, cfg, c.tol);
    rep.section("volumes");
    rep.row("volume0", R.volume0);
    rep.row("volume1", R.volume1);
    rep.row("equal", R.volumes_equal);
    rep.section("self_pairing");
    rep.row(join(cols, "\t"));
    estimate_rows(rep, "i00", R.self0.direct);
    estimate_rows(rep, "i11", R.self1.direct);
    rep.section("continuity");
    rep.row("time", "classes", "degenerate", "ratio01", "ratio01_stderr", "ratio10", "ratio10_stderr", "i01",
            "i01_stderr", "i10", "i10_stderr", "mls0_le_mls1", "mls1_le_mls0");
    for (const auto& r : R.rows)
      rep.row(r.time, r.classes, r.degenerate, r.ratio01, r.ratio01_stderr, r.ratio10, r.ratio10_stderr, r.i01,
              r.i01_stderr, r.i10, r.i10_stderr, r.mls0_le_mls1, r.mls1_le_mls0);
    rep.section("verdict");
    rep.row("chain_holds", R.chain_holds);
    rep.row("mls0_le_mls1", R.mls0_le_mls1);
    rep.row("verdict", R.verdict);
    return R.verdict == "inconsistent" ? kFail : kPass;
  }
  throw Error(ErrorKind::ParseError, "unknown mode " + a.mode);
}

struct VerifyArgs : GeometryArgs {
  std::size_t n = 1000000;
  std::vector<std::string> classes{"e0+"};
  double sigmas = 3.0;
  double rel = 0.02;
};

inline int cmd_verify_identities(const VerifyArgs& a, const Common& c, Report& rep) {
  rep.config("complex", a.complex_path);
  rep.config("metric", a.metric_path);
  rep.config("n", std::to_string(a.n));
  rep.config("classes", join(a.classes, ";"));
  rep.config("sigmas", fmt(a.sigmas));
  rep.config("rel", fmt(a.rel));
  auto L = load_inputs(rep, a.complex_path, a.metric_path, c.tol);
  const Complex& C = L.C;
  const MetricAssignment& M = *L.M;
  auto link = check_large_link(C, M, LinkMode::Exactly2Pi, c.tol);
  if (C.mode != Mode::Closed || !link.passed) {
    rep.section("result");
    rep.row("status", "refused");
    rep.row("reason", C.mode != Mode::Closed ? "complex is not closed" : "metric is not Exactly2Pi");
    return kFail;
  }
  const bool low_power = a.n < 10000;
  LiouvilleSampler S(C, M, c.tol);
  bool ok = true;
  rep.section("identities");
  rep.row("identity", "class", "target", "estimate", "stderr", "z", "rel_error", "pass", "note");
  auto emit = [&](const std::string& id, const std::string& cls, const Estimate& e) {
    double d = e.value - e.target;
    double s = std::max(e.stderr_, 1e-12 * std::abs(e.target));
    bool pass = e.within(a.sigmas, a.rel);
    ok = ok && pass;
    std::string note = low_power ? "low-power" : "-";
    if (e.dropped) note += " dropped=" + std::to_string(e.dropped);
    rep.row(id, cls, e.target, e.value, e.stderr_, d / s, std::abs(d) / std::abs(e.target), pass ? "pass" : "fail",
            note);
  };
  std::uint64_t stream_seed = c.seed;
  for (const auto& w : a.classes) {
    auto g = marked_length(C, M, w, c.tol);
    Estimate len;
    len.value = g.length;
    len.target = g.length;
    bool cert = g.max_angle_mismatch <= 1e-8 && g.stationarity_gap <= 1e-10;
    rep.row("marked-length", w, g.length, g.length, g.stationarity_gap, 0.0, 0.0, cert ? "pass" : "fail",
            "gallery " + g.word);
    ok = ok && cert;
    emit("length", w, intersect_liouville_closed(S, g, a.n, stream_seed++, c.workers));
  }
  auto V = intersect_liouville_liouville(S, a.n, c.seed, c.workers);
  emit("volume-direct", "-", V.direct);
  emit("volume-windowed", "-", V.windowed);
  double comb = std::hypot(V.direct.stderr_, V.windowed.stderr_);
  double diff = V.direct.value - V.windowed.value;
  bool agree = std::abs(diff) <= std::max(comb, 1e-12);
  ok = ok && agree;
  rep.row("volume-agreement", "-", 0.0, diff, comb, comb > 0 ? diff / comb : 0.0, 0.0, agree ? "pass" : "fail",
          "combined stderr");
  rep.section("result");
  rep.row("volume", V.volume);
  rep.row("status", ok ? "pass" : "fail");
  return ok ? kPass : kFail;
}

struct ReportArgs {
  std::string run_dir;
  std::string out_dir;
};

/// Turns continuity reports in a run directory into plot-ready series.
inline int cmd_report(const ReportArgs& a, const Common&, Report& rep) {
  namespace fs = std::filesystem;
  rep.config("run", a.run_dir);
  rep.config("out_dir", a.out_dir.empty() ? a.run_dir : a.out_dir);
  if (!fs::is_directory(a.run_dir)) throw Error(ErrorKind::ParseError, "no run directory " + a.run_dir);
  std::vector<fs::path> files;
  for (const auto& ent : fs::directory_iterator(a.run_dir))
    if (ent.is_regular_file() && ent.path().extension() == ".tsv" &&
        ent.path().filename().string().find(".series.") == std::string::npos &&
        ent.path().filename().string().find(".volume.") == std::string::npos)
      files.push_back(ent.path());
  std::sort(files.begin(), files.end());
  fs::path out = a.out_dir.empty() ? fs::path(a.run_dir) : fs::path(a.out_dir);
  fs::create_directories(out);
  rep.section("series");
  rep.row("artifact", "series", "rows");
  int written = 0;
  for (const auto& f : files) {
    std::string text = read_text_file(f.string());
    auto P = parse_report(text);
    if (!P || !P->sections.count("continuity") || !P->sections.count("volumes")) continue;
    rep.input(f.filename().string(), text);
    const auto& rows = P->sections["continuity"];
    if (rows.size() < 2) continue;
    std::string v0, v1;
    for (const auto& r : P->sections["volumes"]) {
      if (r.size() >= 2 && r[0] == "volume0") v0 = r[1];
      if (r.size() >= 2 && r[0] == "volume1") v1 = r[1];
    }
    std::string stem = f.stem().string();
    std::ofstream series(out / (stem + ".series.tsv"), std::ios::binary);
    std::ofstream volume(out / (stem + ".volume.tsv"), std::ios::binary);
    volume << "time\tvolume0\tvolume1\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      series << join(rows[i], "\t") << "\n";
      if (i > 0) volume << rows[i][0] << "\t" << v0 << "\t" << v1 << "\n";
    }
    rep.row(f.filename().string(), stem + ".series.tsv", rows.size() - 1);
    rep.row(f.filename().string(), stem + ".volume.tsv", rows.size() - 1);
    ++written;
  }
  if (written == 0) throw Error(ErrorKind::ParseError, "no continuity artifacts in " + a.run_dir);
  return kPass;
}

// ---------------------------------------------------------------------------
// Entry point.

inline std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("FUCHSIAN_SEED");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  unsigned long long v = std::strtoull(s, &end, 10);
  if (errno || *end || s[0] == '-') throw Error(ErrorKind::ParseError, std::string("FUCHSIAN_SEED is not a number: ") + s);
  return v;
}

inline int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Polygonal complexes, geodesic currents and the adjusted intersection number", "fuchsian"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", FUCHSIAN_VERSION);
  Common c;
  std::optional<std::uint64_t> seed_opt;
  app.add_option("--seed", seed_opt, "RNG seed (default: FUCHSIAN_SEED or 42)");
  app.add_option("--workers", c.workers, "worker threads; output depends only on seed and this count")
      ->check(CLI::Range(1u, 1024u));
  app.add_option("--out", c.out, "write the report to this file instead of stdout");

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "check a complex and optionally a metric");
  validate->add_option("complex", va.complex_path)->required();
  validate->add_option("metric", va.metric_path);
  validate->add_option("--require", va.require, "link condition that decides the exit code")
      ->check(CLI::IsMember({"exactly", "at-least", "none"}));

  SolvePolygonArgs sa;
  auto* solve = app.add_subcommand("solve-polygon", "normal polygon from angles, or polygon from angles and lengths");
  solve->add_option("--angles", sa.angles)->delimiter(',');
  solve->add_option("--lengths", sa.lengths)->delimiter(',');
  solve->add_option("--regular", sa.regular, "number of sides of a regular polygon");
  solve->add_option("--angle", sa.angle, "corner angle of the regular polygon");

  ValidateLinkArgs la;
  auto* vlink = app.add_subcommand("validate-link", "generalized m-gon checks on a link graph");
  vlink->add_option("graph", la.graph_path)->required();
  vlink->add_option("--m", la.m);
  vlink->add_option("--paths", la.paths, "random embedded paths to extend to apartments");
  vlink->add_option("--extend", la.extend, "vertex path to extend")->delimiter(',');

  MlsArgs ma;
  auto* mls = app.add_subcommand("mls", "marked length of crossing words");
  mls->add_option("complex", ma.complex_path)->required();
  mls->add_option("metric", ma.metric_path)->required();
  mls->add_option("--word", ma.words, "crossing word such as 'e0+ e1-'")->required();

  LiouvilleArgs lv;
  auto* liou = app.add_subcommand("liouville", "Liouville trajectory statistics");
  liou->add_option("complex", lv.complex_path)->required();
  liou->add_option("metric", lv.metric_path)->required();
  liou->add_option("--n", lv.n);
  liou->add_option("--time", lv.time);
  liou->add_option("--steps", lv.steps, "also test stationarity after this many kernel steps");

  IntersectArgs ia;
  auto* inter = app.add_subcommand("intersect", "adjusted intersection number");
  inter->add_option("complex", ia.complex_path)->required();
  inter->add_option("metric", ia.metric_path)->required();
  inter->add_option("--mode", ia.mode)->check(
      CLI::IsMember({"closed-closed", "liouville-closed", "liouville-liouville", "continuity"}));
  inter->add_option("--alpha", ia.alpha);
  inter->add_option("--beta", ia.beta);
  inter->add_option("--metric1", ia.metric1_path, "second metric for the continuity mode");
  inter->add_option("--n", ia.n);
  inter->add_option("--schedule", ia.schedule, "trajectory times for the continuity mode")->delimiter(',');
  inter->add_option("--classes", ia.classes);

  VerifyArgs vi;
  auto* verify = app.add_subcommand("verify-identities", "Monte Carlo checks of the length and volume identities");
  verify->add_option("complex", vi.complex_path)->required();
  verify->add_option("metric", vi.metric_path)->required();
  verify->add_option("--n", vi.n);
  verify->add_option("--class", vi.classes, "closed class for the length identity");
  verify->add_option("--sigmas", vi.sigmas);
  verify->add_option("--rel", vi.rel);

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "plot series from a run directory");
  report->add_option("run", ra.run_dir)->required();
  report->add_option("--out-dir", ra.out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kPass;
  } catch (const CLI::CallForVersion& e) {
    out << FUCHSIAN_VERSION << "\n";
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  CLI::App* sub = app.get_subcommands().front();
  Report rep(sub->get_name());
  int code = kPass;
  try {
    if (seed_opt) c.seed = *seed_opt;
    else if (auto s = seed_from_env()) c.seed = *s;
    if (sub == validate) code = cmd_validate(va, c, rep);
    else if (sub == solve) code = cmd_solve_polygon(sa, c, rep);
    else if (sub == vlink) code = cmd_validate_link(la, c, rep);
    else if (sub == mls) code = cmd_mls(ma, c, rep);
    else if (sub == liou) code = cmd_liouville(lv, c, rep);
    else if (sub == inter) code = cmd_intersect(ia, c, rep);
    else if (sub == verify) code = cmd_verify_identities(vi, c, rep);
    else if (sub == report) code = cmd_report(ra, c, rep);
  } catch (const Error& e) {
    err << "error: " << e.what();
    if (e.line() > 0) err << " (line " << e.line() << ")";
    err << "\n";
    return is_input_error(e.kind()) ? kInputError : kFail;
  }
  std::string text = rep.str(c.seed, c.workers, c.tol);
  if (c.out.empty()) {
    out << text;
  } else {
    std::ofstream f(c.out, std::ios::binary);
    if (!f) {
      err << "error: cannot write " << c.out << "\n";
      return kInputError;
    }
    f << text;
  }
  return code;
}

}  // namespace fuchsian::cli
