// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "fuchsian/pairing.hpp"
#include "oracles.hpp"
#include "patch_window.hpp"

using namespace fuchsian;
using std::numbers::pi;

namespace {

struct Loaded {
  Complex C;
  MetricAssignment M;
  Loaded(const std::string& cx, const std::string& metric)
      : C(parse_complex(read_text_file(std::string(FUCHSIAN_DATA_DIR) + "/" + cx))),
        M(parse_metric(read_text_file(std::string(FUCHSIAN_DATA_DIR) + "/" + metric), C)) {}
};

const double kSystole = 2 * std::acosh(1 + std::sqrt(2.0));
const unsigned kWorkers = std::max(1u, std::thread::hardware_concurrency());

// Inradius of the normal polygon by bisection on the central angle sum.
double bisection_inradius(const std::vector<double>& angles) {
  auto excess = [&](double r) {
    double s = 0;
    for (double a : angles) s += std::asin(std::min(1.0, std::cos(a / 2) / std::cosh(r)));
    return s - pi;
  };
  double lo = 0, hi = 50;
  for (int i = 0; i < 200; ++i) (excess(0.5 * (lo + hi)) > 0 ? lo : hi) = 0.5 * (lo + hi);
  return 0.5 * (lo + hi);
}

// Side lengths from the oracle inradius: tanh(t) = sinh(r) tan(theta) per half side.
std::vector<double> bisection_sides(const std::vector<double>& angles) {
  double r = bisection_inradius(angles);
  std::vector<double> t;
  for (double a : angles) t.push_back(std::atanh(std::sinh(r) * std::tan(std::asin(std::cos(a / 2) / std::cosh(r)))));
  std::vector<double> s;
  for (std::size_t k = 0; k < t.size(); ++k) s.push_back(t[k] + t[(k + 1) % t.size()]);
  return s;
}

std::vector<HPoint> random_cyclic_polygon(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double radius = 0.2 + 2.5 * U(rng);
  std::vector<double> phi(n);
  for (auto& p : phi) p = 2 * pi * U(rng);
  std::sort(phi.begin(), phi.end());
  std::vector<HPoint> v;
  for (double p : phi) v.push_back(HPoint::polar(radius, p));
  return v;
}

std::vector<std::pair<int, int>> random_letters(std::mt19937_64& rng, int len) {
  std::vector<std::pair<int, int>> w;
  std::uniform_int_distribution<int> J(0, 3), S(0, 1);
  while (static_cast<int>(w.size()) < len) {
    std::pair<int, int> x{J(rng), S(rng) ? 1 : -1};
    if (!w.empty() && w.back().first == x.first && w.back().second == -x.second) continue;
    if (static_cast<int>(w.size()) == len - 1 && len > 1 && w.front().first == x.first &&
        w.front().second == -x.second)
      continue;
    w.push_back(x);
  }
  return w;
}

bool is_proper_power(const std::vector<std::pair<int, int>>& w) {
  for (std::size_t d = 1; d < w.size(); ++d) {
    if (w.size() % d) continue;
    bool periodic = true;
    for (std::size_t i = 0; i < w.size() && periodic; ++i) periodic = w[i] == w[(i + d) % w.size()];
    if (periodic) return true;
  }
  return false;
}

std::vector<int> random_embedded_path(const LinkGraph& G, std::mt19937_64& rng, int len) {
  for (;;) {
    std::vector<int> p{static_cast<int>(rng() % G.num_vertices())};
    std::set<int> used{p[0]};
    while (static_cast<int>(p.size()) <= len) {
      std::vector<int> opts;
      for (auto [v, e] : G.adj[p.back()])
        if (!used.count(v)) opts.push_back(v);
      if (opts.empty()) break;
      p.push_back(opts[rng() % opts.size()]);
      used.insert(p.back());
    }
    if (static_cast<int>(p.size()) == len + 1) return p;
  }
}

// Collects the first failure message of a criterion.
struct Check {
  std::ostringstream why;
  bool ok = true;
  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) why << msg;
    ok = ok && cond;
  }
};

std::string g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool criterion1(Check& c) {
  for (int n = 3; n <= 12; ++n)
    for (double frac : {0.2, 0.5, 0.9}) {
      std::vector<double> a(n, frac * (n - 2) * pi / n);
      double r = *solve_normal_polygon(a).inradius;
      c.expect(std::abs(r - std::acosh(std::cos(a[0] / 2) / std::sin(pi / n))) <= 1e-10, "regular n=" +
                                                                                         std::to_string(n));
    }
  std::vector<double> five(5, pi / 2), eight(8, pi / 4);
  double r5 = *solve_normal_polygon(five).inradius;
  c.expect(std::abs(r5 - bisection_inradius(five)) <= 1e-10 && std::abs(r5 - 0.6268) < 1e-4, "pentagon r=" + g(r5));
  auto O = solve_normal_polygon(eight);
  auto side = bisection_sides(eight);
  for (int k = 0; k < 8; ++k)
    c.expect(std::abs(O.side_lengths[k] - side[k]) <= 1e-10 && std::abs(side[k] - 3.0571) < 5e-5,
             "octagon side=" + g(O.side_lengths[k]));
  return c.ok;
}

bool criterion2(Check& c) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    auto P = make_polygon(random_cyclic_polygon(rng, 3 + i % 8));
    c.expect(std::abs(polygon_area(P) - P.triangulated_area()) <= 1e-9, "area mismatch at polygon " +
                                                                           std::to_string(i));
  }
  Loaded B("bolza.cx", "bolza_regular.metric");
  c.expect(std::abs(total_volume(B.C, B.M) - 4 * pi) <= 1e-9, "Bolza volume " + g(total_volume(B.C, B.M)));
  std::uniform_real_distribution<double> T(0.0, 0.6), Ph(-pi, pi);
  int built = 0;
  while (built < 100) {
    std::vector<HPoint> v;
    for (auto z : oracle::shifted_bolza_corners(T(rng), Ph(rng))) v.push_back(oracle::from_disc(z));
    HyperbolicPolygon poly;
    try {
      poly = make_polygon(v);
    } catch (const Error&) {
      continue;
    }
    ++built;
    auto M = metric_from_polygons(B.C, {poly});
    c.expect(check_large_link(B.C, M, LinkMode::Exactly2Pi).passed, "octagon not admissible");
    c.expect(std::abs(total_volume(B.C, M) - 4 * pi) <= 1e-9, "octagon volume " + g(total_volume(B.C, M)));
  }
  return c.ok;
}

bool criterion3(Check& c) {
  auto K = parse_link_graph(read_text_file(std::string(FUCHSIAN_DATA_DIR) + "/k33.graph"));
  auto H = parse_link_graph(read_text_file(std::string(FUCHSIAN_DATA_DIR) + "/heawood.graph"));
  auto rk = validate_generalized_mgon(K, 2), rh = validate_generalized_mgon(H, 3);
  c.expect(rk.passed && rk.girth == 4 && rk.diameter == 2, "K33 validation");
  c.expect(rh.passed && rh.girth == 6 && rh.diameter == 3, "Heawood validation");
  for (std::size_t e = 0; e < K.num_edges(); ++e)
    c.expect(count_apartments_through_edge(K, e).enumerated == 4, "K33 apartments");
  auto cycles = enumerate_cycles(H, 6);
  c.expect(cycles.size() == 28, "Heawood 6-cycles " + std::to_string(cycles.size()));
  long first = count_apartments_through_edge(H, 0).enumerated;
  c.expect(first == 28 * 6 / 21, "Heawood apartments through edge " + std::to_string(first));
  for (std::size_t e = 1; e < H.num_edges(); ++e)
    c.expect(count_apartments_through_edge(H, e).enumerated == first, "Heawood apartments not uniform");
  std::mt19937_64 rng(2024);
  for (const LinkGraph* G : {&K, &H})
    for (int i = 0; i < 1000; ++i) {
      auto path = random_embedded_path(*G, rng, 1 + static_cast<int>(rng() % (2 * G->m)));
      try {
        auto cyc = extend_interval_to_cycle(*G, path);
        c.expect(is_embedded_cycle(*G, cyc) && cycle_contains_path(cyc, path), "extension is not a containing cycle");
      } catch (const Error& e) {
        c.expect(false, std::string("extension failed: ") + e.what());
      }
    }
  return c.ok;
}

bool criterion4(Check& c) {
  auto H = parse_link_graph(read_text_file(std::string(FUCHSIAN_DATA_DIR) + "/heawood.graph"));
  auto cycles = enumerate_cycles(H, 6);
  LinkGraph W = H;
  W.weights.assign(H.num_edges(), pi / 3);
  auto r = check_equal_angle_rigidity(W, 1e-9, &cycles);
  c.expect(r.all_cycles_equal_2pi && r.all_edges_pi_over_m && r.implication_holds, "equal angles");
  std::mt19937_64 rng(17);
  std::normal_distribution<double> N(0.0, 0.1);
  for (int trial = 0; trial < 10000; ++trial) {
    W.weights.assign(H.num_edges(), pi / 3);
    if (trial % 3 == 0)
      for (auto& w : W.weights) w += N(rng);
    else if (trial % 3 == 1)
      W.weights[rng() % W.weights.size()] += N(rng);
    else {
      int v = static_cast<int>(rng() % H.num_vertices());
      double d = N(rng);
      int sgn = 1;
      for (auto [u, e] : H.adj[v]) W.weights[e] += sgn * d, sgn = -sgn;
    }
    c.expect(check_equal_angle_rigidity(W, 1e-9, &cycles).implication_holds,
             "counterexample at trial " + std::to_string(trial));
  }
  return c.ok;
}

bool criterion5(Check& c) {
  Loaded B("bolza.cx", "bolza_regular.metric");
  c.expect(std::abs(marked_length(B.C, B.M, std::string("e0+")).length - kSystole) <= 1e-8, "systole");
  std::mt19937_64 rng(55);
  int checked = 0;
  for (int i = 0; checked < 25 && i < 1000; ++i) {
    auto w = random_letters(rng, 1 + static_cast<int>(rng() % 6));
    double expected = oracle::bolza_holonomy(w).translation_length();
    if (expected < 1e-6) continue;
    double got = marked_length(B.C, B.M, oracle::bolza_word(w)).length;
    c.expect(std::abs(got - expected) <= 1e-8 * expected, "word " + oracle::bolza_word(w) + " " + g(got) + " vs " +
                                                            g(expected));
    ++checked;
    auto w3 = w;
    for (int k = 0; k < 2; ++k) w3.insert(w3.end(), w.begin(), w.end());
    double l3 = marked_length(B.C, B.M, oracle::bolza_word(w3)).length;
    c.expect(std::abs(l3 - 3 * got) <= 1e-9 * std::max(1.0, l3), "homogeneity " + oracle::bolza_word(w));
  }
  c.expect(checked == 25, "too few words");
  return c.ok;
}

bool criterion6(Check& c) {
  for (auto [cx, metric] : {std::pair{"bolza.cx", "bolza_regular.metric"},
                            std::pair{"pentagon_double.cx", "pentagon_double.metric"}}) {
    Loaded L(cx, metric);
    LiouvilleSampler S(L.C, L.M);
    auto R = verify_stationarity(S, MarkovKernel{}, 100000, 5, 42, kWorkers);
    c.expect(R.passed, std::string(cx) + " chi2_p=" + g(R.chi2_p) + " ks_min_p=" + g(R.ks_min_p));
  }
  return c.ok;
}

bool criterion7(Check& c) {
  Loaded B("bolza.cx", "bolza_regular.metric");
  LiouvilleSampler S(B.C, B.M);
  auto e = intersect_liouville_closed(S, marked_length(B.C, B.M, std::string("e0+")), 1000000, 42, kWorkers);
  c.expect(std::abs(e.target - 2 * 3.0571) < 2e-4, "target " + g(e.target));
  c.expect(e.within(3.0, 0.02), "estimate " + g(e.value) + " +- " + g(e.stderr_));
  c.why << "estimate " << g(e.value) << " target " << g(e.target);
  return c.ok;
}

bool criterion8(Check& c) {
  Loaded B("bolza.cx", "bolza_regular.metric");
  LiouvilleSampler S(B.C, B.M);
  auto R = intersect_liouville_liouville(S, 1000000, 42, kWorkers);
  c.expect(std::abs(R.direct.target - 1.0) <= 1e-9, "target " + g(R.direct.target));
  c.expect(R.direct.within(3.0, 0.02), "direct " + g(R.direct.value) + " +- " + g(R.direct.stderr_));
  c.expect(R.windowed.within(3.0, 0.02), "windowed " + g(R.windowed.value) + " +- " + g(R.windowed.stderr_));
  double comb = std::hypot(R.direct.stderr_, R.windowed.stderr_);
  c.expect(std::abs(R.direct.value - R.windowed.value) <= comb, "variants disagree");
  if (c.ok) c.why << "direct " << g(R.direct.value) << " windowed " << g(R.windowed.value) << " stderr " << g(comb);
  return c.ok;
}

bool criterion9(Check& c) {
  Loaded B("bolza.cx", "bolza_regular.metric");
  oracle::AxisLinking ax;
  std::mt19937_64 rng(99);
  int checked = 0;
  for (int i = 0; checked < 10 && i < 500; ++i) {
    auto a = random_letters(rng, 1 + static_cast<int>(rng() % 5));
    auto b = random_letters(rng, 1 + static_cast<int>(rng() % 5));
    if (is_proper_power(a) || is_proper_power(b)) continue;
    auto A = oracle::bolza_holonomy(a), Bh = oracle::bolza_holonomy(b);
    auto ga = marked_length(B.C, B.M, oracle::bolza_word(a));
    auto gb = marked_length(B.C, B.M, oracle::bolza_word(b));
    if (ga.vertex_passages || gb.vertex_passages || ax.passes_near_vertex(A) || ax.passes_near_vertex(Bh)) continue;
    auto r = intersect_closed_closed(B.C, B.M, ga, gb);
    long want = ax.count(A, Bh);
    c.expect(r.value == static_cast<double>(want) && r.dropped == 0,
             oracle::bolza_word(a) + "| " + oracle::bolza_word(b) + ": " + g(r.value) + " vs " + std::to_string(want));
    for (const auto& x : r.crossings) c.expect(x.window.weight == 1, "weight not 1");
    ++checked;
  }
  c.expect(checked == 10, "too few pairs");
  return c.ok;
}

bool criterion10(Check& c) {
  Loaded L("pentagon_chain.cx", "pentagon_chain.metric");
  auto X = testing_support::find_chain_crossing(L.C, L.M, 7);
  ListTrack ta(X.a, 1), tb(X.b, 1);
  auto w = find_good_window(L.C, ta, 0, tb, 0);
  c.expect(w.status == WindowStatus::Good && w.window.chambers.size() == 3 && w.window.weight == 4,
           "constructed window weight " + std::to_string(w.window.weight));
  std::mt19937_64 rng(1);
  long good = 0;
  for (int i = 0; i < 100000; ++i) {
    FlowTrack fb(L.C, L.M, L.C.chamber_index("C2"), {X.point, X.b_dir}, rng);
    auto r = find_good_window(L.C, ta, 0, fb, 0);
    if (r.status != WindowStatus::Good) continue;
    ++good;
    // weight times the branch probabilities 1/(q-1) along the window
    c.expect(static_cast<double>(r.window.weight) / static_cast<double>(r.branch_product) == 1.0,
             "cancellation fails at path " + std::to_string(i));
  }
  c.expect(good > 0, "no good windows sampled");
  if (c.ok) c.why << good << " good windows of 100000 paths";
  return c.ok;
}

bool criterion11(Check& c) {
  Loaded B("bolza.cx", "bolza_regular.metric");
  Loaded S("bolza.cx", "bolza_shifted.metric");
  ContinuityConfig cfg;
  cfg.schedule = {10.0, 20.0, 40.0};
  cfg.classes = 100;
  cfg.liouville_n = 100000;
  cfg.seed = 42;
  cfg.workers = kWorkers;
  auto R = continuity_experiment(B.C, B.M, S.M, cfg);
  c.expect(std::abs(R.volume0 - 4 * pi) <= 1e-9 && std::abs(R.volume1 - 4 * pi) <= 1e-9,
           "volumes " + g(R.volume0) + " " + g(R.volume1));
  c.expect(R.volumes_equal, "volumes differ");
  c.expect(R.chain_holds && R.verdict == "consistent", "verdict " + R.verdict);
  const auto& last = R.rows.back();
  double i00 = R.self0.direct.value, i11 = R.self1.direct.value;
  auto close = [](double x, double sx, double y, double sy) { return std::abs(x - y) <= 3 * std::hypot(sx, sy); };
  c.expect(close(i00, R.self0.direct.stderr_, last.i01, last.i01_stderr), "i00 vs i01");
  c.expect(close(last.i01, last.i01_stderr, i11, R.self1.direct.stderr_), "i01 vs i11");
  if (c.ok) c.why << "i00 " << g(i00) << " i01 " << g(last.i01) << " i11 " << g(i11);
  return c.ok;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<bool(Check&)>>> criteria{
      {"normal polygon solver", criterion1},      {"Gauss-Bonnet and constant volume", criterion2},
      {"m-gon suite and link lemma", criterion3}, {"equal-angle rigidity", criterion4},
      {"marked length oracle", criterion5},       {"stationarity", criterion6},
      {"length identity", criterion7},            {"volume identity", criterion8},
      {"surface oracle equivalence", criterion9}, {"thick-patch weights", criterion10},
      {"continuity chain", criterion11}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    auto t0 = std::chrono::steady_clock::now();
    bool ok;
    try {
      ok = criteria[i].second(c);
    } catch (const std::exception& e) {
      ok = false;
      c.why << "exception: " << e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2zu %s (%.2f s) %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first, secs, c.why.str().c_str());
    std::fflush(stdout);
    failed += !ok;
  }
  return failed ? 1 : 0;
}
