#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

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

const Loaded& bolza() {
  static Loaded B("bolza.cx", "bolza_regular.metric");
  return B;
}

const Loaded& shifted() {
  static Loaded B("bolza.cx", "bolza_shifted.metric");
  return B;
}

const Loaded& chain() {
  static Loaded B("pentagon_chain.cx", "pentagon_chain.metric");
  return B;
}

const double kSystole = 2 * std::acosh(1 + std::sqrt(2.0));

// Cyclically reduced random word in the Bolza generators.
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
  const std::size_t n = w.size();
  for (std::size_t d = 1; d < n; ++d) {
    if (n % d) continue;
    bool periodic = true;
    for (std::size_t i = 0; i < n && periodic; ++i) periodic = w[i] == w[(i + d) % n];
    if (periodic) return true;
  }
  return false;
}

}  // namespace

TEST(GoodPosition, PentagonExamples) {
  // diagonals 0 -> 2 and 1 -> 3 interleave
  EXPECT_TRUE(good_position(5, 0, 2, 1, 3));
  EXPECT_TRUE(good_position(5, 0, 2, 3, 1));
  // entering and leaving through the same pair of sides
  EXPECT_FALSE(good_position(5, 0, 2, 0, 2));
  EXPECT_FALSE(good_position(5, 0, 2, 2, 0));
  // shared exit side
  EXPECT_FALSE(good_position(5, 0, 2, 1, 2));
  // distinct sides that do not alternate
  EXPECT_FALSE(good_position(5, 0, 1, 2, 3));
  EXPECT_FALSE(good_position(8, 0, 4, 5, 7));
  EXPECT_TRUE(good_position(8, 0, 4, 2, 6));
}

TEST(GoodPosition, SymmetricInItsArguments) {
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      for (int c = 0; c < 6; ++c)
        for (int d = 0; d < 6; ++d) {
          bool g = good_position(6, a, b, c, d);
          ASSERT_EQ(g, good_position(6, c, d, a, b));
          ASSERT_EQ(g, good_position(6, b, a, c, d));
          ASSERT_EQ(g, good_position(6, (a + 1) % 6, (b + 1) % 6, (c + 1) % 6, (d + 1) % 6));
        }
}

TEST(Window, ThreeChamberWindowHasWeightFour) {
  const auto& L = chain();
  auto X = testing_support::find_chain_crossing(L.C, L.M, 7);
  ListTrack ta(X.a, 1), tb(X.b, 1);
  auto w = find_good_window(L.C, ta, 0, tb, 0);
  ASSERT_EQ(w.status, WindowStatus::Good);
  ASSERT_EQ(w.window.chambers.size(), 3u);
  EXPECT_EQ(w.window.weight, 4);
  EXPECT_EQ(w.window.shared_edges.size(), 2u);
  for (int e : w.window.shared_edges) EXPECT_EQ(L.C.edges[e].q, 3);
  // the window's middle chamber is where the crossing is
  EXPECT_EQ(w.window.chambers[1], L.C.chamber_index("C2"));
}

TEST(Window, BranchProbabilitiesCancelTheWeight) {
  const auto& L = chain();
  auto X = testing_support::find_chain_crossing(L.C, L.M, 7);
  ListTrack ta(X.a, 1);
  std::mt19937_64 rng(1);
  const int n = 20000;
  int good = 0;
  for (int i = 0; i < n; ++i) {
    FlowTrack fb(L.C, L.M, L.C.chamber_index("C2"), {X.point, X.b_dir}, rng);
    auto r = find_good_window(L.C, ta, 0, fb, 0);
    if (r.status != WindowStatus::Good) continue;
    ++good;
    ASSERT_EQ(r.window.weight, 4);
    ASSERT_EQ(r.branch_product, r.window.weight);
  }
  // b follows a through both q = 3 edges with probability 1/4
  EXPECT_NEAR(static_cast<double>(good) / n, 0.25, 3 * std::sqrt(0.25 * 0.75 / n));
}

TEST(Window, SingleChamberInGoodPosition) {
  const auto& L = chain();
  int c2 = L.C.chamber_index("C2");
  ListTrack a({{c2, 0, 2}}, 0), b({{c2, 1, 3}}, 0);
  auto w = find_good_window(L.C, a, 0, b, 0);
  ASSERT_EQ(w.status, WindowStatus::Good);
  EXPECT_EQ(w.window.chambers.size(), 1u);
  EXPECT_EQ(w.window.weight, 1);
  // parallel passage off the end of a finite track
  ListTrack p({{c2, 0, 2}}, 0), q({{c2, 0, 2}}, 0);
  EXPECT_NE(find_good_window(L.C, p, 0, q, 0).status, WindowStatus::Good);
}

TEST(ClosedPairing, AgreesWithAxisLinkingOracle) {
  const auto& B = bolza();
  oracle::AxisLinking ax;
  std::mt19937_64 rng(9);
  int checked = 0;
  for (int i = 0; checked < 12 && i < 200; ++i) {
    auto a = random_letters(rng, 1 + static_cast<int>(rng() % 5));
    auto b = random_letters(rng, 1 + static_cast<int>(rng() % 6));
    if (is_proper_power(a) || is_proper_power(b)) continue;
    auto A = oracle::bolza_holonomy(a), Bh = oracle::bolza_holonomy(b);
    auto ga = marked_length(B.C, B.M, oracle::bolza_word(a));
    auto gb = marked_length(B.C, B.M, oracle::bolza_word(b));
    if (ga.vertex_passages || gb.vertex_passages || ax.passes_near_vertex(A) || ax.passes_near_vertex(Bh)) continue;
    auto r = intersect_closed_closed(B.C, B.M, ga, gb);
    EXPECT_EQ(r.dropped, 0);
    EXPECT_EQ(r.vertex_crossings, 0);
    for (const auto& x : r.crossings) EXPECT_EQ(x.contribution, 1.0);
    EXPECT_EQ(r.value, static_cast<double>(ax.count(A, Bh)))
        << oracle::bolza_word(a) << "| " << oracle::bolza_word(b);
    EXPECT_EQ(r.value, intersect_closed_closed(B.C, B.M, gb, ga).value);
    ++checked;
  }
  EXPECT_EQ(checked, 12);
}

TEST(ClosedPairing, SystoleExamples) {
  const auto& B = bolza();
  auto s0 = marked_length(B.C, B.M, std::string("e0+"));
  auto s1 = marked_length(B.C, B.M, std::string("e1+"));
  EXPECT_NEAR(s0.length, kSystole, 1e-9);
  // simple closed curve: no transversal self-crossing
  EXPECT_EQ(intersect_closed_closed(B.C, B.M, s0, s0).value, 0.0);
  // the image under the order-8 rotation crosses it once
  auto r = intersect_closed_closed(B.C, B.M, s0, s1);
  EXPECT_EQ(r.value, 1.0);
  ASSERT_EQ(r.crossings.size(), 1u);
  EXPECT_GT(r.crossings[0].angle, 0.0);
  EXPECT_LE(r.crossings[0].angle, pi / 2);
}

TEST(ClosedPairing, ScalesWithPowers) {
  const auto& B = bolza();
  auto b = marked_length(B.C, B.M, std::string("e1+ e2-"));
  for (const std::string w : {"e0+", "e3+ e1+"}) {
    auto a = marked_length(B.C, B.M, w);
    auto a3 = marked_length(B.C, B.M, w + " " + w + " " + w);
    double one = intersect_closed_closed(B.C, B.M, a, b).value;
    EXPECT_EQ(intersect_closed_closed(B.C, B.M, a3, b).value, 3 * one) << w;
  }
}

TEST(ClosedPairing, SameCurveOnBothMetricsHasTheSameCount) {
  // the two octagons carry the same surface and marking
  std::mt19937_64 rng(3);
  for (int i = 0; i < 8; ++i) {
    auto a = random_letters(rng, 2 + i % 3), b = random_letters(rng, 1 + i % 4);
    std::vector<double> v;
    for (const Loaded* L : {&bolza(), &shifted()}) {
      auto ga = marked_length(L->C, L->M, oracle::bolza_word(a));
      auto gb = marked_length(L->C, L->M, oracle::bolza_word(b));
      if (ga.vertex_passages || gb.vertex_passages) break;
      auto r = intersect_closed_closed(L->C, L->M, ga, gb);
      if (r.vertex_crossings || r.dropped) break;
      v.push_back(r.value);
    }
    if (v.size() == 2) EXPECT_EQ(v[0], v[1]) << oracle::bolza_word(a) << "| " << oracle::bolza_word(b);
  }
}

TEST(LiouvilleClosed, SystoleIsTwiceItsLength) {
  const auto& B = bolza();
  LiouvilleSampler S(B.C, B.M);
  auto s0 = marked_length(B.C, B.M, std::string("e0+"));
  auto e = intersect_liouville_closed(S, s0, 20000, 42, 4);
  EXPECT_EQ(e.dropped, 0u);
  EXPECT_NEAR(e.target, 2 * kSystole, 1e-8);
  EXPECT_TRUE(e.within(3.0, 0.02)) << e.value << " +- " << e.stderr_;
  EXPECT_EQ(e.max_weight, 1);
  EXPECT_GT(e.windows, 0u);  // small-angle crossings needed several chambers
}

TEST(LiouvilleClosed, LongerClassOnShiftedMetric) {
  const auto& L = shifted();
  LiouvilleSampler S(L.C, L.M);
  auto b = marked_length(L.C, L.M, std::string("e0+ e1+ e2-"));
  auto e = intersect_liouville_closed(S, b, 20000, 42, 4);
  EXPECT_NEAR(e.target, 2 * b.length, 1e-12);
  EXPECT_TRUE(e.within(3.0, 0.02)) << e.value << " +- " << e.stderr_ << " dropped " << e.dropped;
}

TEST(LiouvilleClosed, SmallSamplesAreUnbiased) {
  const auto& B = bolza();
  LiouvilleSampler S(B.C, B.M);
  auto b = marked_length(B.C, B.M, std::string("e0+ e1+"));
  stats::Accumulator acc;
  for (int rep = 0; rep < 200; ++rep) acc.add(intersect_liouville_closed(S, b, 100, 1000 + rep).value);
  EXPECT_NEAR(acc.mean, 2 * b.length, std::max(3 * acc.stderr_of_mean(), 1e-9 * b.length));
}

TEST(LiouvilleClosed, WallGeodesicIsRejected) {
  const auto& B = bolza();
  LiouvilleSampler S(B.C, B.M);
  ClosedGeodesic g;
  GeodesicPiece p;
  p.chamber = 0;
  p.a = B.M.polygon(0).vertices[0];
  p.b = B.M.polygon(0).vertices[1];
  p.length = distance(p.a, p.b);
  g.pieces = {p};
  g.length = p.length;
  try {
    intersect_liouville_closed(S, g, 10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::WallGeodesic);
  }
}

TEST(LiouvilleLiouville, BothVariantsGiveVolumeOverFourPi) {
  const auto& B = bolza();
  LiouvilleSampler S(B.C, B.M);
  auto R = intersect_liouville_liouville(S, 100000, 42, 4);
  EXPECT_NEAR(R.volume, 4 * pi, 1e-9);
  EXPECT_NEAR(R.direct.target, 1.0, 1e-9);
  EXPECT_TRUE(R.direct.within(3.0, 0.02)) << R.direct.value << " +- " << R.direct.stderr_;
  EXPECT_TRUE(R.windowed.within(3.0, 0.02)) << R.windowed.value << " +- " << R.windowed.stderr_;
  EXPECT_LE(std::abs(R.combined_z), 1.0);
}

TEST(LiouvilleLiouville, StderrShrinksWithSampleSize) {
  const auto& L = shifted();
  LiouvilleSampler S(L.C, L.M);
  auto a = intersect_liouville_liouville(S, 20000, 5, 4);
  auto b = intersect_liouville_liouville(S, 40000, 5, 4);
  EXPECT_NEAR(b.direct.stderr_ / a.direct.stderr_, 1 / std::sqrt(2.0), 0.05);
}

TEST(LiouvilleLiouville, ChamberAreasFromMeanChord) {
  // (1 / 2pi) E[t_v] mu(S'_C) / 2 is the area of C for entries into C
  Loaded D("pentagon_double.cx", "pentagon_double.metric");
  LiouvilleSampler S(D.C, D.M);
  auto rng = block_rng(8, 0, 0);
  std::vector<stats::Accumulator> t(D.C.chambers.size());
  std::vector<double> mass(D.C.chambers.size(), 0);
  for (std::size_t i = 0; i < S.incidences().size(); ++i) {
    const auto& inc = S.incidences()[i];
    mass[inc.chamber] += 2 * D.M.edge_length(S.incidence_edge(static_cast<int>(i)));
  }
  for (int i = 0; i < 200000; ++i) {
    auto v = S.draw(rng);
    try {
      t[v.chamber].add(flow_through_chamber(D.C, D.M, v).segment_length);
    } catch (const Error&) {
    }
  }
  for (std::size_t c = 0; c < D.C.chambers.size(); ++c) {
    double area = polygon_area(D.M.polygon(static_cast<int>(c)));
    EXPECT_NEAR(t[c].mean * mass[c] / (2 * pi), area, 0.01 * area) << "chamber " << c;
  }
}

TEST(Determinism, SameSeedAndWorkersGiveIdenticalEstimates) {
  const auto& B = bolza();
  LiouvilleSampler S(B.C, B.M);
  auto b = marked_length(B.C, B.M, std::string("e0+ e1+ e2-"));
  for (unsigned w : {1u, 3u}) {
    auto x = intersect_liouville_closed(S, b, 3000, 17, w);
    auto y = intersect_liouville_closed(S, b, 3000, 17, w);
    EXPECT_EQ(x.value, y.value);
    EXPECT_EQ(x.stderr_, y.stderr_);
    auto u = intersect_liouville_liouville(S, 3000, 17, w);
    auto v = intersect_liouville_liouville(S, 3000, 17, w);
    EXPECT_EQ(u.direct.value, v.direct.value);
    EXPECT_EQ(u.windowed.value, v.windowed.value);
  }
}

TEST(Continuity, IdenticalMetricsGiveUnitRatios) {
  const auto& B = bolza();
  ContinuityConfig cfg;
  cfg.schedule = {5.0, 10.0};
  cfg.classes = 40;
  cfg.liouville_n = 20000;
  cfg.workers = 4;
  auto R = continuity_experiment(B.C, B.M, B.M, cfg);
  EXPECT_TRUE(R.volumes_equal);
  ASSERT_EQ(R.rows.size(), 2u);
  for (const auto& row : R.rows) {
    EXPECT_NEAR(row.ratio01, 1.0, 1e-9);
    EXPECT_NEAR(row.ratio10, 1.0, 1e-9);
  }
  EXPECT_EQ(R.verdict, "consistent");
}

TEST(Continuity, ShortScheduleIsInconclusive) {
  const auto& B = bolza();
  ContinuityConfig cfg;
  cfg.schedule = {5.0};
  cfg.classes = 10;
  cfg.liouville_n = 2000;
  auto R = continuity_experiment(B.C, B.M, shifted().M, cfg);
  EXPECT_TRUE(R.inconclusive);
  EXPECT_EQ(R.verdict, "inconclusive");
}

TEST(Continuity, DistinctOctagonsAreConsistent) {
  const auto& B = bolza();
  ContinuityConfig cfg;
  cfg.schedule = {5.0, 10.0, 20.0};
  cfg.classes = 60;
  cfg.liouville_n = 40000;
  cfg.workers = 4;
  auto R = continuity_experiment(B.C, B.M, shifted().M, cfg);
  EXPECT_NEAR(R.volume0, 4 * pi, 1e-9);
  EXPECT_NEAR(R.volume1, 4 * pi, 1e-9);
  // same side pairings, so the marked length spectra agree
  for (const auto& row : R.rows) {
    EXPECT_NEAR(row.ratio01, 1.0, 1e-6);
    EXPECT_TRUE(row.mls0_le_mls1);
    EXPECT_TRUE(row.mls1_le_mls0);
  }
  EXPECT_TRUE(R.chain_holds);
  EXPECT_EQ(R.verdict, "consistent");
}

TEST(Pairing, PatchIsRejected) {
  const auto& L = chain();
  LiouvilleSampler S(L.C, L.M);
  EXPECT_THROW(intersect_liouville_liouville(S, 10, 1), Error);
}
