#pragma once

// Windows, weights and the adjusted intersection number in its closed x
// closed, Liouville x closed and Liouville x Liouville forms, plus the
// two-metric continuity experiment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fuchsian/complex.hpp"
#include "fuchsian/config.hpp"
#include "fuchsian/errors.hpp"
#include "fuchsian/geodesic.hpp"
#include "fuchsian/liouville.hpp"
#include "fuchsian/parallel.hpp"
#include "fuchsian/stats.hpp"

namespace fuchsian {

/// One chamber passage of a geodesic.
struct Visit {
  int chamber = -1;
  int entry_side = -1;
  int exit_side = -1;
};

/// Bi-infinite (or truncated) chamber sequence of a geodesic. at(i) is empty
/// where the geodesic leaves a patch.
class Track {
 public:
  virtual ~Track() = default;
  virtual std::optional<Visit> at(long i) = 0;
  /// |F| offered by the transition between visits i and i+1 (1 if forced).
  virtual std::size_t branches(long) { return 1; }
};

/// Periodic track of a closed geodesic.
class ClosedTrack : public Track {
 public:
  explicit ClosedTrack(const ClosedGeodesic& g) {
    for (const auto& p : g.pieces) visits_.push_back({p.chamber, p.entry_side, p.exit_side});
  }
  std::optional<Visit> at(long i) override {
    long n = static_cast<long>(visits_.size());
    return visits_[static_cast<std::size_t>(((i % n) + n) % n)];
  }

 private:
  std::vector<Visit> visits_;
};

/// Finite track given visit by visit; visit `origin` has index 0.
class ListTrack : public Track {
 public:
  ListTrack(std::vector<Visit> visits, long origin, std::vector<std::size_t> branches = {})
      : visits_(std::move(visits)), branches_(std::move(branches)), origin_(origin) {}
  std::optional<Visit> at(long i) override {
    long k = i + origin_;
    if (k < 0 || k >= static_cast<long>(visits_.size())) return std::nullopt;
    return visits_[static_cast<std::size_t>(k)];
  }
  std::size_t branches(long i) override {
    long k = i + origin_;
    if (k < 0 || k >= static_cast<long>(branches_.size())) return 1;
    return branches_[static_cast<std::size_t>(k)];
  }

 private:
  std::vector<Visit> visits_;
  std::vector<std::size_t> branches_;
  long origin_;
};

/// Track of the geodesic through an interior point, extended lazily in both
/// directions with uniform branch choices.
class FlowTrack : public Track {
 public:
  FlowTrack(const Complex& C, const MetricAssignment& M, int chamber, const HDirection& d, std::mt19937_64& rng,
            const Tolerances& tol = default_tolerances())
      : C_(C), M_(M), rng_(rng), tol_(tol) {
    ChamberExit fwd = exit_chamber(C, M, chamber, d, -1, tol);
    ChamberExit bwd = exit_chamber(C, M, chamber, {d.base, -d.v}, -1, tol);
    fwd_.push_back({chamber, bwd.side, fwd.side});
    fwd_head_ = {chamber, fwd};
    bwd_head_ = {chamber, bwd};
  }

  std::optional<Visit> at(long i) override {
    if (i >= 0) {
      while (static_cast<long>(fwd_.size()) <= i) {
        if (!extend(fwd_head_, fwd_branches_)) return std::nullopt;
        const Visit& v = last_;
        fwd_.push_back(v);
      }
      return fwd_[static_cast<std::size_t>(i)];
    }
    long k = -i;  // visits -1, -2, ... stored reversed
    while (static_cast<long>(bwd_.size()) < k) {
      if (!extend(bwd_head_, bwd_branches_)) return std::nullopt;
      bwd_.push_back({last_.chamber, last_.exit_side, last_.entry_side});
    }
    return bwd_[static_cast<std::size_t>(k - 1)];
  }

  std::size_t branches(long i) override {
    if (i >= 0) return static_cast<std::size_t>(i) < fwd_branches_.size() ? fwd_branches_[i] : 1;
    long k = -i - 1;  // transition between -k-1 and -k
    return static_cast<std::size_t>(k) < bwd_branches_.size() ? bwd_branches_[k] : 1;
  }

 private:
  struct Head {
    int chamber = -1;
    ChamberExit exit;
  };

  bool extend(Head& h, std::vector<std::size_t>& br) {
    int edge = C_.chambers[h.chamber].sides[h.exit.side].edge;
    std::vector<Incidence> F;
    for (const auto& inc : C_.edges[edge].incidences)
      if (!(inc.chamber == h.chamber && inc.side == h.exit.side)) F.push_back(inc);
    if (F.empty()) return false;
    const Incidence& next = F[std::uniform_int_distribution<std::size_t>(0, F.size() - 1)(rng_)];
    br.push_back(F.size());
    EdgeVector v{edge, h.exit.position, next.chamber, next.side, h.exit.angle};
    ChamberExit ex = exit_chamber(C_, M_, v.chamber, direction_of(M_, v), v.side, tol_);
    last_ = {v.chamber, v.side, ex.side};
    h = {v.chamber, ex};
    return true;
  }

  const Complex& C_;
  const MetricAssignment& M_;
  std::mt19937_64& rng_;
  Tolerances tol_;
  std::vector<Visit> fwd_, bwd_;
  std::vector<std::size_t> fwd_branches_, bwd_branches_;
  Head fwd_head_, bwd_head_;
  Visit last_;
};

struct Window {
  std::vector<int> chambers;        // C_1 .. C_k along the first track
  std::vector<int> shared_edges;    // e_1 .. e_{k-1}
  std::int64_t weight = 1;          // product of q(e_i) - 1
};

enum class WindowStatus { Good, Diverged, NotAlternating, CapExceeded, OpenEnd };

inline std::string to_string(WindowStatus s) {
  switch (s) {
    case WindowStatus::Good: return "good";
    case WindowStatus::Diverged: return "diverged";
    case WindowStatus::NotAlternating: return "not-alternating";
    case WindowStatus::CapExceeded: return "cap-exceeded";
    case WindowStatus::OpenEnd: return "open-end";
  }
  return "?";
}

struct WindowResult {
  WindowStatus status = WindowStatus::Good;
  Window window;
  std::int64_t branch_product = 1;  // product of |F| over b's transitions inside the window
};

/// Sides a_in, a_out, b_in, b_out of one chamber: distinct and alternating.
inline bool good_position(std::size_t n, int a_in, int a_out, int b_in, int b_out) {
  if (a_in == a_out || b_in == b_out || a_in == b_in || a_in == b_out || a_out == b_in || a_out == b_out)
    return false;
  auto between = [n](int x, int from, int to) {  // strictly inside the ccw arc from -> to
    int nn = static_cast<int>(n);
    int dx = ((x - from) % nn + nn) % nn, dt = ((to - from) % nn + nn) % nn;
    return dx > 0 && dx < dt;
  };
  return between(b_in, a_in, a_out) != between(b_out, a_in, a_out);
}

namespace detail {

/// Boundary edges of a gallery window in cyclic order, as (position, side).
inline std::vector<std::pair<int, int>> window_boundary(const Complex& C, const std::vector<Visit>& W) {
  std::vector<std::pair<int, int>> out;
  const int k = static_cast<int>(W.size());
  std::function<void(int, int, int)> walk = [&](int j, int en, int sigma) {
    int n = static_cast<int>(C.chambers[W[j].chamber].size());
    for (int t = 1; t < n; ++t) {
      int side = ((en + sigma * t) % n + n) % n;
      if (j + 1 < k && side == W[j].exit_side) {
        const Side& a = C.chambers[W[j].chamber].sides[side];
        const Side& b = C.chambers[W[j + 1].chamber].sides[W[j + 1].entry_side];
        walk(j + 1, W[j + 1].entry_side, a.orient == b.orient ? -sigma : sigma);
      } else {
        out.push_back({j, side});
      }
    }
  };
  int n0 = static_cast<int>(C.chambers[W[0].chamber].size());
  if (k == 1) {
    for (int s = 0; s < n0; ++s) out.push_back({0, s});
    return out;
  }
  // Start just after the shared side, so the recursion covers the rest.
  const Side& a = C.chambers[W[0].chamber].sides[W[0].exit_side];
  const Side& b = C.chambers[W[1].chamber].sides[W[1].entry_side];
  walk(1, W[1].entry_side, a.orient == b.orient ? -1 : 1);
  for (int t = 1; t < n0; ++t) out.push_back({0, (W[0].exit_side + t) % n0});
  return out;
}

}  // namespace detail

/// Minimal good window around a crossing of track a (visit ia) with track b
/// (visit ib) in the same chamber, grown along the common chamber sequence.
inline WindowResult find_good_window(const Complex& C, Track& a, long ia, Track& b, long ib,
                                     const Tolerances& tol = default_tolerances()) {
  WindowResult R;
  auto va0 = a.at(ia);
  auto vb0 = b.at(ib);
  if (!va0 || !vb0 || va0->chamber != vb0->chamber)
    throw Error(ErrorKind::InvalidArgument, "tracks do not share the crossing chamber");
  int dir = 0;
  if (va0->entry_side == vb0->entry_side || va0->exit_side == vb0->exit_side) dir = 1;
  else if (va0->entry_side == vb0->exit_side || va0->exit_side == vb0->entry_side) dir = -1;
  long lo = 0, hi = 0;

  auto A = [&](long p) { return a.at(ia + p); };
  auto B = [&](long p) { return b.at(ib + dir * p); };

  for (;;) {
    auto alo = A(lo), ahi = A(hi);
    if (!alo || !ahi) {
      R.status = WindowStatus::OpenEnd;
      return R;
    }
    if (dir == 0) {
      // single chamber, no shared sides
      if (!good_position(C.chambers[alo->chamber].size(), alo->entry_side, alo->exit_side, vb0->entry_side,
                         vb0->exit_side))
        R.status = WindowStatus::NotAlternating;
      R.window.chambers = {alo->chamber};
      return R;
    }
    auto blo = B(lo), bhi = B(hi);
    if (!blo || !bhi) {
      R.status = WindowStatus::OpenEnd;
      return R;
    }
    int b_low_side = dir > 0 ? blo->entry_side : blo->exit_side;
    int b_high_side = dir > 0 ? bhi->exit_side : bhi->entry_side;
    bool low = alo->entry_side == b_low_side;
    bool high = ahi->exit_side == b_high_side;
    if (!low && !high) break;
    if (static_cast<std::size_t>(hi - lo + 1) >= tol.window_cap) {
      R.status = WindowStatus::CapExceeded;
      return R;
    }
    auto extend = [&](long from, long to) -> bool {  // adds position `to`, adjacent to `from`
      auto an = A(to), bn = B(to);
      if (!an || !bn) {
        R.status = WindowStatus::OpenEnd;
        return false;
      }
      bool forward = to > from;
      int a_side = forward ? an->entry_side : an->exit_side;
      int b_side = (forward == (dir > 0)) ? bn->entry_side : bn->exit_side;
      if (an->chamber != bn->chamber || a_side != b_side) {
        R.status = WindowStatus::Diverged;
        return false;
      }
      auto cur = A(from);
      int shared = C.chambers[cur->chamber].sides[forward ? cur->exit_side : cur->entry_side].edge;
      R.window.weight *= C.edges[shared].q - 1;
      // b's transition between its visits at positions from and to
      long bi = ib + dir * std::min(from, to);
      long bj = ib + dir * std::max(from, to);
      R.branch_product *= static_cast<std::int64_t>(b.branches(std::min(bi, bj)));
      return true;
    };
    if (low) {
      if (!extend(lo, lo - 1)) return R;
      --lo;
    }
    if (high) {
      if (!extend(hi, hi + 1)) return R;
      ++hi;
    }
  }
  std::vector<Visit> W;
  for (long p = lo; p <= hi; ++p) W.push_back(*A(p));
  for (std::size_t j = 0; j < W.size(); ++j) {
    R.window.chambers.push_back(W[j].chamber);
    if (j + 1 < W.size()) R.window.shared_edges.push_back(C.chambers[W[j].chamber].sides[W[j].exit_side].edge);
  }
  auto bnd = detail::window_boundary(C, W);
  auto pos = [&](std::pair<int, int> e) {
    auto it = std::find(bnd.begin(), bnd.end(), e);
    return it == bnd.end() ? -1 : static_cast<int>(it - bnd.begin());
  };
  const int last = static_cast<int>(W.size()) - 1;
  auto blo = B(lo), bhi = B(hi);
  int pa_in = pos({0, W.front().entry_side});
  int pa_out = pos({last, W.back().exit_side});
  int pb_low = pos({0, dir > 0 ? blo->entry_side : blo->exit_side});
  int pb_high = pos({last, dir > 0 ? bhi->exit_side : bhi->entry_side});
  if (pa_in < 0 || pa_out < 0 || pb_low < 0 || pb_high < 0 ||
      !good_position(bnd.size(), pa_in, pa_out, pb_low, pb_high))
    R.status = WindowStatus::NotAlternating;
  return R;
}

// ---------------------------------------------------------------------------
// Closed x closed.

struct CrossingRecord {
  int chamber = -1;
  HPoint point;
  double angle = 0.0;            // in (0, pi/2]
  std::size_t piece_a = 0, piece_b = 0;
  bool at_vertex = false;
  WindowStatus status = WindowStatus::Good;
  Window window;
  double contribution = 0.0;     // the window weight, or 0
};

struct ClosedPairing {
  double value = 0.0;
  std::vector<CrossingRecord> crossings;
  int vertex_crossings = 0;
  int dropped = 0;               // crossings without a good window
};

namespace detail {

/// Arc parameter of point x along the geodesic through p with unit tangent u.
inline double arc_param(const HPoint& p, const Vec3& u, const HPoint& x) { return std::asinh(mdot(x.x, u)); }

}  // namespace detail

inline ClosedPairing intersect_closed_closed(const Complex& C, const MetricAssignment& M, const ClosedGeodesic& alpha,
                                             const ClosedGeodesic& beta, const Tolerances& tol = default_tolerances()) {
  ClosedPairing R;
  ClosedTrack ta(alpha), tb(beta);
  const double eps = 1e-12;
  for (std::size_t i = 0; i < alpha.pieces.size(); ++i) {
    const auto& pa = alpha.pieces[i];
    if (pa.length < tol.geometric) continue;
    Vec3 ua = unit_tangent(pa.a, pa.b);
    Vec3 na = mcross(pa.a.x, pa.b.x);
    for (std::size_t j = 0; j < beta.pieces.size(); ++j) {
      const auto& pb = beta.pieces[j];
      if (pb.chamber != pa.chamber || pb.length < tol.geometric) continue;
      if (&alpha == &beta && i == j) continue;
      Vec3 nb = mcross(pb.a.x, pb.b.x);
      auto X = line_intersection(na, nb);
      if (!X) continue;
      Vec3 ub = unit_tangent(pb.a, pb.b);
      double sa = detail::arc_param(pa.a, ua, *X), sb = detail::arc_param(pb.a, ub, *X);
      if (sa < -eps || sa >= pa.length - eps) continue;
      if (sb < -eps || sb > pb.length + eps) continue;
      Vec3 ta_x = transport_along(pa.a, ua, sa), tb_x = transport_along(pb.a, ub, sb);
      double c = std::abs(mdot(ta_x, tb_x));
      if (c > 1.0 - 1e-15) continue;  // same geodesic
      CrossingRecord rec;
      rec.chamber = pa.chamber;
      rec.point = *X;
      rec.angle = std::acos(std::min(1.0, c));
      rec.piece_a = i;
      rec.piece_b = j;
      for (const auto& V : M.polygon(pa.chamber).vertices)
        if (distance(V, *X) < tol.vertex_hit) rec.at_vertex = true;
      if (rec.at_vertex) {
        ++R.vertex_crossings;
      } else {
        auto w = find_good_window(C, ta, static_cast<long>(i), tb, static_cast<long>(j), tol);
        rec.status = w.status;
        rec.window = w.window;
        if (w.status == WindowStatus::Good) rec.contribution = static_cast<double>(w.window.weight);
        else ++R.dropped;
      }
      R.value += rec.contribution;
      R.crossings.push_back(rec);
    }
  }
  return R;
}

// ---------------------------------------------------------------------------
// Monte Carlo estimators.

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  double target = 0.0;
  std::size_t n = 0;
  std::size_t resampled = 0;   // draws redrawn after a vertex hit or graze
  std::size_t dropped = 0;     // samples whose crossing had no good window
  std::size_t windows = 0;     // realized good windows with k > 1
  std::int64_t max_weight = 1;
  bool within(double sigmas, double rel) const {
    double d = std::abs(value - target);
    double s = std::max(stderr_, 1e-12 * std::abs(target));
    return d <= sigmas * s && d <= rel * std::abs(target);
  }
};

namespace detail {

struct EstBlock {
  stats::Accumulator acc;
  std::size_t resampled = 0, dropped = 0, windows = 0;
  std::int64_t max_weight = 1;
};

inline Estimate reduce(const std::vector<EstBlock>& blocks, double scale, double target, std::size_t n) {
  stats::Accumulator acc;
  Estimate E;
  for (const auto& b : blocks) {
    acc.merge(b.acc);
    E.resampled += b.resampled;
    E.dropped += b.dropped;
    E.windows += b.windows;
    E.max_weight = std::max(E.max_weight, b.max_weight);
  }
  E.value = scale * acc.mean;
  E.stderr_ = scale * acc.stderr_of_mean();
  E.target = target;
  E.n = n;
  return E;
}

/// A crossing direction at angle theta from the left normal of u, with theta
/// cos-distributed and kept off tangency by the angle floor.
inline Vec3 cos_weighted_direction(const HPoint& p, const Vec3& u, std::mt19937_64& rng, const Tolerances& tol) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (;;) {
    double th = std::asin(2.0 * U(rng) - 1.0);
    if (std::abs(th) > std::numbers::pi / 2 - tol.crossing_angle_floor) continue;
    Vec3 n = left_normal(p, u);
    return std::cos(th) * n + std::sin(th) * u;
  }
}

inline bool is_vertex_kind(const Error& e) {
  return e.kind() == ErrorKind::VertexHit || e.kind() == ErrorKind::Tangent;
}

}  // namespace detail

/// Throws WallGeodesic when some piece of beta runs along a chamber side.
inline void require_transverse_to_walls(const MetricAssignment& M, const ClosedGeodesic& beta,
                                        const Tolerances& tol = default_tolerances()) {
  for (const auto& p : beta.pieces) {
    if (p.length < tol.geometric) continue;
    const auto& P = M.polygon(p.chamber);
    for (std::size_t k = 0; k < P.size(); ++k) {
      Vec3 n = P.side(k).normal;
      double nn = std::sqrt(mdot(n, n));
      if (std::abs(mdot(n, p.a.x)) / nn < tol.geometric && std::abs(mdot(n, p.b.x)) / nn < tol.geometric)
        throw Error(ErrorKind::WallGeodesic, "closed geodesic runs along a wall");
    }
  }
}

/// i(L, beta) by launching Liouville geodesics through beta: p uniform on
/// beta, theta cos-weighted; each sample contributes 2 len(beta) times the
/// minimal-window weight when the launched geodesic follows beta through it.
inline Estimate intersect_liouville_closed(const LiouvilleSampler& S, const ClosedGeodesic& beta, std::size_t n,
                                           std::uint64_t seed, unsigned workers = 1) {
  const Complex& C = S.complex();
  const MetricAssignment& M = S.metric();
  const Tolerances& tol = S.tolerances();
  if (C.mode != Mode::Closed) throw Error(ErrorKind::InvalidArgument, "pairing needs a closed complex");
  require_transverse_to_walls(M, beta, tol);
  const double len = beta.length;
  std::vector<double> cum;
  double acc = 0;
  for (const auto& p : beta.pieces) cum.push_back(acc += p.length);
  auto blocks = parallel_blocks<detail::EstBlock>(n, workers, [&](std::size_t b, std::size_t, std::size_t cnt) {
    auto rng = block_rng(seed, 11, b);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    detail::EstBlock out;
    ClosedTrack tb(beta);
    for (std::size_t i = 0; i < cnt; ++i) {
      for (;;) {
        double s = U(rng) * len;
        std::size_t j = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), s) - cum.begin());
        if (j >= beta.pieces.size()) continue;
        const auto& pc = beta.pieces[j];
        double off = s - (cum[j] - pc.length);
        if (off < tol.sample_margin || off > pc.length - tol.sample_margin) continue;
        Vec3 u = unit_tangent(pc.a, pc.b);
        HPoint p = exp_map(pc.a, u, off);
        Vec3 up = transport_along(pc.a, u, off);
        Vec3 w = detail::cos_weighted_direction(p, up, rng, tol);
        try {
          FlowTrack tg(C, M, pc.chamber, {p, w}, rng, tol);
          auto win = find_good_window(C, tb, static_cast<long>(j), tg, 0, tol);
          double contrib = 0;
          if (win.status == WindowStatus::Good) {
            if (win.branch_product != win.window.weight)
              throw Error(ErrorKind::InvalidArgument, "window weight does not cancel the branch probabilities");
            contrib = 2.0 * len * static_cast<double>(win.window.weight);
            if (win.window.chambers.size() > 1) ++out.windows;
            out.max_weight = std::max(out.max_weight, win.window.weight);
          } else {
            ++out.dropped;
          }
          out.acc.add(contrib);
        } catch (const Error& e) {
          if (!detail::is_vertex_kind(e)) throw;
          ++out.resampled;
          continue;
        }
        break;
      }
    }
    return out;
  });
  return detail::reduce(blocks, 1.0, 2.0 * len, n);
}

struct VolumePairing {
  Estimate direct;      // from E_mu[t_v]
  Estimate windowed;    // crossings of mu-segments with cos-weighted transversals
  double volume = 0.0;  // total_volume of the metric
  double difference_stderr = 0.0;  // stderr of the paired per-sample difference
  double combined_z = 0.0;         // (direct - windowed) / hypot of the two stderrs
};

/// i(L, L) = Vol / 4 pi, estimated through Vol = mu(S') E_mu[t] / 2 pi. Both
/// variants use the same mu-draws; the windowed one replaces t by t times the
/// window weight of a transversal crossing at a uniform point of the segment.
inline VolumePairing intersect_liouville_liouville(const LiouvilleSampler& S, std::size_t n, std::uint64_t seed,
                                                   unsigned workers = 1) {
  const Complex& C = S.complex();
  const MetricAssignment& M = S.metric();
  const Tolerances& tol = S.tolerances();
  if (C.mode != Mode::Closed) throw Error(ErrorKind::InvalidArgument, "pairing needs a closed complex");
  const double scale = S.total_mass() / (2 * std::numbers::pi) / (4 * std::numbers::pi);
  VolumePairing R;
  R.volume = total_volume(C, M, tol);
  const double target = R.volume / (4 * std::numbers::pi);
  struct Pair {
    detail::EstBlock direct, windowed;
    stats::Accumulator diff;
  };
  auto blocks = parallel_blocks<Pair>(n, workers, [&](std::size_t b, std::size_t, std::size_t cnt) {
    auto rng = block_rng(seed, 21, b);
    auto extra = block_rng(seed, 22, b);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Pair out;
    for (std::size_t i = 0; i < cnt; ++i) {
      EdgeVector v;
      FlowStep st;
      for (;;) {
        v = S.draw(rng);
        try {
          st = flow_through_chamber(C, M, v, tol);
        } catch (const Error& e) {
          if (!detail::is_vertex_kind(e)) throw;
          ++out.direct.resampled;
          continue;
        }
        break;
      }
      const double t = st.segment_length;
      out.direct.acc.add(t);
      HDirection d = direction_of(M, v);
      double contrib = 0;
      for (;;) {
        double off = U(extra) * t;
        if (off < tol.sample_margin || off > t - tol.sample_margin) continue;
        HPoint p = exp_map(d.base, d.v, off);
        Vec3 up = transport_along(d.base, d.v, off);
        Vec3 w = detail::cos_weighted_direction(p, up, extra, tol);
        try {
          FlowTrack tg(C, M, v.chamber, {p, up}, extra, tol);
          FlowTrack te(C, M, v.chamber, {p, w}, extra, tol);
          auto win = find_good_window(C, tg, 0, te, 0, tol);
          if (win.status == WindowStatus::Good) {
            contrib = t * static_cast<double>(win.window.weight);
            if (win.window.chambers.size() > 1) ++out.windowed.windows;
            out.windowed.max_weight = std::max(out.windowed.max_weight, win.window.weight);
          } else {
            ++out.windowed.dropped;
          }
        } catch (const Error& e) {
          if (!detail::is_vertex_kind(e)) throw;
          ++out.windowed.resampled;
          continue;
        }
        break;
      }
      out.windowed.acc.add(contrib);
      out.diff.add(t - contrib);
    }
    return out;
  });
  std::vector<detail::EstBlock> db, wb;
  stats::Accumulator diff;
  for (auto& b : blocks) {
    db.push_back(b.direct);
    wb.push_back(b.windowed);
    diff.merge(b.diff);
  }
  R.direct = detail::reduce(db, scale, target, n);
  R.windowed = detail::reduce(wb, scale, target, n);
  R.difference_stderr = scale * diff.stderr_of_mean();
  double se = std::hypot(R.direct.stderr_, R.windowed.stderr_);
  R.combined_z = se > 0 ? (R.direct.value - R.windowed.value) / se : 0.0;
  return R;
}

// ---------------------------------------------------------------------------
// Continuity experiment across two metrics on one complex.

/// Closes the crossing sequence of a sampled trajectory at its last return
/// to the starting chamber.
inline std::vector<Crossing> close_trajectory(const Complex& C, const MetricAssignment& M, const SymbolicWord& w,
                                              const Tolerances& tol = default_tolerances()) {
  std::vector<Crossing> g;
  const int c0 = w.vectors.front().chamber;
  std::size_t last = 0;
  for (std::size_t i = 0; i + 1 < w.vectors.size(); ++i) {
    const EdgeVector& a = w.vectors[i];
    const EdgeVector& b = w.vectors[i + 1];
    int exit_side = flow_through_chamber(C, M, a, tol).out_side;
    g.push_back({{a.chamber, exit_side}, {b.chamber, b.side}});
    if (b.chamber == c0) last = g.size();
  }
  g.resize(last);
  return g;
}

struct ContinuityRow {
  double time = 0.0;
  std::size_t classes = 0;      // sampled classes used per metric
  std::size_t degenerate = 0;
  double ratio01 = 0.0, ratio01_stderr = 0.0;  // mean len_1 / len_0 over L_0 classes
  double ratio10 = 0.0, ratio10_stderr = 0.0;  // mean len_0 / len_1 over L_1 classes
  double i01 = 0.0, i01_stderr = 0.0;
  double i10 = 0.0, i10_stderr = 0.0;
  bool mls0_le_mls1 = true;
  bool mls1_le_mls0 = true;
};

struct ContinuityReport {
  double volume0 = 0.0, volume1 = 0.0;
  VolumePairing self0, self1;
  std::vector<ContinuityRow> rows;
  bool inconclusive = false;
  bool volumes_equal = false;
  bool chain_holds = false;   // i00 <= i01 <= i11 up to 3 sigma, from the last row
  bool mls0_le_mls1 = true;
  std::string verdict;
};

struct ContinuityConfig {
  std::vector<double> schedule{10.0, 20.0, 40.0};
  std::size_t classes = 200;
  std::size_t liouville_n = 200000;
  std::uint64_t seed = 42;
  unsigned workers = 1;
};

namespace detail {

struct RatioBlock {
  stats::Accumulator ratio;
  std::size_t degenerate = 0;
  bool le = true;
};

inline RatioBlock length_ratios(const LiouvilleSampler& S, const MetricAssignment& other, double T,
                                std::size_t classes, std::uint64_t seed, std::uint64_t stream, unsigned workers,
                                double* stderr_out, double* mean_out, std::size_t* degenerate) {
  const Complex& C = S.complex();
  auto blocks = parallel_blocks<RatioBlock>(classes, workers, [&](std::size_t b, std::size_t, std::size_t cnt) {
    auto rng = block_rng(seed, stream, b);
    RatioBlock out;
    for (std::size_t i = 0; i < cnt; ++i) {
      for (;;) {
        EdgeVector v = S.draw(rng);
        LiouvilleTrajectory tr;
        try {
          tr = flow_for_time(S, v, T, rng);
        } catch (const Error& e) {
          if (!is_vertex_kind(e)) throw;
          continue;
        }
        auto g = close_trajectory(C, S.metric(), tr.word, S.tolerances());
        try {
          double l0 = marked_length(C, S.metric(), g, S.tolerances()).length;
          double l1 = marked_length(C, other, g, S.tolerances()).length;
          out.ratio.add(l1 / l0);
          if (l0 > l1 * (1 + 1e-9)) out.le = false;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::DegenerateClass) throw;
          ++out.degenerate;
          continue;
        }
        break;
      }
    }
    return out;
  });
  RatioBlock all;
  for (const auto& b : blocks) {
    all.ratio.merge(b.ratio);
    all.degenerate += b.degenerate;
    all.le = all.le && b.le;
  }
  *mean_out = all.ratio.mean;
  *stderr_out = all.ratio.stderr_of_mean();
  *degenerate = all.degenerate;
  return all;
}

}  // namespace detail

/// Closed geodesics from long L_0 (resp. L_1) trajectories approximate the
/// Liouville current, so i(L_0, L_1) ~ i(L_0, L_0) * E[len_1 / len_0].
inline ContinuityReport continuity_experiment(const Complex& C, const MetricAssignment& M0,
                                              const MetricAssignment& M1, const ContinuityConfig& cfg,
                                              const Tolerances& tol = default_tolerances()) {
  if (C.mode != Mode::Closed) throw Error(ErrorKind::InvalidArgument, "continuity experiment needs a closed complex");
  ContinuityReport R;
  LiouvilleSampler S0(C, M0, tol), S1(C, M1, tol);
  R.volume0 = total_volume(C, M0, tol);
  R.volume1 = total_volume(C, M1, tol);
  R.volumes_equal = std::abs(R.volume0 - R.volume1) <= 1e-9 * std::max(1.0, R.volume0);
  R.self0 = intersect_liouville_liouville(S0, cfg.liouville_n, cfg.seed, cfg.workers);
  R.self1 = intersect_liouville_liouville(S1, cfg.liouville_n, cfg.seed ^ 0x5DEECE66DULL, cfg.workers);
  const double i00 = R.self0.direct.value, s00 = R.self0.direct.stderr_;
  const double i11 = R.self1.direct.value, s11 = R.self1.direct.stderr_;
  std::uint64_t stream = 100;
  for (double T : cfg.schedule) {
    ContinuityRow row;
    row.time = T;
    row.classes = cfg.classes;
    std::size_t d0 = 0, d1 = 0;
    auto b0 = detail::length_ratios(S0, M1, T, cfg.classes, cfg.seed, stream++, cfg.workers, &row.ratio01_stderr,
                                    &row.ratio01, &d0);
    auto b1 = detail::length_ratios(S1, M0, T, cfg.classes, cfg.seed, stream++, cfg.workers, &row.ratio10_stderr,
                                    &row.ratio10, &d1);
    row.degenerate = d0 + d1;
    row.mls0_le_mls1 = b0.le;
    row.mls1_le_mls0 = b1.le;
    row.i01 = i00 * row.ratio01;
    row.i01_stderr = std::hypot(s00 * row.ratio01, i00 * row.ratio01_stderr);
    row.i10 = i11 * row.ratio10;
    row.i10_stderr = std::hypot(s11 * row.ratio10, i11 * row.ratio10_stderr);
    R.mls0_le_mls1 = R.mls0_le_mls1 && b0.le;
    R.rows.push_back(row);
  }
  R.inconclusive = R.rows.size() < 2;
  if (!R.rows.empty()) {
    const auto& last = R.rows.back();
    auto le = [](double a, double sa, double b, double sb) { return a <= b + 3.0 * std::hypot(sa, sb); };
    R.chain_holds = le(i00, s00, last.i01, last.i01_stderr) && le(last.i01, last.i01_stderr, i11, s11);
  }
  if (R.inconclusive) R.verdict = "inconclusive";
  else if (R.volumes_equal && R.chain_holds) R.verdict = "consistent";
  else R.verdict = "inconsistent";
  return R;
}

}  // namespace fuchsian
