#pragma once

// The edge-vector measure d mu = cos(theta) d theta dx, the uniform
// branching Markov kernel, and Liouville trajectory sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "fuchsian/complex.hpp"
#include "fuchsian/config.hpp"
#include "fuchsian/errors.hpp"
#include "fuchsian/geodesic.hpp"
#include "fuchsian/parallel.hpp"
#include "fuchsian/stats.hpp"

namespace fuchsian {

class LiouvilleSampler {
 public:
  LiouvilleSampler(const Complex& C, const MetricAssignment& M, const Tolerances& tol = default_tolerances())
      : C_(&C), M_(&M), tol_(tol) {
    for (std::size_t e = 0; e < C.edges.size(); ++e)
      for (const auto& inc : C.edges[e].incidences) {
        index_[inc] = static_cast<int>(incidences_.size());
        incidences_.push_back(inc);
        edge_of_.push_back(static_cast<int>(e));
        total_mass_ += 2.0 * M.edge_length(static_cast<int>(e));
        cumulative_.push_back(total_mass_);
      }
    if (incidences_.empty()) throw Error(ErrorKind::InvalidArgument, "complex has no edges");
  }

  const Complex& complex() const { return *C_; }
  const MetricAssignment& metric() const { return *M_; }
  const Tolerances& tolerances() const { return tol_; }

  /// mu(S') = sum over incidences of 2 len(e).
  double total_mass() const { return total_mass_; }
  const std::vector<Incidence>& incidences() const { return incidences_; }
  int incidence_index(const Incidence& inc) const { return index_.at(inc); }
  int incidence_edge(int i) const { return edge_of_[i]; }

  /// One draw from mu / total mass; near-degenerate draws are redrawn.
  EdgeVector draw(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (;;) {
      double u = U(rng) * total_mass_;
      int i = static_cast<int>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
      if (i >= static_cast<int>(incidences_.size())) continue;
      const Incidence& inc = incidences_[i];
      int e = edge_of_[i];
      double L = M_->edge_length(e);
      double s = L * U(rng);
      double th = std::asin(2.0 * U(rng) - 1.0);
      if (s < tol_.sample_margin * L || s > L - tol_.sample_margin * L) continue;
      if (std::abs(th) > std::numbers::pi / 2 - tol_.sample_margin) continue;
      return {e, s, inc.chamber, inc.side, th};
    }
  }

 private:
  const Complex* C_;
  const MetricAssignment* M_;
  Tolerances tol_;
  std::vector<Incidence> incidences_;
  std::vector<int> edge_of_;
  std::map<Incidence, int> index_;
  double total_mass_ = 0.0;
  std::vector<double> cumulative_;
};

/// p(v, w) = 1/|F(v)|, or the deliberately biased "always the first" rule.
struct MarkovKernel {
  enum class Policy { Uniform, First };
  Policy policy = Policy::Uniform;

  std::size_t choose(const std::vector<EdgeVector>& F, std::mt19937_64& rng) const {
    if (policy == Policy::First || F.size() == 1) return 0;
    return std::uniform_int_distribution<std::size_t>(0, F.size() - 1)(rng);
  }

  EdgeVector step(const Complex& C, const MetricAssignment& M, const EdgeVector& v, std::mt19937_64& rng,
                  const Tolerances& tol, double* length = nullptr, std::size_t* branches = nullptr) const {
    FlowStep s = flow_through_chamber(C, M, v, tol);
    auto F = continuations(C, s);
    if (F.empty()) throw Error(ErrorKind::NotClosed, "trajectory leaves the patch");
    if (length) *length = s.segment_length;
    if (branches) *branches = F.size();
    return F[choose(F, rng)];
  }
};

struct StationarityReport {
  std::size_t n = 0;
  std::size_t steps = 0;
  double alpha = 0.01;
  int tests = 0;                  // Bonferroni divisor
  double chi2 = 0.0, chi2_p = 1.0;
  double ks_min_p = 1.0;
  int ks_worst_incidence = -1;
  double moment_z = 0.0, moment_p = 1.0;
  double pushed_cos_mean = 0.0, fresh_cos_mean = 0.0;
  std::vector<double> pushed_counts, fresh_counts;
  std::size_t resampled = 0;      // initial vectors redrawn after a vertex hit or graze
  bool passed = true;
};

namespace detail {

struct PushBlock {
  std::vector<int> idx;
  std::vector<double> theta;
  std::size_t resampled = 0;
};

}  // namespace detail

/// Pushes n mu-samples through `steps` kernel steps and compares the result
/// with n fresh mu-samples: chi-square on incidences, per-incidence KS on
/// angles and a z-test on cos(theta), Bonferroni-combined at level alpha.
inline StationarityReport verify_stationarity(const LiouvilleSampler& S, const MarkovKernel& K, std::size_t n,
                                              std::size_t steps, std::uint64_t seed, unsigned workers = 1,
                                              double alpha = 0.01) {
  const Complex& C = S.complex();
  const MetricAssignment& M = S.metric();
  const Tolerances& tol = S.tolerances();
  if (C.mode != Mode::Closed) throw Error(ErrorKind::InvalidArgument, "stationarity needs a closed complex");
  auto pushed = parallel_blocks<detail::PushBlock>(n, workers, [&](std::size_t b, std::size_t, std::size_t cnt) {
    auto rng = block_rng(seed, 1, b);
    detail::PushBlock out;
    for (std::size_t i = 0; i < cnt; ++i) {
      for (;;) {
        EdgeVector v = S.draw(rng);
        try {
          for (std::size_t k = 0; k < steps; ++k) v = K.step(C, M, v, rng, tol);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::VertexHit && e.kind() != ErrorKind::Tangent) throw;
          ++out.resampled;
          continue;
        }
        out.idx.push_back(S.incidence_index({v.chamber, v.side}));
        out.theta.push_back(v.angle);
        break;
      }
    }
    return out;
  });
  auto fresh = parallel_blocks<detail::PushBlock>(n, workers, [&](std::size_t b, std::size_t, std::size_t cnt) {
    auto rng = block_rng(seed, 2, b);
    detail::PushBlock out;
    for (std::size_t i = 0; i < cnt; ++i) {
      EdgeVector v = S.draw(rng);
      out.idx.push_back(S.incidence_index({v.chamber, v.side}));
      out.theta.push_back(v.angle);
    }
    return out;
  });

  const std::size_t ni = S.incidences().size();
  StationarityReport R;
  R.n = n;
  R.steps = steps;
  R.alpha = alpha;
  R.pushed_counts.assign(ni, 0.0);
  R.fresh_counts.assign(ni, 0.0);
  std::vector<std::vector<double>> tp(ni), tf(ni);
  stats::Accumulator cp, cf;
  for (const auto& blk : pushed) {
    R.resampled += blk.resampled;
    for (std::size_t i = 0; i < blk.idx.size(); ++i) {
      R.pushed_counts[blk.idx[i]] += 1;
      tp[blk.idx[i]].push_back(blk.theta[i]);
      cp.add(std::cos(blk.theta[i]));
    }
  }
  for (const auto& blk : fresh)
    for (std::size_t i = 0; i < blk.idx.size(); ++i) {
      R.fresh_counts[blk.idx[i]] += 1;
      tf[blk.idx[i]].push_back(blk.theta[i]);
      cf.add(std::cos(blk.theta[i]));
    }
  R.pushed_cos_mean = cp.mean;
  R.fresh_cos_mean = cf.mean;
  R.tests = 2 + static_cast<int>(ni);
  const double level = alpha / R.tests;
  auto chi = stats::chi_square_two_sample(R.pushed_counts, R.fresh_counts);
  R.chi2 = chi.statistic;
  R.chi2_p = chi.p_value;
  for (std::size_t i = 0; i < ni; ++i) {
    auto ks = stats::ks_two_sample(tp[i], tf[i]);
    if (ks.p_value < R.ks_min_p) {
      R.ks_min_p = ks.p_value;
      R.ks_worst_incidence = static_cast<int>(i);
    }
  }
  auto z = stats::z_test(cp, cf);
  R.moment_z = z.statistic;
  R.moment_p = z.p_value;
  R.passed = R.chi2_p >= level && R.ks_min_p >= level && R.moment_p >= level;
  return R;
}

/// A mu-started trajectory followed for at least time T.
struct LiouvilleTrajectory {
  SymbolicWord word;
  double branch_probability = 1.0;  // product of 1/|F| over the realized choices
};

inline LiouvilleTrajectory flow_for_time(const LiouvilleSampler& S, const EdgeVector& v0, double T,
                                         std::mt19937_64& rng) {
  const Complex& C = S.complex();
  const MetricAssignment& M = S.metric();
  MarkovKernel K;
  LiouvilleTrajectory tr;
  tr.word.vectors.push_back(v0);
  EdgeVector v = v0;
  double time = 0.0;
  while (time < T) {
    double len = 0;
    std::size_t br = 1;
    v = K.step(C, M, v, rng, S.tolerances(), &len, &br);
    time += len;
    tr.word.lengths.push_back(len);
    tr.word.branch_counts.push_back(br);
    tr.word.vectors.push_back(v);
    tr.branch_probability /= static_cast<double>(br);
  }
  return tr;
}

struct LiouvilleSummary {
  std::size_t n = 0;
  double time = 0.0;
  double total_mass = 0.0;
  double mean_t = 0.0, mean_t_stderr = 0.0;      // E_mu[t_v]
  double crossings_per_time = 0.0;
  double renewal = 0.0;                           // crossings_per_time * mean_t, expected 1
  double mean_cos = 0.0, mean_cos_stderr = 0.0;   // expected pi/4
  double mean_log_branch_probability = 0.0;
  std::size_t resampled = 0;
};

namespace detail {

struct TrajBlock {
  stats::Accumulator t, cosv, logp;
  double crossings = 0, time = 0;
  std::size_t resampled = 0;
  std::vector<LiouvilleTrajectory> kept;
};

}  // namespace detail

/// Samples n trajectories of duration >= T. Trajectories that hit a vertex
/// or graze a side are redrawn and counted. `keep` retains the trajectories.
inline LiouvilleSummary sample_liouville_segments(const LiouvilleSampler& S, std::size_t n, double T,
                                                  std::uint64_t seed, unsigned workers = 1,
                                                  std::vector<LiouvilleTrajectory>* keep = nullptr) {
  if (S.complex().mode != Mode::Closed) throw Error(ErrorKind::InvalidArgument, "sampling needs a closed complex");
  auto blocks = parallel_blocks<detail::TrajBlock>(n, workers, [&](std::size_t b, std::size_t, std::size_t cnt) {
    auto rng = block_rng(seed, 3, b);
    detail::TrajBlock out;
    for (std::size_t i = 0; i < cnt; ++i) {
      for (;;) {
        EdgeVector v = S.draw(rng);
        LiouvilleTrajectory tr;
        double t0 = 0;
        try {
          t0 = flow_through_chamber(S.complex(), S.metric(), v, S.tolerances()).segment_length;
          tr = flow_for_time(S, v, T + t0, rng);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::VertexHit && e.kind() != ErrorKind::Tangent) throw;
          ++out.resampled;
          continue;
        }
        out.t.add(tr.word.lengths.front());
        out.cosv.add(std::cos(v.angle));
        out.logp.add(std::log(tr.branch_probability));
        // Count crossings in (s, s + T] for s uniform in the first segment,
        // weighted by t0: a start drawn from the invariant measure mu x dt.
        double s = t0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng), acc = 0, hits = 0;
        for (double l : tr.word.lengths) {
          acc += l;
          if (acc > s && acc <= s + T) hits += 1;
        }
        out.crossings += t0 * hits;
        out.time += t0 * T;
        if (keep) out.kept.push_back(std::move(tr));
        break;
      }
    }
    return out;
  });
  LiouvilleSummary R;
  R.n = n;
  R.time = T;
  R.total_mass = S.total_mass();
  stats::Accumulator t, c, lp;
  double crossings = 0, time = 0;
  for (auto& b : blocks) {
    t.merge(b.t);
    c.merge(b.cosv);
    lp.merge(b.logp);
    crossings += b.crossings;
    time += b.time;
    R.resampled += b.resampled;
    if (keep)
      for (auto& tr : b.kept) keep->push_back(std::move(tr));
  }
  R.mean_t = t.mean;
  R.mean_t_stderr = t.stderr_of_mean();
  R.mean_cos = c.mean;
  R.mean_cos_stderr = c.stderr_of_mean();
  R.mean_log_branch_probability = lp.mean;
  R.crossings_per_time = time > 0 ? crossings / time : 0.0;
  R.renewal = R.crossings_per_time * R.mean_t;
  return R;
}

}  // namespace fuchsian
