#pragma once

// Avoided crossings along a gas trajectory, Landau-Zener exchange
// probabilities, and propagation of the occupation matrix P(m|n).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pechukas/error.hpp"
#include "pechukas/gas.hpp"

namespace pechukas {

/// Uniform sweep |dlambda/dt| = 1 / total_time.
struct SweepSpec {
  double total_time = 1.0;
  double hbar = 1.0;

  double rate() const { return 1.0 / total_time; }

  void validate() const {
    if (!(total_time > 0.0)) throw ValidationError("SweepSpec: total_time must be positive");
    if (!(hbar > 0.0)) throw ValidationError("SweepSpec: hbar must be positive");
  }
};

/// p = exp(-delta_min^2 / (4 pi hbar coupling |dlambda/dt|)).
inline double lz_probability(double delta_min, double coupling, const SweepSpec& sweep) {
  sweep.validate();
  if (!(delta_min >= 0.0) || !(coupling >= 0.0))
    throw ValidationError("lz_probability: delta_min and coupling must be non-negative");
  if (delta_min == 0.0) return 1.0;
  if (coupling == 0.0) return 0.0;
  return std::exp(-delta_min * delta_min / (4.0 * std::numbers::pi * sweep.hbar * coupling * sweep.rate()));
}

struct AnticrossingEvent {
  int lower_level = 0;        // pair (lower_level, lower_level + 1), 0-based
  double lambda_star = 0.0;
  double delta_min = 0.0;
  double coupling = 0.0;      // |<m|Z Hb|m+1>| at lambda_star
  double p_lz = 0.0;
  bool near_degenerate = false;
};

struct DetectionReport {
  std::vector<AnticrossingEvent> events;  // decreasing lambda_star, ties by ascending pair
  std::vector<std::string> warnings;
};

namespace detail {

// Sorted gap between levels m and m+1 at lambda, plus the particle labels.
struct GapProbe {
  double gap;
  int a, b;
};

inline GapProbe probe_gap(const Trajectory& t, double lambda, int m, RealVector& scratch) {
  t.particles_at(lambda, scratch);
  std::vector<int> order = sort_order(scratch);
  return {scratch(order[m + 1]) - scratch(order[m]), order[m], order[m + 1]};
}

// |l_ab| at lambda from whichever bracketing node has (a, b) as the sorted
// neighbours at position m; Hermite in lambda when both do.
inline double coupling_at(const Trajectory& t, std::size_t i, int m, int a, int b, double lambda) {
  const StepNode& p = t.nodes[i];
  const StepNode& q = t.nodes[i + 1];
  auto matches = [&](const StepNode& s) {
    const int u = s.order[m], w = s.order[m + 1];
    return (u == a && w == b) || (u == b && w == a);
  };
  const bool mp = matches(p), mq = matches(q);
  if (mp && mq) {
    const double h = q.lambda - p.lambda;
    const double tt = h != 0.0 ? (lambda - p.lambda) / h : 0.0;
    const double t2 = tt * tt, t3 = t2 * tt;
    const double val = (2 * t3 - 3 * t2 + 1) * p.coupling(m) + (t3 - 2 * t2 + tt) * h * p.coupling_rate(m) +
                       (-2 * t3 + 3 * t2) * q.coupling(m) + (t3 - t2) * h * q.coupling_rate(m);
    return std::max(val, 0.0);
  }
  if (mp) return p.coupling(m);
  if (mq) return q.coupling(m);
  return std::abs(lambda - p.lambda) < std::abs(lambda - q.lambda) ? p.coupling(m) : q.coupling(m);
}

}  // namespace detail

inline constexpr double kLambdaTolerance = 1e-9;
inline constexpr double kNearDegenerateFraction = 1e-13;

/// Every strict interior local minimum of each adjacent gap x_{m+1} - x_m,
/// bracketed by a sign change of the gap derivative between accepted steps and
/// refined by golden-section search on the dense output. p_lz is left at zero;
/// use assign_probabilities for a given sweep.
inline DetectionReport detect_anticrossings(const Trajectory& traj) {
  if (!traj.has_dense_output()) throw ValidationError("detect_anticrossings: trajectory has no dense output");
  DetectionReport report;
  const int n = traj.levels();
  const double range = traj.spectral_range();
  RealVector scratch;

  auto gap_slope = [](const StepNode& s, int m) { return s.v(s.order[m + 1]) - s.v(s.order[m]); };

  for (std::size_t i = 0; i + 1 < traj.nodes.size(); ++i) {
    const StepNode& hi = traj.nodes[i];
    const StepNode& lo = traj.nodes[i + 1];
    for (int m = 0; m + 1 < n; ++m) {
      // Gap decreasing towards lower lambda at hi, increasing past lo.
      if (!(gap_slope(hi, m) > 0.0 && gap_slope(lo, m) <= 0.0)) continue;
      if (gap_slope(lo, m) == 0.0 && lo.lambda == 0.0) continue;  // minimum sits on the endpoint
      double a = lo.lambda, b = hi.lambda;
      const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
      double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
      double fc = detail::probe_gap(traj, c, m, scratch).gap;
      double fd = detail::probe_gap(traj, d, m, scratch).gap;
      while (b - a > kLambdaTolerance) {
        if (fc < fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - inv_phi * (b - a);
          fc = detail::probe_gap(traj, c, m, scratch).gap;
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + inv_phi * (b - a);
          fd = detail::probe_gap(traj, d, m, scratch).gap;
        }
      }
      const double lambda_star = 0.5 * (a + b);
      const detail::GapProbe g = detail::probe_gap(traj, lambda_star, m, scratch);
      const double l_abs = detail::coupling_at(traj, i, m, g.a, g.b, lambda_star);

      AnticrossingEvent ev;
      ev.lower_level = m;
      ev.lambda_star = lambda_star;
      if (l_abs == 0.0) {
        // symmetry-allowed exact crossing: the levels pass through each other
        ev.delta_min = 0.0;
        ev.coupling = 0.0;
      } else if (g.gap < kNearDegenerateFraction * range) {
        ev.delta_min = std::max(g.gap, 0.0);
        ev.coupling = 0.0;
        ev.near_degenerate = true;
        report.warnings.push_back("near-degenerate anticrossing of levels " + std::to_string(m) + " and " +
                                  std::to_string(m + 1) + " at lambda = " + std::to_string(lambda_star) +
                                  " (gap " + std::to_string(g.gap) + "), p_lz clamped to 1");
      } else {
        ev.delta_min = g.gap;
        ev.coupling = l_abs / g.gap;
      }
      report.events.push_back(ev);
    }
  }
  std::stable_sort(report.events.begin(), report.events.end(), [](const auto& x, const auto& y) {
    if (x.lambda_star != y.lambda_star) return x.lambda_star > y.lambda_star;
    return x.lower_level < y.lower_level;
  });
  return report;
}

/// Fills p_lz for the given sweep.
inline void assign_probabilities(std::vector<AnticrossingEvent>& events, const SweepSpec& sweep) {
  for (auto& e : events) e.p_lz = e.near_degenerate ? 1.0 : lz_probability(e.delta_min, e.coupling, sweep);
}

inline std::vector<AnticrossingEvent> detect_anticrossings(const Trajectory& traj, const SweepSpec& sweep) {
  DetectionReport r = detect_anticrossings(traj);
  assign_probabilities(r.events, sweep);
  return r.events;
}

/// P(m|n): probability of ending in level m having started in level n.
struct OccupationMatrix {
  Eigen::MatrixXd p;

  static OccupationMatrix identity(int n) { return {Eigen::MatrixXd::Identity(n, n)}; }
  int size() const { return static_cast<int>(p.rows()); }
  double operator()(int m, int n) const { return p(m, n); }

  /// max over rows and columns of |sum - 1|.
  double stochasticity_defect() const {
    const double cols = (p.colwise().sum().array() - 1.0).abs().maxCoeff();
    const double rows = (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
    return std::max(cols, rows);
  }

  /// sum_m P(m|n0) (m - n0)^2
  double mean_square_deviation(int n0) const {
    double s = 0.0;
    for (int m = 0; m < size(); ++m) s += p(m, n0) * double(m - n0) * double(m - n0);
    return s;
  }
};

/// Starts from the identity and mixes rows (m, m+1) at each event:
/// row_m <- (1-p) row_m + p row_{m+1}, row_{m+1} <- p row_m + (1-p) row_{m+1}.
inline OccupationMatrix propagate_occupations(const std::vector<AnticrossingEvent>& events, int n_levels) {
  if (n_levels < 1) throw ValidationError("propagate_occupations: need at least one level");
  OccupationMatrix occ = OccupationMatrix::identity(n_levels);
  double previous = std::numeric_limits<double>::infinity();
  for (const auto& e : events) {
    if (e.lambda_star > previous) throw ValidationError("propagate_occupations: events must be ordered by decreasing lambda");
    previous = e.lambda_star;
    const int m = e.lower_level;
    if (m < 0 || m + 1 >= n_levels) throw ValidationError("propagate_occupations: event pair out of range");
    if (!(e.p_lz >= 0.0 && e.p_lz <= 1.0)) throw ValidationError("propagate_occupations: p_lz outside [0, 1]");
    const double p = e.p_lz;
    if (p == 0.0) continue;
    for (int col = 0; col < n_levels; ++col) {
      const double lo = occ.p(m, col), up = occ.p(m + 1, col);
      occ.p(m, col) = (1.0 - p) * lo + p * up;
      occ.p(m + 1, col) = p * lo + (1.0 - p) * up;
    }
  }
  return occ;
}

/// Stochastic hopping: one walker per sample starting in `start`, swapping to
/// the partner level with probability p_lz at each event it takes part in.
/// Returns the histogram of final levels.
inline std::vector<std::int64_t> simulate_hopping(const std::vector<AnticrossingEvent>& events, int n_levels,
                                                  int start, std::int64_t samples, std::uint64_t seed) {
  if (start < 0 || start >= n_levels) throw ValidationError("simulate_hopping: start level out of range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<std::int64_t> hist(n_levels, 0);
  for (std::int64_t s = 0; s < samples; ++s) {
    int level = start;
    for (const auto& e : events) {
      if (level == e.lower_level) {
        if (uni(rng) < e.p_lz) level = e.lower_level + 1;
      } else if (level == e.lower_level + 1) {
        if (uni(rng) < e.p_lz) level = e.lower_level;
      }
    }
    ++hist[level];
  }
  return hist;
}

}  // namespace pechukas
