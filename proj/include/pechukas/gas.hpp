#pragma once

// Level dynamics as a classical 1D gas:
//   dx_m/dlambda = v_m
//   dv_m/dlambda = 2 sum_{n != m} |l_mn|^2 / (x_m - x_n)^3
//   dl_mn/dlambda = sum_{k != m,n} l_mk l_kn (1/(x_m - x_k)^2 - 1/(x_k - x_n)^2)
// integrated from lambda = 1 down to lambda = 0.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pechukas/error.hpp"
#include "pechukas/hamiltonian.hpp"
#include "pechukas/state.hpp"

namespace pechukas {

struct Derivatives {
  RealVector dx;
  RealVector dv;
  ComplexMatrix dl;
};

namespace detail {

// Writes the right-hand side into out. The l update is evaluated as the
// commutator [A, L] with A_mk = l_mk / (x_m - x_k)^2, i.e. P - P^dagger with
// P = A L, which keeps dl exactly anti-Hermitian.
inline void evaluate_rhs(const PechukasState& s, Derivatives& out, ComplexMatrix& weighted) {
  const int n = s.size();
  out.dx = s.v;
  out.dv.setZero(n);
  weighted.resize(n, n);
  weighted.setZero();
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      const cplx lmk = s.l(m, k);
      if (lmk == cplx(0.0)) continue;  // decoupled pair: may coincide or cross freely
      const double d = s.x(m) - s.x(k);
      if (d == 0.0 || !std::isfinite(d)) {
        std::ostringstream os;
        os << "coincident gas particles " << m << " and " << k << " with nonzero coupling at lambda = " << s.lambda;
        throw SingularityError(os.str(), m, k, s.lambda);
      }
      const double inv2 = 1.0 / (d * d);
      const double force = 2.0 * std::norm(lmk) * inv2 / d;
      out.dv(m) += force;
      out.dv(k) -= force;
      weighted(m, k) = lmk * inv2;
      weighted(k, m) = s.l(k, m) * inv2;
    }
  }
  out.dl.noalias() = weighted * s.l;
  // dl = P - P^dagger, computed entrywise so that dl(n,m) == -conj(dl(m,n)) exactly.
  for (int m = 0; m < n; ++m) {
    out.dl(m, m) = 0.0;
    for (int k = m + 1; k < n; ++k) {
      const cplx upper = out.dl(m, k) - std::conj(out.dl(k, m));
      out.dl(m, k) = upper;
      out.dl(k, m) = -std::conj(upper);
    }
  }
}

}  // namespace detail

/// Exact right-hand side of the gas equations. Cost O(N^3), dominated by the l update.
inline Derivatives derivatives(const PechukasState& s) {
  Derivatives d;
  ComplexMatrix scratch;
  detail::evaluate_rhs(s, d, scratch);
  return d;
}

// ---------------------------------------------------------------------------

struct ConservedQuantities {
  double total_momentum = 0.0;      // sum v_n = Tr Z Hb
  double gas_energy = 0.0;          // (1/2) Tr (Z Hb)^2
  double center_drift_check = 0.0;  // d/dlambda sum x - sum v
};

inline ConservedQuantities conserved(const PechukasState& s) {
  ConservedQuantities q;
  const int n = s.size();
  q.total_momentum = s.v.sum();
  double kinetic = 0.5 * s.v.squaredNorm();
  double potential = 0.0;
  for (int m = 0; m < n; ++m)
    for (int k = m + 1; k < n; ++k) {
      const double l2 = std::norm(s.l(m, k));
      if (l2 == 0.0) continue;
      const double d = s.x(m) - s.x(k);
      potential += l2 / (d * d);  // each unordered pair counted once; (1/2) sum over m != n
    }
  q.gas_energy = kinetic + potential;
  // dx/dlambda is v by construction of the flow.
  q.center_drift_check = s.v.sum() - q.total_momentum;
  return q;
}

// ---------------------------------------------------------------------------

struct IntegratorConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_step = 1e-3;
  double min_step = 1e-14;
  int dense_output_points = 2000;
  std::int64_t max_steps = 20'000'000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ValidationError("IntegratorConfig: tolerances must be positive");
    if (!(min_step > 0.0) || !(min_step < max_step) || !(max_step <= 1.0))
      throw ValidationError("IntegratorConfig: need 0 < min_step < max_step <= 1");
    if (dense_output_points < 2) throw ValidationError("IntegratorConfig: dense_output_points must be >= 2");
  }
};

/// Levels at one lambda, sorted ascending, with their velocities.
struct TrajectorySample {
  double lambda = 0.0;
  RealVector x;
  RealVector v;
};

/// One accepted integration step. Particle-labelled positions, velocities and
/// accelerations support cubic Hermite dense output; `order` sorts particles
/// into levels and `coupling` holds |l| between sorted neighbours with its
/// lambda-derivative.
struct StepNode {
  double lambda = 0.0;
  RealVector x, v, a;
  std::vector<int> order;
  RealVector coupling, coupling_rate;
};

struct TrajectoryStats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t evaluations = 0;
  double smallest_step = 0.0;
  double max_momentum_drift = 0.0;  // relative to sum |v_n(1)|
  double max_energy_drift = 0.0;    // relative to the initial gas energy
  double max_anti_hermitian_defect = 0.0;
};

class Trajectory {
 public:
  IntegratorConfig config;
  std::vector<TrajectorySample> samples;  // decreasing lambda, 1 -> 0
  std::vector<StepNode> nodes;            // empty for oracle trajectories
  PechukasState initial;
  PechukasState final_state;
  TrajectoryStats stats;

  int levels() const {
    if (!samples.empty()) return static_cast<int>(samples.front().x.size());
    return initial.size();
  }

  bool has_dense_output() const { return nodes.size() >= 2; }

  double spectral_range() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : samples) {
      lo = std::min(lo, s.x.minCoeff());
      hi = std::max(hi, s.x.maxCoeff());
    }
    return hi - lo;
  }

  /// Index i such that nodes[i].lambda >= lambda >= nodes[i+1].lambda.
  std::size_t interval(double lambda) const {
    if (!has_dense_output()) throw ValidationError("Trajectory: no dense output available");
    auto it = std::upper_bound(nodes.begin(), nodes.end(), lambda,
                               [](double l, const StepNode& n) { return l > n.lambda; });
    std::size_t i = static_cast<std::size_t>(it - nodes.begin());
    if (i == 0) return 0;
    return std::min(i - 1, nodes.size() - 2);
  }

  /// Particle-labelled cubic Hermite positions (and velocities) at lambda.
  void particles_at(double lambda, RealVector& x, RealVector* v = nullptr) const {
    const std::size_t i = interval(lambda);
    const StepNode& p = nodes[i];
    const StepNode& q = nodes[i + 1];
    const double h = q.lambda - p.lambda;
    const double t = h != 0.0 ? (lambda - p.lambda) / h : 0.0;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    x = h00 * p.x + (h10 * h) * p.v + h01 * q.x + (h11 * h) * q.v;
    if (v) {
      *v = h00 * p.v + (h10 * h) * p.a + h01 * q.v + (h11 * h) * q.a;
    }
  }

  /// Sorted levels at lambda from the dense output.
  RealVector levels_at(double lambda) const {
    RealVector x;
    particles_at(lambda, x);
    std::sort(x.data(), x.data() + x.size());
    return x;
  }

  TrajectorySample sample_at(double lambda) const {
    RealVector x, v;
    particles_at(lambda, x, &v);
    const int n = static_cast<int>(x.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x(a) < x(b); });
    TrajectorySample s;
    s.lambda = lambda;
    s.x.resize(n);
    s.v.resize(n);
    for (int k = 0; k < n; ++k) {
      s.x(k) = x(order[k]);
      s.v(k) = v(order[k]);
    }
    return s;
  }
};

namespace detail {

inline std::vector<int> sort_order(const RealVector& x) {
  std::vector<int> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x(a) < x(b); });
  return order;
}

inline StepNode make_node(const PechukasState& s, const Derivatives& d) {
  StepNode node;
  node.lambda = s.lambda;
  node.x = s.x;
  node.v = s.v;
  node.a = d.dv;
  node.order = sort_order(s.x);
  const int n = s.size();
  node.coupling.resize(std::max(n - 1, 0));
  node.coupling_rate.resize(std::max(n - 1, 0));
  for (int k = 0; k + 1 < n; ++k) {
    const int a = node.order[k], b = node.order[k + 1];
    const cplx l = s.l(a, b);
    const double mag = std::abs(l);
    node.coupling(k) = mag;
    node.coupling_rate(k) = mag > 0.0 ? std::real(std::conj(l) * d.dl(a, b)) / mag : 0.0;
  }
  return node;
}

struct DriftMonitor {
  double momentum0 = 0.0, momentum_scale = 1.0, energy0 = 0.0, energy_scale = 1.0;

  explicit DriftMonitor(const PechukasState& s) {
    const ConservedQuantities q = conserved(s);
    momentum0 = q.total_momentum;
    momentum_scale = s.v.cwiseAbs().sum();
    if (!(momentum_scale > 0.0)) momentum_scale = 1.0;
    energy0 = q.gas_energy;
    energy_scale = std::abs(q.gas_energy) > 0.0 ? std::abs(q.gas_energy) : 1.0;
  }

  void update(const PechukasState& s, TrajectoryStats& stats) const {
    const ConservedQuantities q = conserved(s);
    stats.max_momentum_drift = std::max(stats.max_momentum_drift, std::abs(q.total_momentum - momentum0) / momentum_scale);
    stats.max_energy_drift = std::max(stats.max_energy_drift, std::abs(q.gas_energy - energy0) / energy_scale);
  }
};

// Closest pair of particles that still interact.
inline std::pair<int, int> closest_coupled_pair(const PechukasState& s) {
  double best = std::numeric_limits<double>::infinity();
  std::pair<int, int> pair{-1, -1};
  for (int m = 0; m < s.size(); ++m)
    for (int k = m + 1; k < s.size(); ++k) {
      if (s.l(m, k) == cplx(0.0)) continue;
      const double d = std::abs(s.x(m) - s.x(k));
      if (d < best) {
        best = d;
        pair = {m, k};
      }
    }
  return pair;
}

// True if two coupled particles swapped order between a and b.
inline bool coupled_pair_passed(const PechukasState& a, const PechukasState& b, double coupling_floor) {
  const int n = a.size();
  for (int m = 0; m < n; ++m)
    for (int k = m + 1; k < n; ++k) {
      if (std::abs(a.l(m, k)) <= coupling_floor) continue;
      if ((a.x(m) < a.x(k)) != (b.x(m) < b.x(k))) return true;
    }
  return false;
}

// Dormand-Prince 5(4) tableau.
namespace dp {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

// out = y + h * sum_j c_j k_j
template <std::size_t K>
void combine(PechukasState& out, const PechukasState& y, double h, const std::array<double, K>& c,
             const std::array<const Derivatives*, K>& k) {
  out.x = y.x;
  out.v = y.v;
  out.l = y.l;
  for (std::size_t j = 0; j < K; ++j) {
    if (c[j] == 0.0) continue;
    const double w = h * c[j];
    out.x.noalias() += w * k[j]->dx;
    out.v.noalias() += w * k[j]->dv;
    out.l.noalias() += w * k[j]->dl;
  }
}

}  // namespace detail

/// Adaptive Dormand-Prince integration of the gas from s0 (lambda = 1) to
/// lambda = 0, with PI step control, max-norm error estimates, and cubic
/// Hermite dense output. The last step lands exactly on lambda = 0.
inline Trajectory integrate(const ProblemDefinition& p, const PechukasState& s0, const IntegratorConfig& cfg = {}) {
  using namespace detail;
  p.validate();
  cfg.validate();
  const int n = s0.size();
  if (n != p.dim()) throw ValidationError("integrate: state size does not match problem dimension");
  if (s0.lambda != 1.0) throw ValidationError("integrate: initial state must be at lambda = 1");

  Trajectory traj;
  traj.config = cfg;
  traj.initial = s0;

  const double l_scale = s0.l.size() ? s0.l.cwiseAbs().maxCoeff() : 0.0;
  const double coupling_floor = 1e-12 * l_scale;
  const DriftMonitor monitor(s0);

  ComplexMatrix scratch;
  Derivatives k1, k2, k3, k4, k5, k6, k7;
  PechukasState y = s0, stage, ynew;
  stage.l.resize(n, n);
  evaluate_rhs(y, k1, scratch);
  traj.stats.evaluations = 1;
  traj.nodes.push_back(make_node(y, k1));
  traj.stats.smallest_step = cfg.max_step;

  const double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  double facold = 1e-4;
  double h = -std::min(cfg.max_step, 1e-4);
  bool last_rejected = false;

  auto error_norm = [&](const PechukasState& a, const PechukasState& b) {
    double err = 0.0;
    for (int m = 0; m < n; ++m) {
      const double ex = h * (dp::e1 * k1.dx(m) + dp::e3 * k3.dx(m) + dp::e4 * k4.dx(m) + dp::e5 * k5.dx(m) +
                             dp::e6 * k6.dx(m) + dp::e7 * k7.dx(m));
      const double ev = h * (dp::e1 * k1.dv(m) + dp::e3 * k3.dv(m) + dp::e4 * k4.dv(m) + dp::e5 * k5.dv(m) +
                             dp::e6 * k6.dv(m) + dp::e7 * k7.dv(m));
      const double sx = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(a.x(m)), std::abs(b.x(m)));
      const double sv = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(a.v(m)), std::abs(b.v(m)));
      err = std::max({err, std::abs(ex) / sx, std::abs(ev) / sv});
    }
    for (int m = 0; m < n; ++m)
      for (int k = m + 1; k < n; ++k) {
        const cplx el = h * (dp::e1 * k1.dl(m, k) + dp::e3 * k3.dl(m, k) + dp::e4 * k4.dl(m, k) +
                             dp::e5 * k5.dl(m, k) + dp::e6 * k6.dl(m, k) + dp::e7 * k7.dl(m, k));
        const double sl = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(a.l(m, k)), std::abs(b.l(m, k)));
        err = std::max(err, std::abs(el) / sl);
      }
    return err;
  };

  while (y.lambda > 0.0) {
    if (traj.stats.accepted + traj.stats.rejected >= cfg.max_steps)
      throw IntegrationError("integrate: step budget exhausted at lambda = " + std::to_string(y.lambda), y.lambda);
    bool clamped = false;
    if (y.lambda + h <= 0.0 || y.lambda + h < 0.5 * cfg.min_step) {
      h = -y.lambda;
      clamped = true;
    }
    if (std::abs(h) < cfg.min_step && !clamped) {
      const auto pair = closest_coupled_pair(y);
      std::ostringstream os;
      os << "integrate: step size " << std::abs(h) << " below min_step " << cfg.min_step << " at lambda = " << y.lambda
         << ", closest coupled pair (" << pair.first << ", " << pair.second << ")";
      throw IntegrationError(os.str(), y.lambda, pair.first, pair.second);
    }

    double err = 0.0;
    bool ok = true;
    try {
      using A2 = std::array<double, 2>;
      using A3 = std::array<double, 3>;
      using A4 = std::array<double, 4>;
      using A5 = std::array<double, 5>;
      using A6 = std::array<double, 6>;
      stage.lambda = y.lambda + dp::c2 * h;
      combine<1>(stage, y, h, {dp::a21}, {&k1});
      evaluate_rhs(stage, k2, scratch);
      stage.lambda = y.lambda + dp::c3 * h;
      combine<2>(stage, y, h, A2{dp::a31, dp::a32}, {&k1, &k2});
      evaluate_rhs(stage, k3, scratch);
      stage.lambda = y.lambda + dp::c4 * h;
      combine<3>(stage, y, h, A3{dp::a41, dp::a42, dp::a43}, {&k1, &k2, &k3});
      evaluate_rhs(stage, k4, scratch);
      stage.lambda = y.lambda + dp::c5 * h;
      combine<4>(stage, y, h, A4{dp::a51, dp::a52, dp::a53, dp::a54}, {&k1, &k2, &k3, &k4});
      evaluate_rhs(stage, k5, scratch);
      stage.lambda = y.lambda + h;
      combine<5>(stage, y, h, A5{dp::a61, dp::a62, dp::a63, dp::a64, dp::a65}, {&k1, &k2, &k3, &k4, &k5});
      evaluate_rhs(stage, k6, scratch);
      combine<6>(ynew, y, h, A6{dp::a71, 0.0, dp::a73, dp::a74, dp::a75, dp::a76}, {&k1, &k2, &k3, &k4, &k5, &k6});
      ynew.lambda = clamped ? 0.0 : y.lambda + h;
      evaluate_rhs(ynew, k7, scratch);
      traj.stats.evaluations += 6;
      err = error_norm(y, ynew);
      if (!std::isfinite(err)) ok = false;
      if (ok && coupled_pair_passed(y, ynew, coupling_floor)) ok = false;
    } catch (const SingularityError&) {
      ok = false;
    }

    if (!ok) {
      ++traj.stats.rejected;
      h *= 0.25;
      last_rejected = true;
      continue;
    }

    const double fac11 = std::pow(err, expo1);
    if (err <= 1.0) {
      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(0.1, std::min(5.0, fac / safe));
      double hnew = h / fac;
      facold = std::max(err, 1e-4);
      traj.stats.smallest_step = std::min(traj.stats.smallest_step, std::abs(h));
      ++traj.stats.accepted;
      std::swap(y, ynew);
      std::swap(k1, k7);
      if (!y.x.allFinite() || !y.v.allFinite() || !y.l.allFinite())
        throw IntegrationError("integrate: non-finite state at lambda = " + std::to_string(y.lambda), y.lambda);
      const double defect = y.anti_hermitian_defect();
      traj.stats.max_anti_hermitian_defect = std::max(traj.stats.max_anti_hermitian_defect, defect);
      if (defect > 1e-10 * std::max(1.0, l_scale))
        throw IntegrationError("integrate: l lost its anti-Hermitian structure at lambda = " + std::to_string(y.lambda),
                               y.lambda);
      monitor.update(y, traj.stats);
      traj.nodes.push_back(make_node(y, k1));
      if (last_rejected) hnew = -std::min(std::abs(hnew), std::abs(h));
      h = -std::min(std::abs(hnew), cfg.max_step);
      last_rejected = false;
    } else {
      ++traj.stats.rejected;
      h /= std::min(5.0, fac11 / safe);
      last_rejected = true;
    }
  }
  traj.final_state = y;

  const int points = cfg.dense_output_points;
  traj.samples.reserve(points);
  for (int k = 0; k < points; ++k) {
    const double lambda = k == points - 1 ? 0.0 : 1.0 - static_cast<double>(k) / (points - 1);
    traj.samples.push_back(traj.sample_at(lambda));
  }
  return traj;
}

// ---------------------------------------------------------------------------

inline constexpr int kOracleMaxDim = 64;

/// Levels of H(lambda) by direct diagonalization on an equally spaced grid
/// from lambda = 1 to lambda = 0.
inline Trajectory track_spectrum_oracle(const ProblemDefinition& p, int grid_points) {
  p.validate();
  if (p.dim() > kOracleMaxDim)
    throw ValidationError("track_spectrum_oracle: dim " + std::to_string(p.dim()) + " exceeds the limit of " +
                          std::to_string(kOracleMaxDim));
  if (grid_points < 2) throw ValidationError("track_spectrum_oracle: need at least 2 grid points");
  Trajectory t;
  t.samples.reserve(grid_points);
  const ComplexMatrix bias = p.z * p.hb.entries();
  for (int k = 0; k < grid_points; ++k) {
    const double lambda = k == grid_points - 1 ? 0.0 : 1.0 - static_cast<double>(k) / (grid_points - 1);
    const Spectrum s = diagonalize(p.at(lambda), "H(lambda)");
    TrajectorySample sample;
    sample.lambda = lambda;
    sample.x = s.eigenvalues;
    sample.v = (s.eigenvectors.adjoint() * bias * s.eigenvectors).diagonal().real();
    t.samples.push_back(std::move(sample));
  }
  return t;
}

struct OracleDeviation {
  double max_abs = 0.0;
  double relative = 0.0;  // max_abs / spectral range of the oracle
  double lambda = 0.0;
  int level = -1;
};

/// Largest level deviation between an integrated trajectory and an oracle grid.
inline OracleDeviation compare_with_oracle(const Trajectory& integrated, const Trajectory& oracle) {
  OracleDeviation d;
  for (const auto& s : oracle.samples) {
    const RealVector x = integrated.levels_at(s.lambda);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double dev = std::abs(x(k) - s.x(k));
      if (dev > d.max_abs) {
        d.max_abs = dev;
        d.lambda = s.lambda;
        d.level = static_cast<int>(k);
      }
    }
  }
  const double range = oracle.spectral_range();
  d.relative = range > 0.0 ? d.max_abs / range : d.max_abs;
  return d;
}

}  // namespace pechukas
