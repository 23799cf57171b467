#pragma once

// Mean-field kinetic description of the level gas. f(n, x, v) is a phase-space
// density per occupation label n, evolved by
//   df/dlambda + v df/dx + a(x) df/dv = I_St,
//   a(x) = 2 Gamma PV sum_m int dy du f(y, u, m) / (x - y)^3,
// with an optional population-exchange collision term between labels.
// Experimental: there are no reference numbers to match, only properties.

#include <math.h>  // boost's pchip calls isnan unqualified

#include <Eigen/Dense>
#include <boost/math/interpolators/pchip.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pechukas/error.hpp"
#include "pechukas/hamiltonian.hpp"
#include "pechukas/state.hpp"

namespace pechukas {

/// Cell-centred uniform grid: cell i spans [lo + i*step, lo + (i+1)*step].
struct UniformGrid {
  double lo = 0.0;
  double step = 1.0;
  int cells = 1;

  double center(int i) const { return lo + (i + 0.5) * step; }
  double edge(int i) const { return lo + i * step; }
  double hi() const { return edge(cells); }

  /// Cell index containing y, or -1 when outside.
  int locate(double y) const {
    const double t = (y - lo) / step;
    if (!(t >= 0.0) || t >= cells) return -1;
    return static_cast<int>(t);
  }

  static UniformGrid spanning(double a, double b, int cells) {
    if (!(b > a) || cells < 4) throw ValidationError("UniformGrid: need b > a and at least 4 cells");
    return {a, (b - a) / cells, cells};
  }
};

struct PhaseSpaceDistribution {
  UniformGrid x;
  UniformGrid v;
  int labels = 1;
  std::vector<double> f;  // (label, ix, iv), row-major

  PhaseSpaceDistribution() = default;
  PhaseSpaceDistribution(UniformGrid gx, UniformGrid gv, int n_labels)
      : x(gx), v(gv), labels(n_labels), f(static_cast<std::size_t>(n_labels) * gx.cells * gv.cells, 0.0) {
    if (n_labels < 1) throw ValidationError("PhaseSpaceDistribution: need at least one label");
  }

  std::size_t index(int n, int ix, int iv) const {
    return (static_cast<std::size_t>(n) * x.cells + ix) * v.cells + iv;
  }
  double& operator()(int n, int ix, int iv) { return f[index(n, ix, iv)]; }
  double operator()(int n, int ix, int iv) const { return f[index(n, ix, iv)]; }

  double cell_measure() const { return x.step * v.step; }

  double mass(int n) const {
    double s = 0.0;
    for (int ix = 0; ix < x.cells; ++ix)
      for (int iv = 0; iv < v.cells; ++iv) s += (*this)(n, ix, iv);
    return s * cell_measure();
  }

  double total_mass() const {
    double s = 0.0;
    for (double value : f) s += value;
    return s * cell_measure();
  }

  double momentum() const {
    double s = 0.0;
    for (int n = 0; n < labels; ++n)
      for (int ix = 0; ix < x.cells; ++ix)
        for (int iv = 0; iv < v.cells; ++iv) s += v.center(iv) * (*this)(n, ix, iv);
    return s * cell_measure();
  }

  /// Number density in x summed over labels.
  std::vector<double> x_marginal() const {
    std::vector<double> rho(x.cells, 0.0);
    for (int n = 0; n < labels; ++n)
      for (int ix = 0; ix < x.cells; ++ix)
        for (int iv = 0; iv < v.cells; ++iv) rho[ix] += (*this)(n, ix, iv);
    for (double& r : rho) r *= v.step;
    return rho;
  }

  /// r.m.s. width of the x marginal.
  double x_spread() const {
    const std::vector<double> rho = x_marginal();
    double m0 = 0, m1 = 0, m2 = 0;
    for (int ix = 0; ix < x.cells; ++ix) {
      const double c = x.center(ix);
      m0 += rho[ix];
      m1 += rho[ix] * c;
      m2 += rho[ix] * c * c;
    }
    if (!(m0 > 0.0)) return 0.0;
    const double mean = m1 / m0;
    return std::sqrt(std::max(0.0, m2 / m0 - mean * mean));
  }

  double min_value() const { return f.empty() ? 0.0 : *std::min_element(f.begin(), f.end()); }
};

/// Histogram of gas particles (density, so integrating gives the particle
/// count per label). labels[k] selects the label of particle k; empty puts
/// every particle in label 0. Particles outside the grid are dropped.
inline PhaseSpaceDistribution bin_particles(const RealVector& xs, const RealVector& vs, const UniformGrid& gx,
                                            const UniformGrid& gv, int n_labels = 1,
                                            const std::vector<int>& labels = {}) {
  if (xs.size() != vs.size()) throw ValidationError("bin_particles: x and v sizes differ");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != xs.size())
    throw ValidationError("bin_particles: one label per particle required");
  PhaseSpaceDistribution d(gx, gv, n_labels);
  const double w = 1.0 / d.cell_measure();
  for (Eigen::Index k = 0; k < xs.size(); ++k) {
    const int n = labels.empty() ? 0 : labels[k];
    if (n < 0 || n >= n_labels) throw ValidationError("bin_particles: label out of range");
    const int ix = gx.locate(xs(k)), iv = gv.locate(vs(k));
    if (ix >= 0 && iv >= 0) d(n, ix, iv) += w;
  }
  return d;
}

inline PhaseSpaceDistribution bin_state(const PechukasState& s, const UniformGrid& gx, const UniformGrid& gv,
                                        int n_labels = 1, const std::vector<int>& labels = {}) {
  return bin_particles(s.x, s.v, gx, gv, n_labels, labels);
}

struct KineticConfig {
  double gamma_mf = 0.0;  // effective repulsion, mean |l_jk|^2
  double gamma_st = 0.0;  // collision constant; 0 is collisionless
  double pv_cutoff = 2.0;  // excluded half-width around y = x, in x cells
  double cfl = 0.4;
  double kappa = 1.0;  // exchange kernel p(w) = exp(-kappa / |w|)

  void validate() const {
    if (!(gamma_mf >= 0.0)) throw ValidationError("KineticConfig: gamma_mf must be >= 0");
    if (!(gamma_st >= 0.0)) throw ValidationError("KineticConfig: gamma_st must be >= 0");
    if (!(pv_cutoff >= 1.0)) throw ValidationError("KineticConfig: pv_cutoff must be >= 1 cell");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ValidationError("KineticConfig: cfl must lie in (0, 1]");
    if (!(kappa >= 0.0)) throw ValidationError("KineticConfig: kappa must be >= 0");
  }
};

/// Mean |l_jk|^2 over every off-diagonal entry of every sample.
inline double estimate_gamma(const std::vector<ComplexMatrix>& l_samples) {
  if (l_samples.empty()) throw ValidationError("estimate_gamma: no samples");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& l : l_samples) {
    if (l.rows() != l.cols() || l.rows() < 2) throw ValidationError("estimate_gamma: samples must be square, dim >= 2");
    for (Eigen::Index j = 0; j < l.rows(); ++j)
      for (Eigen::Index k = 0; k < l.cols(); ++k)
        if (j != k) sum += std::norm(l(j, k));
    count += static_cast<std::size_t>(l.rows() * (l.rows() - 1));
  }
  return sum / static_cast<double>(count);
}

/// a(x_i) = 2 Gamma sum_{|x_i - y_j| >= cutoff} rho_j dx / (x_i - y_j)^3.
inline std::vector<double> mean_field_force(const PhaseSpaceDistribution& f, const KineticConfig& cfg) {
  cfg.validate();
  const int nx = f.x.cells;
  std::vector<double> a(nx, 0.0);
  if (cfg.gamma_mf == 0.0) return a;
  const std::vector<double> rho = f.x_marginal();
  const double h = f.x.step;
  for (int i = 0; i < nx; ++i) {
    double s = 0.0;
    for (int j = 0; j < nx; ++j) {
      const int sep = i - j;
      if (std::abs(sep) < cfg.pv_cutoff || rho[j] == 0.0) continue;
      const double d = sep * h;
      s += rho[j] / (d * d * d);
    }
    a[i] = 2.0 * cfg.gamma_mf * s * h;
  }
  return a;
}

namespace detail {

// Conservative remap of one row of cell values by a rigid shift (physical
// units). The cumulative mass at cell edges is interpolated with a monotone
// cubic, so the result stays non-negative and no mass is created; mass pushed
// past either end leaves the grid.
class RowShifter {
 public:
  explicit RowShifter(const UniformGrid& g) : g_(g), edges_(g.cells + 1), out_(g.cells) {
    for (int k = 0; k <= g.cells; ++k) edges_[k] = g.edge(k);
  }

  template <class Get, class Put>
  void shift(double s, Get get, Put put) {
    const int n = g_.cells;
    std::vector<double> cum(n + 1);
    cum[0] = 0.0;
    for (int i = 0; i < n; ++i) cum[i + 1] = cum[i] + get(i);
    const double total = cum[n];
    if (total == 0.0 || s == 0.0) return;
    std::vector<double> xs = edges_;
    const std::vector<double> ys = cum;
    boost::math::interpolators::pchip<std::vector<double>> c(std::move(xs), std::vector<double>(ys));
    auto eval = [&](double y) {
      if (y <= g_.lo) return 0.0;
      if (y >= g_.hi()) return total;
      return c(y);
    };
    double prev = eval(edges_[0] - s);
    for (int i = 0; i < n; ++i) {
      const double next = eval(edges_[i + 1] - s);
      out_[i] = std::max(0.0, next - prev);
      prev = next;
    }
    for (int i = 0; i < n; ++i) put(i, out_[i]);
  }

 private:
  UniformGrid g_;
  std::vector<double> edges_;
  std::vector<double> out_;
};

inline void stream_x(PhaseSpaceDistribution& f, double dlambda) {
  RowShifter shifter(f.x);
  for (int n = 0; n < f.labels; ++n)
    for (int iv = 0; iv < f.v.cells; ++iv) {
      const double s = f.v.center(iv) * dlambda;
      shifter.shift(
          s, [&](int ix) { return f(n, ix, iv); }, [&](int ix, double value) { f(n, ix, iv) = value; });
    }
}

inline void kick_v(PhaseSpaceDistribution& f, const std::vector<double>& a, double dlambda) {
  RowShifter shifter(f.v);
  for (int n = 0; n < f.labels; ++n)
    for (int ix = 0; ix < f.x.cells; ++ix) {
      const double s = a[ix] * dlambda;
      shifter.shift(
          s, [&](int iv) { return f(n, ix, iv); }, [&](int iv, double value) { f(n, ix, iv) = value; });
    }
}

inline double exchange_kernel(double w, double kappa) {
  const double aw = std::abs(w);
  if (aw == 0.0) return 0.0;
  return std::exp(-kappa / aw);
}

// Largest loss rate of any f(n, x, v) under the collision term.
inline double max_collision_rate(const PhaseSpaceDistribution& f, const KineticConfig& cfg) {
  if (cfg.gamma_st == 0.0 || f.labels < 2) return 0.0;
  double worst = 0.0;
  for (int ix = 0; ix < f.x.cells; ++ix)
    for (int iv = 0; iv < f.v.cells; ++iv) {
      double rate = 0.0;
      for (int m = 0; m < f.labels; ++m)
        for (int iu = 0; iu < f.v.cells; ++iu) {
          const double w = f.v.center(iu) - f.v.center(iv);
          rate += std::abs(w) * exchange_kernel(w, cfg.kappa) * f(m, ix, iu);
        }
      worst = std::max(worst, 2.0 * cfg.gamma_st * rate * f.v.step);
    }
  return worst;
}

}  // namespace detail

/// I_St(n, x, v) = 2 Gamma_St sum_m int du (u - v) p(u - v)
///                 [f(m, x, v) f(n, x, u) - f(n, x, v) f(m, x, u)].
inline PhaseSpaceDistribution collision_integral(const PhaseSpaceDistribution& f, const KineticConfig& cfg) {
  PhaseSpaceDistribution out(f.x, f.v, f.labels);
  if (cfg.gamma_st == 0.0 || f.labels < 2) return out;
  const int nv = f.v.cells;
  Eigen::MatrixXd kern(nv, nv);  // (iv, iu): (u - v) p(u - v) du
  for (int iv = 0; iv < nv; ++iv)
    for (int iu = 0; iu < nv; ++iu) {
      const double w = f.v.center(iu) - f.v.center(iv);
      kern(iv, iu) = w * detail::exchange_kernel(w, cfg.kappa) * f.v.step;
    }
  Eigen::MatrixXd cell(f.labels, nv);
  for (int ix = 0; ix < f.x.cells; ++ix) {
    for (int n = 0; n < f.labels; ++n)
      for (int iv = 0; iv < nv; ++iv) cell(n, iv) = f(n, ix, iv);
    // (n, iv): int du k(v, u) f(n, u). Same summation order for every label,
    // so identical labels give identical moments and the bracket cancels exactly.
    Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(f.labels, nv);
    for (int n = 0; n < f.labels; ++n)
      for (int iv = 0; iv < nv; ++iv) {
        double s = 0.0;
        for (int iu = 0; iu < nv; ++iu) s += kern(iv, iu) * cell(n, iu);
        moment(n, iv) = s;
      }
    for (int n = 0; n < f.labels; ++n)
      for (int m = 0; m < f.labels; ++m) {
        if (m == n) continue;
        for (int iv = 0; iv < nv; ++iv)
          out(n, ix, iv) += 2.0 * cfg.gamma_st * (cell(m, iv) * moment(n, iv) - cell(n, iv) * moment(m, iv));
      }
  }
  return out;
}

/// Largest |dlambda| the CFL bound admits for the current state.
inline double admissible_step(const PhaseSpaceDistribution& f, const KineticConfig& cfg) {
  cfg.validate();
  const double vmax = std::max(std::abs(f.v.lo), std::abs(f.v.hi()));
  double rate = vmax / f.x.step;
  const std::vector<double> a = mean_field_force(f, cfg);
  double amax = 0.0;
  for (double value : a) amax = std::max(amax, std::abs(value));
  rate = std::max(rate, amax / f.v.step);
  rate = std::max(rate, detail::max_collision_rate(f, cfg));
  return rate > 0.0 ? cfg.cfl / rate : std::numeric_limits<double>::infinity();
}

/// One Strang-split step (half stream, kick, half stream) followed by an
/// explicit collision update. dlambda may be negative.
inline PhaseSpaceDistribution step_kinetic(const PhaseSpaceDistribution& f, const KineticConfig& cfg, double dlambda) {
  cfg.validate();
  const double limit = admissible_step(f, cfg);
  if (std::abs(dlambda) > limit) {
    std::ostringstream os;
    os << "step_kinetic: |dlambda| = " << std::abs(dlambda) << " exceeds the CFL bound " << limit;
    throw CflError(os.str(), limit);
  }
  PhaseSpaceDistribution g = f;
  if (cfg.gamma_mf > 0.0) {
    detail::stream_x(g, 0.5 * dlambda);
    detail::kick_v(g, mean_field_force(g, cfg), dlambda);
    detail::stream_x(g, 0.5 * dlambda);
  } else {
    detail::stream_x(g, dlambda);  // the two half-shifts compose exactly
  }
  if (cfg.gamma_st > 0.0 && g.labels > 1) {
    const PhaseSpaceDistribution c = collision_integral(g, cfg);
    const double h = std::abs(dlambda);  // exchange relaxes in either sweep direction
    for (std::size_t k = 0; k < g.f.size(); ++k) g.f[k] += h * c.f[k];
  }
  return g;
}

/// Advances by delta_lambda in steps no larger than the CFL bound.
inline PhaseSpaceDistribution evolve_kinetic(PhaseSpaceDistribution f, const KineticConfig& cfg, double delta_lambda,
                                             int* steps_taken = nullptr) {
  const double sign = delta_lambda < 0.0 ? -1.0 : 1.0;
  double remaining = std::abs(delta_lambda);
  int steps = 0;
  while (remaining > 0.0) {
    const double h = std::min(remaining, 0.999 * admissible_step(f, cfg));
    f = step_kinetic(f, cfg, sign * h);
    remaining -= h;
    if (remaining < 1e-14 * std::abs(delta_lambda)) remaining = 0.0;
    ++steps;
  }
  if (steps_taken) *steps_taken = steps;
  return f;
}

}  // namespace pechukas
