// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// The N = 50 campaign is checkpointed under PECHUKAS_CACHE_DIR so reruns are cheap.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pechukas/ensemble.hpp"
#include "pechukas/gas.hpp"
#include "pechukas/hamiltonian.hpp"
#include "pechukas/kinetic.hpp"
#include "pechukas/transitions.hpp"
#include "pechukas/verification.hpp"

#ifndef PECHUKAS_CACHE_DIR
#define PECHUKAS_CACHE_DIR ""
#endif

using namespace pechukas;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Conservation {
  double momentum = 0.0, energy = 0.0, anti_hermitian = 0.0;
  int runs = 0;

  void add(const TrajectoryStats& s) {
    momentum = std::max(momentum, s.max_momentum_drift);
    energy = std::max(energy, s.max_energy_drift);
    anti_hermitian = std::max(anti_hermitian, s.max_anti_hermitian_defect);
    ++runs;
  }
};

Conservation conservation;
std::optional<EnsembleStatistics> campaign;

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

const EnsembleStatistics& campaign_statistics() {
  if (!campaign) {
    CampaignSpec spec;
    spec.checkpoint_dir = PECHUKAS_CACHE_DIR;
    int done = 0;
    campaign = run_campaign(spec, [&](const RealizationResult&, bool) {
      if (++done % 10 == 0) std::fprintf(stderr, "campaign: %d/%d realizations\n", done, spec.realizations);
    });
    conservation.momentum = std::max(conservation.momentum, campaign->max_momentum_drift);
    conservation.energy = std::max(conservation.energy, campaign->max_energy_drift);
    conservation.anti_hermitian = std::max(conservation.anti_hermitian, campaign->max_anti_hermitian_defect);
    conservation.runs += campaign->realizations_completed;
  }
  return *campaign;
}

Outcome cnot() {
  const ProblemDefinition p = cnot_problem({-0.1}, 10.0);
  const Trajectory t = integrate(p, initial_conditions_perturbative(p));
  conservation.add(t.stats);
  const EndpointReport r = verify_endpoints(t, p.h0, 4.0, 1e-9);
  return {r.passed() && r.levels.size() == 16,
          fmt("worst %.2f significant figures over %zu levels, multiplicities %s", r.worst_figures(), r.levels.size(),
              r.multiplicities_match() ? "match" : "differ")};
}

Outcome oracle_equivalence() {
  IntegratorConfig cfg;
  cfg.dense_output_points = 200;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ProblemDefinition p = sample_ensemble({8, EnsembleKind::GUE, 0.5, BiasKind::RandomSameEnsemble, seed});
    const Trajectory t = integrate(p, initial_conditions_exact(p), cfg);
    conservation.add(t.stats);
    worst = std::max(worst, compare_with_oracle(t, track_spectrum_oracle(p, 200)).relative);
  }
  return {worst < 1e-6, fmt("worst deviation %.3e of the spectral range (limit 1e-6)", worst)};
}

Outcome two_level() {
  const double a = 0.5, d = -0.5, b1 = -1.0, b2 = 1.0;
  const cplx c(0.1, 0.05);
  ComplexMatrix h0(2, 2);
  h0 << a, c, std::conj(c), d;
  RealVector b(2);
  b << b1, b2;
  const ProblemDefinition p{HermitianMatrix(h0), HermitianMatrix::diagonal(b), 1.0, 1.0};
  IntegratorConfig cfg;
  cfg.dense_output_points = 400;
  const Trajectory t = integrate(p, initial_conditions_exact(p), cfg);
  conservation.add(t.stats);

  const auto n = static_cast<Eigen::Index>(t.samples.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd g2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = t.samples[i];
    design.row(i) << 1.0, s.lambda, s.lambda * s.lambda;
    g2(i) = std::pow(s.x(1) - s.x(0), 2);
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(g2);
  const double residual = (design * coef - g2).cwiseAbs().maxCoeff() / g2.cwiseAbs().maxCoeff();
  return {residual < 1e-9, fmt("relative residual of quadratic fit %.3e (limit 1e-9)", residual)};
}

Outcome scaling() {
  const EnsembleStatistics& st = campaign_statistics();
  auto gamma = [&](int level) -> std::optional<double> {
    const LevelFits f = fit_level(st, level, CampaignSpec{}.saturation_cutoff);
    if (!f.survival) return std::nullopt;
    return f.survival->gamma;
  };
  const auto g1 = gamma(1), g25 = gamma(25), g50 = gamma(50);
  if (!g1 || !g25 || !g50) return {false, "a fit window was empty"};
  const bool bulk = *g25 >= 0.4 && *g25 <= 0.6;
  const bool edges = *g1 <= 0.35 && *g50 <= 0.35 && *g1 < *g25 && *g50 < *g25;
  return {bulk && edges, fmt("gamma(1) = %.3f, gamma(25) = %.3f, gamma(50) = %.3f over %d realizations", *g1, *g25,
                             *g50, st.realizations_completed)};
}

Outcome saturation() {
  const EnsembleStatistics& st = campaign_statistics();
  double worst = 1.0;
  int worst_level = 0;
  double worst_inv_t = 0.0;
  for (std::size_t i = 0; i < st.sweep_times.size(); ++i) {
    const double inv_t = 1.0 / st.sweep_times[i];
    if (!(inv_t < 0.01)) continue;
    for (int level : st.tracked_levels)
      if (st.survival_mean(i, level - 1) < worst) {
        worst = st.survival_mean(i, level - 1);
        worst_level = level;
        worst_inv_t = inv_t;
      }
  }
  return {worst >= 0.98, fmt("lowest mean survival %.4f (level %d, 1/T = %.4g; limit 0.98)", worst, worst_level,
                             worst_inv_t)};
}

Outcome crossing_counts() {
  const Eigen::VectorXd& c = campaign_statistics().crossing_counts;
  const double peak = c.maxCoeff();
  double second = 0.0;
  for (Eigen::Index i = 1; i + 1 < c.size(); ++i) second = std::max(second, std::abs(c(i - 1) - 2 * c(i) + c(i + 1)));
  const double first = c(0), last = c(c.size() - 1);
  return {second <= 0.25 * peak && first < 1.0 && last < 1.0,
          fmt("peak %.3f, max second difference %.3f, edge means %.3f and %.3f", peak, second, first, last)};
}

Outcome transfer_vs_hopping() {
  const int n = 5;
  const std::int64_t samples = 100000;
  std::mt19937_64 rng(2718);
  std::uniform_int_distribution<int> pair(0, n - 2);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double worst = 0.0;  // in units of sigma
  int compared = 0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> lambdas(12);
    for (auto& l : lambdas) l = uni(rng);
    std::sort(lambdas.rbegin(), lambdas.rend());
    std::vector<AnticrossingEvent> events;
    for (double l : lambdas) {
      AnticrossingEvent e;
      e.lower_level = pair(rng);
      e.lambda_star = l;
      e.p_lz = uni(rng);
      events.push_back(e);
    }
    const OccupationMatrix occ = propagate_occupations(events, n);
    for (int start = 0; start < n; ++start) {
      const auto hist = simulate_hopping(events, n, start, samples, 1000 + 10 * trial + start);
      for (int m = 0; m < n; ++m) {
        const double p = occ(m, start);
        const double sigma = std::sqrt(p * (1 - p) / samples);
        const double diff = std::abs(double(hist[m]) / samples - p);
        if (sigma > 0.0)
          worst = std::max(worst, diff / sigma);
        else if (diff > 0.0)
          worst = INFINITY;
        ++compared;
      }
    }
  }
  return {worst <= 3.0, fmt("worst deviation %.2f sigma over %d entries", worst, compared)};
}

Outcome kinetic() {
  auto bump = [](double x, double v) {
    return std::exp(-x * x / (2 * 0.3 * 0.3) - (v - 0.5) * (v - 0.5) / (2 * 0.4 * 0.4));
  };

  // collisionless streaming of a single label without mean field
  const auto gx = UniformGrid::spanning(-4, 4, 256), gv = UniformGrid::spanning(-2, 2, 256);
  PhaseSpaceDistribution f(gx, gv, 1);
  for (int ix = 0; ix < gx.cells; ++ix)
    for (int iv = 0; iv < gv.cells; ++iv) f(0, ix, iv) = bump(gx.center(ix), gv.center(iv));
  double stream_err = 0.0;
  for (double dl : {0.1, -0.1}) {
    const PhaseSpaceDistribution g = evolve_kinetic(f, KineticConfig{}, dl);
    for (int ix = 0; ix < gx.cells; ++ix)
      for (int iv = 0; iv < gv.cells; ++iv) {
        const double v = gv.center(iv);
        stream_err = std::max(stream_err, std::abs(g(0, ix, iv) - bump(gx.center(ix) - v * dl, v)));
      }
  }

  // exchange term on a label-independent density
  const auto cx = UniformGrid::spanning(-1, 1, 6), cv = UniformGrid::spanning(-2, 2, 24);
  PhaseSpaceDistribution u(cx, cv, 3);
  for (int n = 0; n < 3; ++n)
    for (int ix = 0; ix < cx.cells; ++ix)
      for (int iv = 0; iv < cv.cells; ++iv)
        u(n, ix, iv) = std::exp(-cx.center(ix) * cx.center(ix) - std::pow(cv.center(iv) - 0.3, 2));
  KineticConfig ccfg;
  ccfg.gamma_st = 0.8;
  ccfg.kappa = 0.5;
  double collision = 0.0;
  for (double value : collision_integral(u, ccfg).f) collision = std::max(collision, std::abs(value));

  // mean-field spread against a binned direct simulation
  const ProblemDefinition p = sample_ensemble({100, EnsembleKind::GUE, 0.1, BiasKind::PicketFence, 7});
  const PechukasState s0 = initial_conditions_exact(p);
  const Trajectory t = integrate(p, s0);
  conservation.add(t.stats);
  const double delta = -0.5;
  RealVector x, v;
  t.particles_at(1.0 + delta, x, &v);
  const double xlo = std::min(s0.x.minCoeff(), x.minCoeff()) - 5, xhi = std::max(s0.x.maxCoeff(), x.maxCoeff()) + 5;
  const double vlo = std::min(s0.v.minCoeff(), v.minCoeff()) - 5, vhi = std::max(s0.v.maxCoeff(), v.maxCoeff()) + 5;
  const auto kx = UniformGrid::spanning(xlo, xhi, 256), kv = UniformGrid::spanning(vlo, vhi, 128);
  KineticConfig cfg;
  cfg.gamma_mf = estimate_gamma({s0.l});
  const double kinetic_spread = evolve_kinetic(bin_state(s0, kx, kv), cfg, delta).x_spread();
  const double direct_spread = bin_particles(x, v, kx, kv).x_spread();
  const double spread_err = std::abs(kinetic_spread - direct_spread) / direct_spread;

  return {stream_err < 1e-3 && collision == 0.0 && spread_err <= 0.15,
          fmt("streaming error %.2e, label-uniform collision %.1e, spread %.3f vs %.3f (%.1f%%)", stream_err, collision,
              kinetic_spread, direct_spread, 100 * spread_err)};
}

Outcome conservation_check() {
  campaign_statistics();
  const bool pass = conservation.momentum < 1e-8 && conservation.energy < 1e-8 && conservation.anti_hermitian < 1e-10;
  return {pass, fmt("over %d runs: momentum drift %.2e, energy drift %.2e, anti-Hermitian defect %.2e",
                    conservation.runs, conservation.momentum, conservation.energy, conservation.anti_hermitian)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"cnot endpoints", cnot},
      {"integrator vs diagonalization", oracle_equivalence},
      {"two-level gap quadratic", two_level},
      {"survival scaling exponents", scaling},
      {"survival saturation", saturation},
      {"smooth crossing counts", crossing_counts},
      {"transfer matrix vs hopping", transfer_vs_hopping},
      {"kinetic properties", kinetic},
      // last, so it covers every run above
      {"conservation", conservation_check},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
