// Command-line front end: simulate, cnot, ensemble, kinetic, oracle-check.
// Data goes to files under --out; stdout carries one summary line.

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pechukas/ensemble.hpp"
#include "pechukas/gas.hpp"
#include "pechukas/hamiltonian.hpp"
#include "pechukas/io.hpp"
#include "pechukas/kinetic.hpp"
#include "pechukas/transitions.hpp"
#include "pechukas/verification.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pechukas;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCompute = 1;
constexpr int kExitValidation = 2;

/// Flag value if given, else the config file entry "section.key", else the default.
class Settings {
 public:
  void load(const std::string& path) {
    if (path.empty()) return;
    if (!fs::is_regular_file(path)) throw ValidationError("cannot open config file '" + path + "'");
    try {
      boost::property_tree::read_ini(path, tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ValidationError("config file '" + path + "': " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
  }

  template <class T>
  T get(const std::optional<T>& flag, const std::string& key, const T& fallback) const {
    if (flag) return *flag;
    try {
      if (auto v = tree_.get_optional<T>(key)) return *v;
    } catch (const boost::property_tree::ptree_bad_data&) {
      throw ValidationError("config entry '" + key + "' has the wrong type");
    }
    return fallback;
  }

 private:
  boost::property_tree::ptree tree_;
};

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> dim;
  std::optional<int> realizations;
  std::optional<double> z;
  std::optional<double> rel_tol;
  std::optional<double> abs_tol;
  std::optional<int> dense_points;
  std::optional<double> max_step;
};

IntegratorConfig integrator_from(const Settings& s, const Common& c, int default_dense = 2000) {
  IntegratorConfig cfg;
  cfg.rel_tol = s.get(c.rel_tol, "integrator.rel_tol", cfg.rel_tol);
  cfg.abs_tol = s.get(c.abs_tol, "integrator.abs_tol", cfg.abs_tol);
  cfg.max_step = s.get(c.max_step, "integrator.max_step", cfg.max_step);
  cfg.min_step = s.get(std::optional<double>{}, "integrator.min_step", cfg.min_step);
  cfg.dense_output_points = s.get(c.dense_points, "integrator.dense_output_points", default_dense);
  cfg.validate();
  return cfg;
}

void prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ValidationError("output directory '" + dir + "' is not writable");
  const fs::path probe = fs::path(dir) / ".write_probe";
  {
    std::ofstream p(probe);
    if (!p) throw ValidationError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

json decision_constants() {
  return {{"hermiticity_tolerance", kHermiticityTolerance},
          {"degeneracy_tolerance_fraction", 1e-9},
          {"near_degenerate_fraction", kNearDegenerateFraction},
          {"lambda_refinement_tolerance", kLambdaTolerance},
          {"oracle_max_dim", kOracleMaxDim},
          {"campaign_failure_limit", 0.05}};
}

json manifest(const std::string& command, const std::vector<std::string>& argv) {
  return {{"version", kVersion}, {"command", command}, {"argv", argv}, {"decision_constants", decision_constants()}};
}

EnsembleKind parse_ensemble_kind(const std::string& s) {
  if (s == "gue" || s == "GUE") return EnsembleKind::GUE;
  if (s == "goe" || s == "GOE") return EnsembleKind::GOE;
  throw ValidationError("unknown ensemble '" + s + "' (expected gue or goe)");
}

BiasKind parse_bias_kind(const std::string& s) {
  if (s == "picket-fence") return BiasKind::PicketFence;
  if (s == "random") return BiasKind::RandomSameEnsemble;
  throw ValidationError("unknown bias kind '" + s + "' (expected picket-fence or random)");
}

InitialConditionKind parse_initial(const std::string& s) {
  if (s == "exact") return InitialConditionKind::Exact;
  if (s == "perturbative") return InitialConditionKind::Perturbative;
  throw ValidationError("unknown initial conditions '" + s + "' (expected exact or perturbative)");
}

PechukasState initial_state(const ProblemDefinition& p, InitialConditionKind k) {
  return k == InitialConditionKind::Exact ? initial_conditions_exact(p) : initial_conditions_perturbative(p);
}

std::vector<int> parse_levels(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ValidationError("bad level index '" + tok + "'");
    }
  }
  return out;
}

std::vector<double> parse_reals(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ValidationError("bad number '" + tok + "'");
    }
  }
  return out;
}

// Avoided crossing of two levels at lambda = 0.5; gap^2 = (1 - 2 lambda)^2 + 0.04.
ProblemDefinition two_level_demo() {
  Eigen::MatrixXd h0(2, 2), hb(2, 2);
  h0 << 0.5, 0.1, 0.1, -0.5;
  hb << -1.0, 0.0, 0.0, 1.0;
  return {HermitianMatrix::from_real(h0), HermitianMatrix::from_real(hb), 1.0, 1.0};
}

// --- simulate ------------------------------------------------------------

struct SimulateArgs {
  std::string h0, hb;
  std::string demo = "two-level";
  std::optional<double> sweep_time, hbar, sigma;
  std::optional<std::string> initial, ensemble;
};

int cmd_simulate(const Common& c, const SimulateArgs& a, const Settings& s, const std::vector<std::string>& argv) {
  const IntegratorConfig icfg = integrator_from(s, c);
  const SweepSpec sweep{s.get(a.sweep_time, "sweep.total_time", 10.0), s.get(a.hbar, "sweep.hbar", 1.0)};
  sweep.validate();
  const InitialConditionKind ick = parse_initial(s.get(a.initial, "simulate.initial", std::string("exact")));
  const std::uint64_t seed = s.get(c.seed, "simulate.seed", std::uint64_t{0});

  ProblemDefinition p;
  std::string source;
  if (!a.h0.empty() || !a.hb.empty()) {
    if (a.h0.empty() || a.hb.empty()) throw ValidationError("--h0 and --hb must be given together");
    p.h0 = read_matrix_file(a.h0);
    p.hb = read_matrix_file(a.hb);
    p.z = s.get(c.z, "problem.z", 1.0);
    source = "files";
  } else if (a.demo == "two-level") {
    p = two_level_demo();
    if (c.z) p.z = *c.z;
    source = "two-level demo";
  } else if (a.demo == "gue" || a.demo == "goe") {
    EnsembleSpec es;
    es.dim = s.get(c.dim, "ensemble.dim", 8);
    es.kind = parse_ensemble_kind(a.demo);
    es.sigma_h0 = s.get(a.sigma, "ensemble.sigma_h0", 0.1);
    es.hb_kind = BiasKind::PicketFence;
    es.seed = seed;
    es.validate();
    p = sample_ensemble(es, s.get(c.z, "problem.z", 1.0));
    source = a.demo + " sample";
  } else {
    throw ValidationError("unknown demo '" + a.demo + "' (expected two-level, gue or goe)");
  }
  p.hbar = sweep.hbar;
  p.validate();
  prepare_out(c.out);

  spdlog::info("simulate: {} levels from {}", p.dim(), source);
  const Trajectory traj = integrate(p, initial_state(p, ick), icfg);
  DetectionReport det = detect_anticrossings(traj);
  for (const auto& w : det.warnings) spdlog::warn("{}", w);
  assign_probabilities(det.events, sweep);
  const OccupationMatrix occ = propagate_occupations(det.events, p.dim());

  const fs::path out(c.out);
  write_trajectory_csv(out / "trajectory.csv", traj);
  write_events_csv(out / "events.csv", det.events);
  write_occupation_csv(out / "occupation.csv", occ);
  json m = manifest("simulate", argv);
  m["source"] = source;
  m["seed"] = seed;
  m["dim"] = p.dim();
  m["z"] = p.z;
  m["sweep"] = {{"total_time", sweep.total_time}, {"hbar", sweep.hbar}};
  m["initial_conditions"] = to_string(ick);
  m["integrator"] = to_json(icfg);
  m["stats"] = to_json(traj.stats);
  m["conservation"] = {{"momentum_drift", traj.stats.max_momentum_drift},
                       {"energy_drift", traj.stats.max_energy_drift},
                       {"anti_hermitian_defect", traj.stats.max_anti_hermitian_defect}};
  m["events"] = det.events.size();
  m["warnings"] = det.warnings;
  write_json(out / "metadata.json", m);
  std::cout << "simulate: ok, " << p.dim() << " levels, " << traj.stats.accepted << " steps, " << det.events.size()
            << " anticrossings, out=" << c.out << '\n';
  return kExitOk;
}

// --- cnot ------------------------------------------------------------------

struct CnotArgs {
  std::optional<double> epsilon, sig_figs, gap_tol;
  std::optional<std::string> initial;
};

int cmd_cnot(const Common& c, const CnotArgs& a, const Settings& s, const std::vector<std::string>& argv) {
  const IntegratorConfig icfg = integrator_from(s, c);
  CnotConfig cc;
  cc.epsilon = s.get(a.epsilon, "cnot.epsilon", cc.epsilon);
  const double z = s.get(c.z, "cnot.z", 10.0);
  const double figs = s.get(a.sig_figs, "cnot.significant_figures", 4.0);
  const double gap_tol = s.get(a.gap_tol, "cnot.gap_tolerance", 1e-9);
  const InitialConditionKind ick = parse_initial(s.get(a.initial, "cnot.initial", std::string("perturbative")));
  if (!(z > 0.0)) throw ValidationError("--z must be positive");
  const ProblemDefinition p = cnot_problem(cc, z);
  prepare_out(c.out);

  const Trajectory traj = integrate(p, initial_state(p, ick), icfg);
  const EndpointReport report = verify_endpoints(traj, p.h0, figs, gap_tol);

  const fs::path out(c.out);
  write_trajectory_csv(out / "trajectory.csv", traj);
  {
    CsvWriter w(out / "cnot_levels.csv", {"level", "integrated", "exact", "relative_error", "significant_figures"});
    for (std::size_t k = 0; k < report.levels.size(); ++k) {
      const auto& l = report.levels[k];
      w.row(k + 1, l.integrated, l.exact, l.relative_error, l.significant_figures);
    }
  }
  json m = manifest("cnot", argv);
  m["epsilon"] = cc.epsilon;
  m["z"] = z;
  m["initial_conditions"] = to_string(ick);
  m["integrator"] = to_json(icfg);
  m["stats"] = to_json(traj.stats);
  m["report"] = to_json(report);
  write_json(out / "cnot_report.json", m);

  std::cout << "cnot: " << (report.passed() ? "ok" : "FAILED") << ", worst agreement "
            << report.worst_figures() << " significant figures, multiplicities "
            << (report.multiplicities_match() ? "match" : "differ") << ", out=" << c.out << '\n';
  return report.passed() ? kExitOk : kExitCompute;
}

// --- ensemble --------------------------------------------------------------

struct EnsembleArgs {
  std::optional<std::string> ensemble, hb_kind, normalization, levels, inv_t, initial;
  std::optional<double> norm_time, fluctuation_ratio, count_threshold, saturation_cutoff;
};

int cmd_ensemble(const Common& c, const EnsembleArgs& a, const Settings& s, const std::vector<std::string>& argv) {
  CampaignSpec spec;
  spec.ensemble.dim = s.get(c.dim, "ensemble.dim", spec.ensemble.dim);
  spec.ensemble.kind = parse_ensemble_kind(s.get(a.ensemble, "ensemble.kind", std::string("gue")));
  spec.ensemble.hb_kind = parse_bias_kind(s.get(a.hb_kind, "ensemble.hb_kind", std::string("random")));
  spec.realizations = s.get(c.realizations, "campaign.realizations", spec.realizations);
  spec.z = s.get(c.z, "campaign.z", spec.z);
  spec.seed = s.get(c.seed, "campaign.seed", spec.seed);
  const std::string norm = s.get(a.normalization, "campaign.normalization", std::string("spacing"));
  if (norm == "spacing") spec.normalization = Normalization::Spacing;
  else if (norm == "raw") spec.normalization = Normalization::Raw;
  else throw ValidationError("unknown normalization '" + norm + "' (expected spacing or raw)");
  spec.normalization_time = s.get(a.norm_time, "campaign.normalization_time", spec.normalization_time);
  spec.fluctuation_ratio = s.get(a.fluctuation_ratio, "campaign.fluctuation_ratio", spec.fluctuation_ratio);
  spec.count_threshold = s.get(a.count_threshold, "campaign.count_threshold", spec.count_threshold);
  spec.saturation_cutoff = s.get(a.saturation_cutoff, "campaign.saturation_cutoff", spec.saturation_cutoff);
  spec.initial_conditions = parse_initial(s.get(a.initial, "campaign.initial", std::string("exact")));
  const std::string levels = s.get(a.levels, "campaign.tracked_levels", std::string());
  spec.tracked_levels = parse_levels(levels);
  const std::string inv_t = s.get(a.inv_t, "campaign.inv_T", std::string());
  if (!inv_t.empty()) {
    spec.sweep_times.clear();
    for (double r : parse_reals(inv_t)) {
      if (!(r > 0.0)) throw ValidationError("inverse sweep times must be positive");
      spec.sweep_times.push_back(1.0 / r);
    }
  }
  spec.integrator = integrator_from(s, c, 2);
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  spec.workers = s.get(c.workers, "campaign.workers", hw);
  spec.checkpoint_dir = (fs::path(c.out) / "checkpoints").string();
  spec.validate();
  prepare_out(c.out);

  int done = 0;
  const EnsembleStatistics st = run_campaign(spec, [&](const RealizationResult& r, bool resumed) {
    ++done;
    if (!r.ok) spdlog::warn("realization {} failed: {}", r.index, r.error);
    spdlog::info("realization {} {} ({}/{})", r.index, resumed ? "resumed" : "done", done, spec.realizations);
  });
  for (const auto& w : st.warnings) spdlog::warn("{}", w);
  const auto fits = fit_tracked_levels(st, spec.saturation_cutoff);

  const fs::path out(c.out);
  write_survival_csv(out / "survival.csv", st);
  write_deviation_csv(out / "deviation.csv", st);
  write_crossings_csv(out / "crossings.csv", st);
  write_distribution_csv(out / "final_distribution.csv", st);
  write_json(out / "fits.json", fits_json(fits));
  json m = manifest("ensemble", argv);
  m["campaign"] = to_json(spec);
  m["realizations_completed"] = st.realizations_completed;
  m["realizations_failed"] = st.realizations_failed;
  m["realizations_resumed"] = st.realizations_resumed;
  m["normalization_factors"] = st.normalization_factors;
  m["max_momentum_drift"] = st.max_momentum_drift;
  m["max_energy_drift"] = st.max_energy_drift;
  m["warnings"] = st.warnings;
  write_json(out / "manifest.json", m);

  std::cout << "ensemble: ok, " << st.realizations_completed << "/" << spec.realizations << " realizations ("
            << st.realizations_resumed << " resumed), N=" << spec.ensemble.dim;
  for (const auto& f : fits)
    if (f.survival && (f.level == 1 || f.level == (spec.ensemble.dim + 1) / 2 || f.level == spec.ensemble.dim))
      std::cout << ", gamma(" << f.level << ")=" << f.survival->gamma;
  std::cout << ", out=" << c.out << '\n';
  return kExitOk;
}

// --- kinetic ---------------------------------------------------------------

struct KineticArgs {
  std::optional<double> delta_lambda, gamma_mf, gamma_st, kappa, pv_cutoff, cfl, sigma;
  std::optional<int> nx, nv, snapshots, labels;
  bool full_grid = false;
};

int cmd_kinetic(const Common& c, const KineticArgs& a, const Settings& s, const std::vector<std::string>& argv) {
  EnsembleSpec es;
  es.dim = s.get(c.dim, "kinetic.dim", 100);
  es.seed = s.get(c.seed, "kinetic.seed", std::uint64_t{0});
  es.sigma_h0 = s.get(a.sigma, "kinetic.sigma_h0", 0.1);
  es.hb_kind = BiasKind::PicketFence;
  es.validate();
  const double dl = s.get(a.delta_lambda, "kinetic.delta_lambda", -0.5);
  if (!(dl < 0.0 && dl >= -1.0)) throw ValidationError("--delta-lambda must lie in [-1, 0)");
  const int nx = s.get(a.nx, "kinetic.nx", 256), nv = s.get(a.nv, "kinetic.nv", 128);
  const int snaps = s.get(a.snapshots, "kinetic.snapshots", 5);
  const int n_labels = s.get(a.labels, "kinetic.labels", 1);
  if (snaps < 1) throw ValidationError("--snapshots must be >= 1");
  if (n_labels < 1) throw ValidationError("--labels must be >= 1");
  KineticConfig kc;
  kc.gamma_st = s.get(a.gamma_st, "kinetic.gamma_st", 0.0);
  kc.kappa = s.get(a.kappa, "kinetic.kappa", kc.kappa);
  kc.pv_cutoff = s.get(a.pv_cutoff, "kinetic.pv_cutoff", kc.pv_cutoff);
  kc.cfl = s.get(a.cfl, "kinetic.cfl", kc.cfl);
  const IntegratorConfig icfg = integrator_from(s, c);
  kc.validate();
  prepare_out(c.out);

  const ProblemDefinition p = sample_ensemble(es, s.get(c.z, "kinetic.z", 1.0));
  const PechukasState s0 = initial_conditions_exact(p);
  kc.gamma_mf = s.get(a.gamma_mf, "kinetic.gamma_mf", estimate_gamma({s0.l}));
  kc.validate();
  const Trajectory traj = integrate(p, s0, icfg);
  const double lambda_end = 1.0 + dl;

  // grid covering the direct run over the whole window, with a margin
  double xlo = s0.x.minCoeff(), xhi = s0.x.maxCoeff(), vlo = s0.v.minCoeff(), vhi = s0.v.maxCoeff();
  for (int k = 1; k <= 20; ++k) {
    RealVector x, v;
    traj.particles_at(1.0 + dl * k / 20.0, x, &v);
    xlo = std::min(xlo, x.minCoeff());
    xhi = std::max(xhi, x.maxCoeff());
    vlo = std::min(vlo, v.minCoeff());
    vhi = std::max(vhi, v.maxCoeff());
  }
  const double mx = 0.1 * (xhi - xlo) + 1.0, mv = 0.1 * (vhi - vlo) + 1.0;
  const UniformGrid gx = UniformGrid::spanning(xlo - mx, xhi + mx, nx);
  const UniformGrid gv = UniformGrid::spanning(vlo - mv, vhi + mv, nv);
  std::vector<int> labels(p.dim());
  for (int k = 0; k < p.dim(); ++k) labels[k] = static_cast<int>(static_cast<long>(k) * n_labels / p.dim());

  auto direct_at = [&](double lambda) {
    RealVector x, v;
    traj.particles_at(lambda, x, &v);
    // particles keep their labels along the run; label by level order at lambda = 1
    return bin_particles(x, v, gx, gv, n_labels, labels);
  };

  PhaseSpaceDistribution f = bin_particles(s0.x, s0.v, gx, gv, n_labels, labels);
  const double mass0 = f.total_mass(), momentum0 = f.momentum();
  const fs::path out(c.out);
  CsvWriter marg(out / "marginals.csv", {"lambda", "x", "density_kinetic", "density_direct"});
  CsvWriter spread(out / "spread.csv", {"lambda", "spread_kinetic", "spread_direct", "mass", "momentum"});
  auto dump = [&](double lambda, const PhaseSpaceDistribution& kin) {
    const PhaseSpaceDistribution dir = direct_at(lambda);
    const auto rk = kin.x_marginal(), rd = dir.x_marginal();
    for (int i = 0; i < gx.cells; ++i) marg.row(lambda, gx.center(i), rk[i], rd[i]);
    spread.row(lambda, kin.x_spread(), dir.x_spread(), kin.total_mass(), kin.momentum());
  };
  dump(1.0, f);
  int steps = 0;
  for (int k = 1; k <= snaps; ++k) {
    int taken = 0;
    f = evolve_kinetic(f, kc, dl / snaps, &taken);
    steps += taken;
    dump(1.0 + dl * k / snaps, f);
  }
  if (a.full_grid) {
    CsvWriter w(out / "grid.csv", {"n", "ix", "iv", "f"});
    for (int n = 0; n < f.labels; ++n)
      for (int ix = 0; ix < gx.cells; ++ix)
        for (int iv = 0; iv < gv.cells; ++iv) w.row(n, ix, iv, f(n, ix, iv));
  }
  const double direct_spread = direct_at(lambda_end).x_spread();
  json m = manifest("kinetic", argv);
  m["dim"] = es.dim;
  m["seed"] = es.seed;
  m["delta_lambda"] = dl;
  m["grid"] = {{"x_lo", gx.lo}, {"x_step", gx.step}, {"nx", gx.cells}, {"v_lo", gv.lo}, {"v_step", gv.step}, {"nv", gv.cells}};
  m["labels"] = n_labels;
  m["kinetic"] = to_json(kc);
  m["steps"] = steps;
  m["spread"] = {{"kinetic", f.x_spread()}, {"direct", direct_spread}};
  m["mass_change"] = f.total_mass() - mass0;
  m["momentum_change"] = f.momentum() - momentum0;
  write_json(out / "kinetic_summary.json", m);
  std::cout << "kinetic: ok, " << steps << " steps, spread kinetic " << f.x_spread() << " direct " << direct_spread
            << ", out=" << c.out << '\n';
  return kExitOk;
}

// --- oracle-check ------------------------------------------------------------

struct OracleArgs {
  std::optional<int> problems, grid;
  std::optional<double> threshold;
  std::optional<std::string> ensemble;
  bool h0_zero = false;
};

int cmd_oracle(const Common& c, const OracleArgs& a, const Settings& s, const std::vector<std::string>& argv) {
  const int problems = s.get(a.problems, "oracle.problems", 20);
  const int grid = s.get(a.grid, "oracle.grid_points", 200);
  const double threshold = s.get(a.threshold, "oracle.threshold", 1e-6);
  const int dim = s.get(c.dim, "oracle.dim", 8);
  const std::uint64_t seed = s.get(c.seed, "oracle.seed", std::uint64_t{0});
  const EnsembleKind kind = parse_ensemble_kind(s.get(a.ensemble, "oracle.ensemble", std::string("gue")));
  const IntegratorConfig icfg = integrator_from(s, c);
  if (problems < 1) throw ValidationError("--problems must be >= 1");
  if (dim > kOracleMaxDim) throw ValidationError("oracle-check supports dim <= " + std::to_string(kOracleMaxDim));
  if (!(threshold > 0.0)) throw ValidationError("--threshold must be positive");
  prepare_out(c.out);

  CsvWriter w(fs::path(c.out) / "oracle_check.csv", {"seed", "max_abs", "relative", "lambda", "level"});
  OracleDeviation worst;
  std::uint64_t worst_seed = seed;
  for (int k = 0; k < problems; ++k) {
    EnsembleSpec es;
    es.dim = dim;
    es.kind = kind;
    es.hb_kind = BiasKind::RandomSameEnsemble;
    es.seed = seed + static_cast<std::uint64_t>(k);
    ProblemDefinition p = sample_ensemble(es, s.get(c.z, "oracle.z", 1.0));
    if (a.h0_zero) p.h0 = p.h0.scaled(0.0);
    const Trajectory t = integrate(p, initial_conditions_exact(p), icfg);
    const OracleDeviation d = compare_with_oracle(t, track_spectrum_oracle(p, grid));
    w.row(es.seed, d.max_abs, d.relative, d.lambda, d.level + 1);
    if (k == 0 || d.relative > worst.relative) {
      worst = d;
      worst_seed = es.seed;
    }
  }
  json m = manifest("oracle-check", argv);
  m["problems"] = problems;
  m["dim"] = dim;
  m["grid_points"] = grid;
  m["threshold"] = threshold;
  m["integrator"] = to_json(icfg);
  m["worst"] = {{"seed", worst_seed}, {"relative", worst.relative}, {"max_abs", worst.max_abs},
                {"lambda", worst.lambda}, {"level", worst.level + 1}};
  write_json(fs::path(c.out) / "manifest.json", m);
  const bool pass = worst.relative < threshold;
  std::cout << "oracle-check: " << (pass ? "ok" : "FAILED") << ", max deviation " << worst.relative
            << " of spectral range (threshold " << threshold << "), worst seed " << worst_seed << " level "
            << worst.level + 1 << " lambda " << worst.lambda << '\n';
  return pass ? kExitOk : kExitCompute;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("pechukas");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("PECHUKAS_LOG");
  const std::string level = env ? env : "warn";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  const std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Level dynamics of adiabatic sweeps as a classical 1D gas"};
  app.require_subcommand(1);
  app.fallthrough();
  Common c;
  app.add_option("--config", c.config, "INI file; sections mirror module names");
  app.add_option("--out", c.out, "output directory")->capture_default_str();
  app.add_option("--seed", c.seed, "random seed");
  app.add_option("--workers", c.workers, "worker threads (ensemble only)");
  app.add_option("--dim", c.dim, "number of levels");
  app.add_option("--realizations", c.realizations, "ensemble realizations");
  app.add_option("--z", c.z, "bias strength Z");
  app.add_option("--rel-tol", c.rel_tol, "integrator relative tolerance");
  app.add_option("--abs-tol", c.abs_tol, "integrator absolute tolerance");
  app.add_option("--max-step", c.max_step, "largest integrator step in lambda");
  app.add_option("--dense-points", c.dense_points, "samples written per trajectory");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "integrate one problem and propagate occupations");
  simulate->add_option("--h0", sim.h0, "H0 matrix file");
  simulate->add_option("--hb", sim.hb, "Hb matrix file");
  simulate->add_option("--demo", sim.demo, "built-in problem: two-level, gue, goe")->capture_default_str();
  simulate->add_option("--sweep-time", sim.sweep_time, "total sweep time T");
  simulate->add_option("--hbar", sim.hbar, "Planck constant in code units");
  simulate->add_option("--sigma", sim.sigma, "H0 scale for gue/goe demos");
  simulate->add_option("--initial", sim.initial, "exact or perturbative");

  CnotArgs cn;
  auto* cnot = app.add_subcommand("cnot", "CNOT gate endpoint verification");
  cnot->add_option("--epsilon", cn.epsilon, "perturbation strength");
  cnot->add_option("--sig-figs", cn.sig_figs, "required significant figures");
  cnot->add_option("--gap-tol", cn.gap_tol, "degeneracy tolerance as a fraction of the spectral range");
  cnot->add_option("--initial", cn.initial, "exact or perturbative");

  EnsembleArgs en;
  auto* ensemble = app.add_subcommand("ensemble", "random-matrix campaign");
  ensemble->add_option("--ensemble", en.ensemble, "gue or goe");
  ensemble->add_option("--hb-kind", en.hb_kind, "picket-fence or random");
  ensemble->add_option("--normalization", en.normalization, "spacing or raw");
  ensemble->add_option("--norm-time", en.norm_time, "T at which the H0 mean spacing equals hbar/T");
  ensemble->add_option("--fluctuation-ratio", en.fluctuation_ratio, "H0 scale over the Z Hb mean spacing");
  ensemble->add_option("--levels", en.levels, "tracked levels, comma separated, 1-based");
  ensemble->add_option("--inv-t", en.inv_t, "sweep rates 1/T, comma separated");
  ensemble->add_option("--count-threshold", en.count_threshold, "p_lz above which an anticrossing counts");
  ensemble->add_option("--saturation-cutoff", en.saturation_cutoff, "largest P(n|n) kept in fits");
  ensemble->add_option("--initial", en.initial, "exact or perturbative");

  KineticArgs kn;
  auto* kinetic = app.add_subcommand("kinetic", "mean-field kinetic run against a binned direct run");
  kinetic->add_option("--delta-lambda", kn.delta_lambda, "signed lambda span (negative)");
  kinetic->add_option("--gamma-mf", kn.gamma_mf, "effective repulsion; estimated when absent");
  kinetic->add_option("--gamma-st", kn.gamma_st, "collision constant (experimental)");
  kinetic->add_option("--kappa", kn.kappa, "exchange kernel constant");
  kinetic->add_option("--pv-cutoff", kn.pv_cutoff, "principal-value cutoff in cells");
  kinetic->add_option("--cfl", kn.cfl, "CFL number");
  kinetic->add_option("--sigma", kn.sigma, "H0 scale");
  kinetic->add_option("--nx", kn.nx, "x cells");
  kinetic->add_option("--nv", kn.nv, "v cells");
  kinetic->add_option("--labels", kn.labels, "occupation labels (contiguous blocks of levels)");
  kinetic->add_option("--snapshots", kn.snapshots, "marginal dumps along the run");
  kinetic->add_flag("--full-grid", kn.full_grid, "also dump the final grid");

  OracleArgs orc;
  auto* oracle = app.add_subcommand("oracle-check", "integrator against direct diagonalization");
  oracle->add_option("--problems", orc.problems, "number of seeded problems");
  oracle->add_option("--grid", orc.grid, "diagonalization grid points");
  oracle->add_option("--threshold", orc.threshold, "pass bound as a fraction of the spectral range");
  oracle->add_option("--ensemble", orc.ensemble, "gue or goe");
  oracle->add_flag("--h0-zero", orc.h0_zero, "drop H0 (linear level flow)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    Settings settings;
    settings.load(c.config);
    if (simulate->parsed()) return cmd_simulate(c, sim, settings, args);
    if (cnot->parsed()) return cmd_cnot(c, cn, settings, args);
    if (ensemble->parsed()) return cmd_ensemble(c, en, settings, args);
    if (kinetic->parsed()) return cmd_kinetic(c, kn, settings, args);
    if (oracle->parsed()) return cmd_oracle(c, orc, settings, args);
  } catch (const ValidationError& e) {
    std::cerr << "error: validation: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: compute: " << e.what() << '\n';
    return kExitCompute;
  }
  return kExitValidation;
}
