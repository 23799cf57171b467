#pragma once

// Gaussian-ensemble campaigns: one integration per realization, reused for
// every sweep time, aggregated into survival probabilities, mean-square
// deviations, crossing counts, and power-law fits.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pechukas/error.hpp"
#include "pechukas/gas.hpp"
#include "pechukas/hamiltonian.hpp"
#include "pechukas/transitions.hpp"

namespace pechukas {

// ---------------------------------------------------------------------------
// Power-law fits

struct ScalingFit {
  int level = 0;  // 1-based; 0 when not tied to a level
  double gamma = 0.0;
  double gamma_stderr = 0.0;
  double amplitude = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  int points = 0;
  double residual = 0.0;  // r.m.s. of log residuals
};

/// Least squares of log(value) against log(T) over points with T in [lo, hi].
inline ScalingFit fit_power_law(const std::vector<std::pair<double, double>>& points, double lo, double hi) {
  std::vector<double> lx, ly;
  for (const auto& [t, value] : points) {
    if (t < lo || t > hi) continue;
    if (!(t > 0.0)) throw ValidationError("fit_power_law: T must be positive");
    if (!(value > 0.0)) {
      std::ostringstream os;
      os << "fit_power_law: non-positive value " << value << " at T = " << t << " inside the fit window";
      throw ValidationError(os.str());
    }
    lx.push_back(std::log(t));
    ly.push_back(std::log(value));
  }
  const int n = static_cast<int>(lx.size());
  if (n < 4) throw ValidationError("fit_power_law: need at least 4 points in the window, got " + std::to_string(n));
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("fit_power_law: all T values coincide");
  ScalingFit f;
  f.gamma = sxy / sxx;
  const double intercept = my - f.gamma * mx;
  f.amplitude = std::exp(intercept);
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    const double r = ly[i] - (intercept + f.gamma * lx[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  f.gamma_stderr = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
  f.window_lo = lo;
  f.window_hi = hi;
  f.points = n;
  return f;
}

inline ScalingFit fit_power_law(const std::vector<std::pair<double, double>>& points) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& p : points) {
    lo = std::min(lo, p.first);
    hi = std::max(hi, p.first);
  }
  return fit_power_law(points, lo, hi);
}

// ---------------------------------------------------------------------------
// Energy normalization

struct NormalizedProblem {
  ProblemDefinition problem;
  double factor = 1.0;
};

inline double mean_level_spacing(const RealVector& ascending) {
  return (ascending(ascending.size() - 1) - ascending(0)) / static_cast<double>(ascending.size() - 1);
}

/// Rescales every energy (H0 and Z) by one factor so the mean adjacent
/// spacing of H0 equals hbar / T.
inline NormalizedProblem apply_spacing_normalization(const ProblemDefinition& p, const SweepSpec& sweep) {
  p.validate();
  sweep.validate();
  const double spacing = mean_level_spacing(eigenvalues(p.h0));
  if (!(spacing > 0.0)) throw ValidationError("apply_spacing_normalization: H0 spectrum is fully degenerate");
  const double factor = (sweep.hbar / sweep.total_time) / spacing;
  NormalizedProblem out;
  out.factor = factor;
  out.problem = p;
  if (factor != 1.0) {
    out.problem.h0 = p.h0.scaled(factor);
    out.problem.z = p.z * factor;
  }
  out.problem.hbar = sweep.hbar;
  return out;
}

// ---------------------------------------------------------------------------
// Campaigns

enum class Normalization { Spacing, Raw };
enum class InitialConditionKind { Exact, Perturbative };

inline std::string to_string(Normalization n) { return n == Normalization::Spacing ? "spacing" : "raw"; }
inline std::string to_string(InitialConditionKind k) { return k == InitialConditionKind::Exact ? "exact" : "perturbative"; }

/// 1/T = {1, 2.5, 5, 10, 25, 50, 75} x 1e-3.
inline std::vector<double> default_sweep_times() {
  std::vector<double> t;
  for (double r : {1.0, 2.5, 5.0, 10.0, 25.0, 50.0, 75.0}) t.push_back(1.0 / (r * 1e-3));
  return t;
}

inline constexpr double kDefaultNormalizationTime = 0.1;

struct CampaignSpec {
  EnsembleSpec ensemble{50, EnsembleKind::GUE, 0.1, BiasKind::RandomSameEnsemble, 0};
  int realizations = 100;
  std::vector<double> sweep_times = default_sweep_times();
  double z = 1.0;
  double fluctuation_ratio = 0.1;  // sigma_h0 = ratio * mean spacing of Z Hb at lambda = 1
  Normalization normalization = Normalization::Spacing;
  double normalization_time = kDefaultNormalizationTime;  // T at which <dE(H0)> = hbar / T
  double hbar = 1.0;
  std::vector<int> tracked_levels;  // 1-based; empty selects edges, quartiles and the middle
  std::uint64_t seed = 0;
  double count_threshold = 1e-3;
  double count_reference_time = 0.0;  // <= 0 selects the middle of the sweep
  double saturation_cutoff = 0.9;
  double max_failure_fraction = 0.05;
  InitialConditionKind initial_conditions = InitialConditionKind::Exact;
  IntegratorConfig integrator{1e-9, 1e-11, 1e-3, 1e-14, 2};
  int workers = 1;
  std::string checkpoint_dir;  // empty disables persistence

  void validate() const {
    ensemble.validate();
    integrator.validate();
    if (realizations < 1) throw ValidationError("CampaignSpec: realizations must be >= 1");
    if (sweep_times.empty()) throw ValidationError("CampaignSpec: sweep_times is empty");
    for (double t : sweep_times)
      if (!(t > 0.0)) throw ValidationError("CampaignSpec: sweep times must be positive");
    if (!(z > 0.0)) throw ValidationError("CampaignSpec: z must be positive");
    if (!(fluctuation_ratio > 0.0)) throw ValidationError("CampaignSpec: fluctuation_ratio must be positive");
    if (!(normalization_time > 0.0)) throw ValidationError("CampaignSpec: normalization_time must be positive");
    if (!(hbar > 0.0)) throw ValidationError("CampaignSpec: hbar must be positive");
    if (workers < 1) throw ValidationError("CampaignSpec: workers must be >= 1");
    for (int n : tracked_levels)
      if (n < 1 || n > ensemble.dim)
        throw ValidationError("CampaignSpec: tracked level " + std::to_string(n) + " outside 1.." +
                              std::to_string(ensemble.dim));
  }

  std::vector<int> resolved_tracked_levels() const {
    if (!tracked_levels.empty()) return tracked_levels;
    const int n = ensemble.dim;
    std::vector<int> out{1, 2, std::max(1, n / 10), std::max(1, n / 5), (n + 1) / 2, n - n / 5 + 1, n - n / 10 + 1,
                         n - 1, n};
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    out.erase(std::remove_if(out.begin(), out.end(), [n](int k) { return k < 1 || k > n; }), out.end());
    return out;
  }

  double resolved_count_reference_time() const {
    if (count_reference_time > 0.0) return count_reference_time;
    std::vector<double> t = sweep_times;
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
  }
};

/// splitmix64 finalizer over (seed, index).
inline std::uint64_t realization_seed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(index));
}

/// Everything one realization contributes; rows index sweep times, columns levels.
struct RealizationResult {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double normalization_factor = 1.0;
  int events = 0;
  Eigen::MatrixXd survival;  // P(n|n)
  Eigen::MatrixXd msd;       // sum_m P(m|n) (m - n)^2
  std::map<int, Eigen::MatrixXd> distributions;  // tracked n0 (1-based) -> P(m|n0)
  Eigen::VectorXd crossings;
  TrajectoryStats stats;
};

/// Builds the (normalized) problem for realization `index`.
inline NormalizedProblem campaign_problem(const CampaignSpec& spec, int index) {
  EnsembleSpec es = spec.ensemble;
  es.seed = realization_seed(spec.seed, static_cast<std::uint64_t>(index));
  es.sigma_h0 = spec.fluctuation_ratio * spec.z;  // Hb has unit mean spacing
  ProblemDefinition p = sample_ensemble(es, spec.z);
  p.hbar = spec.hbar;
  if (spec.normalization == Normalization::Spacing)
    return apply_spacing_normalization(p, SweepSpec{spec.normalization_time, spec.hbar});
  return {p, 1.0};
}

/// Per-sweep-time statistics from one set of detected events.
inline void accumulate_sweeps(const CampaignSpec& spec, const std::vector<AnticrossingEvent>& geometry, int n,
                              RealizationResult& r) {
  const std::vector<int> tracked = spec.resolved_tracked_levels();
  const int nt = static_cast<int>(spec.sweep_times.size());
  r.survival.resize(nt, n);
  r.msd.resize(nt, n);
  for (int level : tracked) r.distributions[level] = Eigen::MatrixXd(nt, n);
  for (int i = 0; i < nt; ++i) {
    std::vector<AnticrossingEvent> events = geometry;
    assign_probabilities(events, SweepSpec{spec.sweep_times[i], spec.hbar});
    const OccupationMatrix occ = propagate_occupations(events, n);
    for (int k = 0; k < n; ++k) {
      r.survival(i, k) = occ(k, k);
      r.msd(i, k) = occ.mean_square_deviation(k);
    }
    for (int level : tracked) r.distributions[level].row(i) = occ.p.col(level - 1).transpose();
  }
  r.crossings = Eigen::VectorXd::Zero(n);
  std::vector<AnticrossingEvent> events = geometry;
  assign_probabilities(events, SweepSpec{spec.resolved_count_reference_time(), spec.hbar});
  for (const auto& e : events) {
    if (e.p_lz > spec.count_threshold) {
      r.crossings(e.lower_level) += 1.0;
      r.crossings(e.lower_level + 1) += 1.0;
    }
  }
}

inline RealizationResult run_realization(const CampaignSpec& spec, int index) {
  RealizationResult r;
  r.index = index;
  r.seed = realization_seed(spec.seed, static_cast<std::uint64_t>(index));
  try {
    const NormalizedProblem np = campaign_problem(spec, index);
    r.normalization_factor = np.factor;
    const PechukasState s0 = spec.initial_conditions == InitialConditionKind::Exact
                                 ? initial_conditions_exact(np.problem)
                                 : initial_conditions_perturbative(np.problem);
    const Trajectory traj = integrate(np.problem, s0, spec.integrator);
    r.stats = traj.stats;
    const DetectionReport det = detect_anticrossings(traj);
    r.events = static_cast<int>(det.events.size());
    accumulate_sweeps(spec, det.events, np.problem.dim(), r);
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

// --- checkpoints -----------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const RealizationResult& r) {
  nlohmann::json j;
  j["index"] = r.index;
  j["seed"] = r.seed;
  j["ok"] = r.ok;
  j["error"] = r.error;
  if (!r.ok) return j;
  j["normalization_factor"] = r.normalization_factor;
  j["events"] = r.events;
  j["survival"] = detail::matrix_to_json(r.survival);
  j["msd"] = detail::matrix_to_json(r.msd);
  nlohmann::json d = nlohmann::json::object();
  for (const auto& [level, m] : r.distributions) d[std::to_string(level)] = detail::matrix_to_json(m);
  j["distributions"] = d;
  j["crossings"] = std::vector<double>(r.crossings.data(), r.crossings.data() + r.crossings.size());
  j["stats"] = {{"accepted", r.stats.accepted},
                {"rejected", r.stats.rejected},
                {"evaluations", r.stats.evaluations},
                {"smallest_step", r.stats.smallest_step},
                {"max_momentum_drift", r.stats.max_momentum_drift},
                {"max_energy_drift", r.stats.max_energy_drift},
                {"max_anti_hermitian_defect", r.stats.max_anti_hermitian_defect}};
  return j;
}

inline RealizationResult realization_from_json(const nlohmann::json& j) {
  RealizationResult r;
  r.index = j.at("index").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.ok = j.at("ok").get<bool>();
  r.error = j.at("error").get<std::string>();
  if (!r.ok) return r;
  r.normalization_factor = j.at("normalization_factor").get<double>();
  r.events = j.at("events").get<int>();
  r.survival = detail::matrix_from_json(j.at("survival"));
  r.msd = detail::matrix_from_json(j.at("msd"));
  for (const auto& [key, value] : j.at("distributions").items()) r.distributions[std::stoi(key)] = detail::matrix_from_json(value);
  const auto c = j.at("crossings").get<std::vector<double>>();
  r.crossings = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  const auto& s = j.at("stats");
  r.stats.accepted = s.at("accepted").get<std::int64_t>();
  r.stats.rejected = s.at("rejected").get<std::int64_t>();
  r.stats.evaluations = s.at("evaluations").get<std::int64_t>();
  r.stats.smallest_step = s.at("smallest_step").get<double>();
  r.stats.max_momentum_drift = s.at("max_momentum_drift").get<double>();
  r.stats.max_energy_drift = s.at("max_energy_drift").get<double>();
  r.stats.max_anti_hermitian_defect = s.at("max_anti_hermitian_defect").get<double>();
  return r;
}

/// Fingerprint of every input that changes realization results; checkpoints
/// written under a different fingerprint are ignored.
inline std::string campaign_fingerprint(const CampaignSpec& s) {
  nlohmann::json j;
  j["dim"] = s.ensemble.dim;
  j["ensemble"] = to_string(s.ensemble.kind);
  j["hb_kind"] = to_string(s.ensemble.hb_kind);
  j["sweep_times"] = s.sweep_times;
  j["z"] = s.z;
  j["fluctuation_ratio"] = s.fluctuation_ratio;
  j["normalization"] = to_string(s.normalization);
  j["normalization_time"] = s.normalization_time;
  j["hbar"] = s.hbar;
  j["tracked_levels"] = s.resolved_tracked_levels();
  j["seed"] = s.seed;
  j["count_threshold"] = s.count_threshold;
  j["count_reference_time"] = s.resolved_count_reference_time();
  j["initial_conditions"] = to_string(s.initial_conditions);
  j["rel_tol"] = s.integrator.rel_tol;
  j["abs_tol"] = s.integrator.abs_tol;
  j["max_step"] = s.integrator.max_step;
  j["min_step"] = s.integrator.min_step;
  return j.dump();
}

class CheckpointStore {
 public:
  CheckpointStore(std::string dir, std::string fingerprint) : dir_(std::move(dir)), fingerprint_(std::move(fingerprint)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  bool enabled() const { return !dir_.empty(); }

  std::optional<RealizationResult> load(int index) const {
    if (!enabled()) return std::nullopt;
    std::ifstream in(path(index));
    if (!in) return std::nullopt;
    try {
      nlohmann::json j = nlohmann::json::parse(in);
      if (j.at("fingerprint").get<std::string>() != fingerprint_) return std::nullopt;
      return realization_from_json(j.at("result"));
    } catch (const std::exception&) {
      return std::nullopt;  // partial or foreign file: recompute
    }
  }

  void save(const RealizationResult& r) const {
    if (!enabled()) return;
    const std::filesystem::path final_path = path(r.index);
    const std::filesystem::path tmp = final_path.string() + ".tmp";
    {
      std::ofstream out(tmp);
      nlohmann::json j;
      j["fingerprint"] = fingerprint_;
      j["result"] = to_json(r);
      out << j.dump();
      if (!out) throw Error("checkpoint: cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, final_path);
  }

 private:
  std::filesystem::path path(int index) const {
    std::ostringstream os;
    os << "realization_" << std::setw(6) << std::setfill('0') << index << ".json";
    return std::filesystem::path(dir_) / os.str();
  }

  std::string dir_;
  std::string fingerprint_;
};

// --- aggregation -----------------------------------------------------------

struct EnsembleStatistics {
  std::vector<double> sweep_times;
  int levels = 0;
  Eigen::MatrixXd survival_mean;    // [T][level]
  Eigen::MatrixXd survival_stderr;  // [T][level]
  Eigen::MatrixXd deviation_mean;   // [T][n0]
  std::map<int, Eigen::MatrixXd> final_distribution;  // n0 (1-based) -> [T][n]
  Eigen::VectorXd crossing_counts;
  std::vector<int> tracked_levels;
  std::vector<double> normalization_factors;  // per completed realization
  int realizations_completed = 0;
  int realizations_failed = 0;
  int realizations_resumed = 0;
  double max_momentum_drift = 0.0;
  double max_energy_drift = 0.0;
  double max_anti_hermitian_defect = 0.0;
  std::vector<std::string> warnings;

  std::vector<std::pair<double, double>> survival_series(int level) const {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < sweep_times.size(); ++i) out.emplace_back(sweep_times[i], survival_mean(i, level - 1));
    return out;
  }

  std::vector<std::pair<double, double>> deviation_series(int level) const {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < sweep_times.size(); ++i) out.emplace_back(sweep_times[i], deviation_mean(i, level - 1));
    return out;
  }
};

/// Deterministic reduction in realization order.
inline EnsembleStatistics aggregate(const CampaignSpec& spec, const std::vector<RealizationResult>& results) {
  EnsembleStatistics st;
  st.sweep_times = spec.sweep_times;
  st.levels = spec.ensemble.dim;
  st.tracked_levels = spec.resolved_tracked_levels();
  const int nt = static_cast<int>(spec.sweep_times.size());
  const int n = spec.ensemble.dim;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(nt, n), sum2 = sum, msd = sum;
  st.crossing_counts = Eigen::VectorXd::Zero(n);
  for (int level : st.tracked_levels) st.final_distribution[level] = Eigen::MatrixXd::Zero(nt, n);
  for (const auto& r : results) {
    if (!r.ok) {
      ++st.realizations_failed;
      st.warnings.push_back("realization " + std::to_string(r.index) + " skipped: " + r.error);
      continue;
    }
    ++st.realizations_completed;
    sum += r.survival;
    sum2 += r.survival.cwiseProduct(r.survival);
    msd += r.msd;
    st.crossing_counts += r.crossings;
    for (int level : st.tracked_levels) st.final_distribution[level] += r.distributions.at(level);
    st.normalization_factors.push_back(r.normalization_factor);
    st.max_momentum_drift = std::max(st.max_momentum_drift, r.stats.max_momentum_drift);
    st.max_energy_drift = std::max(st.max_energy_drift, r.stats.max_energy_drift);
    st.max_anti_hermitian_defect = std::max(st.max_anti_hermitian_defect, r.stats.max_anti_hermitian_defect);
  }
  const double k = st.realizations_completed;
  if (k > 0) {
    st.survival_mean = sum / k;
    st.deviation_mean = msd / k;
    st.crossing_counts /= k;
    for (auto& [level, m] : st.final_distribution) m /= k;
    st.survival_stderr = Eigen::MatrixXd::Zero(nt, n);
    if (k > 1) {
      const Eigen::MatrixXd var = ((sum2 / k) - st.survival_mean.cwiseProduct(st.survival_mean)) * (k / (k - 1));
      st.survival_stderr = (var.cwiseMax(0.0) / k).cwiseSqrt();
    }
  }
  return st;
}

using ProgressCallback = std::function<void(const RealizationResult&, bool resumed)>;

/// Runs every realization (resuming from checkpoints when present) and
/// aggregates. Throws if more than max_failure_fraction of them fail.
inline EnsembleStatistics run_campaign(const CampaignSpec& spec, const ProgressCallback& progress = {}) {
  spec.validate();
  const CheckpointStore store(spec.checkpoint_dir, campaign_fingerprint(spec));
  std::vector<RealizationResult> results(spec.realizations);
  std::vector<char> resumed(spec.realizations, 0);
  std::atomic<int> next{0};
  std::mutex progress_mutex;
  auto worker = [&]() {
    for (int i = next++; i < spec.realizations; i = next++) {
      if (auto cached = store.load(i)) {
        results[i] = std::move(*cached);
        resumed[i] = 1;
      } else {
        results[i] = run_realization(spec, i);
        store.save(results[i]);
      }
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(results[i], resumed[i] != 0);
      }
    }
  };
  const int workers = std::min(spec.workers, spec.realizations);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  EnsembleStatistics st = aggregate(spec, results);
  st.realizations_resumed = static_cast<int>(std::count(resumed.begin(), resumed.end(), 1));
  if (st.realizations_failed > spec.max_failure_fraction * spec.realizations) {
    std::ostringstream os;
    os << "run_campaign: " << st.realizations_failed << " of " << spec.realizations
       << " realizations failed (limit " << spec.max_failure_fraction * 100 << "%)";
    if (!st.warnings.empty()) os << "; first: " << st.warnings.front();
    throw Error(os.str());
  }
  return st;
}

// --- fits --------------------------------------------------------------------

/// Survival fit window: from the smallest T up to the last T whose mean
/// P(n|n) stays at or below the saturation cutoff.
inline std::optional<std::pair<double, double>> unsaturated_window(const std::vector<std::pair<double, double>>& series,
                                                                   double cutoff) {
  std::vector<std::pair<double, double>> s = series;
  std::sort(s.begin(), s.end());
  if (s.empty() || s.front().second > cutoff) return std::nullopt;
  double hi = s.front().first;
  for (const auto& [t, value] : s) {
    if (value > cutoff) break;
    hi = t;
  }
  return std::make_pair(s.front().first, hi);
}

struct LevelFits {
  int level = 0;
  std::optional<ScalingFit> survival;
  std::optional<ScalingFit> deviation;
  std::string note;
};

inline LevelFits fit_level(const EnsembleStatistics& st, int level, double cutoff) {
  LevelFits out;
  out.level = level;
  const auto series = st.survival_series(level);
  const auto window = unsaturated_window(series, cutoff);
  if (!window) {
    out.note = "saturated at every sweep time";
    return out;
  }
  try {
    ScalingFit f = fit_power_law(series, window->first, window->second);
    f.level = level;
    out.survival = f;
  } catch (const ValidationError& e) {
    out.note = e.what();
  }
  try {
    ScalingFit f = fit_power_law(st.deviation_series(level), window->first, window->second);
    f.level = level;
    out.deviation = f;
  } catch (const ValidationError& e) {
    if (out.note.empty()) out.note = e.what();
  }
  return out;
}

inline std::vector<LevelFits> fit_tracked_levels(const EnsembleStatistics& st, double cutoff) {
  std::vector<LevelFits> out;
  for (int level : st.tracked_levels) out.push_back(fit_level(st, level, cutoff));
  return out;
}

}  // namespace pechukas
