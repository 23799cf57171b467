#pragma once

// Matrix input and plot-ready CSV / JSON output. CSV files always carry a
// header row and use the classic locale with 17 significant digits.

#include <filesystem>
#include <fstream>
#include <locale>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pechukas/ensemble.hpp"
#include "pechukas/error.hpp"
#include "pechukas/gas.hpp"
#include "pechukas/hamiltonian.hpp"
#include "pechukas/kinetic.hpp"
#include "pechukas/transitions.hpp"
#include "pechukas/verification.hpp"

namespace pechukas {

inline constexpr const char* kVersion = "pechukas 0.1.0";
inline constexpr double kHermiticityTolerance = 1e-12;

/// Text matrix: the dimension, then dim*dim row-major entries, each either
/// "re" or "re,im", separated by whitespace. '#' starts a comment line.
inline HermitianMatrix parse_matrix(std::istream& in, const std::string& name) {
  std::string text, line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    text += line + '\n';
  }
  std::istringstream tokens(text);
  tokens.imbue(std::locale::classic());
  long dim = 0;
  if (!(tokens >> dim) || dim < 2) throw ValidationError(name + ": expected a dimension >= 2 as the first token");
  ComplexMatrix m(dim, dim);
  for (long i = 0; i < dim; ++i)
    for (long j = 0; j < dim; ++j) {
      std::string tok;
      if (!(tokens >> tok))
        throw ValidationError(name + ": expected " + std::to_string(dim * dim) + " entries, found " +
                              std::to_string(i * dim + j));
      const auto comma = tok.find(',');
      auto number = [&](const std::string& s) {
        std::istringstream is(s);
        is.imbue(std::locale::classic());
        double v;
        if (!(is >> v) || !is.eof()) throw ValidationError(name + ": bad number '" + s + "'");
        return v;
      };
      const double re = number(tok.substr(0, comma));
      const double im = comma == std::string::npos ? 0.0 : number(tok.substr(comma + 1));
      m(i, j) = cplx(re, im);
    }
  std::string extra;
  if (tokens >> extra) throw ValidationError(name + ": trailing data after " + std::to_string(dim * dim) + " entries");
  try {
    return HermitianMatrix::checked(m, kHermiticityTolerance);
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  }
}

inline HermitianMatrix read_matrix_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw ValidationError("cannot open matrix file '" + path + "'");
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open matrix file '" + path + "'");
  return parse_matrix(in, path);
}

inline void write_matrix_file(const std::string& path, const HermitianMatrix& m) {
  std::ofstream out(path);
  out.imbue(std::locale::classic());
  out.precision(17);
  out << m.dim() << '\n';
  for (int i = 0; i < m.dim(); ++i) {
    for (int j = 0; j < m.dim(); ++j) out << (j ? " " : "") << m(i, j).real() << ',' << m(i, j).imag();
    out << '\n';
  }
  if (!out) throw Error("cannot write '" + path + "'");
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
    if (!out_) throw Error("cannot write '" + path.string() + "'");
    out_.imbue(std::locale::classic());
    out_.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << values, first = false), ...);
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << '\n';
  }

  ~CsvWriter() { out_.flush(); }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

// --- single runs -------------------------------------------------------------

/// lambda, x_1..x_N: one row per dense-output sample.
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t) {
  std::vector<std::string> header{"lambda"};
  for (int k = 1; k <= t.levels(); ++k) header.push_back("x_" + std::to_string(k));
  CsvWriter w(path, header);
  for (const auto& s : t.samples) {
    std::vector<double> row{s.lambda};
    row.insert(row.end(), s.x.data(), s.x.data() + s.x.size());
    w.row(row);
  }
}

/// pair is the lower level of the anticrossing pair, 1-based.
inline void write_events_csv(const std::filesystem::path& path, const std::vector<AnticrossingEvent>& events) {
  CsvWriter w(path, {"pair", "lambda_star", "delta_min", "coupling", "p_lz"});
  for (const auto& e : events) w.row(e.lower_level + 1, e.lambda_star, e.delta_min, e.coupling, e.p_lz);
}

/// final_level, then P(final | initial = n) for n = 1..N.
inline void write_occupation_csv(const std::filesystem::path& path, const OccupationMatrix& occ) {
  std::vector<std::string> header{"final_level"};
  for (int n = 1; n <= occ.size(); ++n) header.push_back("initial_" + std::to_string(n));
  CsvWriter w(path, header);
  for (int m = 0; m < occ.size(); ++m) {
    std::vector<double> row{static_cast<double>(m + 1)};
    for (int n = 0; n < occ.size(); ++n) row.push_back(occ(m, n));
    w.row(row);
  }
}

inline nlohmann::json to_json(const IntegratorConfig& c) {
  return {{"rel_tol", c.rel_tol},       {"abs_tol", c.abs_tol},
          {"max_step", c.max_step},     {"min_step", c.min_step},
          {"dense_output_points", c.dense_output_points}, {"max_steps", c.max_steps}};
}

inline nlohmann::json to_json(const TrajectoryStats& s) {
  return {{"accepted_steps", s.accepted},
          {"rejected_steps", s.rejected},
          {"rhs_evaluations", s.evaluations},
          {"smallest_step", s.smallest_step},
          {"momentum_drift", s.max_momentum_drift},
          {"energy_drift", s.max_energy_drift},
          {"anti_hermitian_defect", s.max_anti_hermitian_defect}};
}

inline nlohmann::json to_json(const EndpointReport& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t k = 0; k < r.levels.size(); ++k) {
    const auto& l = r.levels[k];
    levels.push_back({{"level", k + 1},
                      {"integrated", l.integrated},
                      {"exact", l.exact},
                      {"relative_error", l.relative_error},
                      {"significant_figures", l.significant_figures}});
  }
  return {{"levels", levels},
          {"worst_significant_figures", r.worst_figures()},
          {"required_significant_figures", r.required_figures},
          {"gap_tolerance", r.gap_tolerance},
          {"integrated_multiplicities", r.integrated_multiplicities},
          {"exact_multiplicities", r.exact_multiplicities},
          {"multiplicities_match", r.multiplicities_match()},
          {"passed", r.passed()}};
}

// --- campaigns ---------------------------------------------------------------

inline void write_survival_csv(const std::filesystem::path& path, const EnsembleStatistics& st) {
  CsvWriter w(path, {"level", "inv_T", "mean", "stderr"});
  for (int n = 1; n <= st.levels; ++n)
    for (std::size_t i = 0; i < st.sweep_times.size(); ++i)
      w.row(n, 1.0 / st.sweep_times[i], st.survival_mean(i, n - 1), st.survival_stderr(i, n - 1));
}

inline void write_deviation_csv(const std::filesystem::path& path, const EnsembleStatistics& st) {
  CsvWriter w(path, {"n0", "inv_T", "msd"});
  for (int n = 1; n <= st.levels; ++n)
    for (std::size_t i = 0; i < st.sweep_times.size(); ++i) w.row(n, 1.0 / st.sweep_times[i], st.deviation_mean(i, n - 1));
}

inline void write_crossings_csv(const std::filesystem::path& path, const EnsembleStatistics& st) {
  CsvWriter w(path, {"level", "mean_count"});
  for (int n = 1; n <= st.levels; ++n) w.row(n, st.crossing_counts(n - 1));
}

/// n0, inv_T, then P(n | n0) for n = 1..N, for every tracked n0.
inline void write_distribution_csv(const std::filesystem::path& path, const EnsembleStatistics& st) {
  std::vector<std::string> header{"n0", "inv_T"};
  for (int n = 1; n <= st.levels; ++n) header.push_back("P_" + std::to_string(n));
  CsvWriter w(path, header);
  for (const auto& [n0, m] : st.final_distribution)
    for (std::size_t i = 0; i < st.sweep_times.size(); ++i) {
      std::vector<double> row{static_cast<double>(n0), 1.0 / st.sweep_times[i]};
      for (int n = 0; n < st.levels; ++n) row.push_back(m(i, n));
      w.row(row);
    }
}

inline nlohmann::json to_json(const ScalingFit& f) {
  return {{"gamma", f.gamma},
          {"gamma_stderr", f.gamma_stderr},
          {"amplitude", f.amplitude},
          {"residual", f.residual},
          {"points", f.points},
          {"window", {{"T_min", f.window_lo}, {"T_max", f.window_hi}}}};
}

inline nlohmann::json fits_json(const std::vector<LevelFits>& fits) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : fits) {
    nlohmann::json j{{"level", f.level}};
    j["survival"] = f.survival ? to_json(*f.survival) : nlohmann::json(nullptr);
    j["deviation"] = f.deviation ? to_json(*f.deviation) : nlohmann::json(nullptr);
    if (!f.note.empty()) j["note"] = f.note;
    out.push_back(j);
  }
  return out;
}

inline nlohmann::json to_json(const CampaignSpec& s) {
  return {{"dim", s.ensemble.dim},
          {"ensemble", to_string(s.ensemble.kind)},
          {"hb_kind", to_string(s.ensemble.hb_kind)},
          {"realizations", s.realizations},
          {"sweep_times", s.sweep_times},
          {"z", s.z},
          {"fluctuation_ratio", s.fluctuation_ratio},
          {"normalization", to_string(s.normalization)},
          {"normalization_time", s.normalization_time},
          {"hbar", s.hbar},
          {"tracked_levels", s.resolved_tracked_levels()},
          {"seed", s.seed},
          {"count_threshold", s.count_threshold},
          {"count_reference_time", s.resolved_count_reference_time()},
          {"saturation_cutoff", s.saturation_cutoff},
          {"max_failure_fraction", s.max_failure_fraction},
          {"initial_conditions", to_string(s.initial_conditions)},
          {"integrator", to_json(s.integrator)},
          {"workers", s.workers}};
}

inline nlohmann::json to_json(const KineticConfig& c) {
  return {{"gamma_mf", c.gamma_mf},
          {"gamma_st", c.gamma_st},
          {"pv_cutoff_cells", c.pv_cutoff},
          {"cfl", c.cfl},
          {"kappa", c.kappa},
          {"exchange_kernel", "p(w) = exp(-kappa/|w|)"},
          {"experimental", c.gamma_st > 0.0}};
}

}  // namespace pechukas
