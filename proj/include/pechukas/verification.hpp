#pragma once

// Endpoint check: levels at lambda = 0 against direct diagonalization of H0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pechukas/gas.hpp"
#include "pechukas/hamiltonian.hpp"

namespace pechukas {

struct LevelAgreement {
  double integrated = 0.0;
  double exact = 0.0;
  double relative_error = 0.0;
  double significant_figures = 0.0;  // -log10(relative_error), capped at 16
};

struct EndpointReport {
  std::vector<LevelAgreement> levels;
  std::vector<int> integrated_multiplicities;
  std::vector<int> exact_multiplicities;
  double gap_tolerance = 0.0;
  double required_figures = 4.0;

  double worst_figures() const {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& l : levels) w = std::min(w, l.significant_figures);
    return w;
  }
  bool multiplicities_match() const { return integrated_multiplicities == exact_multiplicities; }
  bool passed() const { return worst_figures() >= required_figures && multiplicities_match(); }
};

/// Relative error per level uses max(|exact|, floor_fraction * range) as the
/// scale so that levels sitting at zero are judged on the spectrum's scale.
inline EndpointReport verify_endpoints(const RealVector& integrated_ascending, const HermitianMatrix& h0,
                                       double required_figures = 4.0, double gap_tolerance_fraction = 1e-9,
                                       double floor_fraction = 1e-3) {
  const RealVector exact = eigenvalues(h0);
  if (exact.size() != integrated_ascending.size())
    throw ValidationError("verify_endpoints: level count differs from H0 dimension");
  const double range = exact(exact.size() - 1) - exact(0);
  const double floor = range > 0.0 ? floor_fraction * range : 1.0;
  EndpointReport r;
  r.required_figures = required_figures;
  r.gap_tolerance = gap_tolerance_fraction * (range > 0.0 ? range : 1.0);
  for (Eigen::Index k = 0; k < exact.size(); ++k) {
    LevelAgreement a;
    a.integrated = integrated_ascending(k);
    a.exact = exact(k);
    a.relative_error = std::abs(a.integrated - a.exact) / std::max(std::abs(a.exact), floor);
    a.significant_figures = a.relative_error > 0.0 ? std::min(16.0, -std::log10(a.relative_error)) : 16.0;
    r.levels.push_back(a);
  }
  r.integrated_multiplicities = degeneracy_multiplicities(integrated_ascending, r.gap_tolerance);
  r.exact_multiplicities = degeneracy_multiplicities(exact, r.gap_tolerance);
  return r;
}

inline EndpointReport verify_endpoints(const Trajectory& t, const HermitianMatrix& h0, double required_figures = 4.0,
                                       double gap_tolerance_fraction = 1e-9) {
  RealVector x = t.final_state.x;
  std::sort(x.data(), x.data() + x.size());
  return verify_endpoints(x, h0, required_figures, gap_tolerance_fraction);
}

}  // namespace pechukas
