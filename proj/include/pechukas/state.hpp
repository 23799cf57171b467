#pragma once

#include <Eigen/Dense>

#include <complex>

namespace pechukas {

/// Dynamical variables of the level gas at parameter value lambda:
/// positions x_n = E_n, velocities v_n = <n|Z Hb|n>, and the relative
/// angular momenta l_mn = (E_m - E_n) <m|Z Hb|n> (anti-Hermitian, zero diagonal).
struct PechukasState {
  double lambda = 1.0;
  Eigen::VectorXd x;
  Eigen::VectorXd v;
  Eigen::MatrixXcd l;

  int size() const { return static_cast<int>(x.size()); }

  /// max |l_mn + conj(l_nm)| over all pairs, diagonal included.
  double anti_hermitian_defect() const { return (l + l.adjoint()).cwiseAbs().maxCoeff(); }
};

}  // namespace pechukas
