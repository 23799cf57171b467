#pragma once

// Independent reference computations used only by the tests.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

// Number of eigenvalues of the Hermitian matrix m below t, from the inertia
// of m - t I (Sylvester's law) via an unpivoted LDL^H sweep. This equals the
// number of roots of the characteristic polynomial below t.
inline int count_below(const Eigen::MatrixXcd& m, double t) {
  const Eigen::Index n = m.rows();
  Eigen::MatrixXcd a = m;
  for (Eigen::Index i = 0; i < n; ++i) a(i, i) -= t;
  int negative = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    double d = a(k, k).real();
    if (d == 0.0) d = -1e-300;  // t sits on a root: count it as below
    if (d < 0.0) ++negative;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const cplx f = a(i, k) / d;
      for (Eigen::Index j = k + 1; j < n; ++j) a(i, j) -= f * std::conj(a(j, k));
    }
  }
  return negative;
}

// Eigenvalues in ascending order by bisection on count_below.
inline std::vector<double> bisection_eigenvalues(const Eigen::MatrixXcd& m, double tol = 1e-13) {
  const Eigen::Index n = m.rows();
  double radius = 0.0;  // Gershgorin bound
  for (Eigen::Index i = 0; i < n; ++i) radius = std::max(radius, m.row(i).cwiseAbs().sum());
  std::vector<double> out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double lo = -radius - 1.0, hi = radius + 1.0;
    while (hi - lo > tol * std::max(1.0, radius)) {
      const double mid = 0.5 * (lo + hi);
      if (count_below(m, mid) > k) hi = mid;
      else lo = mid;
    }
    out[k] = 0.5 * (lo + hi);
  }
  return out;
}

// Spectral data of H(lambda) = H0 + lambda B with eigenvector phases aligned to a
// reference basis (parallel transport), so finite differences in lambda see
// the same gauge as the level-dynamics equations.
struct Flow {
  Eigen::VectorXd x, v;
  Eigen::MatrixXcd l;
  Eigen::MatrixXcd vectors;
};

inline Flow flow_at(const Eigen::MatrixXcd& h0, const Eigen::MatrixXcd& b, double lambda,
                    const Eigen::MatrixXcd* reference = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h0 + lambda * b);
  Flow f;
  f.x = es.eigenvalues();
  f.vectors = es.eigenvectors();
  if (reference) {
    for (Eigen::Index k = 0; k < f.vectors.cols(); ++k) {
      const cplx overlap = reference->col(k).dot(f.vectors.col(k));
      f.vectors.col(k) *= std::conj(overlap) / std::abs(overlap);
    }
  }
  const Eigen::MatrixXcd bb = f.vectors.adjoint() * b * f.vectors;
  f.v = bb.diagonal().real();
  const Eigen::Index n = f.x.size();
  f.l = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) f.l(i, j) = (f.x(i) - f.x(j)) * bb(i, j);
  return f;
}

// Closed-form gap of the 2x2 Hermitian matrix [[a, c], [conj(c), d]].
inline double gap_2x2(double a, double d, cplx c) { return std::sqrt((a - d) * (a - d) + 4.0 * std::norm(c)); }

}  // namespace oracle
