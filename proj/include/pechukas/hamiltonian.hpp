#pragma once

// Hermitian Hamiltonians H(lambda) = H0 + lambda * Z * Hb: construction,
// random ensembles, the two-qubit CNOT, diagonalization, and the gas
// initial conditions at lambda = 1.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pechukas/error.hpp"
#include "pechukas/state.hpp"

namespace pechukas {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

/// Dense Hermitian matrix. The constructor symmetrizes, so every instance is
/// exactly Hermitian: entries(m, n) == conj(entries(n, m)) bit for bit.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(const ComplexMatrix& entries) {
    if (entries.rows() != entries.cols())
      throw ValidationError("HermitianMatrix: matrix is " + std::to_string(entries.rows()) + "x" +
                            std::to_string(entries.cols()) + ", expected square");
    if (entries.rows() < 2)
      throw ValidationError("HermitianMatrix: dim must be >= 2, got " + std::to_string(entries.rows()));
    const auto n = entries.rows();
    m_.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m_(i, i) = cplx(entries(i, i).real(), 0.0);
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const cplx s = (entries(i, j) + std::conj(entries(j, i))) * 0.5;
        m_(i, j) = s;
        m_(j, i) = std::conj(s);
      }
    }
  }

  static HermitianMatrix from_real(const Eigen::MatrixXd& entries) {
    return HermitianMatrix(entries.cast<cplx>());
  }

  static HermitianMatrix diagonal(const RealVector& d) {
    return HermitianMatrix(ComplexMatrix(d.cast<cplx>().asDiagonal()));
  }

  /// Rejects input whose Hermiticity defect max|M - M^dagger| exceeds tol.
  static HermitianMatrix checked(const ComplexMatrix& entries, double tol) {
    if (entries.rows() == entries.cols()) {
      const double defect = (entries - entries.adjoint()).cwiseAbs().maxCoeff();
      if (defect > tol) {
        std::ostringstream os;
        os << "matrix is not Hermitian: max|M - M^dagger| = " << defect << " > " << tol;
        throw ValidationError(os.str());
      }
    }
    return HermitianMatrix(entries);
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const ComplexMatrix& entries() const { return m_; }
  cplx operator()(int i, int j) const { return m_(i, j); }

  bool is_real() const { return (m_.imag().array() == 0.0).all(); }

  bool is_diagonal() const {
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j)
        if (i != j && m_(i, j) != cplx(0.0)) return false;
    return true;
  }

  HermitianMatrix scaled(double s) const { return HermitianMatrix(ComplexMatrix(m_ * s)); }

  friend HermitianMatrix operator+(const HermitianMatrix& a, const HermitianMatrix& b) {
    if (a.dim() != b.dim()) throw ValidationError("HermitianMatrix: dimension mismatch in sum");
    return HermitianMatrix(ComplexMatrix(a.m_ + b.m_));
  }

 private:
  ComplexMatrix m_;
};

/// Full input of the adiabatic problem H(lambda) = h0 + lambda * z * hb.
struct ProblemDefinition {
  HermitianMatrix h0;
  HermitianMatrix hb;
  double z = 1.0;
  double hbar = 1.0;

  int dim() const { return h0.dim(); }

  void validate() const {
    if (h0.dim() < 2) throw ValidationError("ProblemDefinition: h0 is empty");
    if (h0.dim() != hb.dim())
      throw ValidationError("ProblemDefinition: h0 is " + std::to_string(h0.dim()) + "-dimensional but hb is " +
                            std::to_string(hb.dim()) + "-dimensional");
    if (!(z > 0.0)) throw ValidationError("ProblemDefinition: z must be positive");
    if (!(hbar > 0.0)) throw ValidationError("ProblemDefinition: hbar must be positive");
  }

  HermitianMatrix at(double lambda) const {
    return HermitianMatrix(ComplexMatrix(h0.entries() + (lambda * z) * hb.entries()));
  }
};

struct Spectrum {
  RealVector eigenvalues;       // ascending
  ComplexMatrix eigenvectors;   // column k belongs to eigenvalues[k]

  double range() const { return eigenvalues.size() ? eigenvalues.maxCoeff() - eigenvalues.minCoeff() : 0.0; }
};

namespace detail {

// Connected components of the nonzero pattern. Diagonalizing block by block
// keeps structurally zero couplings exactly zero.
inline std::vector<std::vector<int>> coupled_blocks(const ComplexMatrix& m) {
  const int n = static_cast<int>(m.rows());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (m(i, j) != cplx(0.0)) parent[find(i)] = find(j);
  std::vector<std::vector<int>> blocks;
  std::vector<int> slot(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[r]].push_back(i);
  }
  return blocks;
}

}  // namespace detail

/// All eigenpairs of m, eigenvalues ascending, eigenvectors orthonormal.
inline Spectrum diagonalize(const HermitianMatrix& m, std::string_view name = "matrix") {
  const int n = m.dim();
  const auto blocks = detail::coupled_blocks(m.entries());
  std::vector<double> values;
  std::vector<Eigen::VectorXcd> vectors;
  values.reserve(n);
  vectors.reserve(n);
  for (const auto& block : blocks) {
    const int b = static_cast<int>(block.size());
    if (b == 1) {
      values.push_back(m(block[0], block[0]).real());
      Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
      e(block[0]) = 1.0;
      vectors.push_back(std::move(e));
      continue;
    }
    ComplexMatrix sub(b, b);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < b; ++j) sub(i, j) = m(block[i], block[j]);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sub);
    if (solver.info() != Eigen::Success) {
      std::ostringstream os;
      os << "diagonalize: eigensolver did not converge for " << name << " (" << b << "x" << b
         << " block, iteration cap " << 30 * b << ")";
      throw ConvergenceError(os.str());
    }
    for (int k = 0; k < b; ++k) {
      values.push_back(solver.eigenvalues()(k));
      Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
      for (int i = 0; i < b; ++i) e(block[i]) = solver.eigenvectors()(i, k);
      vectors.push_back(std::move(e));
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
  Spectrum s;
  s.eigenvalues.resize(n);
  s.eigenvectors.resize(n, n);
  for (int k = 0; k < n; ++k) {
    s.eigenvalues(k) = values[order[k]];
    s.eigenvectors.col(k) = vectors[order[k]];
  }
  return s;
}

inline RealVector eigenvalues(const HermitianMatrix& m) { return diagonalize(m).eigenvalues; }

/// Smallest adjacent gap of an ascending spectrum, with the pair achieving it.
struct GapInfo {
  double gap = 0.0;
  int lower = -1;
};

inline GapInfo min_adjacent_gap(const RealVector& ascending) {
  GapInfo g{std::numeric_limits<double>::infinity(), -1};
  for (Eigen::Index k = 0; k + 1 < ascending.size(); ++k) {
    const double d = ascending(k + 1) - ascending(k);
    if (d < g.gap) g = {d, static_cast<int>(k)};
  }
  return g;
}

/// Groups an ascending spectrum into runs whose adjacent gaps are <= tol and
/// returns the run lengths in order.
inline std::vector<int> degeneracy_multiplicities(const RealVector& ascending, double tol) {
  std::vector<int> out;
  if (ascending.size() == 0) return out;
  int run = 1;
  for (Eigen::Index k = 1; k < ascending.size(); ++k) {
    if (ascending(k) - ascending(k - 1) <= tol) {
      ++run;
    } else {
      out.push_back(run);
      run = 1;
    }
  }
  out.push_back(run);
  return out;
}

// ---------------------------------------------------------------------------
// Random ensembles

enum class EnsembleKind { GUE, GOE };
enum class BiasKind { PicketFence, RandomSameEnsemble };

struct EnsembleSpec {
  int dim = 50;
  EnsembleKind kind = EnsembleKind::GUE;
  double sigma_h0 = 0.1;  // r.m.s. of off-diagonal H0 entries
  BiasKind hb_kind = BiasKind::RandomSameEnsemble;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 2) throw ValidationError("EnsembleSpec: dim must be >= 2");
    if (!(sigma_h0 > 0.0)) throw ValidationError("EnsembleSpec: sigma_h0 must be positive");
  }
};

inline std::string to_string(EnsembleKind k) { return k == EnsembleKind::GUE ? "GUE" : "GOE"; }
inline std::string to_string(BiasKind k) {
  return k == BiasKind::PicketFence ? "picket-fence" : "random-same-ensemble";
}

/// One Gaussian-ensemble draw. Off-diagonal entries have r.m.s. sigma,
/// diagonal entries r.m.s. sigma * sqrt(2).
template <class Engine>
HermitianMatrix sample_gaussian(int dim, EnsembleKind kind, double sigma, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  const double diag_sd = sigma * std::sqrt(2.0);
  for (int i = 0; i < dim; ++i) m(i, i) = diag_sd * normal(rng);
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      cplx e;
      if (kind == EnsembleKind::GUE) {
        const double re = normal(rng);
        const double im = normal(rng);
        e = cplx(re, im) * (sigma / std::sqrt(2.0));
      } else {
        e = sigma * normal(rng);
      }
      m(i, j) = e;
      m(j, i) = std::conj(e);
    }
  }
  return HermitianMatrix(m);
}

/// Draws (H0, Hb) for one realization. Hb is normalized to unit mean level
/// spacing before the z multiplier.
inline ProblemDefinition sample_ensemble(const EnsembleSpec& spec, double z = 1.0) {
  spec.validate();
  if (!(z > 0.0)) throw ValidationError("sample_ensemble: z must be positive");
  std::mt19937_64 rng(spec.seed);
  ProblemDefinition p;
  p.h0 = sample_gaussian(spec.dim, spec.kind, spec.sigma_h0, rng);
  if (spec.hb_kind == BiasKind::PicketFence) {
    RealVector d(spec.dim);
    for (int k = 0; k < spec.dim; ++k) d(k) = k;
    p.hb = HermitianMatrix::diagonal(d);
  } else {
    const HermitianMatrix raw = sample_gaussian(spec.dim, spec.kind, 1.0, rng);
    const RealVector ev = eigenvalues(raw);
    const double spacing = (ev(spec.dim - 1) - ev(0)) / (spec.dim - 1);
    p.hb = raw.scaled(1.0 / spacing);
  }
  p.z = z;
  return p;
}

// ---------------------------------------------------------------------------
// CNOT in the ground-state quantum computing encoding: two qubits, two steps,
// two dots per step, one electron per qubit row. Basis index 4*d0 + d1 with
// d = 2*step + dot for qubit 0 (d0) and qubit 1 (d1).

struct CnotConfig {
  double epsilon = -0.1;
};

inline constexpr int kCnotDim = 16;

constexpr int cnot_dot(int step, int dot) { return 2 * step + dot; }
constexpr int cnot_index(int d0, int d1) { return 4 * d0 + d1; }

inline HermitianMatrix build_cnot(const CnotConfig& cfg = {}) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(kCnotDim, kCnotDim);
  auto add_projector = [&](int a, int b) {  // |a> - |b>, unnormalized
    h(a, a) += 1.0;
    h(b, b) += 1.0;
    h(a, b) -= 1.0;
    h(b, a) -= 1.0;
  };
  for (int j = 0; j < 2; ++j) {
    // control in 0: target copied unchanged from step 0 to step 1
    add_projector(cnot_index(cnot_dot(1, 0), cnot_dot(1, j)), cnot_index(cnot_dot(0, 0), cnot_dot(0, j)));
    // control in 1: target flipped
    add_projector(cnot_index(cnot_dot(1, 1), cnot_dot(1, j)), cnot_index(cnot_dot(0, 1), cnot_dot(0, 1 - j)));
  }
  for (int d0 = 0; d0 < 4; ++d0) {
    for (int d1 = 0; d1 < 4; ++d1) {
      const int s0 = d0 / 2, s1 = d1 / 2;
      if (s0 != s1) h(cnot_index(d0, d1), cnot_index(d0, d1)) += 1.0;  // mismatched steps
      if (d0 == cnot_dot(0, 0)) h(cnot_index(d0, d1), cnot_index(d0, d1)) += cfg.epsilon;
      if (d1 == cnot_dot(0, 0)) h(cnot_index(d0, d1), cnot_index(d0, d1)) += cfg.epsilon;
    }
  }
  return HermitianMatrix::from_real(h);
}

/// Default CNOT bias: picket fence k plus a 1e-3 k^2 dither.
inline HermitianMatrix cnot_bias(double dither = 1e-3) {
  RealVector d(kCnotDim);
  for (int k = 0; k < kCnotDim; ++k) d(k) = k + dither * k * k;
  return HermitianMatrix::diagonal(d);
}

inline ProblemDefinition cnot_problem(const CnotConfig& cfg = {}, double z = 10.0) {
  ProblemDefinition p{build_cnot(cfg), cnot_bias(), z, 1.0};
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Gas initial conditions at lambda = 1

inline double degeneracy_tolerance(double spectral_range) { return 1e-9 * spectral_range; }

namespace detail {

inline void require_nondegenerate(const RealVector& ascending, std::string_view what) {
  const double range = ascending(ascending.size() - 1) - ascending(0);
  const GapInfo g = min_adjacent_gap(ascending);
  if (!(g.gap > degeneracy_tolerance(range))) {
    std::ostringstream os;
    os << what << ": levels " << g.lower << " and " << g.lower + 1 << " are degenerate (gap " << g.gap
       << ", tolerance " << degeneracy_tolerance(range) << ")";
    throw DegeneracyError(os.str());
  }
}

// l_mn = (x_m - x_n) * b_mn from the upper triangle; lower triangle mirrored
// so the anti-Hermitian structure is exact.
inline ComplexMatrix angular_momenta(const RealVector& x, const ComplexMatrix& bias_elements) {
  const int n = static_cast<int>(x.size());
  ComplexMatrix l = ComplexMatrix::Zero(n, n);
  for (int m = 0; m < n; ++m)
    for (int k = m + 1; k < n; ++k) {
      l(m, k) = (x(m) - x(k)) * bias_elements(m, k);
      l(k, m) = -std::conj(l(m, k));
    }
  return l;
}

}  // namespace detail

/// x, v, l from the exact eigenbasis of H(1) = H0 + Z Hb.
inline PechukasState initial_conditions_exact(const ProblemDefinition& p) {
  p.validate();
  const Spectrum s = diagonalize(p.at(1.0), "H(1)");
  detail::require_nondegenerate(s.eigenvalues, "initial_conditions_exact");
  ComplexMatrix b = s.eigenvectors.adjoint() * (p.z * p.hb.entries()) * s.eigenvectors;
  // Off-diagonal elements at eigensolver roundoff are structural zeros (H0 = 0,
  // decoupled blocks). Left in, they turn into huge forces where levels meet.
  const double noise = 64.0 * p.dim() * std::numeric_limits<double>::epsilon() * b.cwiseAbs().maxCoeff();
  for (Eigen::Index m = 0; m < b.rows(); ++m)
    for (Eigen::Index k = 0; k < b.cols(); ++k)
      if (m != k && std::abs(b(m, k)) < noise) b(m, k) = 0.0;
  PechukasState st;
  st.lambda = 1.0;
  st.x = s.eigenvalues;
  st.v = b.diagonal().real();
  st.l = detail::angular_momenta(st.x, b);
  return st;
}

/// First order in 1/Z around the eigenbasis of Hb. In that basis, with
/// h = H0 expressed there:
///   x_m = Z b_m + h_mm,   v_m = Z b_m,   <m|Z Hb|n> = -h_mn  (m != n),
/// which are the diagonal and off-diagonal bias elements between the
/// first-order corrected eigenvectors |m> = |b_m> + sum_k h_km / (Z (b_m - b_k)) |b_k>,
/// truncated at first order. The gas then encodes H0 itself exactly.
inline PechukasState initial_conditions_perturbative(const ProblemDefinition& p, int order = 1) {
  p.validate();
  if (order != 1) throw ValidationError("initial_conditions_perturbative: only order 1 is implemented");
  const int n = p.dim();
  RealVector b;
  ComplexMatrix h;
  if (p.hb.is_diagonal()) {
    b = p.hb.entries().diagonal().real();
    h = p.h0.entries();
  } else {
    const Spectrum sb = diagonalize(p.hb, "Hb");
    b = sb.eigenvalues;
    h = sb.eigenvectors.adjoint() * p.h0.entries() * sb.eigenvectors;
  }
  RealVector sorted_b = b;
  std::sort(sorted_b.data(), sorted_b.data() + n);
  detail::require_nondegenerate(sorted_b, "initial_conditions_perturbative (Hb)");

  RealVector x(n);
  for (int m = 0; m < n; ++m) x(m) = p.z * b(m) + h(m, m).real();
  std::vector<int> order_idx(n);
  std::iota(order_idx.begin(), order_idx.end(), 0);
  std::stable_sort(order_idx.begin(), order_idx.end(), [&](int a, int c) { return x(a) < x(c); });

  PechukasState st;
  st.lambda = 1.0;
  st.x.resize(n);
  st.v.resize(n);
  ComplexMatrix elements = ComplexMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int m = order_idx[i];
    st.x(i) = x(m);
    st.v(i) = p.z * b(m);
    for (int j = 0; j < n; ++j)
      if (i != j) elements(i, j) = -h(m, order_idx[j]);
  }
  st.l = detail::angular_momenta(st.x, elements);
  return st;
}

}  // namespace pechukas
