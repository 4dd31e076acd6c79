#pragma once

// Dense state representations and the fidelity / entropy measures defined
// on them. Qubit 0 is the least-significant bit of a basis index.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qsnap/rng.hpp"

namespace qsnap {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

namespace tol {
inline constexpr double norm = 1e-10;
inline constexpr double hermitian = 1e-10;
inline constexpr double trace = 1e-10;
inline constexpr double psd = 1e-9;
inline constexpr double unitary = 1e-10;
}  // namespace tol

inline std::size_t dimension_of(std::size_t n_qubits) { return std::size_t{1} << n_qubits; }

/// Returns n with 2^n == dim, or throws.
inline std::size_t qubits_for_dimension(std::size_t dim) {
  if (dim == 0 || (dim & (dim - 1)) != 0) {
    throw std::invalid_argument("dimension " + std::to_string(dim) + " is not a power of two");
  }
  std::size_t n = 0;
  while ((std::size_t{1} << n) < dim) ++n;
  return n;
}

/// Unit-norm amplitude vector over n >= 1 qubits.
class StateVector {
 public:
  /// Normalizes `amplitudes`. Throws on zero norm or a non power-of-two length.
  static StateVector from_amplitudes(std::vector<Complex> amplitudes) {
    const std::size_t n = qubits_for_dimension(amplitudes.size());
    if (n == 0) throw std::invalid_argument("state vector needs at least one qubit");
    double sq = 0.0;
    for (const auto& a : amplitudes) sq += std::norm(a);
    const double nrm = std::sqrt(sq);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
      throw std::invalid_argument("cannot normalize a zero or non-finite amplitude vector");
    }
    for (auto& a : amplitudes) a /= nrm;
    return StateVector(n, std::move(amplitudes));
  }

  /// Keeps `amplitudes` bit for bit; they must already have unit norm.
  static StateVector from_normalized(std::vector<Complex> amplitudes, double tolerance = tol::norm) {
    const std::size_t n = qubits_for_dimension(amplitudes.size());
    if (n == 0) throw std::invalid_argument("state vector needs at least one qubit");
    double sq = 0.0;
    for (const auto& a : amplitudes) sq += std::norm(a);
    if (!(std::abs(std::sqrt(sq) - 1.0) <= tolerance)) throw std::invalid_argument("amplitudes are not unit norm");
    return StateVector(n, std::move(amplitudes));
  }

  static StateVector basis(std::size_t n_qubits, std::size_t index) {
    if (n_qubits == 0) throw std::invalid_argument("state vector needs at least one qubit");
    if (index >= dimension_of(n_qubits)) throw std::invalid_argument("basis index out of range");
    std::vector<Complex> a(dimension_of(n_qubits));
    a[index] = 1.0;
    return StateVector(n_qubits, std::move(a));
  }

  static StateVector zero(std::size_t n_qubits) { return basis(n_qubits, 0); }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return amplitudes_.size(); }
  std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  const Complex& operator[](std::size_t k) const { return amplitudes_[k]; }

  double norm() const {
    double sq = 0.0;
    for (const auto& a : amplitudes_) sq += std::norm(a);
    return std::sqrt(sq);
  }

  StateVector with_global_phase(double theta) const {
    auto a = amplitudes_;
    const Complex ph = std::polar(1.0, theta);
    for (auto& x : a) x *= ph;
    return StateVector(n_qubits_, std::move(a));
  }

  Eigen::VectorXcd to_eigen() const {
    return Eigen::Map<const Eigen::VectorXcd>(amplitudes_.data(), static_cast<Eigen::Index>(dim()));
  }

 private:
  StateVector(std::size_t n, std::vector<Complex> a) : n_qubits_(n), amplitudes_(std::move(a)) {}

  std::size_t n_qubits_;
  std::vector<Complex> amplitudes_;
};

namespace detail {

inline Eigen::SelfAdjointEigenSolver<Matrix> hermitian_eigen(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error("Hermitian eigensolver failed");
  return es;
}

inline Matrix hermitian_part(const Matrix& m) { return (m + m.adjoint()) * 0.5; }

// Eigenvalues in [-psd, 0) are numerical drift and are clamped to zero.
inline Eigen::VectorXd clamp_spectrum(Eigen::VectorXd ev) {
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -tol::psd) throw std::invalid_argument("matrix is not positive semidefinite");
    if (ev[i] < 0.0) ev[i] = 0.0;
  }
  return ev;
}

}  // namespace detail

/// Hermitian, unit-trace, positive semidefinite matrix.
class DensityMatrix {
 public:
  /// Validates every invariant; throws std::invalid_argument on violation.
  explicit DensityMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) throw std::invalid_argument("density matrix must be square");
    n_qubits_ = qubits_for_dimension(static_cast<std::size_t>(entries_.rows()));
    if (n_qubits_ == 0) throw std::invalid_argument("density matrix needs at least one qubit");
    const double asym = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
    if (asym > tol::hermitian) throw std::invalid_argument("density matrix is not Hermitian");
    if (std::abs(entries_.trace() - Complex(1.0)) > tol::trace) {
      throw std::invalid_argument("density matrix trace differs from 1");
    }
    const double min_ev = detail::hermitian_eigen(detail::hermitian_part(entries_)).eigenvalues().minCoeff();
    if (min_ev < -tol::psd) throw std::invalid_argument("density matrix is not positive semidefinite");
  }

  static DensityMatrix pure(const StateVector& psi) {
    const Eigen::VectorXcd v = psi.to_eigen();
    return DensityMatrix(v * v.adjoint());
  }

  static DensityMatrix maximally_mixed(std::size_t n_qubits) {
    const auto d = static_cast<Eigen::Index>(dimension_of(n_qubits));
    return DensityMatrix(Matrix::Identity(d, d) / static_cast<double>(d));
  }

  /// Hermitizes and trace-normalizes an arbitrary PSD-up-to-rounding matrix.
  static DensityMatrix normalized(const Matrix& m) {
    Matrix h = detail::hermitian_part(m);
    const double tr = h.trace().real();
    if (!(tr > 0.0)) throw std::invalid_argument("cannot trace-normalize a zero matrix");
    return DensityMatrix(h / tr);
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Matrix& entries() const noexcept { return entries_; }

  /// Eigenvalues ascending, clamped at zero.
  Eigen::VectorXd spectrum() const {
    return detail::clamp_spectrum(detail::hermitian_eigen(entries_).eigenvalues());
  }

 private:
  Matrix entries_;
  std::size_t n_qubits_ = 0;
};

/// Square matrix with U^dagger U == I.
class UnitaryMatrix {
 public:
  explicit UnitaryMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) throw std::invalid_argument("unitary must be square");
    n_qubits_ = qubits_for_dimension(static_cast<std::size_t>(entries_.rows()));
    if (n_qubits_ == 0) throw std::invalid_argument("unitary needs at least one qubit");
    const auto d = entries_.rows();
    const double dev = (entries_.adjoint() * entries_ - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
    if (dev > tol::unitary) throw std::invalid_argument("matrix is not unitary");
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Matrix& entries() const noexcept { return entries_; }

  /// U|0...0>, the first column.
  StateVector apply_to_zero() const {
    std::vector<Complex> a(dim());
    for (std::size_t i = 0; i < dim(); ++i) a[i] = entries_(static_cast<Eigen::Index>(i), 0);
    return StateVector::from_amplitudes(std::move(a));
  }

 private:
  Matrix entries_;
  std::size_t n_qubits_ = 0;
};

/// Haar-random pure state: complex Gaussian vector, normalized.
inline StateVector random_pure_state(std::size_t n_qubits, Rng& rng) {
  if (n_qubits == 0) throw std::invalid_argument("random_pure_state: n_qubits must be >= 1");
  std::vector<Complex> a(dimension_of(n_qubits));
  for (auto& x : a) {
    const double re = rng.normal();
    const double im = rng.normal();
    x = Complex(re, im);
  }
  return StateVector::from_amplitudes(std::move(a));
}

/// |<a|b>|^2
inline double overlap_fidelity(const StateVector& a, const StateVector& b) {
  if (a.n_qubits() != b.n_qubits()) throw std::invalid_argument("overlap_fidelity: dimension mismatch");
  Complex ip = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) ip += std::conj(a[k]) * b[k];
  return std::min(1.0, std::norm(ip));
}

/// Tr(rho sigma), the quantity a SWAP test measures on mixed inputs.
inline double hilbert_schmidt_overlap(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw std::invalid_argument("hilbert_schmidt_overlap: dimension mismatch");
  // Tr(AB) = sum_ij A_ij B_ji
  return (rho.entries().array() * sigma.entries().transpose().array()).sum().real();
}

/// Principal square root of a PSD Hermitian matrix.
/// Eigenvalues at rounding level (below 1e-14 of the largest) are treated
/// as zero, so a pure input comes back as an exact rank-1 projector.
inline Matrix psd_sqrt(const Matrix& m) {
  const auto es = detail::hermitian_eigen(detail::hermitian_part(m));
  Eigen::VectorXd ev = detail::clamp_spectrum(es.eigenvalues());
  const double floor = 1e-14 * std::max(1.0, ev.maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] <= floor ? 0.0 : std::sqrt(ev[i]);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, evaluated as the squared nuclear
/// norm of sqrt(rho) sqrt(sigma). Going through singular values avoids the
/// square roots of rounding-level eigenvalues that would otherwise add
/// ~1e-8 noise for pure inputs.
inline double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw std::invalid_argument("uhlmann_fidelity: dimension mismatch");
  const Matrix prod = psd_sqrt(rho.entries()) * psd_sqrt(sigma.entries());
  const double nuclear = Eigen::JacobiSVD<Matrix>(prod).singularValues().sum();
  return std::clamp(nuclear * nuclear, 0.0, 1.0);
}

/// Reduced density matrix on `keep`. Bit j of the reduced index is the j-th
/// smallest kept qubit.
inline DensityMatrix partial_trace(const StateVector& state, std::span<const std::size_t> keep) {
  const std::size_t n = state.n_qubits();
  std::vector<std::size_t> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  if (kept.empty()) throw std::invalid_argument("partial_trace: keep set is empty");
  if (std::adjacent_find(kept.begin(), kept.end()) != kept.end()) {
    throw std::invalid_argument("partial_trace: duplicate qubit in keep set");
  }
  if (kept.back() >= n) throw std::invalid_argument("partial_trace: qubit index out of range");
  if (kept.size() == n) throw std::invalid_argument("partial_trace: keep set must be a strict subset");

  std::vector<std::size_t> traced;
  for (std::size_t q = 0; q < n; ++q) {
    if (!std::binary_search(kept.begin(), kept.end(), q)) traced.push_back(q);
  }
  const auto dim_a = static_cast<Eigen::Index>(dimension_of(kept.size()));
  const auto dim_b = static_cast<Eigen::Index>(dimension_of(traced.size()));

  // Reshape |psi> into a dim_a x dim_b coefficient matrix, then rho_A = C C^dagger.
  Matrix coeff = Matrix::Zero(dim_a, dim_b);
  for (std::size_t idx = 0; idx < state.dim(); ++idx) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t j = 0; j < kept.size(); ++j) ia |= ((idx >> kept[j]) & 1U) << j;
    for (std::size_t j = 0; j < traced.size(); ++j) ib |= ((idx >> traced[j]) & 1U) << j;
    coeff(static_cast<Eigen::Index>(ia), static_cast<Eigen::Index>(ib)) = state[idx];
  }
  return DensityMatrix::normalized(coeff * coeff.adjoint());
}

inline DensityMatrix partial_trace(const StateVector& state, std::initializer_list<std::size_t> keep) {
  const std::vector<std::size_t> k(keep);
  return partial_trace(state, std::span<const std::size_t>(k));
}

/// -Tr(rho log2 rho), with 0 log 0 = 0.
inline double von_neumann_entropy(const DensityMatrix& rho) {
  const Eigen::VectorXd ev = rho.spectrum();
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > 0.0) s -= ev[i] * std::log2(ev[i]);
  }
  return std::max(0.0, s);
}

/// Qubits {0, ..., ceil(n/2)-1}: the half kept for entanglement analysis.
inline std::vector<std::size_t> half_chain(std::size_t n_qubits) {
  std::vector<std::size_t> keep((n_qubits + 1) / 2);
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  return keep;
}

/// Entropy of the first ceil(n/2) qubits. A single qubit has no bipartition
/// and reports 0.
inline double half_chain_entropy(const StateVector& psi) {
  if (psi.n_qubits() < 2) return 0.0;
  const auto keep = half_chain(psi.n_qubits());
  return von_neumann_entropy(partial_trace(psi, std::span<const std::size_t>(keep)));
}

}  // namespace qsnap
