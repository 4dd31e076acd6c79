#pragma once

// Raw real parameter vectors -> physical candidates. Complex entries are
// interleaved: entry k = raw[2k] + i raw[2k+1]. Matrices are row-major.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "qsnap/state.hpp"

namespace qsnap {

enum class Representation { statevector, unitary, density };

inline std::string to_string(Representation r) {
  switch (r) {
    case Representation::statevector: return "statevector";
    case Representation::unitary: return "unitary";
    case Representation::density: return "density";
  }
  return "?";
}

inline Representation parse_representation(const std::string& s) {
  if (s == "statevector") return Representation::statevector;
  if (s == "unitary") return Representation::unitary;
  if (s == "density") return Representation::density;
  throw std::invalid_argument("unknown representation '" + s + "'");
}

/// 2d for state vectors, 2d^2 for matrix representations.
inline std::size_t raw_length(Representation r, std::size_t n_qubits) {
  const std::size_t d = dimension_of(n_qubits);
  return r == Representation::statevector ? 2 * d : 2 * d * d;
}

namespace detail {

inline std::vector<Complex> pair_up(std::span<const double> raw) {
  if (raw.size() % 2 != 0) throw std::invalid_argument("raw parameter vector has odd length");
  std::vector<Complex> c(raw.size() / 2);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = Complex(raw[2 * k], raw[2 * k + 1]);
  return c;
}

inline Matrix square_from_raw(std::span<const double> raw) {
  const auto c = pair_up(raw);
  const auto d = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(c.size()))));
  if (d * d != c.size() || d < 2) throw std::invalid_argument("raw length is not 2*d^2 for a qubit dimension d");
  qubits_for_dimension(d);
  Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t col = 0; col < d; ++col) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = c[r * d + col];
  }
  return m;
}

}  // namespace detail

inline StateVector decode_candidate_state(std::span<const double> raw) {
  auto c = detail::pair_up(raw);
  if (c.size() < 2) throw std::invalid_argument("raw length must be 2*2^n with n >= 1");
  return StateVector::from_amplitudes(std::move(c));
}

/// QR of the raw matrix with R's diagonal made real-positive. Returns
/// nullopt when the matrix is numerically rank deficient; the caller should
/// perturb `raw` and retry.
inline std::optional<UnitaryMatrix> decode_candidate_unitary(std::span<const double> raw) {
  const Matrix m = detail::square_from_raw(raw);
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  double max_diag = 0.0, min_diag = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < r.rows(); ++j) {
    max_diag = std::max(max_diag, std::abs(r(j, j)));
    min_diag = std::min(min_diag, std::abs(r(j, j)));
  }
  if (!(max_diag > 0.0) || min_diag < 1e-12 * max_diag) return std::nullopt;
  for (Eigen::Index j = 0; j < r.rows(); ++j) q.col(j) *= r(j, j) / std::abs(r(j, j));
  return UnitaryMatrix(std::move(q));
}

/// rho = M M^dagger / Tr(M M^dagger)
inline DensityMatrix decode_candidate_density(std::span<const double> raw) {
  const Matrix m = detail::square_from_raw(raw);
  if (m.norm() == 0.0) throw std::invalid_argument("decode_candidate_density: zero matrix");
  return DensityMatrix::normalized(m * m.adjoint());
}

}  // namespace qsnap
