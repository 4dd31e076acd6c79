#pragma once

// Circuit synthesis: Mottonen state preparation, lowering to the native
// basis set, and SWAP-test construction.

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qsnap/circuit.hpp"
#include "qsnap/state.hpp"

namespace qsnap {

namespace detail {

inline constexpr double kAngleEps = 1e-14;

/// Uniformly controlled rotation: for every pattern c of the control qubits
/// (bit j of c is controls[j]), the target receives R(alpha[c]). Expanded
/// into 2^k rotations and a Gray-code CX ladder.
inline void uniformly_controlled_rotation(QuantumCircuit& qc, GateKind axis, std::size_t target,
                                          const std::vector<std::size_t>& controls,
                                          const std::vector<double>& alpha) {
  const std::size_t k = controls.size();
  const std::size_t patterns = std::size_t{1} << k;
  if (alpha.size() != patterns) throw std::logic_error("uniformly_controlled_rotation: angle count");

  bool all_zero = true, all_equal = true;
  for (double a : alpha) {
    all_zero = all_zero && std::abs(a) < kAngleEps;
    all_equal = all_equal && std::abs(a - alpha[0]) < kAngleEps;
  }
  if (all_zero) return;
  if (all_equal) {
    qc.add({axis, {target}, alpha[0]});
    return;
  }

  // alpha_c = sum_i (-1)^popcount(c & gray(i)) theta_i; that sign matrix is
  // orthogonal up to a factor 2^k, so the inverse is its transpose / 2^k.
  std::vector<double> theta(patterns, 0.0);
  for (std::size_t i = 0; i < patterns; ++i) {
    const std::size_t gray = i ^ (i >> 1);
    double acc = 0.0;
    for (std::size_t c = 0; c < patterns; ++c) acc += (std::popcount(c & gray) & 1U) ? -alpha[c] : alpha[c];
    theta[i] = acc / static_cast<double>(patterns);
  }
  for (std::size_t i = 0; i < patterns; ++i) {
    if (std::abs(theta[i]) >= kAngleEps) qc.add({axis, {target}, theta[i]});
    const std::size_t here = i ^ (i >> 1);
    const std::size_t next_i = (i + 1) % patterns;
    const std::size_t next = next_i ^ (next_i >> 1);
    const auto j = static_cast<std::size_t>(std::countr_zero(here ^ next));
    qc.cx(controls[j], target);
  }
}

}  // namespace detail

/// Circuit over RY/RZ/CX mapping |0...0> to `target` up to a global phase.
inline QuantumCircuit mottonen_prepare(const StateVector& target) {
  const std::size_t n = target.n_qubits();
  const std::size_t dim = target.dim();
  if (!(target.norm() > 0.0)) throw std::invalid_argument("mottonen_prepare: zero-norm target");

  std::vector<double> mag(dim), phase(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    mag[k] = std::abs(target[k]);
    phase[k] = mag[k] > 0.0 ? std::arg(target[k]) : 0.0;
  }

  QuantumCircuit qc(n);

  // Magnitudes, most significant qubit first. Controls are the qubits above
  // the target; pattern c indexes their bits.
  for (std::size_t t = n; t-- > 0;) {
    std::vector<std::size_t> controls;
    for (std::size_t q = t + 1; q < n; ++q) controls.push_back(q);
    const std::size_t patterns = std::size_t{1} << controls.size();
    std::vector<double> w0(patterns, 0.0), w1(patterns, 0.0);
    for (std::size_t k = 0; k < dim; ++k) {
      const std::size_t c = k >> (t + 1);
      ((k >> t) & 1U ? w1 : w0)[c] += mag[k] * mag[k];
    }
    std::vector<double> alpha(patterns);
    for (std::size_t c = 0; c < patterns; ++c) alpha[c] = 2.0 * std::atan2(std::sqrt(w1[c]), std::sqrt(w0[c]));
    detail::uniformly_controlled_rotation(qc, GateKind::RY, t, controls, alpha);
  }

  // Phases, least significant qubit first. Each stage fixes the relative
  // phase within pairs and passes the pair mean upward; the final mean is a
  // global phase and is dropped.
  std::vector<double> p = phase;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<std::size_t> controls;
    for (std::size_t q = t + 1; q < n; ++q) controls.push_back(q);
    const std::size_t patterns = p.size() / 2;
    std::vector<double> alpha(patterns), mean(patterns);
    for (std::size_t c = 0; c < patterns; ++c) {
      alpha[c] = p[2 * c + 1] - p[2 * c];
      mean[c] = 0.5 * (p[2 * c] + p[2 * c + 1]);
    }
    detail::uniformly_controlled_rotation(qc, GateKind::RZ, t, controls, alpha);
    p = std::move(mean);
  }
  return qc;
}

namespace detail {

inline void lower_h(QuantumCircuit& out, std::size_t q) {
  out.rz(q, std::numbers::pi / 2).sx(q).rz(q, std::numbers::pi / 2);
}

inline void lower_toffoli(QuantumCircuit& out, std::size_t c1, std::size_t c2, std::size_t t) {
  constexpr double quarter = std::numbers::pi / 4;
  lower_h(out, t);
  out.cx(c2, t).rz(t, -quarter);
  out.cx(c1, t).rz(t, quarter);
  out.cx(c2, t).rz(t, -quarter);
  out.cx(c1, t).rz(c2, quarter).rz(t, quarter);
  lower_h(out, t);
  out.cx(c1, c2).rz(c1, quarter).rz(c2, -quarter);
  out.cx(c1, c2);
}

}  // namespace detail

/// Rewrites H, RY and CSWAP into {X, SX, RZ, CX}; basis gates pass through.
/// Equal to the input up to a global phase.
inline QuantumCircuit lower_to_basis(const QuantumCircuit& circuit) {
  QuantumCircuit out(circuit.n_qubits());
  for (const auto& g : circuit.gates()) {
    switch (g.kind) {
      case GateKind::H: detail::lower_h(out, g.qubits[0]); break;
      case GateKind::RY:
        // RY(t) ~ RZ(pi) SX RZ(t + pi) SX
        out.sx(g.qubits[0]).rz(g.qubits[0], g.param + std::numbers::pi).sx(g.qubits[0]).rz(g.qubits[0], std::numbers::pi);
        break;
      case GateKind::CSWAP: {
        const std::size_t c = g.qubits[0], a = g.qubits[1], b = g.qubits[2];
        out.cx(b, a);
        detail::lower_toffoli(out, c, a, b);
        out.cx(b, a);
        break;
      }
      default: out.add(g); break;
    }
  }
  return out;
}

/// (2n+1)-qubit SWAP test: ancilla on qubit 0, prep_a on 1..n, prep_b on
/// n+1..2n, ancilla measured. Ancilla <Z> equals |<a|b>|^2.
inline QuantumCircuit build_swap_test(std::size_t n_qubits, const QuantumCircuit& prep_a,
                                      const QuantumCircuit& prep_b) {
  if (n_qubits == 0) throw std::invalid_argument("build_swap_test: n_qubits must be >= 1");
  if (prep_a.n_qubits() != n_qubits || prep_b.n_qubits() != n_qubits) {
    throw std::invalid_argument("build_swap_test: preparation width mismatch");
  }
  QuantumCircuit qc(2 * n_qubits + 1);
  qc.h(0);
  qc.append(prep_a, 1);
  qc.append(prep_b, n_qubits + 1);
  for (std::size_t i = 1; i <= n_qubits; ++i) qc.cswap(0, i, n_qubits + i);
  qc.h(0);
  qc.measure(0);
  return qc;
}

}  // namespace qsnap
