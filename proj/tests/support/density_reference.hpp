#pragma once

// Test-only exact density-matrix evolution of a lowered circuit under a
// NoiseModel. Deliberately dense and slow: every gate and Kraus operator is
// embedded into a full 2^n x 2^n matrix.

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "qsnap/circuit.hpp"
#include "qsnap/noise.hpp"

namespace qsnap::reference {

using Mat = Eigen::MatrixXcd;

/// Embeds a local operator acting on `qubits` (local index: bit of
/// qubits[0] is the least significant) into n qubits.
inline Mat embed(const Mat& local, const std::vector<std::size_t>& qubits, std::size_t n) {
  const std::size_t dim = std::size_t{1} << n;
  std::size_t mask = 0;
  for (auto q : qubits) mask |= std::size_t{1} << q;
  auto local_index = [&](std::size_t i) {
    std::size_t l = 0;
    for (std::size_t k = 0; k < qubits.size(); ++k) l |= ((i >> qubits[k]) & 1U) << k;
    return l;
  };
  Mat full = Mat::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      if ((r & ~mask) != (c & ~mask)) continue;
      full(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          local(static_cast<Eigen::Index>(local_index(r)), static_cast<Eigen::Index>(local_index(c)));
    }
  }
  return full;
}

inline Mat reference_gate(const Gate& g) {
  using C = std::complex<double>;
  const C i(0.0, 1.0);
  Mat m;
  switch (g.kind) {
    case GateKind::X:
      m = Mat::Zero(2, 2);
      m(0, 1) = m(1, 0) = 1.0;
      return m;
    case GateKind::SX:
      m.resize(2, 2);
      m << C(0.5, 0.5), C(0.5, -0.5), C(0.5, -0.5), C(0.5, 0.5);
      return m;
    case GateKind::RZ:
      m = Mat::Zero(2, 2);
      m(0, 0) = std::exp(-i * g.param / 2.0);
      m(1, 1) = std::exp(i * g.param / 2.0);
      return m;
    case GateKind::CX:
      // local index = bit(control) + 2 bit(target)
      m = Mat::Zero(4, 4);
      m(0, 0) = m(2, 2) = 1.0;
      m(1, 3) = m(3, 1) = 1.0;
      return m;
    case GateKind::ID:
    case GateKind::DELAY:
    case GateKind::MEASURE:
      return Mat::Identity(2, 2);
    default:
      throw std::invalid_argument("reference: unsupported gate");
  }
}

inline Mat apply_channel(const Mat& rho, const KrausChannel& ch, const std::vector<std::size_t>& qubits, std::size_t n) {
  Mat out = Mat::Zero(rho.rows(), rho.cols());
  for (const auto& k : ch.operators()) {
    const Mat K = embed(k, qubits, n);
    out += K * rho * K.adjoint();
  }
  return out;
}

/// Final density matrix from |0...0>. Measurements are terminal and only
/// contribute their relaxation channel.
inline Mat evolve_density(const QuantumCircuit& circuit, const NoiseModel& model) {
  const std::size_t n = circuit.n_qubits();
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  Mat rho = Mat::Zero(dim, dim);
  rho(0, 0) = 1.0;
  for (const auto& g : circuit.gates()) {
    if (g.kind == GateKind::MEASURE) {
      if (model.measurement()) rho = apply_channel(rho, *model.measurement(), g.qubits, n);
      continue;
    }
    const Mat U = embed(reference_gate(g), g.qubits, n);
    rho = U * rho * U.adjoint();
    if (g.kind == GateKind::DELAY) {
      if (model.delay_relaxation()) {
        const auto [t1, t2] = *model.delay_relaxation();
        rho = apply_channel(rho, thermal_relaxation_channel(t1, t2, g.param), g.qubits, n);
      }
      continue;
    }
    const std::vector<KrausChannel>* chans = nullptr;
    if (g.kind == GateKind::CX) chans = model.pair_channels(g.qubits[0], g.qubits[1]);
    if (!chans) chans = &model.channels(g.kind);
    for (const auto& ch : *chans) rho = apply_channel(rho, ch, g.qubits, n);
  }
  return rho;
}

inline double reference_ancilla_z(const Mat& rho) {
  double z = 0.0;
  for (Eigen::Index i = 0; i < rho.rows(); ++i) z += ((i & 1) ? -1.0 : 1.0) * rho(i, i).real();
  return z;
}

}  // namespace qsnap::reference
