#pragma once

// Fidelity oracles. Estimators see a target only through evaluate().

#include <atomic>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "qsnap/circuit.hpp"
#include "qsnap/noise.hpp"
#include "qsnap/rng.hpp"
#include "qsnap/state.hpp"
#include "qsnap/synthesis.hpp"

namespace qsnap {

template <class O>
concept StateOracle = requires(O& o, const StateVector& s) {
  { o.evaluate(s) } -> std::convertible_to<double>;
};

template <class O>
concept DensityOracle = requires(O& o, const DensityMatrix& r) {
  { o.evaluate(r) } -> std::convertible_to<double>;
};

/// Exact ancilla <Z> from the final statevector.
struct Analytic {};

/// Finite-shot estimate 2 P(0) - 1.
struct Shots {
  std::size_t count = 1024;
};

/// Monte Carlo trajectories on the lowered SWAP-test circuit.
struct Noisy {
  NoiseModel model;
  std::size_t trajectories = 2000;
};

using OracleMode = std::variant<Analytic, Shots, Noisy>;

/// How the target is re-prepared for every evaluation: a single circuit for
/// a pure target, or a weighted ensemble of circuits for a mixed one.
class TargetPreparation {
 public:
  static TargetPreparation pure(QuantumCircuit circuit) {
    TargetPreparation t;
    t.members_.emplace_back(1.0, std::move(circuit));
    t.validate();
    return t;
  }

  static TargetPreparation ensemble(std::vector<std::pair<double, QuantumCircuit>> members) {
    TargetPreparation t;
    t.members_ = std::move(members);
    t.validate();
    return t;
  }

  std::size_t n_qubits() const { return members_.front().second.n_qubits(); }
  const std::vector<std::pair<double, QuantumCircuit>>& members() const noexcept { return members_; }

 private:
  void validate() const {
    if (members_.empty()) throw std::invalid_argument("target preparation is empty");
    double total = 0.0;
    for (const auto& [w, c] : members_) {
      if (!(w >= 0.0)) throw std::invalid_argument("ensemble weight must be non-negative");
      if (c.n_qubits() != members_.front().second.n_qubits()) throw std::invalid_argument("ensemble width mismatch");
      if (c.contains(GateKind::MEASURE)) throw std::invalid_argument("target preparation must not measure");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("ensemble weights must sum to 1");
  }

  std::vector<std::pair<double, QuantumCircuit>> members_;
};

/// Pure-state decomposition of a density matrix: (weight, preparation)
/// pairs for every eigenvalue above `cutoff`.
inline std::vector<std::pair<double, QuantumCircuit>> ensemble_preparations(const DensityMatrix& rho,
                                                                             double cutoff = 1e-12) {
  const auto es = detail::hermitian_eigen(rho.entries());
  std::vector<std::pair<double, QuantumCircuit>> out;
  double total = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double w = es.eigenvalues()[i];
    if (w <= cutoff) continue;
    std::vector<Complex> v(rho.dim());
    for (std::size_t k = 0; k < rho.dim(); ++k) v[k] = es.eigenvectors()(static_cast<Eigen::Index>(k), i);
    out.emplace_back(w, mottonen_prepare(StateVector::from_amplitudes(std::move(v))));
    total += w;
  }
  for (auto& m : out) m.first /= total;
  return out;
}

/// SWAP-test fidelity oracle. Each evaluate() builds a fresh SWAP test
/// between the candidate preparation and a re-prepared target and returns
/// the ancilla <Z>. For density candidates (and ensemble targets) the value
/// is the ensemble-weighted <Z>, i.e. the Hilbert-Schmidt overlap Tr(rho sigma).
class SwapTestOracle {
 public:
  explicit SwapTestOracle(TargetPreparation target, OracleMode mode = Analytic{}, std::uint64_t seed = 0,
                          std::size_t threads = 1)
      : target_(std::move(target)), mode_(std::move(mode)), rng_(seed), threads_(threads) {
    if (const auto* s = std::get_if<Shots>(&mode_); s && s->count == 0) {
      throw std::invalid_argument("shot count must be >= 1");
    }
    if (const auto* s = std::get_if<Noisy>(&mode_); s && s->trajectories == 0) {
      throw std::invalid_argument("trajectory count must be >= 1");
    }
  }

  SwapTestOracle(const SwapTestOracle&) = delete;
  SwapTestOracle& operator=(const SwapTestOracle&) = delete;

  std::size_t n_qubits() const { return target_.n_qubits(); }
  std::size_t evaluations() const noexcept { return evaluations_.load(); }
  const OracleMode& mode() const noexcept { return mode_; }

  double evaluate(const StateVector& candidate) {
    check_width(candidate.n_qubits());
    const std::size_t call = evaluations_.fetch_add(1);
    Rng rng = rng_.split(call);
    return ensemble_value({{1.0, mottonen_prepare(candidate)}}, rng);
  }

  double evaluate(const DensityMatrix& candidate) {
    check_width(candidate.n_qubits());
    const std::size_t call = evaluations_.fetch_add(1);
    Rng rng = rng_.split(call);
    return ensemble_value(ensemble_preparations(candidate), rng);
  }

 private:
  void check_width(std::size_t n) const {
    if (n != n_qubits()) throw std::invalid_argument("candidate width differs from oracle target width");
  }

  double ensemble_value(const std::vector<std::pair<double, QuantumCircuit>>& candidate, Rng& rng) const {
    double acc = 0.0;
    for (const auto& [wc, cprep] : candidate) {
      for (const auto& [wt, tprep] : target_.members()) {
        if (wc * wt == 0.0) continue;
        acc += wc * wt * swap_value(cprep, tprep, rng);
      }
    }
    return acc;
  }

  double swap_value(const QuantumCircuit& candidate_prep, const QuantumCircuit& target_prep, Rng& rng) const {
    // Target on qubits 1..n, candidate on n+1..2n.
    const QuantumCircuit test = build_swap_test(n_qubits(), target_prep, candidate_prep);
    return std::visit(
        [&](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Analytic>) {
            return ancilla_expectation(test);
          } else if constexpr (std::is_same_v<M, Shots>) {
            const auto r = sample_shots(test, m.count, rng);
            return 2.0 * r.probability("0") - 1.0;
          } else {
            return execute_trajectories(lower_to_basis(test), m.model, m.trajectories, rng, threads_);
          }
        },
        mode_);
  }

  TargetPreparation target_;
  OracleMode mode_;
  Rng rng_;
  std::size_t threads_;
  std::atomic<std::size_t> evaluations_{0};
};

/// Validation-only oracle with direct access to the target density matrix.
/// Returns the Uhlmann fidelity, which a SWAP test cannot measure.
class UhlmannOracle {
 public:
  explicit UhlmannOracle(DensityMatrix target) : target_(std::move(target)) {}

  UhlmannOracle(const UhlmannOracle&) = delete;
  UhlmannOracle& operator=(const UhlmannOracle&) = delete;

  std::size_t n_qubits() const { return target_.n_qubits(); }
  std::size_t evaluations() const noexcept { return evaluations_.load(); }

  double evaluate(const DensityMatrix& candidate) {
    ++evaluations_;
    return uhlmann_fidelity(target_, candidate);
  }

  double evaluate(const StateVector& candidate) {
    ++evaluations_;
    const Eigen::VectorXcd v = candidate.to_eigen();
    return std::clamp((v.adjoint() * target_.entries() * v)(0, 0).real(), 0.0, 1.0);
  }

 private:
  DensityMatrix target_;
  std::atomic<std::size_t> evaluations_{0};
};

}  // namespace qsnap
