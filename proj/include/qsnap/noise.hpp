#pragma once

// Gate-level Kraus noise and Monte Carlo trajectory execution.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "qsnap/circuit.hpp"
#include "qsnap/config.hpp"
#include "qsnap/errors.hpp"
#include "qsnap/rng.hpp"
#include "qsnap/state.hpp"

namespace qsnap {

/// CPTP map on one or two qubits given by its Kraus operators. For two-qubit
/// channels the local index is bit(first operand) + 2 * bit(second operand).
class KrausChannel {
 public:
  KrausChannel(std::vector<Matrix> operators, std::size_t arity) : arity_(arity) {
    if (arity != 1 && arity != 2) throw std::invalid_argument("Kraus channel arity must be 1 or 2");
    const Eigen::Index d = arity == 1 ? 2 : 4;
    Matrix sum = Matrix::Zero(d, d);
    for (auto& k : operators) {
      if (k.rows() != d || k.cols() != d) throw std::invalid_argument("Kraus operator has wrong shape");
      if (k.norm() < 1e-15) continue;
      sum += k.adjoint() * k;
      operators_.push_back(std::move(k));
    }
    if (operators_.empty()) throw std::invalid_argument("Kraus channel has no operators");
    if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-9) {
      throw std::invalid_argument("Kraus operators violate completeness");
    }
    compile();
  }

  static KrausChannel identity(std::size_t arity) {
    const Eigen::Index d = arity == 1 ? 2 : 4;
    return KrausChannel({Matrix::Identity(d, d)}, arity);
  }

  /// Channel acting as `a` on the first operand and `b` on the second.
  static KrausChannel tensor(const KrausChannel& a, const KrausChannel& b) {
    if (a.arity() != 1 || b.arity() != 1) throw std::invalid_argument("tensor expects single-qubit channels");
    std::vector<Matrix> ops;
    for (const auto& kb : b.operators()) {
      for (const auto& ka : a.operators()) ops.push_back(Eigen::kroneckerProduct(kb, ka).eval());
    }
    return KrausChannel(std::move(ops), 2);
  }

  std::size_t arity() const noexcept { return arity_; }
  std::size_t size() const noexcept { return operators_.size(); }
  const std::vector<Matrix>& operators() const noexcept { return operators_; }

  /// Each operator is a scaled unitary, so branch probabilities do not
  /// depend on the state.
  bool is_mixed_unitary() const noexcept { return mixed_unitary_; }

  bool is_identity() const noexcept { return operators_.size() == 1 && identity_[0]; }

  /// Samples one operator with probability ||K_i psi||^2 and applies it,
  /// renormalizing. `qubits` has `arity()` entries.
  void apply_stochastic(kernel::Amplitudes& a, std::span<const std::size_t> qubits, Rng& rng) const {
    if (is_identity()) return;
    const double r = rng.uniform();
    if (mixed_unitary_) {
      double cum = 0.0;
      std::size_t pick = operators_.size() - 1;
      for (std::size_t i = 0; i < weights_.size(); ++i) {
        cum += weights_[i];
        if (r < cum) {
          pick = i;
          break;
        }
      }
      if (!identity_[pick]) apply_op(a, qubits, unit_ops_[pick]);
      return;
    }
    // Branch probabilities from the reduced density matrix of the operands.
    const Matrix local = reduced(a, qubits);
    double cum = 0.0;
    std::size_t pick = operators_.size();
    std::size_t last_nonzero = 0;
    for (std::size_t i = 0; i < operators_.size(); ++i) {
      const double p = (operators_[i] * local * operators_[i].adjoint()).trace().real();
      if (p > 1e-300) last_nonzero = i;
      cum += p;
      if (r < cum) {
        pick = i;
        break;
      }
    }
    if (pick == operators_.size()) pick = last_nonzero;
    apply_op(a, qubits, raw_ops_[pick]);
    const double nrm = kernel::norm_sq(a);
    if (nrm > 0.0) kernel::scale(a, 1.0 / std::sqrt(nrm));
  }

 private:
  using Op = std::array<Complex, 16>;

  void compile() {
    const Eigen::Index d = arity_ == 1 ? 2 : 4;
    mixed_unitary_ = true;
    for (const auto& k : operators_) {
      raw_ops_.push_back(flatten(k));
      const Matrix kk = k.adjoint() * k;
      const double c = kk(0, 0).real();
      const bool scaled_unitary = (kk - c * Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-12 && c > 0.0;
      mixed_unitary_ = mixed_unitary_ && scaled_unitary;
      weights_.push_back(c);
      const Matrix u = scaled_unitary ? Matrix(k / std::sqrt(c)) : k;
      unit_ops_.push_back(flatten(u));
      const Complex ph = u(0, 0);
      identity_.push_back(scaled_unitary && (u - ph * Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }

  Op flatten(const Matrix& m) const {
    Op out{};
    const Eigen::Index d = m.rows();
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) out[static_cast<std::size_t>(r * d + c)] = m(r, c);
    }
    return out;
  }

  void apply_op(kernel::Amplitudes& a, std::span<const std::size_t> qubits, const Op& op) const {
    if (arity_ == 1) {
      kernel::apply_1q(a, qubits[0], {op[0], op[1], op[2], op[3]});
    } else {
      Mat4 m;
      std::copy(op.begin(), op.end(), m.begin());
      kernel::apply_2q(a, qubits[0], qubits[1], m);
    }
  }

  Matrix reduced(const kernel::Amplitudes& a, std::span<const std::size_t> qubits) const {
    const Eigen::Index d = arity_ == 1 ? 2 : 4;
    Matrix rho = Matrix::Zero(d, d);
    std::size_t mask = 0;
    for (auto q : qubits) mask |= std::size_t{1} << q;
    const auto spread = [&](std::size_t li) {
      std::size_t off = 0;
      for (std::size_t j = 0; j < qubits.size(); ++j) off |= ((li >> j) & 1U) << qubits[j];
      return off;
    };
    for (std::size_t base = 0; base < a.size(); ++base) {
      if (base & mask) continue;
      for (Eigen::Index r = 0; r < d; ++r) {
        const Complex ar = a[base | spread(static_cast<std::size_t>(r))];
        if (ar == Complex(0.0)) continue;
        for (Eigen::Index c = 0; c < d; ++c) {
          rho(r, c) += ar * std::conj(a[base | spread(static_cast<std::size_t>(c))]);
        }
      }
    }
    return rho;
  }

  std::vector<Matrix> operators_;
  std::size_t arity_;
  bool mixed_unitary_ = false;
  std::vector<double> weights_;
  std::vector<Op> raw_ops_;
  std::vector<Op> unit_ops_;
  std::vector<bool> identity_;
};

// ---------------------------------------------------------------------------
// Channel constructors

inline void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + ": probability outside [0,1]");
}

inline Matrix pauli(char which) {
  Matrix m(2, 2);
  using namespace std::complex_literals;
  switch (which) {
    case 'I': m << 1.0, 0.0, 0.0, 1.0; break;
    case 'X': m << 0.0, 1.0, 1.0, 0.0; break;
    case 'Y': m << 0.0, -1i, 1i, 0.0; break;
    case 'Z': m << 1.0, 0.0, 0.0, -1.0; break;
    default: throw std::invalid_argument("unknown Pauli");
  }
  return m;
}

/// {sqrt(1-p) I, sqrt(p) X}
inline KrausChannel bit_flip_channel(double p) {
  require_probability(p, "bit_flip_channel");
  return KrausChannel({std::sqrt(1.0 - p) * pauli('I'), std::sqrt(p) * pauli('X')}, 1);
}

/// sqrt(1-p) I plus sqrt(p/(4^arity - 1)) P for every non-identity Pauli
/// string P on `arity` qubits.
inline KrausChannel depolarizing_channel(double p, std::size_t arity) {
  require_probability(p, "depolarizing_channel");
  if (arity != 1 && arity != 2) throw std::invalid_argument("depolarizing_channel: arity must be 1 or 2");
  static constexpr std::array<char, 4> labels{'I', 'X', 'Y', 'Z'};
  const double others = arity == 1 ? 3.0 : 15.0;
  std::vector<Matrix> ops;
  if (arity == 1) {
    for (char a : labels) ops.push_back((a == 'I' ? std::sqrt(1.0 - p) : std::sqrt(p / others)) * pauli(a));
  } else {
    for (char b : labels) {
      for (char a : labels) {
        const double w = (a == 'I' && b == 'I') ? std::sqrt(1.0 - p) : std::sqrt(p / others);
        ops.push_back(w * Eigen::kroneckerProduct(pauli(b), pauli(a)).eval());
      }
    }
  }
  if (p == 0.0) ops.resize(1);
  return KrausChannel(std::move(ops), arity);
}

/// Amplitude damping gamma = 1 - exp(-t/T1) composed with pure dephasing so
/// that coherences decay as exp(-t/T2). t1, t2 in microseconds, duration in
/// nanoseconds. Only T2 <= T1 is supported.
inline KrausChannel thermal_relaxation_channel(double t1_us, double t2_us, double duration_ns) {
  if (!(t1_us > 0.0) || !(t2_us > 0.0)) throw std::invalid_argument("thermal_relaxation_channel: T1, T2 must be > 0");
  if (!(duration_ns >= 0.0)) throw std::invalid_argument("thermal_relaxation_channel: negative duration");
  if (t2_us > t1_us) throw unsupported_regime("thermal_relaxation_channel: T2 > T1 is not supported");
  const double t_us = duration_ns * 1e-3;
  const double gamma = -std::expm1(-t_us / t1_us);
  // Amplitude damping alone leaves exp(-t/(2 T1)) of the coherence.
  const double coherence = std::exp(-t_us / t2_us + t_us / (2.0 * t1_us));
  const double lambda = std::clamp(1.0 - coherence * coherence, 0.0, 1.0);

  Matrix k0(2, 2), k1(2, 2), k2(2, 2);
  k0 << 1.0, 0.0, 0.0, std::sqrt((1.0 - gamma) * (1.0 - lambda));
  k1 << 0.0, 0.0, 0.0, std::sqrt((1.0 - gamma) * lambda);
  k2 << 0.0, std::sqrt(gamma), 0.0, 0.0;
  return KrausChannel({k0, k1, k2}, 1);
}

// ---------------------------------------------------------------------------
// Noise parameters and model

struct NoiseParams {
  double bit_flip_p = 2.003e-04;
  double depol_1q = 1.701e-02;
  double depol_2q = 0.02;
  double t1 = 272.21;          // microseconds
  double t2 = 188.1;           // microseconds
  double readout_len = 1216.0; // nanoseconds
  double gate_len_1q = 60.0;   // nanoseconds, configurable stand-in
  double gate_len_2q = 660.0;  // nanoseconds, configurable stand-in

  void validate() const {
    require_probability(bit_flip_p, "bit_flip_p");
    require_probability(depol_1q, "depol_1q");
    require_probability(depol_2q, "depol_2q");
    if (!(t1 > 0.0) || !(t2 > 0.0)) throw std::invalid_argument("NoiseParams: t1 and t2 must be positive");
    if (t2 > 2.0 * t1) throw std::invalid_argument("NoiseParams: t2 must not exceed 2*t1");
    if (!(readout_len >= 0.0) || !(gate_len_1q >= 0.0) || !(gate_len_2q >= 0.0)) {
      throw std::invalid_argument("NoiseParams: durations must be non-negative");
    }
  }

  /// Every probability and duration zero; relaxation times kept.
  static NoiseParams noiseless() {
    NoiseParams p;
    p.bit_flip_p = p.depol_1q = p.depol_2q = 0.0;
    p.readout_len = p.gate_len_1q = p.gate_len_2q = 0.0;
    return p;
  }
};

/// Parses the key=value noise file. Unknown keys are an error; missing keys
/// keep their defaults.
inline NoiseParams parse_noise_params(std::string_view text) {
  NoiseParams p;
  const std::map<std::string, double NoiseParams::*> fields{
      {"bit_flip_p", &NoiseParams::bit_flip_p}, {"depol_1q", &NoiseParams::depol_1q},
      {"depol_2q", &NoiseParams::depol_2q},     {"t1", &NoiseParams::t1},
      {"t2", &NoiseParams::t2},                 {"readout_len", &NoiseParams::readout_len},
      {"gate_len_1q", &NoiseParams::gate_len_1q}, {"gate_len_2q", &NoiseParams::gate_len_2q}};
  for (const auto& [k, v] : parse_key_values(text)) {
    auto it = fields.find(k);
    if (it == fields.end()) throw std::invalid_argument("unknown noise parameter '" + k + "'");
    p.*(it->second) = parse_double(k, v);
  }
  p.validate();
  return p;
}

inline NoiseParams load_noise_params(const std::string& path) { return parse_noise_params(read_text_file(path)); }

/// Channel assignments per gate kind, a relaxation channel applied before
/// MEASURE, and relaxation times for DELAY gates (whose duration varies).
class NoiseModel {
 public:
  static NoiseModel ideal() { return NoiseModel{}; }

  void assign(GateKind kind, std::vector<KrausChannel> channels) {
    for (const auto& ch : channels) {
      const std::size_t want = kind == GateKind::CX ? 2 : 1;
      if (kind == GateKind::CSWAP || ch.arity() != want) {
        throw std::invalid_argument("channel arity does not match gate " + std::string(kind_name(kind)));
      }
    }
    by_kind_[kind] = std::move(channels);
  }

  /// CX on a specific (control, target) pair; takes precedence over the
  /// per-kind assignment.
  void assign_pair(std::size_t control, std::size_t target, std::vector<KrausChannel> channels) {
    for (const auto& ch : channels) {
      if (ch.arity() != 2) throw std::invalid_argument("CX pair channels must have arity 2");
    }
    by_pair_[{control, target}] = std::move(channels);
  }

  void set_measurement(KrausChannel ch) {
    if (ch.arity() != 1) throw std::invalid_argument("measurement channel must act on one qubit");
    measurement_ = std::move(ch);
  }

  void set_delay_relaxation(double t1_us, double t2_us) {
    thermal_relaxation_channel(t1_us, t2_us, 0.0);  // validates the regime
    delay_relaxation_ = std::make_pair(t1_us, t2_us);
  }

  const std::vector<KrausChannel>& channels(GateKind kind) const {
    static const std::vector<KrausChannel> none;
    auto it = by_kind_.find(kind);
    return it == by_kind_.end() ? none : it->second;
  }

  const std::vector<KrausChannel>* pair_channels(std::size_t control, std::size_t target) const {
    auto it = by_pair_.find({control, target});
    return it == by_pair_.end() ? nullptr : &it->second;
  }

  const std::optional<KrausChannel>& measurement() const noexcept { return measurement_; }
  const std::optional<std::pair<double, double>>& delay_relaxation() const noexcept { return delay_relaxation_; }

 private:
  std::map<GateKind, std::vector<KrausChannel>> by_kind_;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<KrausChannel>> by_pair_;
  std::optional<KrausChannel> measurement_;
  std::optional<std::pair<double, double>> delay_relaxation_;
};

/// RZ/SX/X: depolarizing then bit flip. CX: two-qubit depolarizing then
/// relaxation on each operand. MEASURE: relaxation over the readout length.
/// ID: relaxation over a single-qubit gate length. DELAY: relaxation over
/// its own duration.
inline NoiseModel paper_noise_model(const NoiseParams& params) {
  params.validate();
  NoiseModel m;
  for (auto k : {GateKind::RZ, GateKind::SX, GateKind::X}) {
    m.assign(k, {depolarizing_channel(params.depol_1q, 1), bit_flip_channel(params.bit_flip_p)});
  }
  const auto relax_2q = thermal_relaxation_channel(params.t1, params.t2, params.gate_len_2q);
  m.assign(GateKind::CX, {depolarizing_channel(params.depol_2q, 2), KrausChannel::tensor(relax_2q, relax_2q)});
  m.set_measurement(thermal_relaxation_channel(params.t1, params.t2, params.readout_len));
  m.assign(GateKind::ID, {thermal_relaxation_channel(params.t1, params.t2, params.gate_len_1q)});
  m.set_delay_relaxation(params.t1, params.t2);
  return m;
}

// ---------------------------------------------------------------------------
// Trajectories

namespace detail {

inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct CompiledStep {
  const Gate* gate;
  std::vector<const KrausChannel*> channels;
  bool terminal_measure = false;
};

}  // namespace detail

/// Trajectories are grouped into fixed-size chunks, each with its own
/// generator split from one draw of `rng`, so the result does not depend on
/// `threads`.
inline constexpr std::size_t kTrajectoryChunk = 64;

/// Mean ancilla (qubit 0) <Z> over Monte Carlo trajectories from |0...0>.
/// After every gate the assigned channels are sampled; MEASURE is preceded
/// by the measurement channel.
inline double execute_trajectories(const QuantumCircuit& circuit, const NoiseModel& model, std::size_t trajectories,
                                   Rng& rng, std::size_t threads = 1) {
  if (trajectories == 0) throw std::invalid_argument("execute_trajectories: trajectories must be >= 1");
  if (!circuit.is_lowered()) throw std::invalid_argument("execute_trajectories: circuit is not lowered to the basis set");

  // Resolve channels once per call.
  std::deque<KrausChannel> owned;
  std::vector<detail::CompiledStep> steps;
  std::vector<bool> later_touch(circuit.size(), false);
  {
    std::set<std::size_t> touched;
    for (std::size_t i = circuit.size(); i-- > 0;) {
      const auto& g = circuit.gates()[i];
      if (g.kind == GateKind::MEASURE) later_touch[i] = touched.count(g.qubits[0]) > 0;
      for (auto q : g.qubits) touched.insert(q);
    }
  }
  for (std::size_t i = 0; i < circuit.size(); ++i) {
    const auto& g = circuit.gates()[i];
    detail::CompiledStep s{&g, {}, false};
    if (g.kind == GateKind::MEASURE) {
      if (model.measurement() && !model.measurement()->is_identity()) s.channels.push_back(&*model.measurement());
      s.terminal_measure = !later_touch[i];
    } else if (g.kind == GateKind::DELAY) {
      if (model.delay_relaxation()) {
        const auto [t1, t2] = *model.delay_relaxation();
        owned.push_back(thermal_relaxation_channel(t1, t2, g.param));
        if (!owned.back().is_identity()) s.channels.push_back(&owned.back());
      }
    } else {
      const std::vector<KrausChannel>* chans = nullptr;
      if (g.kind == GateKind::CX) chans = model.pair_channels(g.qubits[0], g.qubits[1]);
      if (!chans) chans = &model.channels(g.kind);
      for (const auto& ch : *chans) {
        if (!ch.is_identity()) s.channels.push_back(&ch);
      }
    }
    steps.push_back(std::move(s));
  }

  const std::uint64_t base_seed = rng.next_u64();
  const Rng base(base_seed);
  const std::size_t chunks = (trajectories + kTrajectoryChunk - 1) / kTrajectoryChunk;
  std::vector<double> values(trajectories, 0.0);
  const std::size_t width = circuit.n_qubits();

  const auto run_chunk = [&](std::size_t chunk) {
    Rng local = base.split(chunk);
    const std::size_t begin = chunk * kTrajectoryChunk;
    const std::size_t end = std::min(trajectories, begin + kTrajectoryChunk);
    for (std::size_t t = begin; t < end; ++t) {
      auto a = detail::zero_amplitudes(width);
      for (const auto& s : steps) {
        const Gate& g = *s.gate;
        switch (g.kind) {
          case GateKind::MEASURE: {
            for (auto* ch : s.channels) ch->apply_stochastic(a, g.qubits, local);
            if (!s.terminal_measure) {
              const int bit = local.uniform() < kernel::prob_one(a, g.qubits[0]) ? 1 : 0;
              kernel::collapse(a, g.qubits[0], bit);
            }
            continue;
          }
          case GateKind::RESET: {
            const int bit = local.uniform() < kernel::prob_one(a, g.qubits[0]) ? 1 : 0;
            kernel::collapse(a, g.qubits[0], bit);
            if (bit) kernel::flip_to_zero(a, g.qubits[0]);
            break;
          }
          default: kernel::apply_unitary_gate(a, g); break;
        }
        for (auto* ch : s.channels) ch->apply_stochastic(a, g.qubits, local);
      }
      values[t] = kernel::expectation_z(a, 0);
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, chunks));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) run_chunk(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  return detail::pairwise_sum(values) / static_cast<double>(trajectories);
}

}  // namespace qsnap
