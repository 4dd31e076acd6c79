#pragma once

// Gate-level circuits and exact statevector execution.
//
// Conventions: qubit 0 is the least-significant bit of the basis index.
// CX lists (control, target); CSWAP lists (control, a, b).

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qsnap/rng.hpp"
#include "qsnap/state.hpp"

namespace qsnap {

enum class GateKind { X, SX, RZ, CX, H, RY, CSWAP, MEASURE, RESET, ID, DELAY };

inline std::string_view kind_name(GateKind k) {
  switch (k) {
    case GateKind::X: return "X";
    case GateKind::SX: return "SX";
    case GateKind::RZ: return "RZ";
    case GateKind::CX: return "CX";
    case GateKind::H: return "H";
    case GateKind::RY: return "RY";
    case GateKind::CSWAP: return "CSWAP";
    case GateKind::MEASURE: return "MEASURE";
    case GateKind::RESET: return "RESET";
    case GateKind::ID: return "ID";
    case GateKind::DELAY: return "DELAY";
  }
  return "?";
}

inline GateKind kind_from_name(std::string_view s) {
  static const std::array<GateKind, 11> all{GateKind::X,     GateKind::SX,      GateKind::RZ,    GateKind::CX,
                                            GateKind::H,     GateKind::RY,      GateKind::CSWAP, GateKind::MEASURE,
                                            GateKind::RESET, GateKind::ID,      GateKind::DELAY};
  for (auto k : all) {
    if (kind_name(k) == s) return k;
  }
  throw std::invalid_argument("unknown gate kind '" + std::string(s) + "'");
}

inline std::size_t arity_of(GateKind k) {
  switch (k) {
    case GateKind::CX: return 2;
    case GateKind::CSWAP: return 3;
    default: return 1;
  }
}

inline bool has_angle(GateKind k) { return k == GateKind::RZ || k == GateKind::RY; }

/// Native basis: {cx, delay, id, measure, reset, rz, sx, x}.
inline bool is_basis_kind(GateKind k) {
  return k != GateKind::H && k != GateKind::RY && k != GateKind::CSWAP;
}

struct Gate {
  GateKind kind;
  std::vector<std::size_t> qubits;
  /// Rotation angle in radians for RZ/RY; duration in nanoseconds for DELAY.
  double param = 0.0;

  bool operator==(const Gate&) const = default;
};

using Mat2 = std::array<Complex, 4>;  // row-major
using Mat4 = std::array<Complex, 16>;

inline Mat2 single_qubit_matrix(GateKind kind, double param) {
  using namespace std::complex_literals;
  const double s2 = std::numbers::sqrt2 / 2.0;
  switch (kind) {
    case GateKind::X: return {0.0, 1.0, 1.0, 0.0};
    case GateKind::SX: return {Complex(0.5, 0.5), Complex(0.5, -0.5), Complex(0.5, -0.5), Complex(0.5, 0.5)};
    case GateKind::RZ: return {std::polar(1.0, -param / 2.0), 0.0, 0.0, std::polar(1.0, param / 2.0)};
    case GateKind::RY: {
      const double c = std::cos(param / 2.0), s = std::sin(param / 2.0);
      return {c, -s, s, c};
    }
    case GateKind::H: return {s2, s2, s2, -s2};
    case GateKind::ID:
    case GateKind::DELAY: return {1.0, 0.0, 0.0, 1.0};
    default: throw std::invalid_argument("no single-qubit matrix for " + std::string(kind_name(kind)));
  }
}

/// Ordered gate list over a fixed width, plus the set of measured qubits.
class QuantumCircuit {
 public:
  explicit QuantumCircuit(std::size_t n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits == 0) throw std::invalid_argument("circuit needs at least one qubit");
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  const std::vector<Gate>& gates() const noexcept { return gates_; }
  const std::set<std::size_t>& measured() const noexcept { return measured_; }
  std::size_t size() const noexcept { return gates_.size(); }
  bool empty() const noexcept { return gates_.empty(); }

  QuantumCircuit& add(Gate g) {
    if (g.qubits.size() != arity_of(g.kind)) {
      throw std::invalid_argument(std::string(kind_name(g.kind)) + ": wrong number of qubits");
    }
    for (std::size_t i = 0; i < g.qubits.size(); ++i) {
      if (g.qubits[i] >= n_qubits_) throw std::invalid_argument("gate qubit index out of range");
      for (std::size_t j = 0; j < i; ++j) {
        if (g.qubits[i] == g.qubits[j]) throw std::invalid_argument("gate qubit indices must be distinct");
      }
    }
    if (g.kind == GateKind::DELAY && g.param < 0.0) throw std::invalid_argument("negative delay");
    if (g.kind == GateKind::RESET) {
      blocked_.erase(g.qubits[0]);
    } else {
      for (auto q : g.qubits) {
        if (blocked_.count(q)) {
          throw std::invalid_argument("gate follows MEASURE on qubit " + std::to_string(q) + " without RESET");
        }
      }
    }
    if (g.kind == GateKind::MEASURE) {
      measured_.insert(g.qubits[0]);
      blocked_.insert(g.qubits[0]);
    }
    gates_.push_back(std::move(g));
    return *this;
  }

  QuantumCircuit& x(std::size_t q) { return add({GateKind::X, {q}}); }
  QuantumCircuit& sx(std::size_t q) { return add({GateKind::SX, {q}}); }
  QuantumCircuit& rz(std::size_t q, double theta) { return add({GateKind::RZ, {q}, theta}); }
  QuantumCircuit& ry(std::size_t q, double theta) { return add({GateKind::RY, {q}, theta}); }
  QuantumCircuit& h(std::size_t q) { return add({GateKind::H, {q}}); }
  QuantumCircuit& cx(std::size_t control, std::size_t target) { return add({GateKind::CX, {control, target}}); }
  QuantumCircuit& cswap(std::size_t c, std::size_t a, std::size_t b) { return add({GateKind::CSWAP, {c, a, b}}); }
  QuantumCircuit& measure(std::size_t q) { return add({GateKind::MEASURE, {q}}); }
  QuantumCircuit& reset(std::size_t q) { return add({GateKind::RESET, {q}}); }
  QuantumCircuit& id(std::size_t q) { return add({GateKind::ID, {q}}); }
  QuantumCircuit& delay(std::size_t q, double ns) { return add({GateKind::DELAY, {q}, ns}); }

  /// Appends `other` with its qubit q mapped to q + offset.
  QuantumCircuit& append(const QuantumCircuit& other, std::size_t offset = 0) {
    if (other.n_qubits() + offset > n_qubits_) throw std::invalid_argument("appended circuit does not fit");
    for (const auto& g : other.gates()) {
      Gate m = g;
      for (auto& q : m.qubits) q += offset;
      add(std::move(m));
    }
    return *this;
  }

  /// First `count` gates.
  QuantumCircuit prefix(std::size_t count) const {
    if (count > gates_.size()) throw std::invalid_argument("prefix length beyond circuit length");
    QuantumCircuit out(n_qubits_);
    for (std::size_t i = 0; i < count; ++i) out.add(gates_[i]);
    return out;
  }

  bool contains(GateKind k) const {
    return std::any_of(gates_.begin(), gates_.end(), [k](const Gate& g) { return g.kind == k; });
  }

  bool is_lowered() const {
    return std::all_of(gates_.begin(), gates_.end(), [](const Gate& g) { return is_basis_kind(g.kind); });
  }

  /// True when no gate touches a qubit after it has been measured.
  bool measurements_terminal() const {
    std::set<std::size_t> seen;
    for (const auto& g : gates_) {
      for (auto q : g.qubits) {
        if (seen.count(q)) return false;
      }
      if (g.kind == GateKind::MEASURE) seen.insert(g.qubits[0]);
    }
    return true;
  }

  bool operator==(const QuantumCircuit& o) const { return n_qubits_ == o.n_qubits_ && gates_ == o.gates_; }

 private:
  std::size_t n_qubits_;
  std::vector<Gate> gates_;
  std::set<std::size_t> measured_;
  std::set<std::size_t> blocked_;
};

struct ShotResult {
  /// Bitstring over measured qubits, highest measured qubit first.
  std::map<std::string, std::size_t> counts;
  std::size_t shots = 0;

  double probability(const std::string& key) const {
    auto it = counts.find(key);
    return it == counts.end() || shots == 0 ? 0.0 : static_cast<double>(it->second) / static_cast<double>(shots);
  }
};

// ---------------------------------------------------------------------------
// Statevector kernels on raw amplitude buffers.

namespace kernel {

using Amplitudes = std::vector<Complex>;

inline void apply_1q(Amplitudes& a, std::size_t q, const Mat2& m) {
  const std::size_t bit = std::size_t{1} << q;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i & bit) continue;
    const Complex a0 = a[i], a1 = a[i | bit];
    a[i] = m[0] * a0 + m[1] * a1;
    a[i | bit] = m[2] * a0 + m[3] * a1;
  }
}

/// 4x4 matrix on (qa, qb); local index = bit(qa) + 2*bit(qb).
inline void apply_2q(Amplitudes& a, std::size_t qa, std::size_t qb, const Mat4& m) {
  const std::size_t ba = std::size_t{1} << qa, bb = std::size_t{1} << qb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((i & ba) || (i & bb)) continue;
    const std::array<std::size_t, 4> idx{i, i | ba, i | bb, i | ba | bb};
    const std::array<Complex, 4> in{a[idx[0]], a[idx[1]], a[idx[2]], a[idx[3]]};
    for (std::size_t r = 0; r < 4; ++r) {
      a[idx[r]] = m[r * 4 + 0] * in[0] + m[r * 4 + 1] * in[1] + m[r * 4 + 2] * in[2] + m[r * 4 + 3] * in[3];
    }
  }
}

inline void apply_cx(Amplitudes& a, std::size_t control, std::size_t target) {
  const std::size_t bc = std::size_t{1} << control, bt = std::size_t{1} << target;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((i & bc) && !(i & bt)) std::swap(a[i], a[i | bt]);
  }
}

inline void apply_cswap(Amplitudes& a, std::size_t control, std::size_t qa, std::size_t qb) {
  const std::size_t bc = std::size_t{1} << control, ba = std::size_t{1} << qa, bb = std::size_t{1} << qb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((i & bc) && (i & ba) && !(i & bb)) std::swap(a[i], a[(i & ~ba) | bb]);
  }
}

/// Probability that qubit q reads 1.
inline double prob_one(const Amplitudes& a, std::size_t q) {
  const std::size_t bit = std::size_t{1} << q;
  double p = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i & bit) p += std::norm(a[i]);
  }
  return p;
}

inline double norm_sq(const Amplitudes& a) {
  double s = 0.0;
  for (const auto& x : a) s += std::norm(x);
  return s;
}

inline void scale(Amplitudes& a, double f) {
  for (auto& x : a) x *= f;
}

/// Projects qubit q onto `outcome` and renormalizes. Returns the branch
/// probability before projection.
inline double collapse(Amplitudes& a, std::size_t q, int outcome) {
  const std::size_t bit = std::size_t{1} << q;
  double p = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool one = (i & bit) != 0;
    if (one != (outcome == 1)) {
      a[i] = 0.0;
    } else {
      p += std::norm(a[i]);
    }
  }
  if (p > 0.0) scale(a, 1.0 / std::sqrt(p));
  return p;
}

/// Moves the qubit-q = 1 branch onto |0> (after a collapse onto |1>).
inline void flip_to_zero(Amplitudes& a, std::size_t q) {
  const std::size_t bit = std::size_t{1} << q;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i & bit) {
      a[i & ~bit] = a[i];
      a[i] = 0.0;
    }
  }
}

/// <Z> on qubit q.
inline double expectation_z(const Amplitudes& a, std::size_t q) { return 1.0 - 2.0 * prob_one(a, q); }

/// Applies a unitary (non-measurement, non-reset) gate.
inline void apply_unitary_gate(Amplitudes& a, const Gate& g) {
  switch (g.kind) {
    case GateKind::CX: apply_cx(a, g.qubits[0], g.qubits[1]); break;
    case GateKind::CSWAP: apply_cswap(a, g.qubits[0], g.qubits[1], g.qubits[2]); break;
    case GateKind::ID:
    case GateKind::DELAY: break;
    default: apply_1q(a, g.qubits[0], single_qubit_matrix(g.kind, g.param)); break;
  }
}

}  // namespace kernel

namespace detail {

// Deterministic reset for exact execution: keep the |0> branch when it has
// weight, otherwise carry the |1> branch over to |0>.
inline void deterministic_reset(kernel::Amplitudes& a, std::size_t q) {
  const double p1 = kernel::prob_one(a, q);
  if (p1 < 1.0 - 1e-12) {
    kernel::collapse(a, q, 0);
  } else {
    kernel::collapse(a, q, 1);
    kernel::flip_to_zero(a, q);
  }
}

// Runs every gate except MEASURE, which is skipped.
inline kernel::Amplitudes run_skipping_measure(const QuantumCircuit& c, kernel::Amplitudes a) {
  for (const auto& g : c.gates()) {
    if (g.kind == GateKind::MEASURE) continue;
    if (g.kind == GateKind::RESET) {
      deterministic_reset(a, g.qubits[0]);
    } else {
      kernel::apply_unitary_gate(a, g);
    }
  }
  return a;
}

inline kernel::Amplitudes zero_amplitudes(std::size_t n_qubits) {
  kernel::Amplitudes a(dimension_of(n_qubits));
  a[0] = 1.0;
  return a;
}

}  // namespace detail

/// Applies every gate in order to `initial`. MEASURE is rejected; use
/// sample_shots or ancilla_expectation for measured circuits.
inline StateVector execute_statevector(const QuantumCircuit& circuit, const StateVector& initial) {
  if (initial.n_qubits() != circuit.n_qubits()) {
    throw std::invalid_argument("execute_statevector: initial state width differs from circuit width");
  }
  if (circuit.contains(GateKind::MEASURE)) {
    throw std::invalid_argument("execute_statevector: circuit contains MEASURE; use sample_shots");
  }
  if (circuit.size() == 0) return initial;
  kernel::Amplitudes a(initial.amplitudes().begin(), initial.amplitudes().end());
  return StateVector::from_amplitudes(detail::run_skipping_measure(circuit, std::move(a)));
}

inline StateVector execute_statevector(const QuantumCircuit& circuit) {
  return execute_statevector(circuit, StateVector::zero(circuit.n_qubits()));
}

/// Exact <Z> on the measured ancilla (qubit 0), starting from |0...0>.
inline double ancilla_expectation(const QuantumCircuit& circuit) {
  if (circuit.measured().empty()) throw std::invalid_argument("ancilla_expectation: circuit measures no qubit");
  if (circuit.measured() != std::set<std::size_t>{0}) {
    throw std::invalid_argument("ancilla_expectation: circuit must measure exactly qubit 0");
  }
  if (!circuit.measurements_terminal()) {
    throw std::invalid_argument("ancilla_expectation: ancilla measurement must be terminal");
  }
  const auto a = detail::run_skipping_measure(circuit, detail::zero_amplitudes(circuit.n_qubits()));
  return std::clamp(kernel::expectation_z(a, 0) / kernel::norm_sq(a), -1.0, 1.0);
}

namespace detail {

inline std::string outcome_key(const std::vector<std::size_t>& measured, std::size_t basis_index) {
  std::string key;
  for (auto it = measured.rbegin(); it != measured.rend(); ++it) key += ((basis_index >> *it) & 1U) ? '1' : '0';
  return key;
}

}  // namespace detail

/// Finite-shot sampling of the measured qubits from |0...0>.
inline ShotResult sample_shots(const QuantumCircuit& circuit, std::size_t shots, Rng& rng) {
  if (shots == 0) throw std::invalid_argument("sample_shots: shots must be >= 1");
  ShotResult out;
  out.shots = shots;
  const std::vector<std::size_t> measured(circuit.measured().begin(), circuit.measured().end());

  if (circuit.measurements_terminal() && !circuit.contains(GateKind::RESET)) {
    // One exact run, then sample the marginal over measured qubits.
    const auto a = detail::run_skipping_measure(circuit, detail::zero_amplitudes(circuit.n_qubits()));
    std::map<std::string, double> marginal;
    for (std::size_t i = 0; i < a.size(); ++i) marginal[detail::outcome_key(measured, i)] += std::norm(a[i]);
    std::vector<std::string> keys;
    std::vector<double> cdf;
    double acc = 0.0;
    for (const auto& [k, p] : marginal) {
      acc += p;
      keys.push_back(k);
      cdf.push_back(acc);
    }
    for (std::size_t s = 0; s < shots; ++s) {
      const double r = rng.uniform() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
      const auto pos = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), keys.size() - 1);
      ++out.counts[keys[pos]];
    }
    return out;
  }

  // Mid-circuit measurement or reset: simulate each shot with collapse.
  for (std::size_t s = 0; s < shots; ++s) {
    auto a = detail::zero_amplitudes(circuit.n_qubits());
    std::map<std::size_t, int> last;
    for (const auto& g : circuit.gates()) {
      if (g.kind == GateKind::MEASURE || g.kind == GateKind::RESET) {
        const std::size_t q = g.qubits[0];
        const int bit = rng.uniform() < kernel::prob_one(a, q) ? 1 : 0;
        kernel::collapse(a, q, bit);
        if (g.kind == GateKind::MEASURE) {
          last[q] = bit;
        } else if (bit == 1) {
          kernel::flip_to_zero(a, q);
        }
      } else {
        kernel::apply_unitary_gate(a, g);
      }
    }
    std::string key;
    for (auto it = measured.rbegin(); it != measured.rend(); ++it) key += last[*it] ? '1' : '0';
    ++out.counts[key];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plain-text dump: one gate per line, `KIND q0[,q1[,q2]][ (theta=<%.17g>)]`.
// DELAY carries `(duration=<%.17g>)` in nanoseconds.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string dump(const QuantumCircuit& circuit) {
  std::string out;
  for (const auto& g : circuit.gates()) {
    out += kind_name(g.kind);
    out += ' ';
    for (std::size_t i = 0; i < g.qubits.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(g.qubits[i]);
    }
    if (has_angle(g.kind)) out += " (theta=" + format_double(g.param) + ")";
    if (g.kind == GateKind::DELAY) out += " (duration=" + format_double(g.param) + ")";
    out += '\n';
  }
  return out;
}

/// Inverse of dump(). Width 0 infers it from the largest qubit index.
inline QuantumCircuit parse_circuit(std::string_view text, std::size_t n_qubits = 0) {
  std::vector<Gate> gates;
  std::size_t max_q = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fail = [&](const std::string& why) {
      return std::invalid_argument("circuit line " + std::to_string(lineno) + ": " + why);
    };
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw fail("missing qubit list");
    Gate g{kind_from_name(std::string_view(line).substr(0, sp)), {}};
    std::string rest = line.substr(sp + 1);
    std::string params;
    if (auto p = rest.find(" ("); p != std::string::npos) {
      params = rest.substr(p + 2);
      rest = rest.substr(0, p);
      if (params.empty() || params.back() != ')') throw fail("unterminated parameter");
      params.pop_back();
    }
    std::istringstream qs(rest);
    std::string tok;
    while (std::getline(qs, tok, ',')) {
      std::size_t q = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), q);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) throw fail("bad qubit index '" + tok + "'");
      g.qubits.push_back(q);
      max_q = std::max(max_q, q);
    }
    const bool wants_param = has_angle(g.kind) || g.kind == GateKind::DELAY;
    if (wants_param != !params.empty()) throw fail("parameter mismatch for " + std::string(kind_name(g.kind)));
    if (wants_param) {
      const std::string key = has_angle(g.kind) ? "theta=" : "duration=";
      if (params.rfind(key, 0) != 0) throw fail("expected " + key);
      try {
        std::size_t used = 0;
        g.param = std::stod(params.substr(key.size()), &used);
        if (used != params.size() - key.size()) throw fail("trailing characters in parameter");
      } catch (const std::logic_error&) {
        throw fail("bad parameter value");
      }
    }
    gates.push_back(std::move(g));
  }
  const std::size_t width = n_qubits ? n_qubits : (gates.empty() ? 1 : max_q + 1);
  QuantumCircuit c(width);
  for (auto& g : gates) c.add(std::move(g));
  return c;
}

}  // namespace qsnap
