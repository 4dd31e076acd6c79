#pragma once

// Named benchmark states. Ket labels are written most-significant qubit
// first, so the label's binary value is the basis index.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsnap/state.hpp"

namespace qsnap {

struct StandardState {
  std::string name;
  StateVector vector;
};

namespace detail {

inline StateVector superpose(std::size_t n, std::size_t a, std::size_t b, double sign) {
  std::vector<Complex> v(dimension_of(n), Complex(0.0));
  v[a] = std::numbers::sqrt2 / 2.0;
  v[b] += sign * std::numbers::sqrt2 / 2.0;
  return StateVector::from_amplitudes(std::move(v));
}

}  // namespace detail

/// GHZ_k^(+/-) = (|0 b(k)> +/- |1 ~b(k)>)/sqrt2 with b(k) the 2-bit pattern of k.
inline StateVector ghz_state(std::size_t k, bool plus) {
  if (k > 3) throw std::invalid_argument("GHZ index must be 0..3");
  return detail::superpose(3, k, 4 + (3 - k), plus ? 1.0 : -1.0);
}

inline StateVector bell_state(const std::string& which) {
  if (which == "phi+") return detail::superpose(2, 0, 3, 1.0);
  if (which == "phi-") return detail::superpose(2, 0, 3, -1.0);
  if (which == "psi+") return detail::superpose(2, 1, 2, 1.0);
  if (which == "psi-") return detail::superpose(2, 1, 2, -1.0);
  throw std::invalid_argument("unknown Bell state '" + which + "'");
}

/// Every catalog entry on `n_qubits` qubits (1: zero/one/plus/minus,
/// 2: basis and Bell states, 3: the eight GHZ states).
inline std::vector<StandardState> standard_states(std::size_t n_qubits) {
  std::vector<StandardState> out;
  switch (n_qubits) {
    case 1:
      out.push_back({"zero", StateVector::basis(1, 0)});
      out.push_back({"one", StateVector::basis(1, 1)});
      out.push_back({"plus", detail::superpose(1, 0, 1, 1.0)});
      out.push_back({"minus", detail::superpose(1, 0, 1, -1.0)});
      break;
    case 2:
      for (std::size_t i = 0; i < 4; ++i) {
        out.push_back({std::string("basis") + char('0' + (i >> 1)) + char('0' + (i & 1)), StateVector::basis(2, i)});
      }
      for (const char* b : {"phi+", "phi-", "psi+", "psi-"}) out.push_back({std::string("bell_") + b, bell_state(b)});
      break;
    case 3:
      for (std::size_t k = 0; k < 4; ++k) {
        out.push_back({"ghz" + std::to_string(k) + "+", ghz_state(k, true)});
        out.push_back({"ghz" + std::to_string(k) + "-", ghz_state(k, false)});
      }
      break;
    default:
      throw std::invalid_argument("standard states exist for 1..3 qubits only");
  }
  return out;
}

inline std::vector<StandardState> standard_catalog() {
  std::vector<StandardState> all;
  for (std::size_t n = 1; n <= 3; ++n) {
    auto part = standard_states(n);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

inline StandardState find_standard_state(const std::string& name) {
  for (auto& s : standard_catalog()) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("unknown standard state '" + name + "'");
}

}  // namespace qsnap
