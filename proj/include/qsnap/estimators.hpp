#pragma once

// Reconstruction engines driven only by a fidelity oracle:
//   * gradient path: generator network, central differences across the
//     oracle boundary, analytic backprop inside the network, Adam;
//   * QESwap: Gaussian-perturbation evolution strategy with standardized
//     advantages.
// Both work with any of the three representation adapters.

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "qsnap/decoders.hpp"
#include "qsnap/network.hpp"
#include "qsnap/oracle.hpp"
#include "qsnap/rng.hpp"
#include "qsnap/state.hpp"

namespace qsnap {

enum class Method { gradient, qeswap };

inline std::string to_string(Method m) { return m == Method::gradient ? "gradient" : "qeswap"; }

inline Method parse_method(const std::string& s) {
  if (s == "gradient") return Method::gradient;
  if (s == "qeswap") return Method::qeswap;
  throw std::invalid_argument("unknown method '" + s + "'");
}

struct GradientConfig {
  std::size_t epochs = 200;
  double lr = 1e-4;
  double fd_epsilon = 1e-3;
  double scaling_factor = 100.0;
  double stop_threshold = 0.999;
  std::uint64_t seed = 0;
};

struct EsConfig {
  std::size_t population = 50;
  double sigma = 0.1;
  double alpha = 0.05;
  std::size_t max_iter = 100;
  double threshold = 0.999;
  std::uint64_t seed = 0;
};

struct EstimatorConfig {
  GradientConfig gradient;
  EsConfig es;
};

using Candidate = std::variant<StateVector, UnitaryMatrix, DensityMatrix>;

/// Pure state induced by a candidate: the vector itself, U|0...0>, or the
/// dominant eigenvector of a density matrix.
inline StateVector induced_state(const Candidate& c) {
  if (const auto* s = std::get_if<StateVector>(&c)) return *s;
  if (const auto* u = std::get_if<UnitaryMatrix>(&c)) return u->apply_to_zero();
  const auto& rho = std::get<DensityMatrix>(c);
  const auto es = detail::hermitian_eigen(rho.entries());
  const Eigen::Index top = es.eigenvalues().size() - 1;
  std::vector<Complex> v(rho.dim());
  for (std::size_t k = 0; k < rho.dim(); ++k) v[k] = es.eigenvectors()(static_cast<Eigen::Index>(k), top);
  return StateVector::from_amplitudes(std::move(v));
}

/// Density matrix of a candidate.
inline DensityMatrix candidate_density(const Candidate& c) {
  if (const auto* r = std::get_if<DensityMatrix>(&c)) return *r;
  return DensityMatrix::pure(induced_state(c));
}

struct ReconstructionReport {
  Method method = Method::qeswap;
  Representation representation = Representation::statevector;
  std::size_t n_qubits = 0;
  double best_fidelity = 0.0;
  std::size_t epochs = 0;
  std::size_t oracle_evals = 0;
  /// Oracle fidelity per epoch: the forward pass (gradient) or the best
  /// population member (QESwap).
  std::vector<double> fidelity_trace;
  double wall_time_s = 0.0;
  bool mixed_state_flag = false;
  std::uint64_t seed = 0;

  /// Best-seen candidate and the candidate behind each trace entry.
  std::optional<Candidate> best_candidate;
  std::vector<Candidate> epoch_candidates;
  std::string label;

  std::vector<double> running_best() const {
    std::vector<double> out;
    double best = -std::numeric_limits<double>::infinity();
    for (double f : fidelity_trace) out.push_back(best = std::max(best, f));
    return out;
  }
};

inline nlohmann::ordered_json report_to_json(const ReconstructionReport& r) {
  nlohmann::ordered_json j;
  j["method"] = to_string(r.method);
  j["representation"] = to_string(r.representation);
  j["n_qubits"] = r.n_qubits;
  j["best_fidelity"] = r.best_fidelity;
  j["epochs"] = r.epochs;
  j["oracle_evals"] = r.oracle_evals;
  j["fidelity_trace"] = r.fidelity_trace;
  j["wall_time_s"] = r.wall_time_s;
  j["mixed_state_flag"] = r.mixed_state_flag;
  j["seed"] = r.seed;
  return j;
}

// ---------------------------------------------------------------------------

/// Wires a representation's decoder to an oracle and counts evaluations.
class RepresentationAdapter {
 public:
  RepresentationAdapter(Representation repr, std::size_t n_qubits) : repr_(repr), n_qubits_(n_qubits) {
    if (n_qubits == 0) throw std::invalid_argument("n_qubits must be >= 1");
  }

  Representation representation() const noexcept { return repr_; }
  std::size_t raw_length() const { return qsnap::raw_length(repr_, n_qubits_); }
  std::size_t evaluations() const noexcept { return evaluations_; }

  /// Decodes `raw` and scores it. Rank-deficient unitary raws are perturbed
  /// with `rng` and retried.
  template <class Oracle>
  std::pair<double, Candidate> score(Oracle& oracle, std::span<const double> raw, Rng& rng) {
    if (raw.size() != raw_length()) throw std::invalid_argument("raw vector has the wrong length");
    ++evaluations_;
    switch (repr_) {
      case Representation::statevector: {
        auto s = decode_candidate_state(raw);
        const double f = oracle.evaluate(s);
        return {f, Candidate(std::move(s))};
      }
      case Representation::unitary: {
        std::vector<double> work(raw.begin(), raw.end());
        for (int attempt = 0; attempt < 16; ++attempt) {
          if (auto u = decode_candidate_unitary(work)) {
            const double f = oracle.evaluate(u->apply_to_zero());
            return {f, Candidate(std::move(*u))};
          }
          for (auto& x : work) x += 1e-9 * rng.normal();
        }
        throw std::runtime_error("unitary decoder: matrix stayed rank deficient after perturbation");
      }
      case Representation::density: {
        if constexpr (DensityOracle<Oracle>) {
          auto rho = decode_candidate_density(raw);
          const double f = oracle.evaluate(rho);
          return {f, Candidate(std::move(rho))};
        } else {
          throw std::invalid_argument("oracle cannot evaluate density-matrix candidates");
        }
      }
    }
    throw std::logic_error("unreachable");
  }

 private:
  Representation repr_;
  std::size_t n_qubits_;
  std::size_t evaluations_ = 0;
};

template <class Oracle>
void check_oracle_width(const Oracle& oracle, std::size_t n_qubits) {
  if constexpr (requires { oracle.n_qubits(); }) {
    if (oracle.n_qubits() != n_qubits) throw std::invalid_argument("oracle target width differs from n_qubits");
  }
}

/// Central-difference gradient of 1 - F with respect to the raw outputs.
/// Costs 2 * raw.size() oracle evaluations.
template <class Oracle>
std::vector<double> finite_difference_loss_gradient(Oracle& oracle, RepresentationAdapter& adapter,
                                                    std::span<const double> raw, double eps, Rng& rng) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite-difference epsilon must be > 0");
  std::vector<double> grad(raw.size());
  std::vector<double> probe(raw.begin(), raw.end());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    probe[k] = raw[k] + eps;
    const double f_plus = adapter.score(oracle, probe, rng).first;
    probe[k] = raw[k] - eps;
    const double f_minus = adapter.score(oracle, probe, rng).first;
    probe[k] = raw[k];
    grad[k] = ((1.0 - f_plus) - (1.0 - f_minus)) / (2.0 * eps);
  }
  return grad;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void record_epoch(ReconstructionReport& rep, double f, Candidate c) {
  if (rep.fidelity_trace.empty() || f > rep.best_fidelity) {
    rep.best_fidelity = f;
    rep.best_candidate = c;
  }
  rep.fidelity_trace.push_back(f);
  rep.epoch_candidates.push_back(std::move(c));
}

}  // namespace detail

/// Gradient path. Per epoch: fresh latent z ~ U(0,1)^256, forward pass,
/// oracle fidelity F, central-difference dL/doutput for L = 1 - F (probes
/// reuse that epoch's z), backprop, scale, Adam step; stop once F reaches
/// the threshold. Oracle cost per epoch: 1 + 2 * raw_length.
template <class Oracle>
ReconstructionReport train_gradient(Oracle& oracle, std::size_t n_qubits, const GradientConfig& cfg,
                                    Representation repr = Representation::statevector) {
  check_oracle_width(oracle, n_qubits);
  if (cfg.epochs == 0) throw std::invalid_argument("train_gradient: epochs must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  RepresentationAdapter adapter(repr, n_qubits);
  Rng root(cfg.seed);
  GeneratorNetwork net(adapter.raw_length(), root.split(1));
  Adam adam(net.parameters().size(), AdamConfig{.lr = cfg.lr});
  Rng latent = root.split(2);
  Rng perturb = root.split(3);

  ReconstructionReport rep;
  rep.method = Method::gradient;
  rep.representation = repr;
  rep.n_qubits = n_qubits;
  rep.seed = cfg.seed;
  rep.mixed_state_flag = repr == Representation::density;

  std::vector<double> z(net.input_dim());
  GeneratorNetwork::Tape tape;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (auto& v : z) v = latent.uniform();
    const std::vector<double> out = net.forward(z, &tape);
    auto [f, cand] = adapter.score(oracle, out, perturb);
    detail::record_epoch(rep, f, std::move(cand));
    rep.epochs = epoch;

    std::vector<double> d_out = finite_difference_loss_gradient(oracle, adapter, out, cfg.fd_epsilon, perturb);
    for (auto& g : d_out) g *= cfg.scaling_factor;
    const std::vector<double> grad = net.backward(tape, d_out);
    adam.step(net.parameters(), grad);

    if (f >= cfg.stop_threshold) break;
  }
  rep.oracle_evals = adapter.evaluations();
  rep.wall_time_s = detail::seconds_since(t0);
  return rep;
}

/// w <- w + alpha/(N sigma) sum_i A_i z_i with A_i = (F_i - mean F)/std F
/// (population standard deviation). A spread below 1e-12 leaves w unchanged.
inline void es_update(std::span<double> w, const std::vector<std::vector<double>>& noise,
                      std::span<const double> fitness, double alpha, double sigma) {
  const std::size_t n = fitness.size();
  if (noise.size() != n || n < 2) throw std::invalid_argument("es_update: population size mismatch");
  double mean = 0.0;
  for (double f : fitness) mean += f;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double f : fitness) var += (f - mean) * (f - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  if (sd < 1e-12) return;
  const double step = alpha / (static_cast<double>(n) * sigma);
  for (std::size_t i = 0; i < n; ++i) {
    const double adv = (fitness[i] - mean) / sd;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += step * adv * noise[i][k];
  }
}

/// QESwap. w ~ N(0, I); each iteration scores N candidates w + sigma z_i,
/// updates w, and stops once the best candidate reaches the threshold. The
/// reported candidate is the best one seen. Oracle cost: N per iteration.
template <class Oracle>
ReconstructionReport train_qeswap(Oracle& oracle, std::size_t n_qubits, const EsConfig& cfg,
                                  Representation repr = Representation::statevector) {
  check_oracle_width(oracle, n_qubits);
  if (cfg.population < 2) throw std::invalid_argument("train_qeswap: population must be >= 2");
  if (!(cfg.sigma > 0.0) || !(cfg.alpha > 0.0)) throw std::invalid_argument("train_qeswap: sigma, alpha must be > 0");
  if (cfg.max_iter == 0) throw std::invalid_argument("train_qeswap: max_iter must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  RepresentationAdapter adapter(repr, n_qubits);
  Rng rng(cfg.seed);
  Rng perturb = rng.split(3);

  ReconstructionReport rep;
  rep.method = Method::qeswap;
  rep.representation = repr;
  rep.n_qubits = n_qubits;
  rep.seed = cfg.seed;
  rep.mixed_state_flag = repr == Representation::density;

  std::vector<double> w(adapter.raw_length());
  for (auto& x : w) x = rng.normal();

  std::vector<std::vector<double>> noise(cfg.population, std::vector<double>(w.size()));
  std::vector<double> fitness(cfg.population);
  std::vector<double> trial(w.size());
  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    std::optional<Candidate> iter_best;
    double iter_best_f = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cfg.population; ++i) {
      for (std::size_t k = 0; k < w.size(); ++k) {
        noise[i][k] = rng.normal();
        trial[k] = w[k] + cfg.sigma * noise[i][k];
      }
      auto [f, cand] = adapter.score(oracle, trial, perturb);
      fitness[i] = f;
      if (f > iter_best_f) {
        iter_best_f = f;
        iter_best = std::move(cand);
      }
    }
    detail::record_epoch(rep, iter_best_f, std::move(*iter_best));
    rep.epochs = it;
    es_update(w, noise, fitness, cfg.alpha, cfg.sigma);
    if (iter_best_f >= cfg.threshold) break;
  }
  rep.oracle_evals = adapter.evaluations();
  rep.wall_time_s = detail::seconds_since(t0);
  return rep;
}

/// Dispatches one of the 2 x 3 (engine, representation) strategies.
template <class Oracle>
ReconstructionReport reconstruct(Method method, Representation repr, Oracle& oracle, std::size_t n_qubits,
                                 const EstimatorConfig& cfg) {
  if (repr == Representation::density && !DensityOracle<Oracle>) {
    throw std::invalid_argument("density representation needs an oracle that scores density matrices");
  }
  ReconstructionReport rep = method == Method::gradient ? train_gradient(oracle, n_qubits, cfg.gradient, repr)
                                                        : train_qeswap(oracle, n_qubits, cfg.es, repr);
  rep.mixed_state_flag = repr == Representation::density;
  return rep;
}

}  // namespace qsnap
