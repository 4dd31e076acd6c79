#pragma once

// Studies built on top of the cohort runner: standard-state table, entropy
// comparison, mid-circuit snapshots and the mixed-state diagnostic.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qsnap/harness/catalog.hpp"
#include "qsnap/harness/cohort.hpp"

namespace qsnap {

// ---------------------------------------------------------------- standard

struct StandardRow {
  std::string name;
  std::size_t n_qubits = 0;
  std::optional<std::size_t> epochs;  // epochs to the reporting threshold; NA if never reached
  std::optional<double> best_fidelity;  // validated fidelity of the reported candidate
  std::size_t epochs_run = 0;
  std::string status = "ok";
};

/// Reconstructs every catalog state on 1..max_qubits qubits. `spec` supplies
/// engine, representation, noise and config; n_qubits and n_trials are
/// ignored. A state that fails or never reaches `threshold` gets NA epochs.
inline std::vector<StandardRow> run_standard_states(const ExperimentSpec& spec, double threshold = 0.99,
                                                    std::size_t max_qubits = 3) {
  std::vector<StandardRow> rows;
  std::size_t index = 0;
  for (std::size_t n = 1; n <= max_qubits; ++n) {
    ExperimentSpec s = spec;
    s.n_qubits = n;
    s.thresholds = {threshold};
    s.n_trials = 1;
    s.validate();
    for (const auto& st : standard_states(n)) {
      const TrialResult tr =
          reconstruct_and_validate(s, st.vector, mottonen_prepare(st.vector), trial_seed(spec.seed, index++));
      StandardRow row{st.name, n, std::nullopt, std::nullopt, tr.epochs, tr.status};
      if (tr.ok()) {
        row.epochs = tr.epochs_to.front();
        row.best_fidelity = tr.final_fidelity;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline CsvTable standard_table(const std::vector<StandardRow>& rows) {
  CsvTable t;
  t.header = {"state", "n_qubits", "epochs", "best_fidelity", "epochs_run", "status"};
  for (const auto& r : rows) {
    t.rows.push_back({r.name, cell(r.n_qubits), cell(r.epochs), cell(r.best_fidelity), cell(r.epochs_run),
                      sanitize_cell(r.status)});
  }
  return t;
}

// ----------------------------------------------------------------- entropy

struct EntropyRow {
  std::size_t trial = 0;
  double fidelity = 0.0;
  double s_target = 0.0;
  double s_recon = 0.0;
  double abs_diff() const { return std::abs(s_target - s_recon); }
};

struct EntropyAnalysis {
  std::vector<EntropyRow> rows;  // sorted by target entropy, then trial
  double mean_target = 0.0;
  double mean_recon = 0.0;
  double max_abs_diff = 0.0;
  /// Largest |dS| among trials whose fidelity reached `fidelity_cut`.
  double max_abs_diff_converged = 0.0;
  std::size_t n_converged = 0;
};

/// Half-chain entropies of each trial's target and reconstruction.
inline EntropyAnalysis run_entropy_analysis(const CohortSummary& cohort, double fidelity_cut = 0.99) {
  if (cohort.spec.representation == Representation::density) {
    throw std::invalid_argument("entropy analysis needs pure-state reconstructions");
  }
  EntropyAnalysis a;
  for (const auto& tr : cohort.trials) {
    if (!tr.ok() || !tr.target || !tr.reconstruction) continue;
    EntropyRow r{tr.trial, tr.final_fidelity, half_chain_entropy(*tr.target), half_chain_entropy(*tr.reconstruction)};
    a.rows.push_back(r);
  }
  std::sort(a.rows.begin(), a.rows.end(), [](const EntropyRow& x, const EntropyRow& y) {
    return x.s_target != y.s_target ? x.s_target < y.s_target : x.trial < y.trial;
  });
  for (const auto& r : a.rows) {
    a.mean_target += r.s_target;
    a.mean_recon += r.s_recon;
    a.max_abs_diff = std::max(a.max_abs_diff, r.abs_diff());
    if (r.fidelity >= fidelity_cut) {
      ++a.n_converged;
      a.max_abs_diff_converged = std::max(a.max_abs_diff_converged, r.abs_diff());
    }
  }
  if (!a.rows.empty()) {
    a.mean_target /= static_cast<double>(a.rows.size());
    a.mean_recon /= static_cast<double>(a.rows.size());
  }
  return a;
}

inline CsvTable entropy_table(const EntropyAnalysis& a) {
  CsvTable t;
  t.header = {"rank", "trial", "fidelity", "s_target", "s_recon", "abs_diff"};
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& r = a.rows[i];
    t.rows.push_back({cell(i), cell(r.trial), cell(r.fidelity), cell(r.s_target), cell(r.s_recon), cell(r.abs_diff())});
  }
  return t;
}

inline nlohmann::ordered_json entropy_summary_json(const EntropyAnalysis& a) {
  nlohmann::ordered_json j;
  j["n"] = a.rows.size();
  j["mean_target"] = a.mean_target;
  j["mean_recon"] = a.mean_recon;
  j["max_abs_diff"] = a.max_abs_diff;
  j["n_converged"] = a.n_converged;
  j["max_abs_diff_converged"] = a.max_abs_diff_converged;
  // Ten-bin histograms on [0, max entropy] for the distribution view.
  double top = 0.0;
  for (const auto& r : a.rows) top = std::max({top, r.s_target, r.s_recon});
  std::vector<std::size_t> ht(10, 0), hr(10, 0);
  auto bin = [&](double s) {
    return top > 0.0 ? std::min<std::size_t>(9, static_cast<std::size_t>(s / top * 10.0)) : std::size_t{0};
  };
  for (const auto& r : a.rows) {
    ++ht[bin(r.s_target)];
    ++hr[bin(r.s_recon)];
  }
  j["histogram_upper"] = top;
  j["histogram_target"] = ht;
  j["histogram_recon"] = hr;
  return j;
}

// ------------------------------------------------------------- mid-circuit

/// Reconstructs the state after the first `cut_index` gates of
/// `target_circuit`. The oracle re-prepares that prefix on every call.
inline ReconstructionReport run_midcircuit_snapshot(const QuantumCircuit& target_circuit, std::size_t cut_index,
                                                    const ExperimentSpec& spec) {
  if (cut_index > target_circuit.size()) throw std::invalid_argument("cut index is beyond the circuit length");
  const QuantumCircuit prefix = target_circuit.prefix(cut_index);
  SwapTestOracle oracle(TargetPreparation::pure(prefix), oracle_mode(spec), Rng(spec.seed).split(1).next_u64());
  EstimatorConfig cfg = spec.config;
  cfg.gradient.seed = cfg.es.seed = Rng(spec.seed).split(2).next_u64();
  ReconstructionReport rep = reconstruct(spec.method, spec.representation, oracle, target_circuit.n_qubits(), cfg);
  rep.label = "cut=" + std::to_string(cut_index);
  return rep;
}

// ----------------------------------------------------------- mixed states

struct MixedDiagnosticConfig {
  std::size_t n_qubits = 2;
  std::size_t trials = 10;
  Method method = Method::qeswap;
  /// Dominant eigenvalue p of each rank-2 target p|a><a| + (1-p)|b><b|,
  /// drawn uniformly from [p_low, p_high]. rank 1 gives pure targets.
  double p_low = 0.5;
  double p_high = 0.8;
  std::size_t rank = 2;
  EstimatorConfig config = [] {
    EstimatorConfig c;
    c.es.max_iter = 300;
    c.gradient.epochs = 300;
    return c;
  }();
  std::uint64_t seed = 0;
};

struct MixedDiagnosticRow {
  std::size_t trial = 0;
  double p = 1.0;
  double hs_signal = 0.0;     // best Tr(rho sigma) seen by the SWAP-driven run
  double hs_uhlmann = 0.0;    // Uhlmann fidelity of that run's reported candidate
  double uhl_uhlmann = 0.0;   // Uhlmann fidelity when optimizing Uhlmann directly
  std::size_t hs_epochs = 0;
  std::size_t uhl_epochs = 0;
};

struct MixedDiagnosticReport {
  MixedDiagnosticConfig config;
  std::vector<MixedDiagnosticRow> rows;
};

/// Random target of the configured rank built from orthonormal random vectors.
inline DensityMatrix random_mixed_target(std::size_t n_qubits, std::size_t rank, double p, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(dimension_of(n_qubits));
  if (rank == 0 || static_cast<Eigen::Index>(rank) > d) throw std::invalid_argument("rank out of range");
  Matrix g(d, static_cast<Eigen::Index>(rank));
  for (Eigen::Index c = 0; c < g.cols(); ++c) g.col(c) = random_pure_state(n_qubits, rng).to_eigen();
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = Matrix(qr.householderQ()).leftCols(static_cast<Eigen::Index>(rank));
  Eigen::VectorXd w(static_cast<Eigen::Index>(rank));
  if (rank == 1) {
    w(0) = 1.0;
  } else {
    w(0) = p;
    for (Eigen::Index k = 1; k < w.size(); ++k) w(k) = (1.0 - p) / static_cast<double>(rank - 1);
  }
  return DensityMatrix::normalized(q * w.asDiagonal() * q.adjoint());
}

/// Optimizes density candidates against (a) the SWAP-test signal, which
/// measures Tr(rho sigma), and (b) the Uhlmann oracle with direct target
/// access, and reports the final Uhlmann fidelity of both.
inline MixedDiagnosticReport run_mixed_state_diagnostic(const MixedDiagnosticConfig& cfg) {
  if (cfg.trials == 0) throw std::invalid_argument("trials must be >= 1");
  if (!(cfg.p_low >= 0.0 && cfg.p_low <= cfg.p_high && cfg.p_high <= 1.0)) {
    throw std::invalid_argument("need 0 <= p_low <= p_high <= 1");
  }
  MixedDiagnosticReport out;
  out.config = cfg;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    Rng rng = Rng(trial_seed(cfg.seed, t)).split(0);
    MixedDiagnosticRow row;
    row.trial = t;
    row.p = cfg.rank == 1 ? 1.0 : cfg.p_low + (cfg.p_high - cfg.p_low) * rng.uniform();
    const DensityMatrix target = random_mixed_target(cfg.n_qubits, cfg.rank, row.p, rng);

    EstimatorConfig ec = cfg.config;
    ec.gradient.seed = ec.es.seed = rng.next_u64();

    SwapTestOracle swap(TargetPreparation::ensemble(ensemble_preparations(target)));
    const auto a = reconstruct(cfg.method, Representation::density, swap, cfg.n_qubits, ec);
    row.hs_signal = a.best_fidelity;
    row.hs_uhlmann = uhlmann_fidelity(target, candidate_density(*a.best_candidate));
    row.hs_epochs = a.epochs;

    UhlmannOracle uhl(target);
    const auto b = reconstruct(cfg.method, Representation::density, uhl, cfg.n_qubits, ec);
    row.uhl_uhlmann = uhlmann_fidelity(target, candidate_density(*b.best_candidate));
    row.uhl_epochs = b.epochs;
    out.rows.push_back(row);
  }
  return out;
}

inline CsvTable mixed_table(const MixedDiagnosticReport& r) {
  CsvTable t;
  t.header = {"trial", "p", "hs_signal", "hs_uhlmann", "uhlmann_uhlmann", "hs_epochs", "uhlmann_epochs"};
  for (const auto& row : r.rows) {
    t.rows.push_back({cell(row.trial), cell(row.p), cell(row.hs_signal), cell(row.hs_uhlmann), cell(row.uhl_uhlmann),
                      cell(row.hs_epochs), cell(row.uhl_epochs)});
  }
  return t;
}

}  // namespace qsnap
