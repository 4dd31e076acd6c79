#pragma once

// Random-target cohorts: spec -> per-trial reconstructions -> aggregates,
// plus the on-disk form (summary.json, trials.csv, trace.csv, run_info.json).

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "qsnap/errors.hpp"
#include "qsnap/estimators.hpp"
#include "qsnap/harness/table.hpp"
#include "qsnap/noise.hpp"
#include "qsnap/oracle.hpp"
#include "qsnap/snapshot.hpp"
#include "qsnap/synthesis.hpp"

namespace qsnap {

struct NoiseSetting {
  NoiseParams params;
  std::size_t trajectories = 2000;
};

struct ExperimentSpec {
  Method method = Method::qeswap;
  Representation representation = Representation::statevector;
  std::size_t n_qubits = 1;
  std::size_t n_trials = 20;
  std::optional<NoiseSetting> noise;   // takes precedence over shots
  std::optional<std::size_t> shots;    // nullopt: analytic oracle
  std::vector<double> thresholds{0.95, 0.99};
  EstimatorConfig config;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // trial-level workers; results do not depend on it

  void validate() const {
    if (n_qubits == 0 || n_qubits > 10) throw std::invalid_argument("n_qubits must be in 1..10");
    if (n_trials == 0) throw std::invalid_argument("n_trials must be >= 1");
    if (thresholds.empty()) throw std::invalid_argument("at least one threshold is required");
    for (double t : thresholds) {
      if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("thresholds must lie in (0, 1]");
    }
    if (noise) {
      noise->params.validate();
      if (noise->trajectories == 0) throw std::invalid_argument("trajectories must be >= 1");
    }
    if (shots && *shots == 0) throw std::invalid_argument("shots must be >= 1");
  }
};

inline double default_stop_threshold(bool noisy) { return noisy ? 0.99 : 0.999; }

inline OracleMode oracle_mode(const ExperimentSpec& spec) {
  if (spec.noise) return Noisy{paper_noise_model(spec.noise->params), spec.noise->trajectories};
  if (spec.shots) return Shots{*spec.shots};
  return Analytic{};
}

/// Fidelity of a candidate against the known pure target, computed
/// classically. Used for validation only; estimators never see it.
inline double validated_fidelity(const Candidate& c, const StateVector& target) {
  if (const auto* rho = std::get_if<DensityMatrix>(&c)) {
    const Eigen::VectorXcd v = target.to_eigen();
    return std::clamp((v.adjoint() * rho->entries() * v)(0, 0).real(), 0.0, 1.0);
  }
  return overlap_fidelity(induced_state(c), target);
}

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double final_fidelity = std::numeric_limits<double>::quiet_NaN();  // validated, reported candidate
  double best_signal = std::numeric_limits<double>::quiet_NaN();     // oracle's best value
  std::size_t epochs = 0;
  std::size_t oracle_evals = 0;
  std::vector<std::optional<std::size_t>> epochs_to;  // aligned with thresholds; nullopt = NA
  double target_entropy = std::numeric_limits<double>::quiet_NaN();
  double recon_entropy = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> validated_trace;
  std::optional<StateVector> target;
  std::optional<StateVector> reconstruction;
  std::optional<ReconstructionReport> report;  // in-memory only
  double wall_time_s = 0.0;

  bool ok() const { return status == "ok"; }
};

/// First 1-based epoch whose validated fidelity reaches `threshold`.
inline std::optional<std::size_t> epochs_to_threshold(const std::vector<double>& trace, double threshold) {
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i] >= threshold) return i + 1;
  }
  return std::nullopt;
}

/// Reconstructs one known target through an oracle that only sees `prep`,
/// then scores every epoch's candidate against the target.
inline TrialResult reconstruct_and_validate(const ExperimentSpec& spec, const StateVector& target,
                                            const QuantumCircuit& prep, std::uint64_t seed, std::size_t trial = 0) {
  TrialResult tr;
  tr.trial = trial;
  tr.seed = seed;
  tr.target = target;
  tr.target_entropy = half_chain_entropy(target);
  tr.epochs_to.assign(spec.thresholds.size(), std::nullopt);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Rng seeds(seed);
    SwapTestOracle oracle(TargetPreparation::pure(prep), oracle_mode(spec), seeds.split(1).next_u64());
    EstimatorConfig cfg = spec.config;
    cfg.gradient.seed = cfg.es.seed = seeds.split(2).next_u64();
    ReconstructionReport rep = reconstruct(spec.method, spec.representation, oracle, spec.n_qubits, cfg);
    for (const auto& c : rep.epoch_candidates) tr.validated_trace.push_back(validated_fidelity(c, target));
    for (std::size_t k = 0; k < spec.thresholds.size(); ++k) {
      tr.epochs_to[k] = epochs_to_threshold(tr.validated_trace, spec.thresholds[k]);
    }
    tr.final_fidelity = validated_fidelity(*rep.best_candidate, target);
    tr.best_signal = rep.best_fidelity;
    tr.epochs = rep.epochs;
    tr.oracle_evals = rep.oracle_evals;
    tr.reconstruction = induced_state(*rep.best_candidate);
    tr.recon_entropy = half_chain_entropy(*tr.reconstruction);
    tr.report = std::move(rep);
  } catch (const std::exception& e) {
    tr.status = std::string("error: ") + e.what();
  }
  tr.wall_time_s = detail::seconds_since(t0);
  return tr;
}

struct ThresholdStats {
  double threshold = 0.0;
  std::size_t reached = 0;
  double pass_rate = 0.0;
  std::optional<double> mean_epochs;  // over trials that reached it
};

struct CohortAggregates {
  std::size_t n_trials = 0;
  std::size_t n_failed = 0;
  std::optional<double> mean_fidelity;
  std::optional<double> min_fidelity;
  std::vector<ThresholdStats> thresholds;
};

inline CohortAggregates compute_aggregates(const std::vector<TrialResult>& trials, const std::vector<double>& thresholds) {
  CohortAggregates a;
  a.n_trials = trials.size();
  double sum = 0.0, mn = std::numeric_limits<double>::infinity();
  std::size_t n_ok = 0;
  for (const auto& t : trials) {
    if (!t.ok()) {
      ++a.n_failed;
      continue;
    }
    ++n_ok;
    sum += t.final_fidelity;
    mn = std::min(mn, t.final_fidelity);
  }
  if (n_ok) {
    a.mean_fidelity = sum / static_cast<double>(n_ok);
    a.min_fidelity = mn;
  }
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    ThresholdStats s;
    s.threshold = thresholds[k];
    double epochs = 0.0;
    for (const auto& t : trials) {
      if (k < t.epochs_to.size() && t.epochs_to[k]) {
        ++s.reached;
        epochs += static_cast<double>(*t.epochs_to[k]);
      }
    }
    s.pass_rate = trials.empty() ? 0.0 : static_cast<double>(s.reached) / static_cast<double>(trials.size());
    if (s.reached) s.mean_epochs = epochs / static_cast<double>(s.reached);
    a.thresholds.push_back(s);
  }
  return a;
}

struct CohortSummary {
  ExperimentSpec spec;
  std::vector<TrialResult> trials;
  CohortAggregates aggregates;
  double wall_time_s = 0.0;

  const ThresholdStats& at(double threshold) const {
    for (const auto& s : aggregates.thresholds) {
      if (s.threshold == threshold) return s;
    }
    throw std::invalid_argument("threshold not part of this cohort");
  }
};

/// Per-trial seed: a pure function of (cohort seed, trial index).
inline std::uint64_t trial_seed(std::uint64_t cohort_seed, std::size_t trial) {
  return Rng(cohort_seed).split(trial).next_u64();
}

inline CohortSummary run_cohort(const ExperimentSpec& spec) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  CohortSummary out;
  out.spec = spec;
  out.trials.resize(spec.n_trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < spec.n_trials; i = next++) {
      const std::uint64_t seed = trial_seed(spec.seed, i);
      Rng target_rng = Rng(seed).split(0);
      const StateVector target = random_pure_state(spec.n_qubits, target_rng);
      out.trials[i] = reconstruct_and_validate(spec, target, mottonen_prepare(target), seed, i);
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(spec.threads, spec.n_trials));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  out.aggregates = compute_aggregates(out.trials, spec.thresholds);
  out.wall_time_s = detail::seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline std::vector<double> interleave(const StateVector& s) {
  std::vector<double> v;
  for (const auto& a : s.amplitudes()) {
    v.push_back(a.real());
    v.push_back(a.imag());
  }
  return v;
}

inline StateVector deinterleave(const std::vector<double>& v) {
  if (v.size() % 2) throw integrity_error("odd amplitude list");
  std::vector<Complex> a;
  for (std::size_t k = 0; k < v.size(); k += 2) a.emplace_back(v[k], v[k + 1]);
  return StateVector::from_normalized(std::move(a));
}

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline std::optional<double> json_opt_double(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline double json_double_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

// Shortest text that round-trips, so 0.99 stays "0.99" in column names.
inline std::string threshold_key(double t) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, t);
  return std::string(buf, r.ptr);
}

}  // namespace detail

inline nlohmann::ordered_json noise_params_to_json(const NoiseParams& p) {
  nlohmann::ordered_json j;
  j["bit_flip_p"] = p.bit_flip_p;
  j["depol_1q"] = p.depol_1q;
  j["depol_2q"] = p.depol_2q;
  j["t1"] = p.t1;
  j["t2"] = p.t2;
  j["readout_len"] = p.readout_len;
  j["gate_len_1q"] = p.gate_len_1q;
  j["gate_len_2q"] = p.gate_len_2q;
  return j;
}

inline NoiseParams noise_params_from_json(const nlohmann::json& j) {
  NoiseParams p;
  p.bit_flip_p = j.at("bit_flip_p");
  p.depol_1q = j.at("depol_1q");
  p.depol_2q = j.at("depol_2q");
  p.t1 = j.at("t1");
  p.t2 = j.at("t2");
  p.readout_len = j.at("readout_len");
  p.gate_len_1q = j.at("gate_len_1q");
  p.gate_len_2q = j.at("gate_len_2q");
  return p;
}

inline nlohmann::ordered_json spec_to_json(const ExperimentSpec& s) {
  nlohmann::ordered_json j;
  j["method"] = to_string(s.method);
  j["representation"] = to_string(s.representation);
  j["n_qubits"] = s.n_qubits;
  j["n_trials"] = s.n_trials;
  if (s.noise) {
    j["noise"] = {{"params", noise_params_to_json(s.noise->params)}, {"trajectories", s.noise->trajectories}};
  } else {
    j["noise"] = nullptr;
  }
  j["shots"] = s.shots ? nlohmann::ordered_json(*s.shots) : nlohmann::ordered_json(nullptr);
  j["thresholds"] = s.thresholds;
  const auto& g = s.config.gradient;
  j["gradient"] = {{"epochs", g.epochs},
                   {"lr", g.lr},
                   {"fd_epsilon", g.fd_epsilon},
                   {"scaling_factor", g.scaling_factor},
                   {"stop_threshold", g.stop_threshold}};
  const auto& e = s.config.es;
  j["es"] = {{"population", e.population},
             {"sigma", e.sigma},
             {"alpha", e.alpha},
             {"max_iter", e.max_iter},
             {"threshold", e.threshold}};
  j["seed"] = s.seed;
  return j;
}

inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  s.method = parse_method(j.at("method").get<std::string>());
  s.representation = parse_representation(j.at("representation").get<std::string>());
  s.n_qubits = j.at("n_qubits");
  s.n_trials = j.at("n_trials");
  if (!j.at("noise").is_null()) {
    s.noise = NoiseSetting{noise_params_from_json(j["noise"].at("params")), j["noise"].at("trajectories")};
  }
  if (!j.at("shots").is_null()) s.shots = j["shots"].get<std::size_t>();
  s.thresholds = j.at("thresholds").get<std::vector<double>>();
  const auto& g = j.at("gradient");
  s.config.gradient = {g.at("epochs"), g.at("lr"), g.at("fd_epsilon"), g.at("scaling_factor"), g.at("stop_threshold"), 0};
  const auto& e = j.at("es");
  s.config.es = {e.at("population"), e.at("sigma"), e.at("alpha"), e.at("max_iter"), e.at("threshold"), 0};
  s.seed = j.at("seed");
  return s;
}

inline nlohmann::ordered_json aggregates_to_json(const CohortAggregates& a) {
  nlohmann::ordered_json j;
  j["n_trials"] = a.n_trials;
  j["n_failed"] = a.n_failed;
  j["mean_fidelity"] = detail::opt_json(a.mean_fidelity);
  j["min_fidelity"] = detail::opt_json(a.min_fidelity);
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : a.thresholds) {
    arr.push_back({{"threshold", s.threshold},
                   {"reached", s.reached},
                   {"pass_rate", s.pass_rate},
                   {"mean_epochs", detail::opt_json(s.mean_epochs)}});
  }
  j["thresholds"] = arr;
  return j;
}

/// trials.csv layout: one row per trial, NA where a value does not exist.
inline CsvTable trials_table(const CohortSummary& c) {
  CsvTable t;
  t.header = {"trial", "seed", "status", "final_fidelity", "best_signal", "epochs", "oracle_evals"};
  for (double thr : c.spec.thresholds) t.header.push_back("epochs_to_" + detail::threshold_key(thr));
  t.header.insert(t.header.end(), {"target_entropy", "recon_entropy"});
  auto num = [](double v) { return std::isnan(v) ? std::string(kNA) : cell(v); };
  for (const auto& tr : c.trials) {
    std::vector<std::string> row{cell(tr.trial), std::to_string(tr.seed), sanitize_cell(tr.status),
                                 num(tr.final_fidelity), num(tr.best_signal), cell(tr.epochs), cell(tr.oracle_evals)};
    for (std::size_t k = 0; k < c.spec.thresholds.size(); ++k) {
      row.push_back(k < tr.epochs_to.size() ? cell(tr.epochs_to[k]) : std::string(kNA));
    }
    row.push_back(num(tr.target_entropy));
    row.push_back(num(tr.recon_entropy));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Long-format validated trace: trial, epoch, fidelity.
inline CsvTable trace_table(const CohortSummary& c) {
  CsvTable t;
  t.header = {"trial", "epoch", "fidelity"};
  for (const auto& tr : c.trials) {
    for (std::size_t e = 0; e < tr.validated_trace.size(); ++e) {
      t.rows.push_back({cell(tr.trial), cell(e + 1), cell(tr.validated_trace[e])});
    }
  }
  return t;
}

/// Deterministic summary: no wall times, no timestamps.
inline nlohmann::ordered_json cohort_to_json(const CohortSummary& c) {
  nlohmann::ordered_json j;
  j["spec"] = spec_to_json(c.spec);
  j["aggregates"] = aggregates_to_json(c.aggregates);
  auto arr = nlohmann::ordered_json::array();
  for (const auto& tr : c.trials) {
    nlohmann::ordered_json t;
    t["trial"] = tr.trial;
    t["seed"] = tr.seed;
    t["status"] = tr.status;
    t["final_fidelity"] = tr.final_fidelity;  // NaN serializes as null
    t["best_signal"] = tr.best_signal;
    t["epochs"] = tr.epochs;
    t["oracle_evals"] = tr.oracle_evals;
    auto et = nlohmann::ordered_json::array();
    for (const auto& e : tr.epochs_to) et.push_back(e ? nlohmann::ordered_json(*e) : nlohmann::ordered_json(nullptr));
    t["epochs_to"] = et;
    t["target_entropy"] = tr.target_entropy;
    t["recon_entropy"] = tr.recon_entropy;
    t["target"] = tr.target ? nlohmann::ordered_json(detail::interleave(*tr.target)) : nlohmann::ordered_json(nullptr);
    t["reconstruction"] =
        tr.reconstruction ? nlohmann::ordered_json(detail::interleave(*tr.reconstruction)) : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(t));
  }
  j["trials"] = arr;
  return j;
}

/// Writes summary.json, trials.csv, trace.csv and run_info.json into `dir`.
inline void emit_report(const CohortSummary& c, const std::filesystem::path& dir) {
  write_text(dir / "summary.json", cohort_to_json(c).dump(2) + "\n");
  write_csv(dir / "trials.csv", trials_table(c));
  write_csv(dir / "trace.csv", trace_table(c));
  nlohmann::ordered_json info;
  info["created_at"] = detail::utc_now_iso8601();
  info["wall_time_s"] = c.wall_time_s;
  std::vector<double> per;
  for (const auto& t : c.trials) per.push_back(t.wall_time_s);
  info["trial_wall_time_s"] = per;
  info["threads"] = c.spec.threads;
  write_text(dir / "run_info.json", info.dump(2) + "\n");
}

namespace detail {

inline bool same_optional(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::abs(*a - *b) <= 1e-12 * std::max(1.0, std::abs(*a));
}

}  // namespace detail

/// Loads a cohort written by emit_report. The stored aggregates and the
/// per-trial CSV are recomputed from the trial records and must agree;
/// otherwise integrity_error.
inline CohortSummary load_cohort(const std::filesystem::path& dir) {
  CohortSummary c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file((dir / "summary.json").string()));
    c.spec = spec_from_json(j.at("spec"));
    for (const auto& t : j.at("trials")) {
      TrialResult tr;
      tr.trial = t.at("trial");
      tr.seed = t.at("seed");
      tr.status = t.at("status");
      tr.final_fidelity = detail::json_double_or_nan(t.at("final_fidelity"));
      tr.best_signal = detail::json_double_or_nan(t.at("best_signal"));
      tr.epochs = t.at("epochs");
      tr.oracle_evals = t.at("oracle_evals");
      for (const auto& e : t.at("epochs_to")) {
        tr.epochs_to.push_back(e.is_null() ? std::nullopt : std::optional<std::size_t>(e.get<std::size_t>()));
      }
      tr.target_entropy = detail::json_double_or_nan(t.at("target_entropy"));
      tr.recon_entropy = detail::json_double_or_nan(t.at("recon_entropy"));
      if (!t.at("target").is_null()) tr.target = detail::deinterleave(t["target"].get<std::vector<double>>());
      if (!t.at("reconstruction").is_null()) {
        tr.reconstruction = detail::deinterleave(t["reconstruction"].get<std::vector<double>>());
      }
      c.trials.push_back(std::move(tr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw integrity_error(std::string("malformed summary.json: ") + e.what());
  }

  const CsvTable trace = load_csv(dir / "trace.csv");
  for (const auto& row : trace.rows) {
    const auto trial = static_cast<std::size_t>(parse_unsigned("trial", row.at(0)));
    if (trial >= c.trials.size()) throw integrity_error("trace.csv refers to an unknown trial");
    c.trials[trial].validated_trace.push_back(parse_double("fidelity", row.at(2)));
  }

  c.aggregates = compute_aggregates(c.trials, c.spec.thresholds);
  const auto& stored = j.at("aggregates");
  bool agree = stored.at("n_trials").get<std::size_t>() == c.aggregates.n_trials &&
               stored.at("n_failed").get<std::size_t>() == c.aggregates.n_failed &&
               detail::same_optional(detail::json_opt_double(stored.at("mean_fidelity")), c.aggregates.mean_fidelity) &&
               detail::same_optional(detail::json_opt_double(stored.at("min_fidelity")), c.aggregates.min_fidelity) &&
               stored.at("thresholds").size() == c.aggregates.thresholds.size();
  for (std::size_t k = 0; agree && k < c.aggregates.thresholds.size(); ++k) {
    const auto& s = stored["thresholds"][k];
    const auto& r = c.aggregates.thresholds[k];
    agree = s.at("reached").get<std::size_t>() == r.reached &&
            detail::same_optional(s.at("pass_rate").get<double>(), r.pass_rate) &&
            detail::same_optional(detail::json_opt_double(s.at("mean_epochs")), r.mean_epochs);
  }
  if (!agree) throw integrity_error("stored aggregates disagree with the per-trial records");
  if (load_csv(dir / "trials.csv") != trials_table(c)) throw integrity_error("trials.csv disagrees with summary.json");
  return c;
}

}  // namespace qsnap
