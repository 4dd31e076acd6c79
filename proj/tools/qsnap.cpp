// qsnap command-line front end.
// Exit codes: 0 ok, 1 usage error, 2 runtime failure, 3 gate miss.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qsnap/qsnap.hpp"

namespace {

using namespace qsnap;

constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kGateMiss = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string method = "qeswap";
  std::string repr = "statevector";
  std::size_t qubits = 1;
  std::size_t trials = 20;
  std::string noise = "off";
  std::optional<std::size_t> trajectories;
  std::string shots = "analytic";
  std::uint64_t seed = 0;
  std::string out;
  std::vector<double> thresholds;
  std::optional<std::size_t> max_iter;
  std::optional<double> stop;
  std::string config;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--method", o.method, "gradient | qeswap")->check(CLI::IsMember({"gradient", "qeswap"}));
  cmd->add_option("--repr", o.repr, "statevector | unitary | density")
      ->check(CLI::IsMember({"statevector", "unitary", "density"}));
  cmd->add_option("--qubits", o.qubits, "number of qubits")->check(CLI::Range(1, 10));
  cmd->add_option("--trials", o.trials, "independent trials")->check(CLI::PositiveNumber);
  cmd->add_option("--noise", o.noise, "off | paper | file:<path>");
  cmd->add_option("--trajectories", o.trajectories, "trajectories per noisy evaluation");
  cmd->add_option("--shots", o.shots, "shot count, or 'analytic'");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--threshold", o.thresholds, "reporting threshold (repeatable)");
  cmd->add_option("--max-iter", o.max_iter, "QESwap iterations / gradient epochs");
  cmd->add_option("--stop", o.stop, "early-stop fidelity (default 0.999 noiseless, 0.99 noisy)");
  cmd->add_option("--config", o.config, "key=value estimator config file");
  cmd->add_option("--threads", o.threads, "trial-level worker threads")->check(CLI::PositiveNumber);
}

/// Applies a key=value config file, then explicit flags, to a spec.
ExperimentSpec build_spec(const CommonOptions& o) {
  ExperimentSpec s;
  s.method = parse_method(o.method);
  s.representation = parse_representation(o.repr);
  s.n_qubits = o.qubits;
  s.n_trials = o.trials;
  s.seed = o.seed;
  s.threads = o.threads;
  if (!o.thresholds.empty()) s.thresholds = o.thresholds;

  std::optional<double> stop;
  std::optional<std::size_t> trajectories = o.trajectories;
  if (!o.config.empty()) {
    for (const auto& [k, v] : parse_key_values(read_text_file(o.config))) {
      auto& g = s.config.gradient;
      auto& e = s.config.es;
      if (k == "epochs") g.epochs = parse_unsigned(k, v);
      else if (k == "lr") g.lr = parse_double(k, v);
      else if (k == "fd_epsilon") g.fd_epsilon = parse_double(k, v);
      else if (k == "scaling_factor") g.scaling_factor = parse_double(k, v);
      else if (k == "stop_threshold" || k == "threshold") stop = parse_double(k, v);
      else if (k == "population") e.population = parse_unsigned(k, v);
      else if (k == "sigma") e.sigma = parse_double(k, v);
      else if (k == "alpha") e.alpha = parse_double(k, v);
      else if (k == "max_iter") e.max_iter = parse_unsigned(k, v);
      else if (k == "trajectories" && !trajectories) trajectories = parse_unsigned(k, v);
      else throw UsageError("unknown config key '" + k + "'");
    }
  }

  if (o.noise == "paper") {
    s.noise = NoiseSetting{};
  } else if (o.noise.rfind("file:", 0) == 0) {
    s.noise = NoiseSetting{load_noise_params(o.noise.substr(5))};
  } else if (o.noise != "off") {
    throw UsageError("--noise must be off, paper or file:<path>");
  }
  if (s.noise && trajectories) s.noise->trajectories = *trajectories;
  if (o.shots != "analytic") {
    try {
      s.shots = static_cast<std::size_t>(parse_unsigned("shots", o.shots));
    } catch (const std::invalid_argument&) {
      throw UsageError("--shots must be a positive integer or 'analytic'");
    }
  }
  if (o.max_iter) {
    s.config.es.max_iter = *o.max_iter;
    s.config.gradient.epochs = *o.max_iter;
  }
  if (o.stop) stop = o.stop;
  const double st = stop.value_or(default_stop_threshold(s.noise.has_value()));
  s.config.es.threshold = st;
  s.config.gradient.stop_threshold = st;
  s.validate();
  return s;
}

void emit_csv(const CommonOptions& o, const std::string& file, const CsvTable& t) {
  if (o.out.empty()) {
    std::cout << to_csv(t);
  } else {
    write_csv(std::filesystem::path(o.out) / file, t);
    std::cerr << "wrote " << (std::filesystem::path(o.out) / file).string() << "\n";
  }
}

int cmd_cohort(const CommonOptions& o, std::optional<double> gate) {
  const ExperimentSpec spec = build_spec(o);
  const CohortSummary c = run_cohort(spec);
  if (!o.out.empty()) emit_report(c, o.out);
  std::cout << aggregates_to_json(c.aggregates).dump(2) << "\n";
  if (gate && c.aggregates.thresholds.back().pass_rate < *gate) return kGateMiss;
  return 0;
}

int cmd_standard(const CommonOptions& o, std::size_t max_qubits, bool gate) {
  const ExperimentSpec spec = build_spec(o);
  const double thr = o.thresholds.empty() ? 0.99 : o.thresholds.back();
  const auto rows = run_standard_states(spec, thr, max_qubits);
  emit_csv(o, "standard.csv", standard_table(rows));
  if (gate) {
    for (const auto& r : rows) {
      if (!r.epochs) return kGateMiss;
    }
  }
  return 0;
}

int cmd_entropy(const CommonOptions& o, const std::string& cohort_dir) {
  const CohortSummary c = cohort_dir.empty() ? run_cohort(build_spec(o)) : load_cohort(cohort_dir);
  const EntropyAnalysis a = run_entropy_analysis(c);
  emit_csv(o, "entropy.csv", entropy_table(a));
  const std::string summary = entropy_summary_json(a).dump(2) + "\n";
  if (o.out.empty()) {
    std::cerr << summary;
  } else {
    write_text(std::filesystem::path(o.out) / "entropy_summary.json", summary);
  }
  return 0;
}

int cmd_snapshot(const CommonOptions& o, const std::string& circuit_file, std::size_t cut, const std::string& store) {
  const QuantumCircuit circuit = parse_circuit(read_text_file(circuit_file));
  CommonOptions adj = o;
  adj.qubits = circuit.n_qubits();
  const ExperimentSpec spec = build_spec(adj);
  const ReconstructionReport rep = run_midcircuit_snapshot(circuit, cut, spec);
  auto j = report_to_json(rep);
  if (!store.empty() && spec.representation != Representation::density) {
    j["snapshot_id"] = SnapshotStore(store).deposit(make_snapshot_record(rep));
  }
  std::cout << j.dump(2) << "\n";
  if (!o.out.empty()) write_text(std::filesystem::path(o.out) / "snapshot_report.json", j.dump(2) + "\n");
  return 0;
}

int cmd_mixed(const CommonOptions& o, double p_low, double p_high, std::size_t rank) {
  MixedDiagnosticConfig cfg;
  cfg.n_qubits = o.qubits == 1 ? 2 : o.qubits;
  cfg.trials = o.trials;
  cfg.method = parse_method(o.method);
  cfg.p_low = p_low;
  cfg.p_high = p_high;
  cfg.rank = rank;
  cfg.seed = o.seed;
  if (o.max_iter) cfg.config.es.max_iter = cfg.config.gradient.epochs = *o.max_iter;
  const auto report = run_mixed_state_diagnostic(cfg);
  emit_csv(o, "mixed.csv", mixed_table(report));
  return 0;
}

int cmd_deposit(const CommonOptions& o, const std::string& store, const std::string& state_name,
                const std::vector<double>& amplitudes, const std::string& label) {
  if (store.empty()) throw UsageError("--store is required");
  SnapshotStore s(store);
  std::string id;
  if (!amplitudes.empty()) {
    if (amplitudes.size() % 2) throw UsageError("--amplitudes needs interleaved re,im pairs");
    SnapshotRecord rec;
    rec.n_qubits = qubits_for_dimension(amplitudes.size() / 2);
    for (std::size_t k = 0; k < amplitudes.size(); k += 2) rec.amplitudes.emplace_back(amplitudes[k], amplitudes[k + 1]);
    rec.metadata.label = label;
    id = s.deposit(std::move(rec));
  } else {
    // Reconstruct a target through the SWAP-test oracle, then store the result.
    CommonOptions adj = o;
    StateVector target = StateVector::zero(1);
    if (!state_name.empty()) {
      target = find_standard_state(state_name).vector;
      adj.qubits = target.n_qubits();
    } else {
      Rng rng = Rng(o.seed).split(0);
      target = random_pure_state(o.qubits, rng);
    }
    const ExperimentSpec spec = build_spec(adj);
    const TrialResult tr = reconstruct_and_validate(spec, target, mottonen_prepare(target), o.seed);
    if (!tr.ok()) throw std::runtime_error(tr.status);
    id = s.deposit(make_snapshot_record(*tr.report, label.empty() ? state_name : label));
    std::cerr << "validated fidelity " << format_double(tr.final_fidelity) << "\n";
  }
  std::cout << id << "\n";
  return 0;
}

int cmd_withdraw(const std::string& store, const std::string& id, const std::string& circuit_out) {
  if (store.empty()) throw UsageError("--store is required");
  const Withdrawal w = SnapshotStore(store).withdraw(id);
  nlohmann::ordered_json j = metadata_to_json(w.record);
  std::vector<double> amps;
  for (const auto& a : w.record.amplitudes) {
    amps.push_back(a.real());
    amps.push_back(a.imag());
  }
  j["amplitudes"] = amps;
  j["preparation_gates"] = w.circuit.size();
  std::cout << j.dump(2) << "\n";
  if (!circuit_out.empty()) write_text(circuit_out, dump(w.circuit));
  return 0;
}

int cmd_list(const std::string& store) {
  if (store.empty()) throw UsageError("--store is required");
  for (const auto& id : SnapshotStore(store).list()) std::cout << id << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum state snapshots from SWAP-test fidelity"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* cohort = app.add_subcommand("cohort", "reconstruct a cohort of random targets");
  add_common(cohort, common);
  std::optional<double> gate;
  cohort->add_option("--gate", gate, "exit 3 if the pass rate at the last threshold is below this");

  auto* standard = app.add_subcommand("standard", "benchmark the standard-state catalog");
  add_common(standard, common);
  std::size_t max_qubits = 3;
  bool standard_gate = false;
  standard->add_option("--max-qubits", max_qubits, "largest catalog width")->check(CLI::Range(1, 3));
  standard->add_flag("--gate", standard_gate, "exit 3 if any state misses the threshold");

  auto* entropy = app.add_subcommand("entropy", "half-chain entropy of targets vs reconstructions");
  add_common(entropy, common);
  std::string cohort_dir;
  entropy->add_option("--cohort", cohort_dir, "stored cohort directory (otherwise a fresh cohort runs)");

  auto* snapshot = app.add_subcommand("snapshot", "reconstruct the state after a circuit prefix");
  add_common(snapshot, common);
  std::string circuit_file, store;
  std::size_t cut = 0;
  snapshot->add_option("--circuit", circuit_file, "circuit text file")->required();
  snapshot->add_option("--cut", cut, "number of leading gates to keep")->required();
  snapshot->add_option("--store", store, "deposit the result into this store");

  auto* mixed = app.add_subcommand("mixed-diagnostic", "SWAP-test signal vs Uhlmann fidelity on mixed targets");
  add_common(mixed, common);
  double p_low = 0.5, p_high = 0.8;
  std::size_t rank = 2;
  mixed->add_option("--p-low", p_low, "lower bound of the dominant eigenvalue");
  mixed->add_option("--p-high", p_high, "upper bound of the dominant eigenvalue");
  mixed->add_option("--rank", rank, "target rank")->check(CLI::PositiveNumber);

  auto* deposit = app.add_subcommand("deposit", "reconstruct (or take) a state and store it");
  add_common(deposit, common);
  std::string state_name, label;
  std::vector<double> amplitudes;
  deposit->add_option("--store", store, "store directory")->required();
  deposit->add_option("--state", state_name, "catalog state to reconstruct (default: random target)");
  deposit->add_option("--amplitudes", amplitudes, "store these interleaved re,im values directly")->delimiter(',');
  deposit->add_option("--label", label, "free-text label");

  auto* withdraw = app.add_subcommand("withdraw", "load a stored state and its preparation circuit");
  std::string id, circuit_out;
  withdraw->add_option("--store", store, "store directory")->required();
  withdraw->add_option("--id", id, "snapshot identifier")->required();
  withdraw->add_option("--circuit-out", circuit_out, "write the preparation circuit here");

  auto* list = app.add_subcommand("list", "list stored snapshot identifiers");
  list->add_option("--store", store, "store directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*cohort) return cmd_cohort(common, gate);
    if (*standard) return cmd_standard(common, max_qubits, standard_gate);
    if (*entropy) return cmd_entropy(common, cohort_dir);
    if (*snapshot) return cmd_snapshot(common, circuit_file, cut, store);
    if (*mixed) return cmd_mixed(common, p_low, p_high, rank);
    if (*deposit) return cmd_deposit(common, store, state_name, amplitudes, label);
    if (*withdraw) return cmd_withdraw(store, id, circuit_out);
    if (*list) return cmd_list(store);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
