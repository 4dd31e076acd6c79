// Reconstruct the state halfway through a small circuit from SWAP-test
// fidelities alone, store it, then withdraw it and check the preparation.
//
//   snapshot_demo [store-dir]

#include <cstdio>
#include <filesystem>

#include "qsnap/qsnap.hpp"

using namespace qsnap;

int main(int argc, char** argv) {
  const std::filesystem::path root = argc > 1 ? argv[1] : "snapshot_store";

  QuantumCircuit circuit(3);
  circuit.h(0).cx(0, 1).ry(2, 0.7).cx(1, 2).rz(0, 0.3);
  const std::size_t cut = 3;
  const StateVector truth = execute_statevector(circuit.prefix(cut));

  ExperimentSpec spec;
  spec.n_qubits = circuit.n_qubits();
  spec.seed = 17;
  spec.config.es.max_iter = 200;
  const ReconstructionReport rep = run_midcircuit_snapshot(circuit, cut, spec);
  std::printf("reconstructed cut=%zu in %zu iterations, %zu oracle calls, SWAP fidelity %.6f\n", cut, rep.epochs,
              rep.oracle_evals, rep.best_fidelity);

  SnapshotStore store(root);
  const std::string id = store.deposit(make_snapshot_record(rep));
  std::printf("deposited %s\n", id.c_str());

  const Withdrawal w = store.withdraw(id);
  const double f = overlap_fidelity(execute_statevector(w.circuit), truth);
  std::printf("withdrawn preparation: %zu gates, fidelity to the true mid-circuit state %.6f\n", w.circuit.size(), f);
  return f >= 0.99 ? 0 : 1;
}
