#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <thread>

#include "qsnap/estimators.hpp"
#include "qsnap/harness/studies.hpp"

using namespace qsnap;

namespace {

SwapTestOracle oracle_for(const StateVector& target) {
  return SwapTestOracle(TargetPreparation::pure(mottonen_prepare(target)));
}

// Exposes only evaluate(): if an estimator needed anything else this file
// would not compile.
struct SpyOracle {
  StateVector target;
  std::size_t calls = 0;
  double evaluate(const StateVector& c) {
    ++calls;
    return overlap_fidelity(c, target);
  }
};

struct ConstantOracle {
  double evaluate(const StateVector&) { return 1.0; }
};

std::vector<double> random_raw(std::size_t len, Rng& rng) {
  std::vector<double> v(len);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

// ----------------------------------------------------------------- decoders

TEST(Decoders, StateExamples) {
  const auto z = decode_candidate_state(std::vector<double>{1, 0, 0, 0});
  EXPECT_NEAR(overlap_fidelity(z, StateVector::basis(1, 0)), 1.0, 1e-15);
  const auto i1 = decode_candidate_state(std::vector<double>{0, 0, 0, 1});
  EXPECT_NEAR(i1[1].imag(), 1.0, 1e-15);
  EXPECT_NEAR(overlap_fidelity(i1, StateVector::basis(1, 1)), 1.0, 1e-15);
  const auto s = decode_candidate_state(std::vector<double>{3, 0, 4, 0});
  EXPECT_NEAR(s[0].real(), 0.6, 1e-15);
  EXPECT_NEAR(s[1].real(), 0.8, 1e-15);
  EXPECT_THROW(decode_candidate_state(std::vector<double>{0, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(decode_candidate_state(std::vector<double>{1, 0, 0}), std::invalid_argument);
}

TEST(Decoders, UnitaryExamples) {
  std::vector<double> eye(8, 0.0);
  eye[0] = eye[6] = 1.0;  // (0,0) and (1,1)
  auto q = decode_candidate_unitary(eye);
  ASSERT_TRUE(q);
  EXPECT_LT((q->entries() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  for (auto& x : eye) x *= 2.0;
  q = decode_candidate_unitary(eye);
  ASSERT_TRUE(q);
  EXPECT_LT((q->entries() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  std::vector<double> singular{1, 0, 1, 0, 1, 0, 1, 0};
  EXPECT_FALSE(decode_candidate_unitary(singular).has_value());
}

TEST(Decoders, UnitaryProperty) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + i % 3;
    const auto q = decode_candidate_unitary(random_raw(raw_length(Representation::unitary, n), rng));
    ASSERT_TRUE(q);
    const Matrix& u = q->entries();
    EXPECT_LT((u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(q->apply_to_zero().norm(), 1.0, 1e-12);
  }
}

TEST(Decoders, DensityExamplesAndProperty) {
  std::vector<double> m{1, 0, 0, 0, 0, 0, 0, 0};
  const auto pure0 = decode_candidate_density(m);
  EXPECT_NEAR(pure0.entries()(0, 0).real(), 1.0, 1e-15);
  std::vector<double> eye{1, 0, 0, 0, 0, 0, 1, 0};
  EXPECT_LT((decode_candidate_density(eye).entries() - Matrix::Identity(2, 2) * 0.5).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(decode_candidate_density(std::vector<double>(8, 0.0)), std::invalid_argument);

  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + i % 3;
    const auto rho = decode_candidate_density(random_raw(raw_length(Representation::density, n), rng));
    const Matrix& e = rho.entries();
    EXPECT_LT((e - e.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(e.trace().real(), 1.0, 1e-10);
    Eigen::SelfAdjointEigenSolver<Matrix> es(e);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
  }
}

TEST(Decoders, StateNormalizationProperty) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    EXPECT_NEAR(decode_candidate_state(random_raw(2 * dimension_of(1 + i % 4), rng)).norm(), 1.0, 1e-12);
  }
}

// ------------------------------------------------------------------ network

TEST(Network, GeluDerivativeMatchesDifference) {
  for (double x = -4.0; x <= 4.0; x += 0.37) {
    const double h = 1e-6;
    EXPECT_NEAR(gelu_derivative(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-8);
  }
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
}

TEST(Network, ShapeAndInitialization) {
  GeneratorNetwork net(4, Rng(1));
  EXPECT_EQ(net.dims(), (std::vector<std::size_t>{256, 512, 1024, 1024, 512, 256, 4}));
  EXPECT_EQ(net.layers(), 6u);
  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < net.dims().size(); ++l) expected += net.dims()[l] * net.dims()[l + 1] + net.dims()[l + 1];
  EXPECT_EQ(net.parameters().size(), expected);
  const double bound = std::sqrt(6.0 / (256.0 + 512.0));
  for (std::size_t i = 0; i < 256 * 512; ++i) EXPECT_LE(std::abs(net.parameters()[i]), bound);
  // First-layer biases start at zero.
  for (std::size_t i = 256 * 512; i < 256 * 512 + 512; ++i) EXPECT_EQ(net.parameters()[i], 0.0);
}

TEST(Network, BackpropMatchesFiniteDifferences) {
  GeneratorNetwork net(3, Rng(2), 4, {5, 6});
  auto params = net.parameters();
  Rng rng(3);
  for (auto& p : params) p += 0.1 * rng.normal();  // nonzero biases too
  const std::vector<double> z{0.3, -0.7, 0.9, 0.1};
  const std::vector<double> c{0.5, -1.2, 2.0};
  auto loss = [&] {
    const auto out = net.forward(z);
    double l = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) l += c[k] * out[k];
    return l;
  };
  GeneratorNetwork::Tape tape;
  net.forward(z, &tape);
  const auto grad = net.backward(tape, c);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i], h = 1e-6;
    params[i] = orig + h;
    const double lp = loss();
    params[i] = orig - h;
    const double lm = loss();
    params[i] = orig;
    EXPECT_NEAR(grad[i], (lp - lm) / (2 * h), 1e-7) << "parameter " << i;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> g{0.3, -4.0, 1e-3};
  Adam adam(3, AdamConfig{.lr = 0.01});
  adam.step(p, g);
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p[1], -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(p[2], 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-9);
  EXPECT_EQ(adam.steps(), 1u);
  EXPECT_THROW(adam.step(p, std::vector<double>{1.0}), std::invalid_argument);
}

// ------------------------------------------------------------------ oracles

TEST(Oracle, CounterAndModes) {
  Rng rng(4);
  const auto t = random_pure_state(2, rng);
  auto o = oracle_for(t);
  const auto c = random_pure_state(2, rng);
  EXPECT_NEAR(o.evaluate(c), overlap_fidelity(c, t), 1e-9);
  EXPECT_EQ(o.evaluations(), 1u);
  o.evaluate(t);
  EXPECT_EQ(o.evaluations(), 2u);
  EXPECT_THROW(o.evaluate(random_pure_state(1, rng)), std::invalid_argument);

  SwapTestOracle shots(TargetPreparation::pure(mottonen_prepare(t)), Shots{4000}, 1);
  EXPECT_NEAR(shots.evaluate(c), overlap_fidelity(c, t), 0.05);
  EXPECT_THROW(SwapTestOracle(TargetPreparation::pure(mottonen_prepare(t)), Shots{0}), std::invalid_argument);
}

TEST(Oracle, CounterIsAtomic) {
  Rng rng(5);
  auto o = oracle_for(random_pure_state(1, rng));
  const auto c = random_pure_state(1, rng);
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&] {
      for (int i = 0; i < 50; ++i) o.evaluate(c);
    });
  }
  for (auto& th : pool) th.join();
  EXPECT_EQ(o.evaluations(), 200u);
}

TEST(Oracle, DensityCandidatesGiveHilbertSchmidt) {
  Rng rng(6);
  for (int i = 0; i < 5; ++i) {
    const auto target = random_mixed_target(2, 2, 0.7, rng);
    SwapTestOracle o(TargetPreparation::ensemble(ensemble_preparations(target)));
    const auto cand = decode_candidate_density(random_raw(32, rng));
    EXPECT_NEAR(o.evaluate(cand), hilbert_schmidt_overlap(target, cand), 1e-9);
    UhlmannOracle u(target);
    EXPECT_NEAR(u.evaluate(cand), uhlmann_fidelity(target, cand), 1e-12);
  }
}

TEST(Oracle, EnsembleValidation) {
  QuantumCircuit a(1), b(2);
  EXPECT_THROW(TargetPreparation::ensemble({{0.5, a}, {0.4, a}}), std::invalid_argument);
  EXPECT_THROW(TargetPreparation::ensemble({{0.5, a}, {0.5, b}}), std::invalid_argument);
  QuantumCircuit m(1);
  m.measure(0);
  EXPECT_THROW(TargetPreparation::pure(m), std::invalid_argument);
}

// ----------------------------------------------------------------- gradient

TEST(Gradient, ReachesZeroState) {
  auto o = oracle_for(StateVector::basis(1, 0));
  GradientConfig cfg;
  cfg.seed = 1;
  const auto rep = train_gradient(o, 1, cfg);
  EXPECT_GE(rep.best_fidelity, 0.99);
  EXPECT_LE(rep.epochs, 200u);
}

TEST(Gradient, ConstantOracleStopsAfterOneEpoch) {
  ConstantOracle o;
  const auto rep = train_gradient(o, 1, GradientConfig{});
  EXPECT_EQ(rep.epochs, 1u);
  EXPECT_DOUBLE_EQ(rep.best_fidelity, 1.0);
}

TEST(Gradient, FiniteDifferenceIsConsistent) {
  Rng rng(7);
  const auto target = random_pure_state(2, rng);
  auto o = oracle_for(target);
  GeneratorNetwork net(8, Rng(8));
  std::vector<double> z(256);
  for (auto& v : z) v = rng.uniform();
  const auto out = net.forward(z);
  RepresentationAdapter adapter(Representation::statevector, 2);
  Rng perturb(9);
  const auto g1 = finite_difference_loss_gradient(o, adapter, out, 1e-3, perturb);
  const auto g2 = finite_difference_loss_gradient(o, adapter, out, 1e-4, perturb);
  double max_abs = 0.0;
  for (double g : g2) max_abs = std::max(max_abs, std::abs(g));
  for (std::size_t k = 0; k < g1.size(); ++k) {
    EXPECT_NEAR(g1[k], g2[k], 1e-3 * max_abs) << "component " << k;
  }
}

TEST(Gradient, EvaluationAccountingIsExact) {
  for (std::size_t n = 1; n <= 2; ++n) {
    Rng rng(10 + n);
    auto o = oracle_for(random_pure_state(n, rng));
    GradientConfig cfg;
    cfg.epochs = 7;
    cfg.stop_threshold = 1.1;
    cfg.seed = n;
    const auto rep = train_gradient(o, n, cfg);
    const std::size_t d = dimension_of(n);
    EXPECT_EQ(rep.epochs, 7u);
    EXPECT_EQ(rep.oracle_evals, rep.epochs * (1 + 4 * d));
    EXPECT_EQ(o.evaluations(), rep.oracle_evals);
    EXPECT_EQ(rep.fidelity_trace.size(), rep.epochs);
  }
}

TEST(Gradient, DeterministicPerSeed) {
  Rng rng(12);
  const auto t = random_pure_state(1, rng);
  auto o1 = oracle_for(t);
  auto o2 = oracle_for(t);
  GradientConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 77;
  EXPECT_EQ(train_gradient(o1, 1, cfg).fidelity_trace, train_gradient(o2, 1, cfg).fidelity_trace);
}

// ------------------------------------------------------------------- qeswap

TEST(QESwap, ReachesZeroStateQuickly) {
  auto o = oracle_for(StateVector::basis(1, 0));
  EsConfig cfg;
  cfg.seed = 2;
  cfg.max_iter = 20;
  const auto rep = train_qeswap(o, 1, cfg);
  EXPECT_GE(rep.best_fidelity, 0.99);
}

TEST(QESwap, TwoQubitMeanIterations) {
  double total = 0.0;
  for (int t = 0; t < 20; ++t) {
    Rng rng(100 + t);
    const auto target = random_pure_state(2, rng);
    SpyOracle o{target};
    EsConfig cfg;
    cfg.seed = 200 + t;
    cfg.threshold = 0.99;
    const auto rep = train_qeswap(o, 2, cfg);
    ASSERT_GE(rep.best_fidelity, 0.99);
    total += static_cast<double>(rep.epochs);
  }
  EXPECT_LE(total / 20.0, 21.0);
}

TEST(QESwap, ZeroSpreadLeavesParametersUnchanged) {
  std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  const auto before = w;
  const std::vector<std::vector<double>> noise(5, std::vector<double>{1.0, -1.0, 2.0, 0.5});
  const std::vector<double> same(5, 0.42);
  es_update(w, noise, same, 0.05, 0.1);
  EXPECT_EQ(w, before);
}

TEST(QESwap, UpdateIsTranslationInvariant) {
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::vector<double>> noise(50, std::vector<double>(8));
    for (auto& z : noise) {
      for (auto& v : z) v = rng.normal();
    }
    std::vector<double> f(50);
    for (auto& v : f) v = rng.uniform();
    std::vector<double> w1 = random_raw(8, rng);
    std::vector<double> w2 = w1;
    es_update(w1, noise, f, 0.05, 0.1);
    const double c = 10.0 * rng.normal();
    for (auto& v : f) v += c;
    es_update(w2, noise, f, 0.05, 0.1);
    for (std::size_t k = 0; k < w1.size(); ++k) EXPECT_NEAR(w1[k], w2[k], 1e-12);
  }
}

TEST(QESwap, UpdateMatchesFormula) {
  std::vector<double> w{0.0, 0.0};
  const std::vector<std::vector<double>> z{{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<double> f{1.0, 0.0};  // mean 0.5, population std 0.5, A = (+1, -1)
  es_update(w, z, f, 0.05, 0.1);
  EXPECT_NEAR(w[0], 0.05 / (2 * 0.1), 1e-15);
  EXPECT_NEAR(w[1], -0.05 / (2 * 0.1), 1e-15);
}

TEST(QESwap, EvaluationAccountingIsExact) {
  Rng rng(14);
  auto o = oracle_for(random_pure_state(2, rng));
  EsConfig cfg;
  cfg.max_iter = 6;
  cfg.threshold = 1.1;
  cfg.population = 17;
  const auto rep = train_qeswap(o, 2, cfg);
  EXPECT_EQ(rep.epochs, 6u);
  EXPECT_EQ(rep.oracle_evals, 6u * 17u);
  EXPECT_EQ(o.evaluations(), rep.oracle_evals);
}

TEST(QESwap, RejectsBadConfig) {
  SpyOracle o{StateVector::zero(1)};
  EsConfig cfg;
  cfg.population = 1;
  EXPECT_THROW(train_qeswap(o, 1, cfg), std::invalid_argument);
  cfg = EsConfig{};
  cfg.sigma = 0.0;
  EXPECT_THROW(train_qeswap(o, 1, cfg), std::invalid_argument);
  auto sw = oracle_for(StateVector::zero(2));
  EXPECT_THROW(train_qeswap(sw, 1, EsConfig{}), std::invalid_argument);
}

TEST(QESwap, NoiselessConvergenceOnFiftyTargets) {
  for (std::size_t n = 1; n <= 3; ++n) {
    int ok = 0;
    for (int t = 0; t < 50; ++t) {
      Rng rng(1000 * n + t);
      SpyOracle o{random_pure_state(n, rng)};
      EsConfig cfg;
      cfg.seed = 5000 * n + t;
      cfg.threshold = 0.99;
      ok += train_qeswap(o, n, cfg).best_fidelity >= 0.99;
    }
    EXPECT_GE(ok, 45) << "n = " << n;
  }
}

TEST(Reports, RunningBestIsMonotoneAndJsonKeysExact) {
  Rng rng(15);
  auto o = oracle_for(random_pure_state(2, rng));
  EsConfig cfg;
  cfg.max_iter = 15;
  const auto rep = train_qeswap(o, 2, cfg);
  const auto best = rep.running_best();
  for (std::size_t i = 1; i < best.size(); ++i) EXPECT_GE(best[i], best[i - 1]);
  EXPECT_DOUBLE_EQ(rep.best_fidelity, best.back());
  const auto j = report_to_json(rep);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"method", "representation", "n_qubits", "best_fidelity", "epochs",
                                            "oracle_evals", "fidelity_trace", "wall_time_s", "mixed_state_flag",
                                            "seed"}));
}

// -------------------------------------------------------------- reconstruct

TEST(Reconstruct, PlusStateWithQESwap) {
  auto o = oracle_for(StateVector::from_amplitudes({1.0, 1.0}));
  EstimatorConfig cfg;
  cfg.es.seed = 3;
  const auto rep = reconstruct(Method::qeswap, Representation::statevector, o, 1, cfg);
  EXPECT_GE(rep.best_fidelity, 0.99);
  EXPECT_FALSE(rep.mixed_state_flag);
}

TEST(Reconstruct, UnitaryZeroState) {
  auto o = oracle_for(StateVector::basis(1, 0));
  EstimatorConfig cfg;
  cfg.es.seed = 4;
  cfg.es.max_iter = 40;
  const auto rep = reconstruct(Method::qeswap, Representation::unitary, o, 1, cfg);
  EXPECT_GE(rep.best_fidelity, 0.99);
  ASSERT_TRUE(rep.best_candidate);
  EXPECT_TRUE(std::holds_alternative<UnitaryMatrix>(*rep.best_candidate));
  EXPECT_EQ(rep.oracle_evals, rep.epochs * cfg.es.population);
}

TEST(Reconstruct, UnitaryGradientAccounting) {
  auto o = oracle_for(StateVector::basis(1, 1));
  EstimatorConfig cfg;
  cfg.gradient.epochs = 3;
  cfg.gradient.stop_threshold = 1.1;
  const auto rep = reconstruct(Method::gradient, Representation::unitary, o, 1, cfg);
  EXPECT_EQ(rep.oracle_evals, 3u * (1 + 2 * raw_length(Representation::unitary, 1)));
}

TEST(Reconstruct, DensityGradientPlateausOnMixedTarget) {
  Rng rng(16);
  const auto target = random_mixed_target(2, 2, 0.7, rng);
  SwapTestOracle o(TargetPreparation::ensemble(ensemble_preparations(target)));
  EstimatorConfig cfg;
  cfg.gradient.seed = 5;
  cfg.gradient.epochs = 200;
  const auto rep = reconstruct(Method::gradient, Representation::density, o, 2, cfg);
  EXPECT_TRUE(rep.mixed_state_flag);
  double best_uhlmann = 0.0;
  for (const auto& c : rep.epoch_candidates) {
    best_uhlmann = std::max(best_uhlmann, uhlmann_fidelity(target, candidate_density(c)));
  }
  EXPECT_LT(best_uhlmann, 0.95);
}

TEST(Reconstruct, DensityNeedsDensityOracle) {
  SpyOracle o{StateVector::zero(1)};
  EXPECT_THROW(reconstruct(Method::qeswap, Representation::density, o, 1, EstimatorConfig{}), std::invalid_argument);
}
