#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qsnap/state.hpp"

using namespace qsnap;

namespace {

StateVector ket(std::vector<Complex> v) { return StateVector::from_amplitudes(std::move(v)); }

StateVector plus() { return ket({1.0, 1.0}); }

// Dense |psi><psi| followed by explicit index summation over traced qubits.
Matrix dense_partial_trace(const StateVector& psi, const std::vector<std::size_t>& keep) {
  const Matrix rho = psi.to_eigen() * psi.to_eigen().adjoint();
  const std::size_t dk = std::size_t{1} << keep.size();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
  auto sub = [&](std::size_t i) {
    std::size_t r = 0;
    for (std::size_t k = 0; k < keep.size(); ++k) r |= ((i >> keep[k]) & 1U) << k;
    return r;
  };
  std::size_t keep_mask = 0;
  for (auto q : keep) keep_mask |= std::size_t{1} << q;
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    for (std::size_t j = 0; j < psi.dim(); ++j) {
      if ((i & ~keep_mask) != (j & ~keep_mask)) continue;
      out(static_cast<Eigen::Index>(sub(i)), static_cast<Eigen::Index>(sub(j))) +=
          rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

}  // namespace

TEST(StateVector, NormalizesAndRejectsBadInput) {
  const auto s = ket({3.0, 4.0});
  EXPECT_NEAR(s[0].real(), 0.6, 1e-15);
  EXPECT_NEAR(s[1].real(), 0.8, 1e-15);
  EXPECT_THROW(ket({0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(ket({1.0, 0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(ket({std::nan(""), 1.0}), std::invalid_argument);
}

TEST(RandomPureState, UnitNormAndDeterministic) {
  Rng a(7), b(7);
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto x = random_pure_state(n, a);
    const auto y = random_pure_state(n, b);
    EXPECT_NEAR(x.norm(), 1.0, 1e-12);
    for (std::size_t k = 0; k < x.dim(); ++k) EXPECT_EQ(x[k], y[k]);
  }
  Rng r(1);
  EXPECT_THROW(random_pure_state(0, r), std::invalid_argument);
}

TEST(RandomPureState, MeanPopulationMatchesHaar) {
  Rng rng(11);
  double sum = 0.0;
  const int samples = 10000;
  for (int i = 0; i < samples; ++i) sum += std::norm(random_pure_state(2, rng)[0]);
  EXPECT_NEAR(sum / samples, 0.25, 0.01);
}

TEST(Fidelity, OverlapExamples) {
  const auto zero = StateVector::basis(1, 0), one = StateVector::basis(1, 1);
  EXPECT_DOUBLE_EQ(overlap_fidelity(zero, zero), 1.0);
  EXPECT_DOUBLE_EQ(overlap_fidelity(zero, one), 0.0);
  EXPECT_NEAR(overlap_fidelity(zero, plus()), 0.5, 1e-15);
  EXPECT_THROW(overlap_fidelity(zero, StateVector::zero(2)), std::invalid_argument);
}

TEST(Fidelity, GlobalPhaseInvariance) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_pure_state(2, rng), b = random_pure_state(2, rng);
    const double theta = 6.0 * rng.uniform();
    EXPECT_NEAR(overlap_fidelity(a.with_global_phase(theta), b), overlap_fidelity(a, b), 1e-15);
  }
}

TEST(Fidelity, MixedExamples) {
  const auto rho0 = DensityMatrix::pure(StateVector::basis(1, 0));
  const auto mm = DensityMatrix::maximally_mixed(1);
  EXPECT_NEAR(hilbert_schmidt_overlap(rho0, rho0), 1.0, 1e-12);
  EXPECT_NEAR(hilbert_schmidt_overlap(mm, mm), 0.5, 1e-12);
  EXPECT_NEAR(hilbert_schmidt_overlap(rho0, DensityMatrix::pure(plus())), 0.5, 1e-12);
  EXPECT_NEAR(uhlmann_fidelity(mm, mm), 1.0, 1e-9);
  EXPECT_NEAR(uhlmann_fidelity(rho0, mm), 0.5, 1e-9);
  EXPECT_THROW(hilbert_schmidt_overlap(rho0, DensityMatrix::maximally_mixed(2)), std::invalid_argument);
}

TEST(Fidelity, PureStateConsistency) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + i % 3;
    const auto a = random_pure_state(n, rng), b = random_pure_state(n, rng);
    const double f = overlap_fidelity(a, b);
    const auto ra = DensityMatrix::pure(a), rb = DensityMatrix::pure(b);
    EXPECT_NEAR(hilbert_schmidt_overlap(ra, rb), f, 1e-9);
    EXPECT_NEAR(uhlmann_fidelity(ra, rb), f, 1e-8);
    EXPECT_NEAR(uhlmann_fidelity(ra, rb), uhlmann_fidelity(rb, ra), 1e-8);
  }
}

TEST(DensityMatrix, RejectsInvalidMatrices) {
  Matrix m = Matrix::Identity(2, 2);
  EXPECT_THROW(DensityMatrix{m}, std::invalid_argument);  // trace 2
  Matrix nh(2, 2);
  nh << 0.5, 0.1, 0.0, 0.5;
  EXPECT_THROW(DensityMatrix{nh}, std::invalid_argument);
  Matrix neg(2, 2);
  neg << 1.5, 0.0, 0.0, -0.5;
  EXPECT_THROW(DensityMatrix{neg}, std::invalid_argument);
}

TEST(UnitaryMatrix, RejectsNonUnitary) {
  Matrix m = Matrix::Identity(2, 2) * 2.0;
  EXPECT_THROW(UnitaryMatrix{m}, std::invalid_argument);
  EXPECT_NO_THROW(UnitaryMatrix{Matrix::Identity(4, 4)});
}

TEST(PartialTrace, Examples) {
  // |0> on qubit 1 (MSB), |+> on qubit 0.
  const auto prod = ket({1.0, 1.0, 0.0, 0.0});
  const auto r = partial_trace(prod, {0});
  EXPECT_LT((r.entries() - DensityMatrix::pure(plus()).entries()).cwiseAbs().maxCoeff(), 1e-12);

  const auto bell = ket({1.0, 0.0, 0.0, 1.0});
  const auto rb = partial_trace(bell, {0});
  EXPECT_LT((rb.entries() - DensityMatrix::maximally_mixed(1).entries()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(von_neumann_entropy(rb), 1.0, 1e-9);

  const std::vector<std::size_t> none;
  EXPECT_THROW(partial_trace(bell, std::span<const std::size_t>(none)), std::invalid_argument);
  EXPECT_THROW(partial_trace(bell, {0, 1}), std::invalid_argument);
  EXPECT_THROW(partial_trace(bell, {2}), std::invalid_argument);
}

TEST(PartialTrace, MatchesDenseReference) {
  Rng rng(9);
  const std::vector<std::vector<std::size_t>> keeps{{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}};
  for (int i = 0; i < 20; ++i) {
    const auto psi = random_pure_state(3, rng);
    for (const auto& k : keeps) {
      const auto got = partial_trace(psi, k);
      EXPECT_LT((got.entries() - dense_partial_trace(psi, k)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_NEAR(got.entries().trace().real(), 1.0, 1e-10);
      const double s = von_neumann_entropy(got);
      EXPECT_GE(s, -1e-12);
      EXPECT_LE(s, static_cast<double>(k.size()) + 1e-12);
    }
  }
}

TEST(Entropy, Examples) {
  Rng rng(2);
  EXPECT_NEAR(von_neumann_entropy(DensityMatrix::pure(random_pure_state(3, rng))), 0.0, 1e-9);
  EXPECT_NEAR(von_neumann_entropy(DensityMatrix::maximally_mixed(1)), 1.0, 1e-12);
  EXPECT_NEAR(von_neumann_entropy(DensityMatrix::maximally_mixed(2)), 2.0, 1e-12);
}

TEST(Entropy, SchmidtSymmetry) {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto psi = random_pure_state(4, rng);
    EXPECT_NEAR(von_neumann_entropy(partial_trace(psi, {0, 1})), von_neumann_entropy(partial_trace(psi, {2, 3})), 1e-9);
    EXPECT_NEAR(von_neumann_entropy(partial_trace(psi, {0})), von_neumann_entropy(partial_trace(psi, {1, 2, 3})), 1e-9);
  }
}

TEST(Entropy, HalfChainConvention) {
  EXPECT_EQ(half_chain(1), std::vector<std::size_t>{0});
  EXPECT_EQ(half_chain(3), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(half_chain(4), (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(half_chain_entropy(plus()), 0.0);
  EXPECT_NEAR(half_chain_entropy(ket({1.0, 0.0, 0.0, 1.0})), 1.0, 1e-9);
}

TEST(Rng, SplitIsPureAndStreamsDiffer) {
  Rng r(42);
  const auto a = r.split(3).next_u64();
  r.next_u64();
  EXPECT_EQ(r.split(3).next_u64(), a);
  EXPECT_NE(r.split(4).next_u64(), a);
}
