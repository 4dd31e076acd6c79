#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "qsnap/harness/studies.hpp"
#include "qsnap/snapshot.hpp"

using namespace qsnap;
namespace fs = std::filesystem;

namespace {

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("qsnap_store_" + std::to_string(std::random_device{}()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

void flip_byte(const fs::path& p, std::size_t offset) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c;
  f.read(&c, 1);
  c = static_cast<char>(c ^ 0x01);
  f.seekp(static_cast<std::streamoff>(offset));
  f.write(&c, 1);
}

}  // namespace

TEST(SnapshotBody, GoldenLayout) {
  // |0>: magic, n = 1 little endian, then (1, 0, 0, 0) as doubles.
  const auto body = encode_snapshot_body(make_snapshot_record(StateVector::basis(1, 0)));
  ASSERT_EQ(body.size(), 12u + 32u);
  const std::vector<unsigned char> head{'Q', 'S', 'N', 'A', 'P', 0, 0, 1, 1, 0, 0, 0};
  EXPECT_TRUE(std::equal(head.begin(), head.end(), body.begin()));
  const std::vector<unsigned char> one{0, 0, 0, 0, 0, 0, 0xf0, 0x3f};
  EXPECT_TRUE(std::equal(one.begin(), one.end(), body.begin() + 12));
  for (std::size_t i = 20; i < body.size(); ++i) EXPECT_EQ(body[i], 0) << i;
}

TEST(SnapshotBody, Sha256KnownAnswer) {
  const std::string abc = "abc";
  EXPECT_EQ(sha256_hex(std::span(reinterpret_cast<const unsigned char*>(abc.data()), abc.size())),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(SnapshotBody, RoundTripIsBitExact) {
  Rng rng(1);
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto psi = random_pure_state(n, rng);
    const auto body = encode_snapshot_body(make_snapshot_record(psi));
    std::size_t m = 0;
    const auto amps = decode_snapshot_body(body, m);
    EXPECT_EQ(m, n);
    for (std::size_t k = 0; k < psi.dim(); ++k) EXPECT_EQ(amps[k], psi[k]);
  }
  std::vector<unsigned char> junk{1, 2, 3};
  std::size_t m = 0;
  EXPECT_THROW(decode_snapshot_body(junk, m), integrity_error);
}

TEST(SnapshotRecord, RejectsUnnormalized) {
  SnapshotRecord r;
  r.n_qubits = 1;
  r.amplitudes = {Complex(0.5), Complex(0.0)};
  EXPECT_THROW(r.validate(), std::invalid_argument);
  r.amplitudes = {Complex(1.0)};
  EXPECT_THROW(r.validate(), std::invalid_argument);
}

TEST_F(StoreTest, DepositWithdrawRoundTrip) {
  SnapshotStore store(dir_);
  Rng rng(2);
  const auto psi = random_pure_state(3, rng);
  const auto id = store.deposit(make_snapshot_record(psi, {.method = "qeswap", .label = "x"}));
  EXPECT_EQ(id.size(), 64u);
  const auto w = store.withdraw(id);
  for (std::size_t k = 0; k < psi.dim(); ++k) EXPECT_EQ(w.state[k], psi[k]);
  EXPECT_NEAR(overlap_fidelity(execute_statevector(w.circuit), psi), 1.0, 1e-9);
  EXPECT_EQ(w.record.metadata.label, "x");
  EXPECT_EQ(w.record.metadata.method, "qeswap");
  EXPECT_FALSE(w.record.metadata.created_at.empty());
  EXPECT_EQ(store.read_body(id), encode_snapshot_body(make_snapshot_record(psi)));
}

TEST_F(StoreTest, DepositIsIdempotent) {
  SnapshotStore store(dir_);
  const auto plus = StateVector::from_amplitudes({1.0, 1.0});
  const auto a = store.deposit(make_snapshot_record(plus, {.label = "first"}));
  const auto b = store.deposit(make_snapshot_record(plus, {.label = "second"}));
  EXPECT_EQ(a, b);
  EXPECT_EQ(store.list().size(), 1u);
  EXPECT_EQ(store.withdraw(a).record.metadata.label, "first");
  const auto w = store.withdraw(a);
  EXPECT_NEAR(overlap_fidelity(execute_statevector(w.circuit), plus), 1.0, 1e-9);
}

TEST_F(StoreTest, RejectsUnnormalizedDeposit) {
  SnapshotStore store(dir_);
  SnapshotRecord r;
  r.n_qubits = 1;
  r.amplitudes = {Complex(0.5), Complex(0.0)};
  EXPECT_THROW(store.deposit(r), std::invalid_argument);
  EXPECT_TRUE(store.list().empty());
}

TEST_F(StoreTest, DetectsEveryMutatedByte) {
  SnapshotStore store(dir_);
  Rng rng(3);
  const auto id = store.deposit(make_snapshot_record(random_pure_state(1, rng)));
  const auto size = fs::file_size(store.body_path(id));
  for (std::size_t off = 0; off < size; ++off) {
    flip_byte(store.body_path(id), off);
    EXPECT_THROW(store.withdraw(id), integrity_error) << "offset " << off;
    flip_byte(store.body_path(id), off);
  }
  EXPECT_NO_THROW(store.withdraw(id));
}

TEST_F(StoreTest, UnknownAndMalformedIds) {
  SnapshotStore store(dir_);
  EXPECT_THROW(store.withdraw(std::string(64, 'a')), not_found_error);
  EXPECT_THROW(store.withdraw("../etc/passwd"), not_found_error);
  EXPECT_THROW(store.withdraw(""), not_found_error);
}

TEST_F(StoreTest, ListIsSorted) {
  SnapshotStore store(dir_);
  Rng rng(4);
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(store.deposit(make_snapshot_record(random_pure_state(2, rng))));
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(store.list(), ids);
  std::ifstream idx(dir_ / "index.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(idx, l);) ++lines;
  EXPECT_EQ(lines, 6u);
}

TEST_F(StoreTest, ReconstructionSurvivesStorage) {
  // The withdrawn preparation must score exactly like the estimator's best
  // candidate against the same target.
  Rng rng(5);
  const auto target = random_pure_state(3, rng);
  SwapTestOracle oracle(TargetPreparation::pure(mottonen_prepare(target)));
  EsConfig cfg;
  cfg.seed = 6;
  cfg.max_iter = 30;
  const auto rep = train_qeswap(oracle, 3, cfg);
  SnapshotStore store(dir_);
  const auto id = store.deposit(make_snapshot_record(rep, "recon"));
  const auto w = store.withdraw(id);
  SwapTestOracle check(TargetPreparation::pure(mottonen_prepare(target)));
  EXPECT_NEAR(check.evaluate(execute_statevector(w.circuit)), rep.best_fidelity, 1e-6);
  EXPECT_NEAR(w.record.metadata.best_fidelity, rep.best_fidelity, 0.0);
  EXPECT_EQ(w.record.metadata.representation, "statevector");
}

TEST_F(StoreTest, MixedCandidatesAreRefused) {
  ReconstructionReport rep;
  rep.best_candidate = Candidate(DensityMatrix::maximally_mixed(1));
  EXPECT_THROW(make_snapshot_record(rep), std::invalid_argument);
}
