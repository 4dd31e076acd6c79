#pragma once

// Content-addressed classical store for reconstructed pure states.
//
// Body layout (all little-endian):
//   8 bytes  magic "QSNAP\0\0\1"
//   u32      n_qubits
//   f64[2^(n+1)] amplitudes, interleaved re/im
// Identifier: lowercase hex SHA-256 of the body. Each record lives as
// <id>.qsnap plus a <id>.json metadata sidecar; index.jsonl gets one line per
// new record.

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "qsnap/circuit.hpp"
#include "qsnap/errors.hpp"
#include "qsnap/estimators.hpp"
#include "qsnap/state.hpp"
#include "qsnap/synthesis.hpp"

namespace qsnap {

inline constexpr std::uint32_t kSnapshotFormatVersion = 1;
inline constexpr std::array<unsigned char, 8> kSnapshotMagic{'Q', 'S', 'N', 'A', 'P', 0, 0, 1};

struct SnapshotMetadata {
  std::string method;
  std::string representation;
  double best_fidelity = 0.0;
  std::size_t epochs = 0;
  std::string created_at;  // filled on deposit when empty
  std::uint64_t seed = 0;
  std::string label;
};

struct SnapshotRecord {
  std::uint32_t format_version = kSnapshotFormatVersion;
  std::size_t n_qubits = 0;
  std::vector<Complex> amplitudes;
  SnapshotMetadata metadata;

  /// Throws invalid_argument unless the record can be stored.
  void validate() const {
    if (format_version != kSnapshotFormatVersion) throw std::invalid_argument("unsupported snapshot format_version");
    if (n_qubits == 0 || n_qubits > 30) throw std::invalid_argument("snapshot n_qubits out of range");
    if (amplitudes.size() != dimension_of(n_qubits)) throw std::invalid_argument("snapshot amplitude count mismatch");
    double s = 0.0;
    for (const auto& a : amplitudes) {
      if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) throw std::invalid_argument("non-finite amplitude");
      s += std::norm(a);
    }
    if (std::abs(std::sqrt(s) - 1.0) > 1e-9) throw std::invalid_argument("snapshot amplitudes are not unit norm");
  }
};

inline SnapshotRecord make_snapshot_record(const StateVector& psi, SnapshotMetadata meta = {}) {
  SnapshotRecord r;
  r.n_qubits = psi.n_qubits();
  r.amplitudes.assign(psi.amplitudes().begin(), psi.amplitudes().end());
  r.metadata = std::move(meta);
  return r;
}

/// Record for a reconstruction's best candidate. Unitary candidates store
/// U|0...0>; mixed density candidates are rejected.
inline SnapshotRecord make_snapshot_record(const ReconstructionReport& rep, std::string label = {}) {
  if (!rep.best_candidate) throw std::invalid_argument("report has no candidate to store");
  if (const auto* rho = std::get_if<DensityMatrix>(&*rep.best_candidate)) {
    const double purity = rho->entries().cwiseAbs2().sum();
    if (purity < 1.0 - 1e-9) throw std::invalid_argument("only pure states can be stored");
  }
  SnapshotMetadata meta;
  meta.method = to_string(rep.method);
  meta.representation = to_string(rep.representation);
  meta.best_fidelity = rep.best_fidelity;
  meta.epochs = rep.epochs;
  meta.seed = rep.seed;
  meta.label = label.empty() ? rep.label : std::move(label);
  return make_snapshot_record(induced_state(*rep.best_candidate), std::move(meta));
}

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T v) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.insert(out.end(), bytes.begin(), bytes.end());
}

template <class T>
T get_le(const unsigned char* p) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

inline std::string utc_now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw storage_error("cannot open " + p.string());
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw storage_error("read failed: " + p.string());
  return data;
}

/// Write to a sibling temp file, then rename over the destination.
inline void atomic_write(const std::filesystem::path& dest, const void* data, std::size_t size) {
  std::random_device rd;
  const auto tmp = dest.parent_path() / (dest.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw storage_error("cannot create " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    out.flush();
    if (!out) throw storage_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, dest, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw storage_error("cannot rename into " + dest.string());
  }
}

inline void atomic_write(const std::filesystem::path& dest, const std::string& text) {
  atomic_write(dest, text.data(), text.size());
}

}  // namespace detail

inline std::vector<unsigned char> encode_snapshot_body(const SnapshotRecord& r) {
  r.validate();
  std::vector<unsigned char> body(kSnapshotMagic.begin(), kSnapshotMagic.end());
  detail::put_le<std::uint32_t>(body, static_cast<std::uint32_t>(r.n_qubits));
  for (const auto& a : r.amplitudes) {
    detail::put_le<double>(body, a.real());
    detail::put_le<double>(body, a.imag());
  }
  return body;
}

/// Parses a body; the result is not normalized, so bytes round-trip exactly.
inline std::vector<Complex> decode_snapshot_body(std::span<const unsigned char> body, std::size_t& n_qubits) {
  if (body.size() < 12 || !std::equal(kSnapshotMagic.begin(), kSnapshotMagic.end(), body.begin())) {
    throw integrity_error("snapshot body has a bad header");
  }
  const auto n = detail::get_le<std::uint32_t>(body.data() + 8);
  if (n == 0 || n > 30 || body.size() != 12 + 16 * dimension_of(n)) {
    throw integrity_error("snapshot body has an inconsistent size");
  }
  n_qubits = n;
  std::vector<Complex> amps(dimension_of(n));
  for (std::size_t k = 0; k < amps.size(); ++k) {
    const unsigned char* p = body.data() + 12 + 16 * k;
    amps[k] = Complex(detail::get_le<double>(p), detail::get_le<double>(p + 8));
  }
  return amps;
}

inline std::string sha256_hex(std::span<const unsigned char> data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

inline nlohmann::ordered_json metadata_to_json(const SnapshotRecord& r) {
  nlohmann::ordered_json j;
  j["format_version"] = r.format_version;
  j["n_qubits"] = r.n_qubits;
  j["method"] = r.metadata.method;
  j["representation"] = r.metadata.representation;
  j["best_fidelity"] = r.metadata.best_fidelity;
  j["epochs"] = r.metadata.epochs;
  j["created_at"] = r.metadata.created_at;
  j["seed"] = r.metadata.seed;
  j["label"] = r.metadata.label;
  return j;
}

struct Withdrawal {
  StateVector state;
  QuantumCircuit circuit;
  SnapshotRecord record;
};

class SnapshotStore {
 public:
  explicit SnapshotStore(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec || !std::filesystem::is_directory(root_)) throw storage_error("cannot use store directory " + root_.string());
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  /// Stores the record and returns its identifier. Re-depositing the same
  /// body is a no-op that returns the same identifier.
  std::string deposit(SnapshotRecord record) const {
    const auto body = encode_snapshot_body(record);
    const std::string id = sha256_hex(body);
    if (std::filesystem::exists(body_path(id))) return id;
    if (record.metadata.created_at.empty()) record.metadata.created_at = detail::utc_now_iso8601();
    const auto meta = metadata_to_json(record);
    detail::atomic_write(meta_path(id), meta.dump(2) + "\n");
    detail::atomic_write(body_path(id), body.data(), body.size());

    nlohmann::ordered_json line;
    line["id"] = id;
    line["n_qubits"] = record.n_qubits;
    line["label"] = record.metadata.label;
    line["created_at"] = record.metadata.created_at;
    std::ofstream idx(root_ / "index.jsonl", std::ios::app);
    if (!idx) throw storage_error("cannot append to index.jsonl");
    idx << line.dump() << '\n';
    if (!idx) throw storage_error("cannot append to index.jsonl");
    return id;
  }

  std::vector<unsigned char> read_body(const std::string& id) const {
    if (!valid_id(id)) throw not_found_error("malformed snapshot identifier '" + id + "'");
    if (!std::filesystem::exists(body_path(id))) throw not_found_error("no snapshot " + id);
    return detail::read_bytes(body_path(id));
  }

  /// Verifies the body hash, decodes it, and synthesizes a preparation.
  Withdrawal withdraw(const std::string& id) const {
    const auto body = read_body(id);
    if (sha256_hex(body) != id) throw integrity_error("snapshot " + id + " failed its hash check");
    SnapshotRecord rec;
    rec.amplitudes = decode_snapshot_body(body, rec.n_qubits);
    if (std::filesystem::exists(meta_path(id))) {
      try {
        const auto text = detail::read_bytes(meta_path(id));
        const auto j = nlohmann::json::parse(text.begin(), text.end());
        rec.format_version = j.at("format_version").get<std::uint32_t>();
        rec.metadata.method = j.value("method", "");
        rec.metadata.representation = j.value("representation", "");
        rec.metadata.best_fidelity = j.value("best_fidelity", 0.0);
        rec.metadata.epochs = j.value("epochs", std::size_t{0});
        rec.metadata.created_at = j.value("created_at", "");
        rec.metadata.seed = j.value("seed", std::uint64_t{0});
        rec.metadata.label = j.value("label", "");
      } catch (const nlohmann::json::exception& e) {
        throw integrity_error("snapshot " + id + " has unreadable metadata: " + e.what());
      }
    }
    try {
      rec.validate();
    } catch (const std::invalid_argument& e) {
      throw integrity_error("snapshot " + id + ": " + e.what());
    }
    StateVector psi = StateVector::from_normalized(rec.amplitudes, 1e-9);
    QuantumCircuit prep = mottonen_prepare(psi);
    return {std::move(psi), std::move(prep), std::move(rec)};
  }

  /// Stored identifiers in ascending order.
  std::vector<std::string> list() const {
    std::vector<std::string> ids;
    for (const auto& e : std::filesystem::directory_iterator(root_)) {
      if (e.path().extension() == ".qsnap") {
        const std::string id = e.path().stem().string();
        if (valid_id(id)) ids.push_back(id);
      }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  std::filesystem::path body_path(const std::string& id) const { return root_ / (id + ".qsnap"); }
  std::filesystem::path meta_path(const std::string& id) const { return root_ / (id + ".json"); }

 private:
  static bool valid_id(const std::string& id) {
    return id.size() == 64 && std::all_of(id.begin(), id.end(), [](char c) {
             return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
  }

  std::filesystem::path root_;
};

}  // namespace qsnap
