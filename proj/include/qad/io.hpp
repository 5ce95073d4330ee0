#pragma once

// Persistence: checksummed binary containers for cached intermediates, CSV
// emission with a commented header, and the run manifest.

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qad/floquet_engine.hpp"
#include "qad/quartic_oscillator.hpp"

namespace qad {

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);

/// Container layout: 8-byte magic, u64 metadata length, metadata JSON,
/// u64 payload length, payload, SHA-256 over metadata and payload.
struct Container {
  nlohmann::json metadata;
  std::string payload;
};

void write_container(const std::string& path, const std::string& magic, const Container& c);

enum class ContainerStatus { Ok, Missing, Corrupt };

/// Reads and verifies a container. `error` receives the reason for Corrupt.
ContainerStatus read_container(const std::string& path, const std::string& magic, Container& out,
                               std::string* error = nullptr);

class ByteWriter {
 public:
  void put(double v) { raw(&v, sizeof v); }
  void put(std::int64_t v) { raw(&v, sizeof v); }
  void put(const Eigen::VectorXd& v);
  void put(const Eigen::MatrixXd& m);
  void put(const Eigen::VectorXcd& v);
  void put(const Eigen::MatrixXcd& m);
  void put(const std::vector<double>& v);
  std::string take() { return std::move(bytes_); }

 private:
  void raw(const void* p, std::size_t n) { bytes_.append(static_cast<const char*>(p), n); }
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}
  double real();
  std::int64_t integer();
  Eigen::VectorXd vector();
  Eigen::MatrixXd matrix();
  Eigen::VectorXcd complex_vector();
  Eigen::MatrixXcd complex_matrix();
  std::vector<double> doubles();
  bool done() const { return at_ == bytes_.size(); }

 private:
  void raw(void* p, std::size_t n);
  const std::string& bytes_;
  std::size_t at_ = 0;
};

Container encode_spectrum(const OscillatorSpectrum& s, const std::string& key);
OscillatorSpectrum decode_spectrum(const Container& c);
Container encode_operator(const FloquetOperator& op, const std::string& key);
FloquetOperator decode_operator(const Container& c);

/// Cached spectrum when the file exists, verifies and carries `key`; otherwise
/// solves, stores and returns it. Corrupt files are reported on stderr and
/// recomputed.
OscillatorSpectrum cached_spectrum(const std::string& cache_dir, const std::string& key,
                                   const OscillatorParams& params, bool* hit = nullptr);

std::string spectrum_cache_path(const std::string& cache_dir, const std::string& key);
std::string operator_cache_path(const std::string& cache_dir, const std::string& key);
std::optional<FloquetOperator> load_operator(const std::string& path, const std::string& key);
void store_operator(const std::string& path, const FloquetOperator& op, const std::string& key);

void ensure_directory(const std::string& dir);

/// CSV with a commented header carrying the config hash and resolved config.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& title, const std::string& hash,
            const nlohmann::json& config, const std::vector<std::string>& columns);
  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(int v);
  CsvWriter& operator<<(long v);
  CsvWriter& operator<<(const std::string& v);
  void end_row();
  const std::string& path() const { return path_; }

 private:
  void separator();
  std::string path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
  std::size_t filled_ = 0;
};

std::string format_number(double v);

/// Manifest of an output directory: config hash, produced files with
/// checksums and per-point scan records.
class RunManifest {
 public:
  RunManifest(std::string path, std::string hash);
  /// Loads an existing manifest; a different config hash starts a fresh one.
  bool load();
  void save() const;

  void record_file(const std::string& path);
  bool point_done(const std::string& id) const;
  const nlohmann::json* point(const std::string& id) const;
  void record_point(const std::string& id, const nlohmann::json& record);
  const nlohmann::json& data() const { return data_; }

 private:
  std::string path_;
  nlohmann::json data_;
};

}  // namespace qad
