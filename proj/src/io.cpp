#include "qad/io.hpp"

#include <chrono>
#include <cstring>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <openssl/evp.h>

#include "qad/errors.hpp"

namespace qad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string to_hex(const unsigned char* data, unsigned int n) {
  static const char* digits = "0123456789abcdef";
  std::string out(2 * n, '0');
  for (unsigned int i = 0; i < n; ++i) {
    out[2 * i] = digits[data[i] >> 4];
    out[2 * i + 1] = digits[data[i] & 15];
  }
  return out;
}

std::string digest(const std::string& a, const std::string& b = {}) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, a.data(), a.size());
  EVP_DigestUpdate(ctx, b.data(), b.size());
  EVP_DigestFinal_ex(ctx, md, &n);
  EVP_MD_CTX_free(ctx);
  return std::string(reinterpret_cast<char*>(md), n);
}

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

bool get_u64(std::istream& in, std::uint64_t& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), 8));
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  const std::string d = digest(bytes);
  return to_hex(reinterpret_cast<const unsigned char*>(d.data()), d.size());
}

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void write_container(const std::string& path, const std::string& magic, const Container& c) {
  require(magic.size() == 8, "container magic must be 8 bytes");
  const std::string meta = c.metadata.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp + "'");
    out.write(magic.data(), 8);
    put_u64(out, meta.size());
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put_u64(out, c.payload.size());
    out.write(c.payload.data(), static_cast<std::streamsize>(c.payload.size()));
    const std::string d = digest(meta, c.payload);
    out.write(d.data(), static_cast<std::streamsize>(d.size()));
    if (!out) throw NumericalError("short write on '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

ContainerStatus read_container(const std::string& path, const std::string& magic, Container& out,
                               std::string* error) {
  auto fail = [&](const std::string& why) {
    if (error) *error = why;
    return ContainerStatus::Corrupt;
  };
  std::ifstream in(path, std::ios::binary);
  if (!in) return ContainerStatus::Missing;
  std::string head(8, '\0');
  if (!in.read(head.data(), 8) || head != magic) return fail("bad magic");
  std::uint64_t n = 0;
  if (!get_u64(in, n) || n > (1ull << 32)) return fail("bad metadata length");
  std::string meta(n, '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(n))) return fail("truncated metadata");
  if (!get_u64(in, n) || n > (1ull << 40)) return fail("bad payload length");
  out.payload.assign(n, '\0');
  if (!in.read(out.payload.data(), static_cast<std::streamsize>(n))) return fail("truncated payload");
  std::string d(32, '\0');
  if (!in.read(d.data(), 32)) return fail("missing checksum");
  if (d != digest(meta, out.payload)) return fail("checksum mismatch");
  try {
    out.metadata = json::parse(meta);
  } catch (const json::parse_error&) {
    return fail("unreadable metadata");
  }
  return ContainerStatus::Ok;
}

void ByteWriter::put(const Eigen::VectorXd& v) {
  put(static_cast<std::int64_t>(v.size()));
  raw(v.data(), sizeof(double) * v.size());
}

void ByteWriter::put(const Eigen::MatrixXd& m) {
  put(static_cast<std::int64_t>(m.rows()));
  put(static_cast<std::int64_t>(m.cols()));
  raw(m.data(), sizeof(double) * m.size());
}

void ByteWriter::put(const Eigen::VectorXcd& v) {
  put(static_cast<std::int64_t>(v.size()));
  raw(v.data(), sizeof(std::complex<double>) * v.size());
}

void ByteWriter::put(const Eigen::MatrixXcd& m) {
  put(static_cast<std::int64_t>(m.rows()));
  put(static_cast<std::int64_t>(m.cols()));
  raw(m.data(), sizeof(std::complex<double>) * m.size());
}

void ByteWriter::put(const std::vector<double>& v) {
  put(static_cast<std::int64_t>(v.size()));
  raw(v.data(), sizeof(double) * v.size());
}

void ByteReader::raw(void* p, std::size_t n) {
  if (at_ + n > bytes_.size()) throw NumericalError("container payload is truncated");
  std::memcpy(p, bytes_.data() + at_, n);
  at_ += n;
}

double ByteReader::real() {
  double v;
  raw(&v, sizeof v);
  return v;
}

std::int64_t ByteReader::integer() {
  std::int64_t v;
  raw(&v, sizeof v);
  return v;
}

Eigen::VectorXd ByteReader::vector() {
  Eigen::VectorXd v(integer());
  raw(v.data(), sizeof(double) * v.size());
  return v;
}

Eigen::MatrixXd ByteReader::matrix() {
  const auto r = integer();
  const auto c = integer();
  Eigen::MatrixXd m(r, c);
  raw(m.data(), sizeof(double) * m.size());
  return m;
}

Eigen::VectorXcd ByteReader::complex_vector() {
  Eigen::VectorXcd v(integer());
  raw(v.data(), sizeof(std::complex<double>) * v.size());
  return v;
}

Eigen::MatrixXcd ByteReader::complex_matrix() {
  const auto r = integer();
  const auto c = integer();
  Eigen::MatrixXcd m(r, c);
  raw(m.data(), sizeof(std::complex<double>) * m.size());
  return m;
}

std::vector<double> ByteReader::doubles() {
  std::vector<double> v(integer());
  raw(v.data(), sizeof(double) * v.size());
  return v;
}

Container encode_spectrum(const OscillatorSpectrum& s, const std::string& key) {
  Container c;
  c.metadata = {{"kind", "spectrum"},
                {"format", 1},
                {"key", key},
                {"hbar0", s.hbar0},
                {"n_max", s.n_max},
                {"grid_halfwidth", s.grid.halfwidth},
                {"grid_points", s.grid.points},
                {"x_size", s.x.size()},
                {"x_bandwidth", s.x.bandwidth()}};
  ByteWriter w;
  w.put(s.energies);
  w.put(s.x.raw());
  w.put(s.convergence_change);
  c.payload = w.take();
  return c;
}

OscillatorSpectrum decode_spectrum(const Container& c) {
  const json& m = c.metadata;
  OscillatorSpectrum s;
  s.hbar0 = m.at("hbar0").get<double>();
  s.n_max = m.at("n_max").get<int>();
  s.grid.halfwidth = m.at("grid_halfwidth").get<double>();
  s.grid.points = m.at("grid_points").get<int>();
  ByteReader r(c.payload);
  s.energies = r.doubles();
  s.x = BandedSymmetric(m.at("x_size").get<int>(), m.at("x_bandwidth").get<int>());
  const std::vector<double> band = r.doubles();
  if (band.size() != s.x.raw().size()) throw NumericalError("cached x band has the wrong size");
  s.x.raw() = band;
  s.convergence_change = r.real();
  if (!r.done() || static_cast<int>(s.energies.size()) != s.n_max + 1) {
    throw NumericalError("cached spectrum payload is inconsistent");
  }
  return s;
}

Container encode_operator(const FloquetOperator& op, const std::string& key) {
  Container c;
  c.metadata = {{"kind", "floquet_operator"},
                {"format", 1},
                {"key", key},
                {"f0", op.drive.f0},
                {"omega", op.drive.omega},
                {"i", op.drive.i},
                {"j", op.drive.j},
                {"period", op.drive.period()},
                {"hbar0", op.hbar0},
                {"q_halfwidth", op.q_halfwidth},
                {"group_size", op.group_size},
                {"dimension", op.dimension()},
                {"unitarity_defect", op.unitarity_defect},
                {"symmetry_defect", op.symmetry_defect},
                {"edge_leakage", op.edge_leakage},
                {"leak_flagged", op.leak_flagged},
                {"eigen_residual", op.eigen_residual}};
  ByteWriter w;
  w.put(op.U);
  w.put(op.eigenvalues);
  w.put(op.quasienergies);
  w.put(op.eigenvectors);
  c.payload = w.take();
  return c;
}

FloquetOperator decode_operator(const Container& c) {
  const json& m = c.metadata;
  FloquetOperator op;
  op.drive.f0 = m.at("f0").get<double>();
  op.drive.omega = m.at("omega").get<double>();
  op.drive.i = m.at("i").get<int>();
  op.drive.j = m.at("j").get<int>();
  op.hbar0 = m.at("hbar0").get<double>();
  op.q_halfwidth = m.at("q_halfwidth").get<int>();
  op.group_size = m.at("group_size").get<int>();
  op.unitarity_defect = m.at("unitarity_defect").get<double>();
  op.symmetry_defect = m.at("symmetry_defect").get<double>();
  op.edge_leakage = m.at("edge_leakage").get<double>();
  op.leak_flagged = m.at("leak_flagged").get<bool>();
  op.eigen_residual = m.at("eigen_residual").get<double>();
  ByteReader r(c.payload);
  op.U = r.complex_matrix();
  op.eigenvalues = r.complex_vector();
  op.quasienergies = r.vector();
  op.eigenvectors = r.matrix();
  if (!r.done() || op.U.rows() != m.at("dimension").get<int>()) {
    throw NumericalError("cached operator payload is inconsistent");
  }
  return op;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create directory '" + dir + "': " + ec.message());
}

std::string spectrum_cache_path(const std::string& cache_dir, const std::string& key) {
  return (fs::path(cache_dir) / ("spectrum-" + key.substr(0, 16) + ".qad")).string();
}

std::string operator_cache_path(const std::string& cache_dir, const std::string& key) {
  return (fs::path(cache_dir) / ("operator-" + key.substr(0, 16) + ".qad")).string();
}

OscillatorSpectrum cached_spectrum(const std::string& cache_dir, const std::string& key,
                                   const OscillatorParams& params, bool* hit) {
  const std::string path = spectrum_cache_path(cache_dir, key);
  Container c;
  std::string why;
  const ContainerStatus status = read_container(path, "QADSPEC1", c, &why);
  if (status == ContainerStatus::Ok && c.metadata.value("key", "") == key) {
    try {
      OscillatorSpectrum s = decode_spectrum(c);
      if (hit) *hit = true;
      return s;
    } catch (const std::exception& e) {
      why = e.what();
    }
  } else if (status == ContainerStatus::Ok) {
    why = "config hash mismatch";
  }
  if (status != ContainerStatus::Missing) {
    std::cerr << "warning: spectrum cache " << path << " unusable (" << why << "), recomputing\n";
  }
  OscillatorSpectrum s = solve_spectrum(params);
  ensure_directory(cache_dir);
  write_container(path, "QADSPEC1", encode_spectrum(s, key));
  if (hit) *hit = false;
  return s;
}

std::optional<FloquetOperator> load_operator(const std::string& path, const std::string& key) {
  Container c;
  std::string why;
  const ContainerStatus status = read_container(path, "QADOPER1", c, &why);
  if (status == ContainerStatus::Missing) return std::nullopt;
  if (status == ContainerStatus::Ok && c.metadata.value("key", "") == key) {
    try {
      return decode_operator(c);
    } catch (const std::exception& e) {
      why = e.what();
    }
  } else if (status == ContainerStatus::Ok) {
    why = "config hash mismatch";
  }
  std::cerr << "warning: operator cache " << path << " unusable (" << why << "), recomputing\n";
  return std::nullopt;
}

void store_operator(const std::string& path, const FloquetOperator& op, const std::string& key) {
  ensure_directory(fs::path(path).parent_path().string());
  write_container(path, "QADOPER1", encode_operator(op, key));
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& title, const std::string& hash,
                     const json& config, const std::vector<std::string>& columns)
    : path_(path), columns_(columns.size()) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) ensure_directory(parent.string());
  out_.open(path, std::ios::trunc);
  if (!out_) throw ValidationError("cannot write '" + path + "'");
  out_ << "# " << title << "\n";
  out_ << "# config_hash: " << hash << "\n";
  out_ << "# config: " << config.dump() << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << "\n";
}

void CsvWriter::separator() {
  if (filled_ == columns_) throw ValidationError("too many fields in a row of " + path_);
  if (filled_ > 0) out_ << ',';
  ++filled_;
}

CsvWriter& CsvWriter::operator<<(double v) {
  separator();
  out_ << format_number(v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(int v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(long v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& v) {
  separator();
  out_ << v;
  return *this;
}

void CsvWriter::end_row() {
  if (filled_ != columns_) throw ValidationError("incomplete row in " + path_);
  out_ << '\n';
  filled_ = 0;
}

RunManifest::RunManifest(std::string path, std::string hash) : path_(std::move(path)) {
  data_ = {{"config_hash", hash},
           {"code_version", QAD_VERSION},
           {"created", utc_now()},
           {"updated", utc_now()},
           {"files", json::object()},
           {"points", json::object()}};
}

bool RunManifest::load() {
  std::ifstream in(path_);
  if (!in) return false;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error&) {
    std::cerr << "warning: manifest " << path_ << " is unreadable, starting a new one\n";
    return false;
  }
  if (j.value("config_hash", "") != data_["config_hash"]) return false;
  data_ = j;
  return true;
}

void RunManifest::save() const {
  json j = data_;
  j["updated"] = utc_now();
  const fs::path parent = fs::path(path_).parent_path();
  if (!parent.empty()) ensure_directory(parent.string());
  const std::string tmp = path_ + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, path_);
}

void RunManifest::record_file(const std::string& path) {
  data_["files"][fs::path(path).filename().string()] = file_sha256(path);
}

bool RunManifest::point_done(const std::string& id) const {
  const auto& p = data_["points"];
  return p.contains(id) && p[id].value("status", "") == "ok";
}

const json* RunManifest::point(const std::string& id) const {
  const auto& p = data_["points"];
  return p.contains(id) ? &p[id] : nullptr;
}

void RunManifest::record_point(const std::string& id, const json& record) {
  data_["points"][id] = record;
}

}  // namespace qad
