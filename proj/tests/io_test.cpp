#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fixtures.hpp"
#include "qad/config.hpp"
#include "qad/errors.hpp"
#include "qad/io.hpp"

using namespace qad;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("qad_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CaptureStderr {
  std::ostringstream text;
  std::streambuf* old;
  CaptureStderr() : old(std::cerr.rdbuf(text.rdbuf())) {}
  ~CaptureStderr() { std::cerr.rdbuf(old); }
};

}  // namespace

TEST_CASE("config survives a JSON round trip") {
  RunConfig c;
  c.resonance.mu = 7e-5;
  c.dynamics.initial = "above";
  c.resonance.parity_sector = ParitySector::Odd;
  const RunConfig back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("missing keys keep defaults and unknown keys are rejected") {
  const RunConfig c = config_from_json(json::parse(R"({"resonance": {"mu": 5e-5}})"));
  CHECK(c.resonance.mu == 5e-5);
  CHECK(c.resonance.k_halfwidth == 60);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"resonance": {"nu": 1}})")), ValidationError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"extra": 1})")), ValidationError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"resonance": 3})")), ValidationError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"resonance": {"mu": "big"}})")), ValidationError);
}

TEST_CASE("validation rejects inconsistent settings") {
  RunConfig c;
  CHECK_NOTHROW(validate(c));
  c.resonance.n0 = 500;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = RunConfig{};
  c.dynamics.periods = 100;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = RunConfig{};
  c.drive.detuning = 0.0;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = RunConfig{};
  c.floquet.steps_per_period = 601;
  CHECK_THROWS_AS(validate(c), ValidationError);
}

TEST_CASE("hashes cover physics but not directories") {
  RunConfig a, b;
  b.output_dir = "elsewhere";
  b.cache_dir = "other";
  CHECK(config_hash(a) == config_hash(b));
  b.resonance.mu = 2e-4;
  CHECK(config_hash(a) != config_hash(b));
  RunConfig c;
  c.resonance.separatrix_window = 3;
  c.floquet.leak_threshold = 0.5;
  CHECK(config_hash(stage_json(a, "operator")) == config_hash(stage_json(c, "operator")));
  CHECK(config_hash(stage_json(a, "oscillator")) == config_hash(stage_json(b, "oscillator")));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("environment overrides the directories") {
  RunConfig c;
  setenv("QAD_OUTPUT_DIR", "/tmp/out_from_env", 1);
  setenv("QAD_CACHE_DIR", "/tmp/cache_from_env", 1);
  apply_environment(c);
  unsetenv("QAD_OUTPUT_DIR");
  unsetenv("QAD_CACHE_DIR");
  CHECK(c.output_dir == "/tmp/out_from_env");
  CHECK(c.cache_dir == "/tmp/cache_from_env");
}

TEST_CASE("mu grid is logarithmic between the bounds") {
  const std::vector<double> g = mu_grid({3e-5, 2e-4, 5});
  REQUIRE(g.size() == 5);
  CHECK(g.front() == doctest::Approx(3e-5));
  CHECK(g.back() == doctest::Approx(2e-4));
  for (int i = 1; i < 4; ++i) CHECK(g[i] * g[i] == doctest::Approx(g[i - 1] * g[i + 1]).epsilon(1e-5));
  CHECK(mu_grid({1e-4, 1e-4, 1}) == std::vector<double>{1e-4});
}

TEST_CASE("containers detect corruption") {
  TempDir dir("container");
  Container c{{{"key", "k"}}, "payload bytes"};
  write_container(dir / "a.bin", "TESTMAG1", c);
  Container back;
  REQUIRE(read_container(dir / "a.bin", "TESTMAG1", back) == ContainerStatus::Ok);
  CHECK(back.payload == c.payload);
  CHECK(back.metadata == c.metadata);
  CHECK(read_container(dir / "missing.bin", "TESTMAG1", back) == ContainerStatus::Missing);
  CHECK(read_container(dir / "a.bin", "OTHERMAG", back) == ContainerStatus::Corrupt);

  std::string bytes = slurp(dir / "a.bin");
  bytes[bytes.size() - 40] ^= 0x20;
  std::ofstream(dir / "b.bin", std::ios::binary) << bytes;
  std::string why;
  CHECK(read_container(dir / "b.bin", "TESTMAG1", back, &why) == ContainerStatus::Corrupt);
  CHECK(why == "checksum mismatch");
}

TEST_CASE("corrupt spectrum cache is recomputed with a warning") {
  TempDir dir("spectrum_cache");
  const OscillatorParams p{1e-3, 40};
  bool hit = true;
  const OscillatorSpectrum first = cached_spectrum(dir.path.string(), "key", p, &hit);
  CHECK_FALSE(hit);
  const OscillatorSpectrum again = cached_spectrum(dir.path.string(), "key", p, &hit);
  CHECK(hit);
  CHECK(again.energies == first.energies);

  const std::string path = spectrum_cache_path(dir.path.string(), "key");
  std::string bytes = slurp(path);
  bytes[bytes.size() / 2] ^= 0x01;
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  CaptureStderr err;
  const OscillatorSpectrum redone = cached_spectrum(dir.path.string(), "key", p, &hit);
  CHECK_FALSE(hit);
  CHECK(err.text.str().find("warning") != std::string::npos);
  CHECK(redone.energies == first.energies);
  CHECK(cached_spectrum(dir.path.string(), "key", p, &hit).energies == first.energies);
  CHECK(hit);
}

TEST_CASE("operator container round trip is exact") {
  TempDir dir("operator");
  const FloquetOperator op = fixtures::small_operator(0.02);
  store_operator(dir / "op.qad", op, "k1");
  const auto back = load_operator(dir / "op.qad", "k1");
  REQUIRE(back.has_value());
  CHECK(back->U == op.U);
  CHECK(back->eigenvectors == op.eigenvectors);
  CHECK(back->quasienergies == op.quasienergies);
  CHECK(back->drive.i == op.drive.i);
  CHECK(back->unitarity_defect == op.unitarity_defect);
  CHECK_FALSE(load_operator(dir / "op.qad", "other").has_value());
}

TEST_CASE("CSV output carries the header and is byte-reproducible") {
  TempDir dir("csv");
  const auto write = [&](const std::string& name) {
    CsvWriter csv(dir / name, "title", "abc", json{{"a", 1}}, {"x", "y", "label"});
    csv << 0.1 << 3 << std::string("first");
    csv.end_row();
    csv << 1.0 / 3.0 << -2 << std::string("second");
    csv.end_row();
  };
  write("a.csv");
  write("b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv") ==
        "# title\n# config_hash: abc\n# config: {\"a\":1}\nx,y,label\n0.1,3,first\n"
        "0.333333333333,-2,second\n");
  CsvWriter bad(dir / "c.csv", "t", "h", json::object(), {"x", "y"});
  bad << 1.0;
  CHECK_THROWS_AS(bad.end_row(), ValidationError);
}

TEST_CASE("manifest reloads under the same hash only") {
  TempDir dir("manifest");
  {
    RunManifest m(dir / "m.json", "hash1");
    m.record_point("1e-4", {{"status", "ok"}, {"mu", 1e-4}});
    m.record_point("2e-4", {{"status", "failed"}, {"mu", 2e-4}});
    m.save();
  }
  RunManifest same(dir / "m.json", "hash1");
  CHECK(same.load());
  CHECK(same.point_done("1e-4"));
  CHECK_FALSE(same.point_done("2e-4"));
  RunManifest other(dir / "m.json", "hash2");
  CHECK_FALSE(other.load());
  CHECK_FALSE(other.point_done("1e-4"));
}
