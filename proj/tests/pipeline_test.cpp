#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "qad/errors.hpp"
#include "qad/io.hpp"
#include "qad/pipeline.hpp"

using namespace qad;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig small_config(const std::string& name) {
  RunConfig c;
  c.oscillator = {1e-3, 80};
  c.resonance = fixtures::small_params();
  c.drive.f0_over_mu = 0.01;
  c.floquet.leak_threshold = 0.05;
  c.floquet.steps_per_period = 400;
  c.dynamics.periods = 400;
  c.dynamics.fit_first = 10;
  c.dynamics.fit_last = 100;
  c.dynamics.trailing_window = 50;
  c.classical.layer_points = 41;
  c.classical.libration_periods = 30;
  c.classical.phase_samples = 2;
  c.classical.ensemble_size = 8;
  c.classical.periods = 40;
  c.classical.fit_first = 5;
  c.classical.fit_last = 40;
  c.classical.bootstrap = 10;
  c.scan = {1e-3, 1e-3, 1};
  const fs::path root = fs::temp_directory_path() / ("qad_pipeline_" + name);
  fs::remove_all(root);
  c.output_dir = (root / "out").string();
  c.cache_dir = (root / "cache").string();
  return c;
}

}  // namespace

TEST_CASE("an invalid box fails validation before any compute") {
  RunConfig c = small_config("box");
  c.oscillator.grid_box_halfwidth = 0.01;
  const auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(load_spectrum(c), ValidationError);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(100));
  CHECK_FALSE(fs::exists(c.cache_dir));
}

TEST_CASE("a single-point scan equals running the stages individually") {
  const RunConfig c = small_config("single");
  const ScanOutcome out = run_scan(c);
  REQUIRE(out.rows.size() == 1);
  const ScanRow& row = out.rows.front();
  REQUIRE(row.status == "ok");

  const OscillatorSpectrum spectrum = load_spectrum(c);
  const ResonanceBasis basis = build_basis(c, spectrum);
  const FloquetOperator op = load_or_build_operator(c, basis);
  const QuantumDiffusion q = quantum_diffusion(op, basis, c.dynamics, c.seed);
  const ClassicalReference cl = classical_reference(c, basis);
  CHECK(row.D_quantum == q.mean);
  CHECK(row.D_quantum_median == q.median);
  CHECK(row.D_quantum_median_se == q.median_se);
  CHECK(row.D_classical == cl.diffusion.D);
  CHECK(row.M_s == cl.layer.M_s);
  CHECK(row.unitarity_defect == op.unitarity_defect);
  fs::remove_all(fs::path(c.output_dir).parent_path());
}

TEST_CASE("a resumed scan reuses completed points and retries failures") {
  RunConfig c = small_config("resume");
  c.scan = {1e-4, 4e-4, 3};
  int calls = 0;
  const PointRunner fake = [&](const RunConfig& p) {
    ++calls;
    if (p.resonance.mu > 3e-4 && calls < 4) throw NumericalError("synthetic failure");
    ScanRow r;
    r.D_quantum = p.resonance.mu;
    r.D_classical = 2.0 * p.resonance.mu;
    return r;
  };
  const ScanOutcome first = run_scan(c, fake);
  CHECK(calls == 3);
  CHECK(first.computed == 2);
  CHECK(first.failed == 1);
  CHECK(first.rows.back().status == "failed");
  CHECK(first.rows.back().error == "synthetic failure");

  const ScanOutcome second = run_scan(c, fake);
  CHECK(calls == 4);
  CHECK(second.reused == 2);
  CHECK(second.computed == 1);
  CHECK(second.failed == 0);
  for (std::size_t i = 0; i < first.rows.size() - 1; ++i) {
    CHECK(second.rows[i].D_quantum == first.rows[i].D_quantum);
  }

  const std::string fig5 = slurp(second.fig5_path);
  const ScanOutcome third = run_scan(c, fake);
  CHECK(calls == 4);
  CHECK(third.reused == 3);
  CHECK(slurp(third.fig5_path) == fig5);

  // A different physics config starts over.
  c.dynamics.fit_last = 120;
  run_scan(c, fake);
  CHECK(calls == 7);
  fs::remove_all(fs::path(c.output_dir).parent_path());
}

TEST_CASE("an extended explicit grid reuses the points of a smaller one") {
  RunConfig c = small_config("extend");
  c.scan.mu_values = {1e-4, 3e-4};
  std::vector<double> seen;
  const PointRunner fake = [&](const RunConfig& p) {
    seen.push_back(p.resonance.mu);
    ScanRow r;
    r.D_quantum = p.resonance.mu;
    return r;
  };
  CHECK(run_scan(c, fake).computed == 2);
  c.scan.mu_values = {3e-4, 2e-4, 1e-4, 2e-4};
  const ScanOutcome out = run_scan(c, fake);
  CHECK(out.reused == 2);
  CHECK(out.computed == 1);
  REQUIRE(out.rows.size() == 3);
  CHECK(out.rows[1].mu == 2e-4);
  CHECK(seen == std::vector<double>{1e-4, 3e-4, 2e-4});
  fs::remove_all(fs::path(c.output_dir).parent_path());
}

TEST_CASE("figure CSVs are identical for identical configs") {
  const RunConfig c = small_config("fig");
  const ResonanceBasis basis = build_basis(c, load_spectrum(c));
  write_fig1(c, basis, c.output_dir + "/a.csv");
  write_fig1(c, basis, c.output_dir + "/b.csv");
  CHECK(slurp(c.output_dir + "/a.csv") == slurp(c.output_dir + "/b.csv"));
  const std::string text = slurp(c.output_dir + "/a.csv");
  CHECK(text.find("# config_hash: " + config_hash(c)) != std::string::npos);
  CHECK(text.find("q,s,energy_over_hbar_omega,level_over_hbar_omega,class") != std::string::npos);
  fs::remove_all(fs::path(c.output_dir).parent_path());
}

TEST_CASE("trend check orders by decreasing mu") {
  const std::vector<double> mu{1e-4, 3e-5, 2e-4};
  CHECK(non_increasing_in_inv_sqrt_mu(mu, {2.0, 1.0, 3.0}));
  CHECK_FALSE(non_increasing_in_inv_sqrt_mu(mu, {2.0, 2.5, 3.0}));
  CHECK(non_increasing_in_inv_sqrt_mu(mu, {2.0, 2.1, 3.0}, 0.1));
  CHECK(non_increasing_within_errors(mu, {2.0, 2.4, 3.0}, {0.3, 0.3, 0.3}));
  CHECK_FALSE(non_increasing_within_errors(mu, {2.0, 2.5, 3.0}, {0.3, 0.3, 0.3}));
}

TEST_CASE("a trajectory saturating inside the window is fitted over the whole window") {
  DynamicsConfig d;
  d.fit_first = 50;
  d.fit_last = 500;
  std::vector<double> dq(4001);
  for (std::size_t n = 0; n < dq.size(); ++n) dq[n] = 1e-3 * std::min<double>(n, 200);
  const DiffusionEstimate e = fit_trajectory(dq, d);
  REQUIRE(e.N_sat.has_value());
  CHECK(*e.N_sat == doctest::Approx(200).epsilon(0.05));
  CHECK(e.first == 50);
  CHECK(e.last == 500);
  CHECK(e.D < 1e-3);
}

TEST_CASE("level shifts across groups stay within the dropped q-dependence") {
  const auto& basis = fixtures::small_basis();
  CHECK(level_shift_deviation(basis) <= level_shift_tolerance(basis));
}
