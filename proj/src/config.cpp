#include "qad/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "qad/errors.hpp"
#include "qad/io.hpp"

namespace qad {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OscillatorParams, hbar0, n_max, grid_box_halfwidth,
                                                grid_points, box_margin, points_per_wavelength,
                                                convergence_tol, max_refinements, offset_cutoff)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DriveConfig, f0_over_mu, detuning, max_index,
                                                tolerance)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FloquetOptions, steps_per_period, half_period,
                                                column_block, leak_threshold,
                                                max_unitarity_defect, cluster_tolerance)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DynamicsConfig, initial, q_start, above_index,
                                                periods, fit_first, fit_last, trailing_window,
                                                saturation_fraction, bootstrap)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ClassicalConfig, layer_points, offset_range,
                                                libration_periods, phase_samples,
                                                min_separation_decades, ensemble_size, periods,
                                                fit_first, fit_last, max_h_omega, bootstrap)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScanConfig, mu_min, mu_max, mu_points, mu_values)

namespace {

json resonance_json(const ResonanceParams& r) {
  return {{"mu", r.mu},
          {"n0", r.n0},
          {"k_halfwidth", r.k_halfwidth},
          {"q_halfwidth", r.q_halfwidth},
          {"parity_sector", to_string(r.parity_sector)},
          {"separatrix_window", r.separatrix_window},
          {"doublet_ratio", r.doublet_ratio}};
}

ResonanceParams resonance_from(const json& j) {
  ResonanceParams r;
  r.mu = j.value("mu", r.mu);
  r.n0 = j.value("n0", r.n0);
  r.k_halfwidth = j.value("k_halfwidth", r.k_halfwidth);
  r.q_halfwidth = j.value("q_halfwidth", r.q_halfwidth);
  r.parity_sector = parse_parity_sector(j.value("parity_sector", std::string("both")));
  r.separatrix_window = j.value("separatrix_window", r.separatrix_window);
  r.doublet_ratio = j.value("doublet_ratio", r.doublet_ratio);
  return r;
}

void check_keys(const json& given, const json& reference, const std::string& where) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!reference.contains(it.key())) throw ValidationError("unknown config key '" + path + "'");
    if (reference[it.key()].is_object()) {
      if (!it.value().is_object()) throw ValidationError("config key '" + path + "' must be an object");
      check_keys(it.value(), reference[it.key()], path);
    }
  }
}

json physics_part(const json& full) {
  json p = full;
  p.erase("output_dir");
  p.erase("cache_dir");
  return p;
}

}  // namespace

RunConfig RunConfig::with_mu(double mu) const {
  RunConfig c = *this;
  c.resonance.mu = mu;
  return c;
}

json to_json(const RunConfig& c) {
  return {{"oscillator", c.oscillator}, {"resonance", resonance_json(c.resonance)},
          {"drive", c.drive},           {"floquet", c.floquet},
          {"dynamics", c.dynamics},     {"classical", c.classical},
          {"scan", c.scan},             {"seed", c.seed},
          {"output_dir", c.output_dir}, {"cache_dir", c.cache_dir}};
}

RunConfig config_from_json(const json& j) {
  require(j.is_object(), "config must be a JSON object");
  const RunConfig defaults;
  check_keys(j, to_json(defaults), "");
  RunConfig c;
  try {
    if (j.contains("oscillator")) c.oscillator = j.at("oscillator").get<OscillatorParams>();
    if (j.contains("resonance")) c.resonance = resonance_from(j.at("resonance"));
    if (j.contains("drive")) c.drive = j.at("drive").get<DriveConfig>();
    if (j.contains("floquet")) c.floquet = j.at("floquet").get<FloquetOptions>();
    if (j.contains("dynamics")) c.dynamics = j.at("dynamics").get<DynamicsConfig>();
    if (j.contains("classical")) c.classical = j.at("classical").get<ClassicalConfig>();
    if (j.contains("scan")) c.scan = j.at("scan").get<ScanConfig>();
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void validate(const RunConfig& c) {
  const auto& o = c.oscillator;
  require(o.hbar0 > 0.0, "oscillator.hbar0 must be positive");
  require(o.n_max >= 1, "oscillator.n_max must be >= 1");
  const auto& r = c.resonance;
  require(r.mu > 0.0, "resonance.mu must be positive");
  require(r.k_halfwidth >= 3, "resonance.k_halfwidth must be >= 3");
  require(r.q_halfwidth >= 1, "resonance.q_halfwidth must be >= 1");
  const int reach = r.k_halfwidth + r.q_halfwidth;
  require(r.n0 - reach >= 1 && r.n0 + reach <= o.n_max - 1,
          "basis bounds: n0 +- (K+Q) = [" + std::to_string(r.n0 - reach) + ", " +
              std::to_string(r.n0 + reach) + "] must lie inside [1, n_max-1] with n_max=" +
              std::to_string(o.n_max));
  require(c.drive.f0_over_mu >= 0.0, "drive.f0_over_mu must be non-negative");
  require(c.drive.detuning > 0.0 && c.drive.detuning < 2.0, "drive.detuning must lie in (0, 2)");
  require(c.drive.max_index >= 2, "drive.max_index must be >= 2");
  require(c.drive.tolerance > 0.0, "drive.tolerance must be positive");
  require(c.floquet.steps_per_period >= 2, "floquet.steps_per_period must be >= 2");
  require(!c.floquet.half_period || c.floquet.steps_per_period % 2 == 0,
          "floquet.steps_per_period must be even with half_period");
  const auto& d = c.dynamics;
  parse_initial_kind(d.initial);
  require(std::abs(d.q_start) <= r.q_halfwidth, "dynamics.q_start outside [-Q, Q]");
  require(d.fit_first >= 0 && d.fit_last > d.fit_first, "dynamics fit window is empty");
  require(d.periods >= d.fit_last, "dynamics.periods must reach the fit window end");
  require(d.trailing_window >= 2, "dynamics.trailing_window must be >= 2");
  require(d.saturation_fraction > 0.0 && d.saturation_fraction < 1.0,
          "dynamics.saturation_fraction must lie in (0, 1)");
  require(d.bootstrap >= 0, "dynamics.bootstrap must be >= 0");
  const auto& k = c.classical;
  require(k.layer_points >= 3, "classical.layer_points must be >= 3");
  require(k.offset_range > 0.0 && k.offset_range < 1.0, "classical.offset_range must lie in (0, 1)");
  require(k.libration_periods > 0.0, "classical.libration_periods must be positive");
  require(k.phase_samples >= 1, "classical.phase_samples must be >= 1");
  require(k.ensemble_size >= 2, "classical.ensemble_size must be >= 2");
  require(k.fit_first >= 0 && k.fit_last > k.fit_first && k.fit_last <= k.periods,
          "classical fit window must lie inside [0, periods]");
  require(k.max_h_omega > 0.0, "classical.max_h_omega must be positive");
  require(c.scan.mu_min > 0.0 && c.scan.mu_max >= c.scan.mu_min, "scan mu range is empty");
  require(c.scan.mu_points >= 1, "scan.mu_points must be >= 1");
  require(c.scan.mu_points == 1 || c.scan.mu_max > c.scan.mu_min,
          "scan with several points needs mu_max > mu_min");
  for (double mu : c.scan.mu_values) require(mu > 0.0, "scan.mu_values must be positive");
}

void apply_environment(RunConfig& c) {
  if (const char* v = std::getenv("QAD_OUTPUT_DIR"); v && *v) c.output_dir = v;
  if (const char* v = std::getenv("QAD_CACHE_DIR"); v && *v) c.cache_dir = v;
}

std::string config_hash(const json& physics) { return sha256_hex(physics.dump()); }

std::string config_hash(const RunConfig& c) { return config_hash(physics_part(to_json(c))); }

std::string point_hash(const RunConfig& c) {
  json j = physics_part(to_json(c));
  j.erase("scan");
  j["resonance"].erase("mu");
  return config_hash(j);
}

json stage_json(const RunConfig& c, const std::string& stage) {
  const json full = physics_part(to_json(c));
  if (stage == "oscillator") return {{"oscillator", full["oscillator"]}};
  if (stage == "operator") {
    json r = full["resonance"];
    // Classification knobs do not change the operator.
    r.erase("parity_sector");
    r.erase("separatrix_window");
    r.erase("doublet_ratio");
    json f = full["floquet"];
    // Checked against the stored leakage when the operator is used.
    f.erase("leak_threshold");
    return {{"oscillator", full["oscillator"]},
            {"resonance", r},
            {"drive", full["drive"]},
            {"floquet", f}};
  }
  return full;
}

std::vector<double> mu_grid(const ScanConfig& s) {
  std::vector<double> out;
  if (!s.mu_values.empty()) {
    out = s.mu_values;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  if (s.mu_points == 1) return {s.mu_min};
  const double a = std::log(s.mu_min), b = std::log(s.mu_max);
  for (int i = 0; i < s.mu_points; ++i) {
    // Round to 6 significant digits so grid values print and hash stably.
    const double v = std::exp(a + (b - a) * i / (s.mu_points - 1));
    const double scale = std::pow(10.0, std::floor(std::log10(v)) - 5);
    out.push_back(std::round(v / scale) * scale);
  }
  return out;
}

DriveParams drive_for(const RunConfig& c, double omega) {
  return make_drive(omega, c.f0(), c.drive.detuning, c.drive.max_index, c.drive.tolerance);
}

SaturationOptions saturation_options(const DynamicsConfig& d) {
  SaturationOptions s;
  s.reference_first = d.fit_first;
  s.reference_last = d.fit_last;
  s.trailing_window = d.trailing_window;
  s.fraction = d.saturation_fraction;
  return s;
}

LayerScanOptions layer_options(const ClassicalConfig& c) {
  LayerScanOptions o;
  o.points = c.layer_points;
  o.offset_range = c.offset_range;
  o.libration_periods = c.libration_periods;
  o.max_h_omega = c.max_h_omega;
  o.min_separation_decades = c.min_separation_decades;
  o.phase_samples = c.phase_samples;
  return o;
}

ClassicalDiffusionOptions diffusion_options(const ClassicalConfig& c, std::uint64_t seed) {
  ClassicalDiffusionOptions o;
  o.ensemble_size = c.ensemble_size;
  o.periods = c.periods;
  o.fit_first = c.fit_first;
  o.fit_last = c.fit_last;
  o.max_h_omega = c.max_h_omega;
  o.seed = seed;
  o.bootstrap = c.bootstrap;
  return o;
}

}  // namespace qad
