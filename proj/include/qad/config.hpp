#pragma once

// Run configuration: every knob of the pipeline, readable from a JSON file and
// overridable flag by flag. The physics part is hashed; directories are not.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qad/classical_reference.hpp"
#include "qad/floquet_engine.hpp"
#include "qad/quantum_dynamics.hpp"
#include "qad/quartic_oscillator.hpp"
#include "qad/resonance_basis.hpp"

namespace qad {

struct DriveConfig {
  double f0_over_mu = 0.01;
  double detuning = 0.2;  // dOmega / omega before rationalization
  int max_index = 64;
  double tolerance = 0.05;
};

struct DynamicsConfig {
  std::string initial = "separatrix";
  int q_start = 0;
  int above_index = 4;
  int periods = 4000;
  int fit_first = 50;
  int fit_last = 500;
  int trailing_window = 250;
  double saturation_fraction = 0.1;
  int bootstrap = 200;  // resamples of the separatrix set for the median error
};

struct ClassicalConfig {
  int layer_points = 400;
  double offset_range = 0.5;
  double libration_periods = 150.0;
  int phase_samples = 4;
  double min_separation_decades = 1.0;
  int ensemble_size = 200;
  int periods = 500;
  int fit_first = 50;
  int fit_last = 500;
  double max_h_omega = 0.05;
  int bootstrap = 200;
};

struct ScanConfig {
  double mu_min = 3e-5;
  double mu_max = 2e-4;
  int mu_points = 5;
  std::vector<double> mu_values;  // explicit grid, overrides the log grid when set
};

struct RunConfig {
  OscillatorParams oscillator{1.77e-5, 520};
  ResonanceParams resonance;
  DriveConfig drive;
  FloquetOptions floquet;
  DynamicsConfig dynamics;
  ClassicalConfig classical;
  ScanConfig scan;
  std::uint64_t seed = 12345;
  std::string output_dir = "qad_out";
  std::string cache_dir = "qad_cache";

  double f0() const { return drive.f0_over_mu * resonance.mu; }
  RunConfig with_mu(double mu) const;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are a ValidationError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Cross-parameter checks that need no computation.
void validate(const RunConfig& config);

/// QAD_OUTPUT_DIR / QAD_CACHE_DIR take precedence over the file and flags.
void apply_environment(RunConfig& config);

/// SHA-256 (hex) of the canonical JSON of the physics part of `j`.
std::string config_hash(const nlohmann::json& physics);
std::string config_hash(const RunConfig& config);
/// Hash of everything a scan point depends on besides mu.
std::string point_hash(const RunConfig& config);
/// Subset of the configuration a stage depends on.
nlohmann::json stage_json(const RunConfig& config, const std::string& stage);

/// Log-spaced mu grid of the scan.
std::vector<double> mu_grid(const ScanConfig& scan);

DriveParams drive_for(const RunConfig& config, double omega);
SaturationOptions saturation_options(const DynamicsConfig& d);
LayerScanOptions layer_options(const ClassicalConfig& c);
ClassicalDiffusionOptions diffusion_options(const ClassicalConfig& c, std::uint64_t seed);

}  // namespace qad
