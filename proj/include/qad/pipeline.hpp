#pragma once

// Stage orchestration shared by the command-line tool and the acceptance
// runner: cached spectrum -> resonance basis -> Floquet operator -> dynamics,
// plus the classical reference and the figure emitters.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qad/classical_reference.hpp"
#include "qad/config.hpp"
#include "qad/floquet_engine.hpp"
#include "qad/quantum_dynamics.hpp"
#include "qad/resonance_basis.hpp"

namespace qad {

OscillatorSpectrum load_spectrum(const RunConfig& config, bool* cache_hit = nullptr);
ResonanceBasis build_basis(const RunConfig& config, const OscillatorSpectrum& spectrum);
FloquetOperator load_or_build_operator(const RunConfig& config, const ResonanceBasis& basis,
                                       bool* cache_hit = nullptr);

/// Max over q of |E^M_{q,s} - E^M_{0,s}| / hbar0 omega.
double level_shift_deviation(const ResonanceBasis& basis);
/// E''(K + 1 + Q^2/2) / hbar0 omega, the size of the dropped q-dependence.
double level_shift_tolerance(const ResonanceBasis& basis);

/// Fit of one trajectory over [fit_first, fit_last]; N_sat is reported but
/// does not move the window.
DiffusionEstimate fit_trajectory(const std::vector<double>& delta_q, const DynamicsConfig& d);

struct QuantumDiffusion {
  std::vector<int> states;  // s of the q_start separatrix set
  std::vector<DiffusionEstimate> fits;
  double mean = 0.0;
  double median = 0.0;
  double median_se = 0.0;  // bootstrap over the states
};

QuantumDiffusion quantum_diffusion(const FloquetOperator& op, const ResonanceBasis& basis,
                                   const DynamicsConfig& d, std::uint64_t seed = 0);

struct ClassicalReference {
  PendulumModel pendulum;
  LayerMeasurement layer;
  ClassicalDiffusionResult diffusion;
};

ClassicalReference classical_reference(const RunConfig& config, const ResonanceBasis& basis,
                                       bool with_diffusion = true);

struct ScanRow {
  double mu = 0.0;
  std::string status = "ok";
  std::string error;
  double D_quantum = 0.0, D_quantum_median = 0.0, D_quantum_median_se = 0.0;
  double D_classical = 0.0, D_classical_se = 0.0;
  int M_s = 0;
  int drive_i = 0, drive_j = 0;
  double unitarity_defect = 0.0, edge_leakage = 0.0;
};

nlohmann::json to_json(const ScanRow& row);
ScanRow scan_row_from_json(const nlohmann::json& j);

/// Full pipeline at one mu (config.resonance.mu).
ScanRow scan_point(const RunConfig& config);

struct ScanOutcome {
  std::vector<ScanRow> rows;  // ascending mu
  int computed = 0;
  int reused = 0;
  int failed = 0;
  std::string fig5_path;
  std::string manifest_path;
};

using PointRunner = std::function<ScanRow(const RunConfig&)>;

/// Runs the mu grid of config.scan. Points recorded as ok in
/// output_dir/scan_manifest.json under the same point hash are reused; the
/// manifest is saved after every point. Failed points are kept with their
/// error and retried on the next run.
ScanOutcome run_scan(const RunConfig& config, const PointRunner& point = scan_point);

/// Monotone trend of `values` against increasing 1/sqrt(mu) (mu decreasing),
/// allowing relative rises up to `tolerance` between neighbours.
bool non_increasing_in_inv_sqrt_mu(const std::vector<double>& mu, const std::vector<double>& values,
                                   double tolerance = 0.0);

/// Same trend allowing rises within the combined standard errors of neighbours.
bool non_increasing_within_errors(const std::vector<double>& mu, const std::vector<double>& values,
                                  const std::vector<double>& errors);

// Figure data. Each returns the written path.
std::string write_fig1(const RunConfig& config, const ResonanceBasis& basis, const std::string& path);
std::string write_fig2(const RunConfig& config, const ResonanceBasis& basis, const std::string& path);
std::string write_fig3(const RunConfig& config, const FloquetOperator& op, const std::string& path);
std::string write_fig4(const RunConfig& config, const std::vector<PacketTrajectory>& trajectories,
                       const std::string& path);
std::string write_fig5(const RunConfig& config, const std::vector<ScanRow>& rows,
                       const std::string& path);
std::string write_layer_scan(const RunConfig& config, const LayerMeasurement& layer,
                             const std::string& path);
std::string write_classical_ensemble(const RunConfig& config, const ClassicalDiffusionResult& r,
                                     const std::string& path);
std::string write_groups(const RunConfig& config, const ResonanceBasis& basis,
                         const std::string& path);

/// Center, above and separatrix trajectories from q_start (the fig4 set).
std::vector<PacketTrajectory> fig4_trajectories(const RunConfig& config, const FloquetOperator& op,
                                                const ResonanceBasis& basis);

}  // namespace qad
