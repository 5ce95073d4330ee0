#pragma once

// Stroboscopic wave-packet evolution through the quasienergy expansion
//
//   C(N) = sum_Q A^Q exp(-i eps_Q N T / hbar0) (A^Q . C(0))
//
// and the energy-dispersion observables built on it.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "qad/fit.hpp"
#include "qad/floquet_engine.hpp"
#include "qad/resonance_basis.hpp"

namespace qad {

enum class InitialKind { Center, Separatrix, Above };

InitialKind parse_initial_kind(const std::string& name);
std::string to_string(InitialKind kind);

struct PacketState {
  Eigen::VectorXcd C;  // flat (q, s) amplitudes
  int N = 0;
};

/// Basis state (q_start, s*) with s* the bottom level, the spacing-minimum
/// level or above_set[above_index]. Throws ValidationError when q_start is
/// outside [-Q, Q] or the group has no classification for the requested kind.
PacketState make_initial_state(const ResonanceBasis& basis, InitialKind kind, int q_start = 0,
                               int above_index = 4);
PacketState basis_state(const ResonanceBasis& basis, int q, int s);

struct PacketTrajectory {
  std::string label;
  std::vector<int> N;
  std::vector<double> q_mean;             // q~
  std::vector<double> delta_q;            // sum_q (q - q~)^2 P_q
  std::vector<double> group_variance;     // sum_q P_q Var_s(E^M / hbar0 omega | q)
  std::vector<double> energy_dispersion;  // delta_q + group_variance
  std::vector<double> edge_probability;   // probability on |q| = Q
  double max_norm_defect = 0.0;
};

struct Observables {
  double q_mean = 0.0, delta_q = 0.0, group_variance = 0.0, edge_probability = 0.0, norm = 0.0;
};

Observables measure(const ResonanceBasis& basis, const Eigen::VectorXcd& C);

/// Amplitudes after N periods for every column of `psi0`.
Eigen::MatrixXcd spectral_state(const FloquetOperator& op, const Eigen::MatrixXcd& psi0, int N);

/// Trajectories for N = 0..N_max of several initial states at once.
std::vector<PacketTrajectory> evolve(const FloquetOperator& op, const ResonanceBasis& basis,
                                     const std::vector<PacketState>& initial, int N_max);
PacketTrajectory evolve(const FloquetOperator& op, const ResonanceBasis& basis,
                        const PacketState& initial, int N_max);

struct SaturationOptions {
  int reference_first = 50;   // window of the initial slope
  int reference_last = 500;
  int trailing_window = 250;
  double fraction = 0.1;
  double min_slope = 1e-12;   // below this the run is non-diffusive
  double min_rise_over_residual = 1.0;  // so is a rise over the window smaller than the fit residual
};

/// First N where the slope over [N - trailing_window, N] falls below
/// fraction * initial slope, refined to the knee of a continuous two-segment
/// fit over [reference_first, N]. Empty when the initial growth is not positive,
/// not above the fit residual, or no drop occurs. Throws ValidationError when the series is shorter than
/// twice the detected knee.
std::optional<int> detect_saturation(const std::vector<double>& series,
                                     const SaturationOptions& options = {});

struct DiffusionEstimate {
  double D = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  double rise = 0.0;  // D * (last - first)
  int first = 0, last = 0;
  std::optional<int> N_sat;
};

/// Slope of delta_q over [first, last]. Throws ValidationError when the window
/// reaches a detected saturation time or leaves the trajectory.
DiffusionEstimate fit_diffusion(const std::vector<double>& series, int first, int last,
                                std::optional<int> N_sat = std::nullopt);

}  // namespace qad
