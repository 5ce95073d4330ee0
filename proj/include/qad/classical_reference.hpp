#pragma once

// Classical counterpart of the driven model
//
//   H = p_x^2/2 + x^4/4 + p_y^2/2 + y^4/4 - mu x y - f0 x (cos Omega1 t + cos Omega2 t)
//
// integrated with a symmetric fourth-order kick-drift splitting.
// Near the coupling resonance the slow motion is the pendulum
//
//   h(J, phi) = E(I0 + J) + E(I0 - J) - 2 E(I0) - mu sum_r A_r(I0+J) A_r(I0-J)/2 cos(r phi)
//
// with phi = theta_x - theta_y and A_r the Fourier amplitudes of x(theta).

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qad/fit.hpp"
#include "qad/floquet_engine.hpp"

namespace qad {

struct ClassicalState {
  double x = 0.0, px = 0.0, y = 0.0, py = 0.0;
  double t = 0.0;
};

struct ClassicalParams {
  double mu = 0.0;
  double f0 = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
};

ClassicalParams classical_params(double mu, const DriveParams& drive);

// Single quartic oscillator p^2/2 + x^4/4 in action-angle form.
namespace quartic {
double energy(double x, double p);
double action(double energy);            // I = 8 J E^{3/4} / (2 pi)
double energy_of_action(double action);
double frequency(double energy);         // 2 pi / T_cl(E)
double period(double energy);
double d2e_di2(double action);           // d^2E/dI^2
/// Odd Fourier amplitude A_r of x(theta) = sum_r A_r cos(r theta).
double fourier_amplitude(double energy, int r);
/// (x, p) at angle theta (theta = 0 is the right turning point).
std::pair<double, double> point(double energy, double theta);
}  // namespace quartic

double oscillator_energy(double x, double p);
/// H0 = H0_x + H0_y - mu x y (drive excluded).
double unperturbed_energy(const ClassicalState& s, double mu);
double total_energy(const ClassicalState& s, const ClassicalParams& params);

class SplittingIntegrator {
 public:
  /// `h` may be negative for backward runs. When `steps_per_period` > 0 the
  /// drive is tabulated over one period (h must then equal T / steps).
  SplittingIntegrator(const ClassicalParams& params, double h, int steps_per_period = 0);

  double step_size() const { return h_; }
  void step(ClassicalState& s) const;
  /// Advances `count` steps. Throws NumericalError on escape (non-finite or
  /// |x|, |y| above escape_radius).
  void advance(ClassicalState& s, long count) const;

  double escape_radius = 1e3;

 private:
  double drive(double t) const;
  double tabulated(long index, int stage) const;
  void kick(ClassicalState& s, double tau, double drive_value) const;

  ClassicalParams params_;
  double h_;
  int steps_per_period_;
  std::vector<double> table_;  // drive at the six kick offsets of every step
};

/// Stroboscopic/finer samples of a trajectory from s0 to t_end with step h.
/// Rejects h * omega_max > max_h_omega where omega_max is the larger
/// oscillator frequency at the initial energies.
std::vector<ClassicalState> integrate_trajectory(const ClassicalState& s0,
                                                 const ClassicalParams& params, double t_end,
                                                 double h, double sample_interval,
                                                 double max_h_omega = 0.05);

/// Resonance centre data for the coupling resonance at action I0.
struct PendulumModel {
  double action = 0.0;   // I0
  double energy = 0.0;   // E(I0) per oscillator
  double mu = 0.0;
  int harmonics = 7;     // odd r <= harmonics

  double h(double J, double phi) const;
  double separatrix() const { return h(0.0, 3.14159265358979323846); }
  double bottom() const { return h(0.0, 0.0); }
  /// Small-oscillation frequency of phi about phi = 0.
  double small_oscillation_frequency() const;
  /// J > 0 on the line phi = 0 with h(J, 0) = value.
  double action_offset(double value) const;
  /// Phase-space point with given pendulum (J, phi), sum angle Theta and
  /// oscillator energies from I0 +- J.
  ClassicalState state(double J, double phi, double sum_angle) const;
};

PendulumModel make_pendulum(double hbar0, int n0, double mu);

struct ChaosOptions {
  double twin_distance = 1e-9;
  double renormalize_interval = 0.0;  // 0 -> one drive period
};

/// Finite-time separation exponent from a renormalized twin trajectory,
/// measured over the second half of [s0.t, t_end].
double chaos_indicator(const ClassicalState& s0, const ClassicalParams& params, double t_end,
                       double h, int steps_per_period, const ChaosOptions& options = {});

struct LayerScanOptions {
  int points = 400;
  double offset_range = 0.5;       // scan h = h_sep (1 + u), |u| <= range
  double libration_periods = 150.0; // run length in units of 2 pi / omega_tilde
  double max_h_omega = 0.05;
  double min_separation_decades = 1.0;  // separatrix level above the regular baseline
  int core_points = 5;                  // scan points nearest the separatrix
  double sum_angle = 0.0;
  int phase_samples = 4;      // sum angles per energy, the largest indicator counts
  ChaosOptions chaos;
};

struct LayerScanPoint {
  double offset = 0.0;    // u
  double energy = 0.0;    // pendulum energy h
  double indicator = 0.0;
  bool chaotic = false;
};

struct LayerMeasurement {
  double separatrix_energy = 0.0;
  double band_low = 0.0;   // pendulum energy range of the chaotic band (cell edges)
  double band_high = 0.0;
  double layer_width = 0.0;
  double threshold = 0.0;  // indicator threshold
  bool touches_scan_edge = false;
  int M_s = 0;
  std::vector<LayerScanPoint> scan;
};

/// Scans initial conditions across the separatrix on the line phi = 0, labels
/// them by the chaos indicator and measures the chaotic band around the
/// separatrix. `levels` (E^M of the q = 0 group) are counted into M_s.
/// Throws NumericalError when no chaotic band exists.
LayerMeasurement map_stochastic_layer(const PendulumModel& pendulum, const DriveParams& drive,
                                      const Eigen::VectorXd& levels,
                                      const LayerScanOptions& options = {});

/// Number of `levels` inside [low, high].
int count_levels(const Eigen::VectorXd& levels, double low, double high);

struct ClassicalDiffusionOptions {
  int ensemble_size = 200;
  int periods = 500;
  int fit_first = 50;
  int fit_last = 500;
  double max_h_omega = 0.05;
  std::uint64_t seed = 12345;
  int bootstrap = 200;
};

struct ClassicalDiffusionResult {
  double D = 0.0;
  double standard_error = 0.0;
  double residual = 0.0;  // rms residual of the variance fit
  int ensemble_size = 0;
  int fit_first = 0, fit_last = 0;
  std::vector<double> variance;  // Var(H0(N) - H0(0))/(hbar0 omega)^2 at N = 0..periods
  int escaped = 0;
};

/// Ensemble seeded uniformly in pendulum energy over [band_low, band_high] on
/// phi = 0 with random sum angle; D is the slope of the variance of the
/// per-member change H0(N) - H0(0), in units of hbar0 omega, versus N over the
/// fit window.
ClassicalDiffusionResult classical_diffusion(const PendulumModel& pendulum,
                                             const DriveParams& drive, double band_low,
                                             double band_high, double hbar_omega,
                                             const ClassicalDiffusionOptions& options = {});

}  // namespace qad
