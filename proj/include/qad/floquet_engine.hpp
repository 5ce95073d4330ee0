#pragma once

// One-period evolution operator of the driven system in the reduced resonance
// basis. With C_{q,s} = b_{q,s} exp[-i(q omega + E^M_{q,s}/hbar0) t] the slow
// amplitudes obey
//
//   i hbar0 db_{q,s}/dt = -f0 cos(dOmega t/2) sum_{s'} [ x_{q,s;q+1,s'} b_{q+1,s'} e^{-i(E^M_{q+1,s'} - E^M_{q,s})t/hbar0}
//                                                     + x_{q,s;q-1,s'} b_{q-1,s'} e^{-i(E^M_{q-1,s'} - E^M_{q,s})t/hbar0} ]
//
// which is integrated with fixed-step RK4, the phase factors being evaluated
// exactly at every stage time.

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qad/resonance_basis.hpp"

namespace qad {

/// Two-frequency drive with Omega1 = i*u, Omega2 = j*u (i, j coprime) so that
/// T = i T1 = j T2 = 2 pi / u, centred on omega = (Omega1 + Omega2)/2.
struct DriveParams {
  double f0 = 0.0;
  double omega = 0.0;
  int i = 1;
  int j = 1;

  double unit() const { return 2.0 * omega / (i + j); }
  double omega1() const { return i * unit(); }
  double omega2() const { return j * unit(); }
  double delta_omega() const { return omega1() - omega2(); }
  double period() const;
  /// exp(-i q omega T) = parity()^q since omega T = pi (i + j).
  int parity() const { return (i + j) % 2 == 0 ? 1 : -1; }
};

/// Chooses coprime i > j <= max_index with 2(i-j)/(i+j) within
/// `relative_tolerance` of the requested dOmega/omega, preferring the shortest
/// period (smallest i + j). Falls back to the closest ratio when no pair is in
/// tolerance. Throws ValidationError for detuning outside (0, 2).
DriveParams make_drive(double omega, double f0, double detuning, int max_index = 64,
                       double relative_tolerance = 0.05);

struct FloquetOptions {
  int steps_per_period = 600;
  // Integrate only [0, T/2] and use the time-reversal identity
  // U(T) = W^T P W, W = U(T/2, 0); otherwise integrate [0, T] directly.
  bool half_period = true;
  int column_block = 512;
  double leak_threshold = 1e-4;
  double max_unitarity_defect = 1e-6;
  double cluster_tolerance = 1e-7;
};

/// Lab-frame amplitudes C_{q,s}(t) from slow amplitudes b(t) (columns).
Eigen::MatrixXcd slow_to_lab(const ResonanceBasis& basis, const DriveParams& drive,
                             const Eigen::MatrixXcd& b, double t);
Eigen::MatrixXcd lab_to_slow(const ResonanceBasis& basis, const DriveParams& drive,
                             const Eigen::MatrixXcd& c, double t);

/// Integrates slow amplitudes from t0 to t1 (either direction) with `steps`
/// RK4 steps. Columns of `b` are independent solutions.
Eigen::MatrixXcd propagate_slow(const ResonanceBasis& basis, const DriveParams& drive,
                                const Eigen::MatrixXcd& b, double t0, double t1, int steps);

/// C_{q,s}(T) for the initial state delta_{q,q0} delta_{s,s0}, integrating the
/// full period directly.
Eigen::VectorXcd integrate_column(const ResonanceBasis& basis, const DriveParams& drive, int q0,
                                  int s0, int steps_per_period);

/// One-period propagator U(t1, t0) in the lab frame, integrating all columns.
Eigen::MatrixXcd evolution_matrix(const ResonanceBasis& basis, const DriveParams& drive,
                                  double t0, double t1, int steps, int column_block = 512);

struct FloquetOperator {
  DriveParams drive;
  double hbar0 = 0.0;
  int q_halfwidth = 0;
  int group_size = 0;
  Eigen::MatrixXcd U;             // U_{q,s;q',s'}(T), flat indices
  double unitarity_defect = 0.0;  // max |U^dag U - I|
  double symmetry_defect = 0.0;   // max |U - U^T|
  double edge_leakage = 0.0;      // max edge-group probability of a q = 0 column
  bool leak_flagged = false;
  Eigen::VectorXcd eigenvalues;   // lambda_Q = exp(-i eps_Q T / hbar0)
  Eigen::VectorXd quasienergies;  // folded into (-pi hbar0/T, pi hbar0/T]
  Eigen::MatrixXd eigenvectors;   // real orthonormal A^Q_{q,s}, one column per Q
  double eigen_residual = 0.0;    // max |U A - A lambda|

  int dimension() const { return static_cast<int>(U.rows()); }
  double zone() const;
};

/// Principal quasienergy zone (-a, a] with a = pi hbar0 / T.
double fold_quasienergy(double energy, double hbar0, double period);

/// Builds U and its eigendecomposition. Throws NumericalError when the
/// unitarity defect exceeds options.max_unitarity_defect.
FloquetOperator assemble_operator(const ResonanceBasis& basis, const DriveParams& drive,
                                  const FloquetOptions& options = {});

/// Eigenvectors and quasienergies of a (symmetric) unitary U. Uses that the
/// real and imaginary parts of a symmetric unitary commute, so a real
/// orthogonal eigenbasis exists.
void diagonalize_operator(FloquetOperator& op, double cluster_tolerance = 1e-7);

struct Delocalization {
  double q_bar = 0.0;
  double sigma_q = 0.0;
};

std::vector<Delocalization> delocalization_measures(const FloquetOperator& op);

}  // namespace qad
