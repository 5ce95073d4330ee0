#pragma once

// Eigenproblem of the one-dimensional quartic oscillator
//
//     H = p^2/2 + x^4/4,   [p, x] = -i hbar0,
//
// solved on a uniform symmetric grid with the sinc (infinite-order
// finite-difference) kinetic operator. Even and odd levels are obtained from
// separate half-grid problems. The same spectrum serves both oscillators of
// the coupled model since their Hamiltonians are identical.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace qad {

struct OscillatorParams {
  double hbar0 = 1.0;
  int n_max = 0;
  double grid_box_halfwidth = 0.0;  // 0 selects the WKB-based auto size
  int grid_points = 0;              // 0 selects the WKB-based auto size
  double box_margin = 1.5;          // box / outer turning point of level n_max
  double points_per_wavelength = 8.0;
  double convergence_tol = 1e-8;    // relative change of E_{n_max} on grid doubling
  int max_refinements = 2;
  int offset_cutoff = 15;           // largest |n - n'| kept in the x band
};

struct Grid {
  double halfwidth = 0.0;
  int points = 0;  // odd, x = 0 is a node

  int half_points() const { return (points - 1) / 2; }
  double spacing() const { return halfwidth / half_points(); }
  Grid doubled() const { return {halfwidth, 2 * points - 1}; }
};

/// Real symmetric matrix that keeps only |n - n'| <= bandwidth.
class BandedSymmetric {
 public:
  BandedSymmetric() = default;
  BandedSymmetric(int size, int bandwidth);

  int size() const { return size_; }
  int bandwidth() const { return bandwidth_; }

  /// Zero outside the band or outside [0, size).
  double operator()(int n, int m) const;
  void set(int n, int m, double value);

  const std::vector<double>& raw() const { return data_; }
  std::vector<double>& raw() { return data_; }

 private:
  int size_ = 0;
  int bandwidth_ = 0;
  std::vector<double> data_;  // row n, offset d in [0, bandwidth] -> n*(bw+1)+d
};

struct OscillatorSpectrum {
  double hbar0 = 1.0;
  int n_max = 0;
  Grid grid;
  std::vector<double> energies;  // E_0 .. E_{n_max}
  BandedSymmetric x;             // coordinate matrix elements x_{n,n'}
  // Values sqrt(h) * psi_n(x_i) on the non-negative half grid, one column per
  // level; the parity (-1)^n extends them to x < 0. May be empty when the
  // spectrum was restored from a cache file without wavefunctions.
  Eigen::MatrixXd half_grid_wavefunctions;
  double convergence_change = 0.0;  // |dE_{n_max}|/E_{n_max} under grid doubling

  bool has_wavefunctions() const { return half_grid_wavefunctions.cols() > 0; }
  /// sqrt(h) * psi_n at grid node i in [-M, M].
  double psi(int n, int node) const;
  double node_position(int node) const { return node * grid.spacing(); }
};

/// WKB estimate of E_n: the action integral equals 2 pi hbar0 (n + 1/2).
double wkb_energy(double hbar0, double n);

/// Auto-sized grid for `params` (box margin and wavelength resolution).
Grid resolve_grid(const OscillatorParams& params);

/// Throws ValidationError("grid-too-small ...") when `grid` violates the box or
/// resolution invariants for level n_max.
void validate_grid(const OscillatorParams& params, const Grid& grid);

/// Eigenvalues (and optionally eigenvectors) on a fixed grid, no convergence loop.
OscillatorSpectrum solve_on_grid(double hbar0, int n_max, const Grid& grid,
                                 int offset_cutoff, bool want_vectors = true);

/// Converged spectrum: solves on the resolved grid and confirms that doubling
/// the grid moves E_{n_max} by less than convergence_tol, refining up to
/// max_refinements times before throwing NumericalError.
OscillatorSpectrum solve_spectrum(const OscillatorParams& params);

/// omega_n = (E_{n+1} - E_{n-1}) / (2 hbar0); requires 1 <= n <= n_max - 1.
double level_frequency(const OscillatorSpectrum& spectrum, int n);

/// E''_n = E_{n+1} - 2 E_n + E_{n-1}; requires 1 <= n <= n_max - 1.
double anharmonicity(const OscillatorSpectrum& spectrum, int n);

/// Band of x_{n,n'} truncated at |n - n'| <= offset_cutoff; entries smaller than
/// relative_tol * |x_{n,n+1}| are dropped.
BandedSymmetric position_matrix_elements(const OscillatorSpectrum& spectrum,
                                         int offset_cutoff,
                                         double relative_tol = 1e-14);

}  // namespace qad
