#include "qad/quartic_oscillator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qad/errors.hpp"
#include "qad/linalg.hpp"

namespace qad {

namespace {

// ∫_0^1 sqrt(1 - u^4) du = Γ(1/4)^2 / (6 sqrt(2π)); the action of the quartic
// well is ∮ p dx = 8 J E^{3/4}.
double action_constant() {
  const double g = std::tgamma(0.25);
  return 8.0 * g * g / (6.0 * std::sqrt(2.0 * std::numbers::pi));
}

double turning_point(double energy) { return std::pow(4.0 * energy, 0.25); }

double shortest_wavelength(double hbar0, double energy) {
  return 2.0 * std::numbers::pi * hbar0 / std::sqrt(2.0 * energy);
}

// Sinc-DVR kinetic matrix element for node distance d.
double kinetic(double prefactor, long d) {
  if (d == 0) return prefactor * std::numbers::pi * std::numbers::pi / 3.0;
  const double sign = (d % 2 == 0) ? 1.0 : -1.0;
  return prefactor * 2.0 * sign / static_cast<double>(d * d);
}

Eigen::MatrixXd sector_hamiltonian(double hbar0, const Grid& grid, bool even) {
  const int m = grid.half_points();
  const double h = grid.spacing();
  const double pref = hbar0 * hbar0 / (2.0 * h * h);
  const int first = even ? 0 : 1;
  const int size = m + 1 - first;
  Eigen::MatrixXd a(size, size);
  for (int c = 0; c < size; ++c) {
    const long j = c + first;
    for (int r = c; r < size; ++r) {
      const long i = r + first;
      double v = kinetic(pref, i - j) + (even ? 1.0 : -1.0) * kinetic(pref, i + j);
      if (even && (i == 0 || j == 0)) {
        v = (i == 0 && j == 0) ? kinetic(pref, 0) : std::sqrt(2.0) * kinetic(pref, i + j);
      }
      if (i == j) {
        const double xi = static_cast<double>(i) * h;
        v += 0.25 * xi * xi * xi * xi;
      }
      a(r, c) = v;
    }
  }
  return a;
}

int even_count(int n_max) { return n_max / 2 + 1; }
int odd_count(int n_max) { return (n_max + 1) / 2; }

}  // namespace

BandedSymmetric::BandedSymmetric(int size, int bandwidth)
    : size_(size),
      bandwidth_(bandwidth),
      data_(static_cast<std::size_t>(size) * (bandwidth + 1), 0.0) {}

double BandedSymmetric::operator()(int n, int m) const {
  if (n > m) std::swap(n, m);
  if (n < 0 || m >= size_ || m - n > bandwidth_) return 0.0;
  return data_[static_cast<std::size_t>(n) * (bandwidth_ + 1) + (m - n)];
}

void BandedSymmetric::set(int n, int m, double value) {
  if (n > m) std::swap(n, m);
  require(n >= 0 && m < size_ && m - n <= bandwidth_, "BandedSymmetric::set out of band");
  data_[static_cast<std::size_t>(n) * (bandwidth_ + 1) + (m - n)] = value;
}

double OscillatorSpectrum::psi(int n, int node) const {
  const double v = half_grid_wavefunctions(std::abs(node), n);
  return (node < 0 && n % 2 == 1) ? -v : v;
}

double wkb_energy(double hbar0, double n) {
  return std::pow(2.0 * std::numbers::pi * hbar0 * (n + 0.5) / action_constant(), 4.0 / 3.0);
}

Grid resolve_grid(const OscillatorParams& params) {
  require(params.hbar0 > 0.0, "hbar0 must be positive");
  require(params.n_max >= 0, "n_max must be non-negative");
  const double e_top = wkb_energy(params.hbar0, params.n_max);
  Grid grid;
  grid.halfwidth = params.grid_box_halfwidth > 0.0
                       ? params.grid_box_halfwidth
                       : params.box_margin * turning_point(e_top);
  if (params.grid_points > 0) {
    grid.points = params.grid_points | 1;
  } else {
    const double h_max = shortest_wavelength(params.hbar0, e_top) / params.points_per_wavelength;
    const int half = static_cast<int>(std::ceil(grid.halfwidth / h_max));
    grid.points = 2 * std::max(half, 1) + 1;
  }
  return grid;
}

void validate_grid(const OscillatorParams& params, const Grid& grid) {
  require(params.box_margin >= 1.5, "box_margin must be at least 1.5");
  require(params.points_per_wavelength >= 8.0, "points_per_wavelength must be at least 8");
  if (grid.points < 3 || grid.points % 2 == 0) {
    throw ValidationError("grid-too-small: grid_points must be odd and >= 3");
  }
  const double e_top = wkb_energy(params.hbar0, params.n_max);
  const double needed_box = params.box_margin * turning_point(e_top);
  if (grid.halfwidth < needed_box * (1.0 - 1e-12)) {
    throw ValidationError("grid-too-small: box half-width " + std::to_string(grid.halfwidth) +
                          " below " + std::to_string(needed_box) +
                          " (margin x turning point of level n_max)");
  }
  const double h_max = shortest_wavelength(params.hbar0, e_top) / params.points_per_wavelength;
  if (grid.spacing() > h_max * (1.0 + 1e-12)) {
    throw ValidationError("grid-too-small: spacing " + std::to_string(grid.spacing()) +
                          " does not resolve the shortest wavelength (need <= " +
                          std::to_string(h_max) + ")");
  }
  if (grid.half_points() < params.n_max + 2) {
    throw ValidationError("grid-too-small: fewer nodes than requested levels");
  }
}

OscillatorSpectrum solve_on_grid(double hbar0, int n_max, const Grid& grid, int offset_cutoff,
                                 bool want_vectors) {
  require(offset_cutoff >= 1, "offset_cutoff must be >= 1");
  const int m = grid.half_points();
  const double h = grid.spacing();
  const int ne = even_count(n_max);
  const int no = odd_count(n_max);
  require(ne <= m + 1 && no <= m, "grid has fewer nodes than requested levels");

  auto even = linalg::symmetric_eigen(sector_hamiltonian(hbar0, grid, true), ne, want_vectors);
  linalg::SymmetricEigenResult odd;
  if (no > 0) odd = linalg::symmetric_eigen(sector_hamiltonian(hbar0, grid, false), no, want_vectors);

  OscillatorSpectrum s;
  s.hbar0 = hbar0;
  s.n_max = n_max;
  s.grid = grid;
  s.energies.resize(n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    s.energies[n] = (n % 2 == 0) ? even.values(n / 2) : odd.values(n / 2);
  }
  for (int n = 1; n <= n_max; ++n) {
    if (!(s.energies[n] > s.energies[n - 1]) || s.energies[0] <= 0.0) {
      throw NumericalError("quartic spectrum is not strictly increasing at n=" + std::to_string(n));
    }
  }
  if (!want_vectors) return s;

  Eigen::MatrixXd& wf = s.half_grid_wavefunctions;
  wf.setZero(m + 1, n_max + 1);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int n = 0; n <= n_max; ++n) {
    if (n % 2 == 0) {
      const auto u = even.vectors.col(n / 2);
      wf(0, n) = u(0);
      for (int i = 1; i <= m; ++i) wf(i, n) = u(i) * inv_sqrt2;
    } else {
      const auto w = odd.vectors.col(n / 2);
      for (int i = 1; i <= m; ++i) wf(i, n) = w(i - 1) * inv_sqrt2;
    }
  }

  Eigen::VectorXd xnodes(m + 1);
  for (int i = 0; i <= m; ++i) xnodes(i) = i * h;
  // Full-grid quadrature of an even*odd product folds to twice the x > 0 half.
  auto overlap_x = [&](int a, int b) {
    return 2.0 * (wf.col(a).array() * wf.col(b).array() * xnodes.array()).sum();
  };

  // Sign convention: psi_0(0) > 0 and x_{n-1,n} > 0.
  if (wf(0, 0) < 0.0) wf.col(0) *= -1.0;
  for (int n = 1; n <= n_max; ++n) {
    if (overlap_x(n - 1, n) < 0.0) wf.col(n) *= -1.0;
  }

  const int bw = std::min(offset_cutoff, std::max(n_max, 1));
  s.x = BandedSymmetric(n_max + 1, bw);
  for (int n = 0; n <= n_max; ++n) {
    for (int d = 1; d <= bw && n + d <= n_max; d += 2) s.x.set(n, n + d, overlap_x(n, n + d));
  }
  return s;
}

OscillatorSpectrum solve_spectrum(const OscillatorParams& params) {
  Grid grid = resolve_grid(params);
  validate_grid(params, grid);
  OscillatorSpectrum base = solve_on_grid(params.hbar0, params.n_max, grid, params.offset_cutoff);
  for (int attempt = 0; attempt <= params.max_refinements; ++attempt) {
    const Grid fine = grid.doubled();
    const OscillatorSpectrum check =
        solve_on_grid(params.hbar0, params.n_max, fine, params.offset_cutoff, false);
    const double top = base.energies.back();
    const double change = std::abs(check.energies.back() - top) / top;
    if (change < params.convergence_tol) {
      base.convergence_change = change;
      return base;
    }
    grid = fine;
    base = solve_on_grid(params.hbar0, params.n_max, grid, params.offset_cutoff);
  }
  throw NumericalError("quartic spectrum did not converge under grid doubling");
}

double level_frequency(const OscillatorSpectrum& spectrum, int n) {
  require(n >= 1 && n <= spectrum.n_max - 1, "level_frequency: index out of range");
  return (spectrum.energies[n + 1] - spectrum.energies[n - 1]) / (2.0 * spectrum.hbar0);
}

double anharmonicity(const OscillatorSpectrum& spectrum, int n) {
  require(n >= 1 && n <= spectrum.n_max - 1, "anharmonicity: index out of range");
  return spectrum.energies[n + 1] - 2.0 * spectrum.energies[n] + spectrum.energies[n - 1];
}

BandedSymmetric position_matrix_elements(const OscillatorSpectrum& spectrum, int offset_cutoff,
                                         double relative_tol) {
  require(offset_cutoff >= 1, "offset_cutoff must be >= 1");
  if (offset_cutoff > spectrum.x.bandwidth() || offset_cutoff > spectrum.n_max) {
    throw ValidationError("offset cutoff " + std::to_string(offset_cutoff) +
                          " exceeds the available basis");
  }
  BandedSymmetric out(spectrum.n_max + 1, offset_cutoff);
  for (int n = 0; n <= spectrum.n_max; ++n) {
    const double ref = std::max(std::abs(spectrum.x(n, n + 1)), std::abs(spectrum.x(n, n - 1)));
    for (int d = 1; d <= offset_cutoff && n + d <= spectrum.n_max; d += 2) {
      const double v = spectrum.x(n, n + d);
      if (std::abs(v) >= relative_tol * ref) out.set(n, n + d, v);
    }
  }
  return out;
}

}  // namespace qad
