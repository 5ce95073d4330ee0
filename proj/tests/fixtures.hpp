#pragma once

// Small systems shared by the unit tests.

#include <Eigen/Dense>

#include "qad/floquet_engine.hpp"
#include "qad/quartic_oscillator.hpp"
#include "qad/resonance_basis.hpp"

namespace fixtures {

// hbar0 = 1e-3, levels 0..80.
inline const qad::OscillatorSpectrum& small_spectrum() {
  static const qad::OscillatorSpectrum s = qad::solve_spectrum({1e-3, 80});
  return s;
}

inline qad::ResonanceParams small_params(double mu = 1e-3) {
  qad::ResonanceParams p;
  p.mu = mu;
  p.n0 = 40;
  p.k_halfwidth = 8;
  p.q_halfwidth = 2;
  p.separatrix_window = 3;
  return p;
}

inline const qad::ResonanceBasis& small_basis() {
  static const qad::ResonanceBasis b = qad::diagonalize_groups(small_params(), small_spectrum());
  return b;
}

// Drive strength in units of hbar0 omega / max|x| of the q=0 -> 1 block.
inline qad::DriveParams small_drive(double strength) {
  const auto& b = small_basis();
  const double x = b.up_block(0).cwiseAbs().maxCoeff();
  return qad::make_drive(b.scales().omega, strength * b.scales().hbar_omega() / x, 0.2);
}

inline qad::FloquetOperator small_operator(double strength) {
  qad::FloquetOptions o;
  o.steps_per_period = 800;
  return qad::assemble_operator(small_basis(), small_drive(strength), o);
}

}  // namespace fixtures
