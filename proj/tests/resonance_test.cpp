#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "fixtures.hpp"
#include "qad/errors.hpp"
#include "qad/resonance_basis.hpp"

using namespace qad;

namespace {

int floor_div2(int q) { return q >= 0 ? q / 2 : -((-q + 1) / 2); }

// Direct construction over |n0 + k, n0 + q - k> with every coupling in the band.
Eigen::MatrixXd brute_force_group(const OscillatorSpectrum& sp, const ResonanceParams& p, int q) {
  const int size = p.group_size();
  const int k0 = floor_div2(q) - p.k_halfwidth;
  const double e2 = sp.energies[p.n0 + 1] - 2.0 * sp.energies[p.n0] + sp.energies[p.n0 - 1];
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size, size);
  for (int a = 0; a < size; ++a) {
    const int k = k0 + a;
    h(a, a) = e2 * (k * k - q * k + 0.5 * q * q);
    for (int b = 0; b < size; ++b) {
      const int kp = k0 + b;
      if (a == b || std::abs(a - b) > sp.x.bandwidth()) continue;
      h(a, b) -= p.mu * sp.x(p.n0 + k, p.n0 + kp) * sp.x(p.n0 + q - k, p.n0 + q - kp);
    }
  }
  return h;
}

}  // namespace

TEST_CASE("group levels match a brute-force diagonalization") {
  const auto& sp = fixtures::small_spectrum();
  const auto& basis = fixtures::small_basis();
  for (int q = -2; q <= 2; ++q) {
    CAPTURE(q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(brute_force_group(sp, basis.params(), q));
    const Eigen::VectorXd& levels = basis.group(q).levels;
    const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    CHECK((levels - es.eigenvalues()).cwiseAbs().maxCoeff() < 1e-12 * scale);
  }
}

TEST_CASE("group eigenvectors are complete and orthonormal") {
  const auto& sp = fixtures::small_spectrum();
  const auto& basis = fixtures::small_basis();
  for (int q = -2; q <= 2; ++q) {
    CAPTURE(q);
    const GroupSpectrum& g = basis.group(q);
    const Eigen::MatrixXd& v = g.eigenvectors;
    const int n = basis.group_size();
    CHECK((v.transpose() * v - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((v * v.transpose() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::MatrixXd h = brute_force_group(sp, basis.params(), q);
    const Eigen::MatrixXd d = v.transpose() * h * v;
    CHECK((d - Eigen::MatrixXd(g.levels.asDiagonal())).cwiseAbs().maxCoeff() <
          1e-12 * g.levels.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("transition block is the coordinate element between group states") {
  const auto& sp = fixtures::small_spectrum();
  const auto& basis = fixtures::small_basis();
  const int n0 = basis.params().n0;
  const GroupSpectrum& g0 = basis.group(0);
  const GroupSpectrum& g1 = basis.group(1);
  // x acts on the first oscillator: |n0 + k, n0 - k> -> |n0 + k', n0 + 1 - k'> needs k' = k + 1.
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(basis.group_size(), basis.group_size());
  for (int a = 0; a < basis.group_size(); ++a) {
    const int k = g0.k_start + a;
    const int b = k + 1 - g1.k_start;
    if (b < 0 || b >= basis.group_size()) continue;
    x(a, b) = sp.x(n0 + k, n0 + k + 1);
  }
  const Eigen::MatrixXd expected = g0.eigenvectors.transpose() * x * g1.eigenvectors;
  CHECK((basis.up_block(0) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("separatrix level sits at the minimum of the pair spacing") {
  const auto& basis = fixtures::small_basis();
  const GroupSpectrum& g = basis.group(0);
  REQUIRE(g.classified());
  const Eigen::VectorXd& e = g.levels;
  int best = -1;
  double smallest = 1e300;
  for (int s = 1; s + 2 < e.size() - 1; ++s) {
    const double spacing = 0.5 * (e(s + 2) - e(s));
    if (spacing < smallest) {
      smallest = spacing;
      best = s;
    }
  }
  CHECK(std::abs(g.classes.separatrix_level - best) <= 1);
  const int w = basis.params().separatrix_window;
  CHECK(g.classes.separatrix.size() == static_cast<std::size_t>(2 * w + 1));
  CHECK(g.classes.inside.size() + g.classes.separatrix.size() + g.classes.above.size() ==
        static_cast<std::size_t>(basis.group_size()));
}

TEST_CASE("windows are centred on floor(q/2)") {
  const ResonanceParams p = fixtures::small_params();
  CHECK(window_start(p, 0) == -8);
  CHECK(window_start(p, 1) == -8);
  CHECK(window_start(p, 2) == -7);
  CHECK(window_start(p, -1) == -9);
}

TEST_CASE("a window beyond the oscillator spectrum is rejected") {
  ResonanceParams p = fixtures::small_params();
  p.n0 = 78;
  CHECK_THROWS_AS(diagonalize_groups(p, fixtures::small_spectrum()), ValidationError);
}
