#include "qad/floquet_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "qad/errors.hpp"
#include "qad/linalg.hpp"

namespace qad {

namespace {

using cd = std::complex<double>;

// Slow-amplitude right-hand side on a real-split state: columns [0, m) hold
// Re b, columns [m, 2m) hold Im b, for m independent solutions.
class SlowSystem {
 public:
  SlowSystem(const ResonanceBasis& basis, const DriveParams& drive)
      : basis_(basis),
        size_(basis.group_size()),
        groups_(basis.params().group_count()),
        rate_(basis.flat_levels() / basis.scales().hbar0),
        coupling_(drive.f0 / basis.scales().hbar0),
        half_delta_(0.5 * drive.delta_omega()) {}

  int dimension() const { return size_ * groups_; }

  void rhs(double t, const Eigen::MatrixXd& y, Eigen::MatrixXd& out) {
    const Eigen::Index m = y.cols() / 2;
    const Eigen::ArrayXd c = (rate_ * t).array().cos();
    const Eigen::ArrayXd s = (rate_ * t).array().sin();
    work_.resize(y.rows(), y.cols());
    // a = exp(-i E t / hbar0) b
    work_.leftCols(m).array() =
        y.leftCols(m).array().colwise() * c + y.rightCols(m).array().colwise() * s;
    work_.rightCols(m).array() =
        y.rightCols(m).array().colwise() * c - y.leftCols(m).array().colwise() * s;

    out.resize(y.rows(), y.cols());
    for (int g = 0; g < groups_; ++g) {
      const int q = g - basis_.q_halfwidth();
      auto rows = out.middleRows(static_cast<Eigen::Index>(g) * size_, size_);
      if (g + 1 < groups_) {
        rows.noalias() = basis_.up_block(q) * work_.middleRows(static_cast<Eigen::Index>(g + 1) * size_, size_);
      } else {
        rows.setZero();
      }
      if (g > 0) {
        rows.noalias() += basis_.up_block(q - 1).transpose() *
                          work_.middleRows(static_cast<Eigen::Index>(g - 1) * size_, size_);
      }
    }

    // db/dt = i (f0/hbar0) cos(dOmega t/2) exp(+i E t/hbar0) y
    const double kappa = coupling_ * std::cos(half_delta_ * t);
    work_.leftCols(m).array() = -kappa * (out.rightCols(m).array().colwise() * c +
                                          out.leftCols(m).array().colwise() * s);
    work_.rightCols(m).array() = kappa * (out.leftCols(m).array().colwise() * c -
                                          out.rightCols(m).array().colwise() * s);
    out.swap(work_);
  }

  void propagate(Eigen::MatrixXd& y, double t0, double t1, int steps) {
    require(steps >= 1, "integrator needs at least one step");
    if (coupling_ == 0.0) return;
    const double h = (t1 - t0) / steps;
    Eigen::MatrixXd k, acc, tmp;
    for (int n = 0; n < steps; ++n) {
      const double t = t0 + n * h;
      rhs(t, y, k);
      acc = y + (h / 6.0) * k;
      tmp = y + (0.5 * h) * k;
      rhs(t + 0.5 * h, tmp, k);
      acc += (h / 3.0) * k;
      tmp = y + (0.5 * h) * k;
      rhs(t + 0.5 * h, tmp, k);
      acc += (h / 3.0) * k;
      tmp = y + h * k;
      rhs(t + h, tmp, k);
      y = acc + (h / 6.0) * k;
    }
    if (!y.allFinite()) throw NumericalError("slow-amplitude integration produced non-finite values");
  }

 private:
  const ResonanceBasis& basis_;
  int size_;
  int groups_;
  Eigen::VectorXd rate_;
  double coupling_;
  double half_delta_;
  Eigen::MatrixXd work_;
};

Eigen::MatrixXd split(const Eigen::MatrixXcd& z) {
  Eigen::MatrixXd y(z.rows(), 2 * z.cols());
  y.leftCols(z.cols()) = z.real();
  y.rightCols(z.cols()) = z.imag();
  return y;
}

Eigen::MatrixXcd join(const Eigen::MatrixXd& y) {
  const Eigen::Index m = y.cols() / 2;
  Eigen::MatrixXcd z(y.rows(), m);
  z.real() = y.leftCols(m);
  z.imag() = y.rightCols(m);
  return z;
}

// exp[-i (q omega + E^M/hbar0) t] per flat index.
Eigen::VectorXcd lab_phase(const ResonanceBasis& basis, const DriveParams& drive, double t) {
  const Eigen::VectorXd levels = basis.flat_levels();
  const double hbar0 = basis.scales().hbar0;
  Eigen::VectorXcd phase(levels.size());
  for (Eigen::Index r = 0; r < levels.size(); ++r) {
    const int q = basis.group_of(static_cast<int>(r));
    phase(r) = std::polar(1.0, -(q * drive.omega + levels(r) / hbar0) * t);
  }
  return phase;
}

// Same phase at t = T with exp(-i q omega T) taken as the exact sign.
Eigen::VectorXcd period_phase(const ResonanceBasis& basis, const DriveParams& drive) {
  const Eigen::VectorXd levels = basis.flat_levels();
  const double hbar0 = basis.scales().hbar0;
  const double period = drive.period();
  Eigen::VectorXcd phase(levels.size());
  for (Eigen::Index r = 0; r < levels.size(); ++r) {
    const int q = basis.group_of(static_cast<int>(r));
    const double sign = (drive.parity() < 0 && (q % 2 != 0)) ? -1.0 : 1.0;
    phase(r) = sign * std::polar(1.0, -levels(r) / hbar0 * period);
  }
  return phase;
}

void validate_drive(const DriveParams& drive) {
  require(drive.f0 >= 0.0, "f0 must be non-negative");
  require(drive.omega > 0.0, "drive centre frequency must be positive");
  require(drive.i > drive.j && drive.j >= 1, "drive indices need i > j >= 1");
  require(std::gcd(drive.i, drive.j) == 1, "drive indices i, j must be coprime");
}

}  // namespace

double DriveParams::period() const { return 2.0 * std::numbers::pi / unit(); }

DriveParams make_drive(double omega, double f0, double detuning, int max_index,
                       double relative_tolerance) {
  require(omega > 0.0, "omega must be positive");
  require(detuning > 0.0 && detuning < 2.0, "detuning dOmega/omega must lie in (0, 2)");
  require(max_index >= 2, "max_index must be >= 2");
  DriveParams best;
  best.f0 = f0;
  best.omega = omega;
  int best_sum = 0;
  double best_error = 0.0;
  bool best_in_tol = false;
  for (int j = 1; j <= max_index; ++j) {
    for (int i = j + 1; i <= max_index; ++i) {
      if (std::gcd(i, j) != 1) continue;
      const double x = 2.0 * (i - j) / static_cast<double>(i + j);
      const double err = std::abs(x / detuning - 1.0);
      const bool in_tol = err <= relative_tolerance;
      bool take = false;
      if (best_sum == 0) take = true;
      else if (in_tol && !best_in_tol) take = true;
      else if (in_tol && best_in_tol)
        take = (i + j < best_sum) || (i + j == best_sum && err < best_error);
      else if (!in_tol && !best_in_tol) take = err < best_error;
      if (take) {
        best.i = i;
        best.j = j;
        best_sum = i + j;
        best_error = err;
        best_in_tol = in_tol;
      }
    }
  }
  return best;
}

Eigen::MatrixXcd slow_to_lab(const ResonanceBasis& basis, const DriveParams& drive,
                             const Eigen::MatrixXcd& b, double t) {
  return lab_phase(basis, drive, t).asDiagonal() * b;
}

Eigen::MatrixXcd lab_to_slow(const ResonanceBasis& basis, const DriveParams& drive,
                             const Eigen::MatrixXcd& c, double t) {
  return lab_phase(basis, drive, t).conjugate().asDiagonal() * c;
}

Eigen::MatrixXcd propagate_slow(const ResonanceBasis& basis, const DriveParams& drive,
                                const Eigen::MatrixXcd& b, double t0, double t1, int steps) {
  validate_drive(drive);
  require(b.rows() == basis.dimension(), "state dimension does not match the basis");
  SlowSystem system(basis, drive);
  Eigen::MatrixXd y = split(b);
  system.propagate(y, t0, t1, steps);
  return join(y);
}

Eigen::VectorXcd integrate_column(const ResonanceBasis& basis, const DriveParams& drive, int q0,
                                  int s0, int steps_per_period) {
  validate_drive(drive);
  require(std::abs(q0) <= basis.q_halfwidth(), "q0 outside the basis");
  require(s0 >= 0 && s0 < basis.group_size(), "s0 outside the group");
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(basis.dimension(), 1);
  b(basis.flat_index(q0, s0), 0) = 1.0;
  b = propagate_slow(basis, drive, b, 0.0, drive.period(), steps_per_period);
  return period_phase(basis, drive).asDiagonal() * b.col(0);
}

Eigen::MatrixXcd evolution_matrix(const ResonanceBasis& basis, const DriveParams& drive,
                                  double t0, double t1, int steps, int column_block) {
  validate_drive(drive);
  const int n = basis.dimension();
  const int block = std::max(1, column_block);
  SlowSystem system(basis, drive);
  const Eigen::VectorXcd start = lab_phase(basis, drive, t0).conjugate();
  Eigen::MatrixXcd out(n, n);
  for (int c0 = 0; c0 < n; c0 += block) {
    const int m = std::min(block, n - c0);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, 2 * m);
    for (int c = 0; c < m; ++c) {
      y(c0 + c, c) = start(c0 + c).real();
      y(c0 + c, m + c) = start(c0 + c).imag();
    }
    system.propagate(y, t0, t1, steps);
    out.middleCols(c0, m) = join(y);
  }
  return lab_phase(basis, drive, t1).asDiagonal() * out;
}

double FloquetOperator::zone() const { return std::numbers::pi * hbar0 / drive.period(); }

double fold_quasienergy(double energy, double hbar0, double period) {
  const double a = std::numbers::pi * hbar0 / period;
  return energy + 2.0 * a * std::floor((a - energy) / (2.0 * a));
}

FloquetOperator assemble_operator(const ResonanceBasis& basis, const DriveParams& drive,
                                  const FloquetOptions& options) {
  validate_drive(drive);
  require(options.steps_per_period >= 2, "steps_per_period must be >= 2");
  FloquetOperator op;
  op.drive = drive;
  op.hbar0 = basis.scales().hbar0;
  op.q_halfwidth = basis.q_halfwidth();
  op.group_size = basis.group_size();
  const double period = drive.period();

  if (options.half_period) {
    const int n = basis.dimension();
    const int block = std::max(1, options.column_block);
    SlowSystem system(basis, drive);
    const int half_steps = std::max(1, options.steps_per_period / 2);
    Eigen::MatrixXcd w(n, n);
    for (int c0 = 0; c0 < n; c0 += block) {
      const int m = std::min(block, n - c0);
      Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, 2 * m);
      for (int c = 0; c < m; ++c) y(c0 + c, c) = 1.0;
      system.propagate(y, 0.0, 0.5 * period, half_steps);
      w.middleCols(c0, m) = join(y);
    }
    const Eigen::MatrixXcd pw = period_phase(basis, drive).asDiagonal() * w;
    op.U.noalias() = w.transpose() * pw;
  } else {
    op.U = evolution_matrix(basis, drive, 0.0, period, options.steps_per_period,
                            options.column_block);
  }

  Eigen::MatrixXcd gram = op.U.adjoint() * op.U;
  gram.diagonal().array() -= 1.0;
  op.unitarity_defect = gram.cwiseAbs().maxCoeff();
  op.symmetry_defect = (op.U - op.U.transpose()).cwiseAbs().maxCoeff();
  if (!(op.unitarity_defect <= options.max_unitarity_defect)) {
    throw NumericalError("Floquet operator unitarity defect " +
                         std::to_string(op.unitarity_defect) + " exceeds " +
                         std::to_string(options.max_unitarity_defect) +
                         " (increase steps_per_period)");
  }

  const int size = basis.group_size();
  const int Q = basis.q_halfwidth();
  for (int s = 0; s < size; ++s) {
    const int col = basis.flat_index(0, s);
    const double edge = op.U.col(col).segment(basis.flat_index(-Q, 0), size).squaredNorm() +
                        op.U.col(col).segment(basis.flat_index(Q, 0), size).squaredNorm();
    op.edge_leakage = std::max(op.edge_leakage, edge);
  }
  op.leak_flagged = op.edge_leakage > options.leak_threshold;

  diagonalize_operator(op, options.cluster_tolerance);
  return op;
}

void diagonalize_operator(FloquetOperator& op, double cluster_tolerance) {
  const int n = op.dimension();
  require(n > 0, "empty operator");
  // Nearest unitary by Newton-Schulz steps X <- X (3 - X^dag X)/2, which keep
  // X symmetric; the real and imaginary parts then commute to rounding.
  Eigen::MatrixXcd sym = 0.5 * (op.U + op.U.transpose());
  for (int iter = 0; iter < 4; ++iter) {
    Eigen::MatrixXcd gram = sym.adjoint() * sym;
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() < 1e-14) break;
    sym -= 0.5 * (sym * gram);
    sym = 0.5 * (sym + sym.transpose()).eval();
  }
  const Eigen::MatrixXd re = sym.real();
  const Eigen::MatrixXd im = sym.imag();
  // Generic real combination: distinct unit-circle eigenvalues rarely collide.
  const double c1 = 0.5 * (std::sqrt(5.0) - 1.0);
  auto eig = linalg::symmetric_eigen(re + c1 * im);
  Eigen::MatrixXd vectors = std::move(eig.vectors);

  // Near-collisions of re + c1 im: rediagonalize inside each cluster with
  // a different combination.
  const double c2 = std::sqrt(2.0) - 1.0;
  for (int start = 0; start < n;) {
    int end = start + 1;
    while (end < n && eig.values(end) - eig.values(end - 1) < cluster_tolerance) ++end;
    const int width = end - start;
    if (width > 1) {
      const Eigen::MatrixXd v = vectors.middleCols(start, width);
      const Eigen::MatrixXd small = v.transpose() * (re * v) - c2 * (v.transpose() * (im * v));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> local(0.5 * (small + small.transpose()));
      vectors.middleCols(start, width) = v * local.eigenvectors();
    }
    start = end;
  }

  const Eigen::MatrixXcd uv = sym * vectors;
  op.eigenvalues.resize(n);
  for (int k = 0; k < n; ++k) op.eigenvalues(k) = vectors.col(k).dot(uv.col(k).real()) +
                                                  cd(0.0, 1.0) * vectors.col(k).dot(uv.col(k).imag());
  op.eigen_residual = 0.0;
  for (int k = 0; k < n; ++k) {
    const double r = (uv.col(k) - op.eigenvalues(k) * vectors.col(k)).cwiseAbs().maxCoeff();
    op.eigen_residual = std::max(op.eigen_residual, r);
  }
  const double period = op.drive.period();
  op.quasienergies.resize(n);
  for (int k = 0; k < n; ++k) {
    op.quasienergies(k) =
        fold_quasienergy(-op.hbar0 / period * std::arg(op.eigenvalues(k)), op.hbar0, period);
  }
  op.eigenvectors = std::move(vectors);
}

std::vector<Delocalization> delocalization_measures(const FloquetOperator& op) {
  const int n = op.dimension();
  const int size = op.group_size;
  std::vector<Delocalization> out(n);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd weight(2 * op.q_halfwidth + 1);
    for (int g = 0; g < weight.size(); ++g) {
      weight(g) = op.eigenvectors.col(k).segment(static_cast<Eigen::Index>(g) * size, size).squaredNorm();
    }
    double mean = 0.0;
    for (int g = 0; g < weight.size(); ++g) mean += (g - op.q_halfwidth) * weight(g);
    double var = 0.0;
    for (int g = 0; g < weight.size(); ++g) {
      const double d = (g - op.q_halfwidth) - mean;
      var += d * d * weight(g);
    }
    out[k] = {mean, var};
  }
  return out;
}

}  // namespace qad
