#include "qad/quantum_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qad/errors.hpp"

namespace qad {

InitialKind parse_initial_kind(const std::string& name) {
  if (name == "center") return InitialKind::Center;
  if (name == "separatrix") return InitialKind::Separatrix;
  if (name == "above") return InitialKind::Above;
  throw ValidationError("unknown initial state '" + name + "' (expected center|separatrix|above)");
}

std::string to_string(InitialKind kind) {
  switch (kind) {
    case InitialKind::Center: return "center";
    case InitialKind::Separatrix: return "separatrix";
    default: return "above";
  }
}

PacketState basis_state(const ResonanceBasis& basis, int q, int s) {
  require(std::abs(q) <= basis.q_halfwidth(),
          "q_start=" + std::to_string(q) + " outside [-Q, Q] with Q=" +
              std::to_string(basis.q_halfwidth()));
  require(s >= 0 && s < basis.group_size(), "level index " + std::to_string(s) + " out of range");
  PacketState p;
  p.C = Eigen::VectorXcd::Zero(basis.dimension());
  p.C(basis.flat_index(q, s)) = 1.0;
  return p;
}

PacketState make_initial_state(const ResonanceBasis& basis, InitialKind kind, int q_start,
                               int above_index) {
  require(std::abs(q_start) <= basis.q_halfwidth(),
          "q_start=" + std::to_string(q_start) + " outside [-Q, Q] with Q=" +
              std::to_string(basis.q_halfwidth()));
  const GroupSpectrum& g = basis.group(q_start);
  if (kind == InitialKind::Center) return basis_state(basis, q_start, 0);
  require(g.classified(), "group q=" + std::to_string(q_start) +
                              " has no separatrix classification (increase mu or K)");
  if (kind == InitialKind::Separatrix) {
    return basis_state(basis, q_start, g.classes.separatrix_level);
  }
  require(above_index >= 0 && above_index < static_cast<int>(g.classes.above.size()),
          "above_index=" + std::to_string(above_index) + " exceeds the above-separatrix set (" +
              std::to_string(g.classes.above.size()) + " states)");
  return basis_state(basis, q_start, g.classes.above[above_index]);
}

Observables measure(const ResonanceBasis& basis, const Eigen::VectorXcd& C) {
  const int Q = basis.q_halfwidth();
  const int m = basis.group_size();
  const double hw = basis.scales().hbar_omega();
  Observables o;
  double first = 0.0, second = 0.0, within = 0.0;
  for (int q = -Q; q <= Q; ++q) {
    const auto& levels = basis.group(q).levels;
    double p = 0.0, e1 = 0.0, e2 = 0.0;
    for (int s = 0; s < m; ++s) {
      const double w = std::norm(C(basis.flat_index(q, s)));
      const double e = levels(s) / hw;
      p += w;
      e1 += w * e;
      e2 += w * e * e;
    }
    first += p * q;
    second += p * q * q;
    if (p > 0.0) within += e2 - e1 * e1 / p;
    if (std::abs(q) == Q) o.edge_probability += p;
    o.norm += p;
  }
  o.q_mean = first;
  o.delta_q = std::max(0.0, second - first * first);
  o.group_variance = std::max(0.0, within);
  return o;
}

namespace {

Eigen::VectorXd phase_angles(const FloquetOperator& op) {
  return -op.quasienergies * (op.drive.period() / op.hbar0);
}

}  // namespace

Eigen::MatrixXcd spectral_state(const FloquetOperator& op, const Eigen::MatrixXcd& psi0, int N) {
  require(psi0.rows() == op.dimension(), "state dimension does not match the operator");
  const Eigen::MatrixXd& V = op.eigenvectors;
  const Eigen::VectorXd angles = phase_angles(op);
  Eigen::MatrixXcd c = V.transpose() * psi0;
  for (Eigen::Index Q = 0; Q < c.rows(); ++Q) {
    c.row(Q) *= std::polar(1.0, std::remainder(angles(Q) * N, 2.0 * M_PI));
  }
  return V * c;
}

std::vector<PacketTrajectory> evolve(const FloquetOperator& op, const ResonanceBasis& basis,
                                     const std::vector<PacketState>& initial, int N_max) {
  require(N_max >= 1, "N_max must be >= 1");
  require(op.dimension() == basis.dimension(), "operator and basis dimensions differ");
  const int count = static_cast<int>(initial.size());
  const int dim = op.dimension();
  Eigen::MatrixXcd psi0(dim, count);
  for (int c = 0; c < count; ++c) {
    require(initial[c].C.size() == dim, "initial state dimension does not match the basis");
    require(std::abs(initial[c].C.norm() - 1.0) < 1e-10, "initial state is not normalized");
    psi0.col(c) = initial[c].C;
  }

  const Eigen::MatrixXd& V = op.eigenvectors;
  const Eigen::VectorXd angles = phase_angles(op);
  const Eigen::MatrixXcd c0 = V.transpose() * psi0;
  Eigen::MatrixXd re(dim, count), im(dim, count);

  std::vector<PacketTrajectory> out(count);
  for (auto& t : out) {
    t.N.reserve(N_max + 1);
  }
  for (int N = 0; N <= N_max; ++N) {
    for (Eigen::Index Q = 0; Q < dim; ++Q) {
      const std::complex<double> ph = std::polar(1.0, std::remainder(angles(Q) * N, 2.0 * M_PI));
      for (int c = 0; c < count; ++c) {
        const std::complex<double> v = ph * c0(Q, c);
        re(Q, c) = v.real();
        im(Q, c) = v.imag();
      }
    }
    const Eigen::MatrixXd cr = V * re;
    const Eigen::MatrixXd ci = V * im;
    for (int c = 0; c < count; ++c) {
      Eigen::VectorXcd C(dim);
      C.real() = cr.col(c);
      C.imag() = ci.col(c);
      const Observables o = measure(basis, C);
      PacketTrajectory& t = out[c];
      t.N.push_back(N);
      t.q_mean.push_back(o.q_mean);
      t.delta_q.push_back(o.delta_q);
      t.group_variance.push_back(o.group_variance);
      t.energy_dispersion.push_back(o.delta_q + o.group_variance);
      t.edge_probability.push_back(o.edge_probability);
      t.max_norm_defect = std::max(t.max_norm_defect, std::abs(o.norm - 1.0));
    }
  }
  return out;
}

PacketTrajectory evolve(const FloquetOperator& op, const ResonanceBasis& basis,
                        const PacketState& initial, int N_max) {
  return evolve(op, basis, std::vector<PacketState>{initial}, N_max).front();
}

namespace {

// Continuous two-segment fit y = a + b n + c max(n - k, 0) over [first, last];
// returns the knee k with the smallest squared residual.
int best_knee(const std::vector<double>& y, int first, int last) {
  int best = first + 1;
  double best_cost = std::numeric_limits<double>::infinity();
  const int n = last - first + 1;
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = first + i;
    b(i) = y[first + i];
  }
  for (int k = first + 1; k < last; ++k) {
    for (int i = 0; i < n; ++i) A(i, 2) = std::max(0, first + i - k);
    const Eigen::Matrix3d normal = A.transpose() * A;
    const Eigen::Vector3d coef = normal.ldlt().solve(A.transpose() * b);
    const double cost = (A * coef - b).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = k;
    }
  }
  return best;
}

}  // namespace

std::optional<int> detect_saturation(const std::vector<double>& series,
                                     const SaturationOptions& o) {
  require(o.reference_first >= 0 && o.reference_last > o.reference_first,
          "saturation reference window is empty");
  require(o.trailing_window >= 2, "trailing_window must be >= 2");
  const int size = static_cast<int>(series.size());
  if (size <= std::max(o.reference_last, o.reference_first + o.trailing_window)) {
    throw ValidationError("trajectory too short for saturation detection (" +
                          std::to_string(size) + " points)");
  }
  const LinearFit reference = fit_line(series, o.reference_first, o.reference_last);
  const double initial = reference.slope;
  if (!(initial > o.min_slope)) return std::nullopt;
  // Growth buried in the fluctuations is not a diffusive phase.
  if (initial * (o.reference_last - o.reference_first) < o.min_rise_over_residual * reference.residual) {
    return std::nullopt;
  }

  for (int N = o.reference_first + o.trailing_window; N < size; ++N) {
    const double slope = fit_line(series, N - o.trailing_window, N).slope;
    if (slope < o.fraction * initial) {
      const int knee = best_knee(series, o.reference_first, N);
      if (size < 2 * knee) {
        throw ValidationError("trajectory too short: " + std::to_string(size) +
                              " periods for a saturation near N=" + std::to_string(knee));
      }
      return knee;
    }
  }
  return std::nullopt;
}

DiffusionEstimate fit_diffusion(const std::vector<double>& series, int first, int last,
                                std::optional<int> N_sat) {
  require(first >= 0 && last > first && last < static_cast<int>(series.size()),
          "fit window [" + std::to_string(first) + ", " + std::to_string(last) +
              "] is not inside the trajectory");
  if (N_sat && last > *N_sat) {
    throw ValidationError("fit window [" + std::to_string(first) + ", " + std::to_string(last) +
                          "] overlaps the saturation plateau starting at N=" +
                          std::to_string(*N_sat));
  }
  const LinearFit fit = fit_line(series, first, last);
  DiffusionEstimate d;
  d.D = fit.slope;
  d.intercept = fit.intercept;
  d.residual = fit.residual;
  d.rise = fit.slope * (last - first);
  d.first = first;
  d.last = last;
  d.N_sat = N_sat;
  return d;
}

}  // namespace qad
