#include "qad/resonance_basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qad/errors.hpp"

namespace qad {

namespace {

int floor_half(int q) { return q >= 0 ? q / 2 : -((1 - q) / 2); }

void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index at = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&at);
    if (vectors(at, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

}  // namespace

ParitySector parse_parity_sector(const std::string& name) {
  if (name == "both") return ParitySector::Both;
  if (name == "even") return ParitySector::Even;
  if (name == "odd") return ParitySector::Odd;
  throw ValidationError("unknown parity sector '" + name + "' (expected both|even|odd)");
}

std::string to_string(ParitySector sector) {
  switch (sector) {
    case ParitySector::Even: return "even";
    case ParitySector::Odd: return "odd";
    default: return "both";
  }
}

int window_start(const ResonanceParams& params, int q) {
  return floor_half(q) - params.k_halfwidth;
}

void validate(const ResonanceParams& params, const OscillatorSpectrum& spectrum) {
  require(params.mu >= 0.0, "mu must be non-negative");
  require(params.k_halfwidth >= 1, "k_halfwidth must be >= 1");
  require(params.q_halfwidth >= 1, "q_halfwidth must be >= 1");
  require(params.separatrix_window >= 0, "separatrix_window must be >= 0");
  const int reach = params.k_halfwidth + params.q_halfwidth;
  if (params.n0 - reach < 1 || params.n0 + reach > spectrum.n_max - 1) {
    throw ValidationError("resonance window n0 +- (K+Q) = [" + std::to_string(params.n0 - reach) +
                          ", " + std::to_string(params.n0 + reach) +
                          "] is not covered by the oscillator spectrum (n_max=" +
                          std::to_string(spectrum.n_max) + ")");
  }
}

ResonanceScales resonance_scales(const OscillatorSpectrum& spectrum, int n0) {
  ResonanceScales s;
  s.hbar0 = spectrum.hbar0;
  s.omega = level_frequency(spectrum, n0);
  s.anharmonicity = anharmonicity(spectrum, n0);
  return s;
}

Eigen::MatrixXd build_group_hamiltonian(const OscillatorSpectrum& spectrum,
                                        const ResonanceParams& params, int q) {
  validate(params, spectrum);
  const int size = params.group_size();
  const int k0 = window_start(params, q);
  const int n0 = params.n0;
  const double e2 = anharmonicity(spectrum, n0);
  const int band = spectrum.x.bandwidth();
  const double qd = q;

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size, size);
  for (int r = 0; r < size; ++r) {
    const double k = k0 + r;
    h(r, r) = e2 * (k * k - qd * k + 0.5 * qd * qd);
  }
  if (params.mu == 0.0) return h;
  for (int r = 0; r < size; ++r) {
    const int k = k0 + r;
    for (int d = 1; d <= band && r + d < size; d += 2) {
      const int kp = k + d;
      const double v = -params.mu * spectrum.x(n0 + k, n0 + kp) *
                       spectrum.x(n0 + q - k, n0 + q - kp);
      h(r, r + d) = v;
      h(r + d, r) = v;
    }
  }
  return h;
}

GroupSpectrum diagonalize_group(const OscillatorSpectrum& spectrum, const ResonanceParams& params,
                                int q) {
  GroupSpectrum g;
  g.q = q;
  g.k_start = window_start(params, q);
  const Eigen::MatrixXd h = build_group_hamiltonian(spectrum, params, q);
  const int size = params.group_size();
  const int K = params.k_halfwidth;

  // For even q the window is symmetric under the exchange k - q/2 -> q/2 - k,
  // which commutes with h. Solving the two exchange sectors separately keeps
  // the quasi-degenerate doublets from mixing.
  Eigen::MatrixXd sectors;
  if (q % 2 == 0) {
    sectors = Eigen::MatrixXd::Zero(size, size);
    const double r = 1.0 / std::sqrt(2.0);
    sectors(K, 0) = 1.0;
    for (int d = 1; d <= K; ++d) {
      sectors(K + d, d) = r;
      sectors(K - d, d) = r;
      sectors(K + d, K + d) = r;
      sectors(K - d, K + d) = -r;
    }
  }

  auto solve = [&](const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) {
      throw NumericalError("group eigensolver failed for q=" + std::to_string(q));
    }
    return solver;
  };

  if (sectors.size() == 0) {
    auto solver = solve(h);
    g.levels = solver.eigenvalues();
    g.eigenvectors = solver.eigenvectors();
  } else {
    const Eigen::MatrixXd t = sectors.transpose() * h * sectors;
    auto even = solve(t.topLeftCorner(K + 1, K + 1));
    auto odd = solve(t.bottomRightCorner(K, K));
    Eigen::MatrixXd vecs(size, size);
    Eigen::VectorXd vals(size);
    vals << even.eigenvalues(), odd.eigenvalues();
    vecs << sectors.leftCols(K + 1) * even.eigenvectors(), sectors.rightCols(K) * odd.eigenvectors();
    std::vector<int> order(size);
    for (int i = 0; i < size; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return vals(a) < vals(b); });
    g.levels.resize(size);
    g.eigenvectors.resize(size, size);
    for (int i = 0; i < size; ++i) {
      g.levels(i) = vals(order[i]);
      g.eigenvectors.col(i) = vecs.col(order[i]);
    }
  }
  fix_signs(g.eigenvectors);
  return g;
}

SeparatrixClassification classify_states(const GroupSpectrum& group,
                                         const ResonanceParams& params) {
  const Eigen::VectorXd& e = group.levels;
  const int size = static_cast<int>(e.size());
  if (size < 6) throw NumericalError("group too small to locate a separatrix");

  std::vector<double> pair(size - 2);
  for (int s = 0; s + 2 < size; ++s) pair[s] = 0.5 * (e(s + 2) - e(s));
  const auto it = std::min_element(pair.begin(), pair.end());
  const int s_min = static_cast<int>(it - pair.begin());
  const bool interior = s_min >= 1 && s_min + 1 < static_cast<int>(pair.size()) &&
                        pair.front() > *it && pair.back() > *it;
  if (!interior || !(*it > 0.0)) {
    throw NumericalError("no separatrix: level spacing of group q=" + std::to_string(group.q) +
                         " has no interior minimum (coupling too weak)");
  }

  SeparatrixClassification c;
  c.separatrix_level = s_min + 1;
  const int lo = std::max(0, c.separatrix_level - params.separatrix_window);
  const int hi = std::min(size - 1, c.separatrix_level + params.separatrix_window);
  for (int s = 0; s < size; ++s) {
    if (s < lo) c.inside.push_back(s);
    else if (s > hi) c.above.push_back(s);
    else c.separatrix.push_back(s);
  }
  for (std::size_t i = 0; i + 1 < c.above.size();) {
    const int s = c.above[i];
    const double local = pair[std::min(s, static_cast<int>(pair.size()) - 1)];
    if (e(s + 1) - e(s) < params.doublet_ratio * local) {
      c.doublets.emplace_back(s, s + 1);
      i += 2;
    } else {
      i += 1;
    }
  }
  return c;
}

Eigen::MatrixXd transition_block(const OscillatorSpectrum& spectrum, const ResonanceParams& params,
                                 const GroupSpectrum& from, const GroupSpectrum& to) {
  const int size = params.group_size();
  const int shift = to.q - from.q;  // k' = k + shift keeps m fixed
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(size, size);
  for (int r = 0; r < size; ++r) {
    const int k = from.k_start + r;
    const int rp = k + shift - to.k_start;
    if (rp < 0 || rp >= size) continue;
    coupling(rp, r) = spectrum.x(params.n0 + k, params.n0 + k + shift);
  }
  return to.eigenvectors.transpose() * coupling * from.eigenvectors;
}

std::vector<Eigen::MatrixXd> transition_elements(const std::vector<GroupSpectrum>& groups,
                                                 const OscillatorSpectrum& spectrum,
                                                 const ResonanceParams& params) {
  require(groups.size() == static_cast<std::size_t>(params.group_count()),
          "transition_elements: missing neighbor group");
  std::vector<Eigen::MatrixXd> blocks(groups.size() - 1);
  for (std::size_t i = 0; i + 1 < groups.size(); ++i) {
    require(groups[i + 1].q == groups[i].q + 1, "transition_elements: groups not adjacent");
    blocks[i] = transition_block(spectrum, params, groups[i + 1], groups[i]);
  }
  return blocks;
}

Eigen::VectorXd ResonanceBasis::flat_levels() const {
  Eigen::VectorXd out(dimension());
  for (const auto& g : groups_) out.segment(flat_index(g.q, 0), group_size()) = g.levels;
  return out;
}

ResonanceBasis assemble_basis(ResonanceParams params, ResonanceScales scales,
                              std::vector<GroupSpectrum> groups,
                              std::vector<Eigen::MatrixXd> up_blocks) {
  require(groups.size() == static_cast<std::size_t>(params.group_count()),
          "basis: wrong number of groups");
  require(up_blocks.size() + 1 == groups.size(), "basis: wrong number of transition blocks");
  ResonanceBasis b;
  b.params_ = std::move(params);
  b.scales_ = scales;
  b.groups_ = std::move(groups);
  b.up_blocks_ = std::move(up_blocks);
  return b;
}

ResonanceBasis diagonalize_groups(const ResonanceParams& params,
                                  const OscillatorSpectrum& spectrum) {
  validate(params, spectrum);
  const int count = params.group_count();
  std::vector<GroupSpectrum> groups(count);
  for (int i = 0; i < count; ++i) {
    groups[i] = diagonalize_group(spectrum, params, i - params.q_halfwidth);
  }
  // Small windows may not reach the separatrix; consumers that need the sets
  // check GroupSpectrum::classified().
  for (auto& g : groups) {
    try {
      g.classes = classify_states(g, params);
    } catch (const NumericalError&) {
      g.classes = SeparatrixClassification{};
    }
  }
  auto blocks = transition_elements(groups, spectrum, params);
  return assemble_basis(params, resonance_scales(spectrum, params.n0), std::move(groups),
                        std::move(blocks));
}

}  // namespace qad
