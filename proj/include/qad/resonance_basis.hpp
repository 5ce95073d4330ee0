#pragma once

// Reduced stationary problem at the x <-> y coupling resonance.
//
// Group q collects the product states |n0 + k, n0 + q - k>. With the energies
// expanded to second order about n0 the group Hamiltonian is
//
//     E''(k^2 - q k + q^2/2) delta_{kk'} - mu x_{n0+k, n0+k'} y_{n0+q-k, n0+q-k'}
//
// and the total energy of a level is hbar0*omega*q + E^M_{q,s}. Couplings that
// change q are dropped (they are off-resonant by hbar0*omega).

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "qad/quartic_oscillator.hpp"

namespace qad {

enum class ParitySector { Both, Even, Odd };

ParitySector parse_parity_sector(const std::string& name);
std::string to_string(ParitySector sector);

struct ResonanceParams {
  double mu = 1e-4;
  int n0 = 446;
  int k_halfwidth = 60;  // K: 2K+1 levels per group
  int q_halfwidth = 8;   // Q: groups -Q..Q
  // Labels which p-parity groups are reported by the group-spectrum emitters.
  // The drive couples q to q +- 1, so the dynamics always use both sets.
  ParitySector parity_sector = ParitySector::Both;
  int separatrix_window = 5;  // W: separatrix set is s_sep - W .. s_sep + W
  double doublet_ratio = 0.5;  // gap / local pair spacing below which a pair is a doublet

  int group_size() const { return 2 * k_halfwidth + 1; }
  int group_count() const { return 2 * q_halfwidth + 1; }
};

/// First k of the window used by group q. The window is centred on the
/// resonance line k = q/2 (rounded down) so every group sees the same range
/// of |k - q/2|.
int window_start(const ResonanceParams& params, int q);

/// Throws ValidationError when the oscillator spectrum does not cover the
/// index window or the parameters are inconsistent.
void validate(const ResonanceParams& params, const OscillatorSpectrum& spectrum);

struct SeparatrixClassification {
  int separatrix_level = -1;  // s at the level-density maximum
  std::vector<int> inside;
  std::vector<int> separatrix;
  std::vector<int> above;
  std::vector<std::pair<int, int>> doublets;  // quasi-degenerate pairs in `above`
};

struct GroupSpectrum {
  int q = 0;
  int k_start = 0;                // k of eigenvector row 0
  Eigen::VectorXd levels;         // E^M_{q,s}, ascending in s
  Eigen::MatrixXd eigenvectors;   // rows k - k_start, columns s
  SeparatrixClassification classes;  // separatrix_level < 0 when none was found

  bool classified() const { return classes.separatrix_level >= 0; }
};

struct ResonanceScales {
  double hbar0 = 0.0;
  double omega = 0.0;          // omega_{n0}
  double anharmonicity = 0.0;  // E''_{n0}
  double hbar_omega() const { return hbar0 * omega; }
};

ResonanceScales resonance_scales(const OscillatorSpectrum& spectrum, int n0);

/// (2K+1) x (2K+1) group matrix without the hbar0*omega*q shift.
Eigen::MatrixXd build_group_hamiltonian(const OscillatorSpectrum& spectrum,
                                        const ResonanceParams& params, int q);

/// Diagonalizes one group (levels ascending, eigenvector signs fixed so the
/// largest component is positive). Does not classify.
GroupSpectrum diagonalize_group(const OscillatorSpectrum& spectrum, const ResonanceParams& params,
                                int q);

/// Separatrix classification of a diagonalized group. The level density is
/// measured by the pair spacing (E_{s+2} - E_s)/2, which is continuous across
/// the separatrix where rotational levels pair into doublets. Throws
/// NumericalError when that spacing has no interior minimum.
SeparatrixClassification classify_states(const GroupSpectrum& group,
                                         const ResonanceParams& params);

/// <group `to`, s' | x | group `from`, s> for arbitrary groups: the drive acts on
/// the first oscillator only, so m = n0 + q - k is conserved. Rows index s' of
/// `to`, columns s of `from`.
Eigen::MatrixXd transition_block(const OscillatorSpectrum& spectrum, const ResonanceParams& params,
                                 const GroupSpectrum& from, const GroupSpectrum& to);

class ResonanceBasis {
 public:
  ResonanceBasis() = default;

  const ResonanceParams& params() const { return params_; }
  const ResonanceScales& scales() const { return scales_; }
  const std::vector<GroupSpectrum>& groups() const { return groups_; }
  const GroupSpectrum& group(int q) const { return groups_.at(q + params_.q_halfwidth); }
  /// x_{q,s;q+1,s'} with rows s (group q) and columns s' (group q+1).
  const Eigen::MatrixXd& up_block(int q) const { return up_blocks_.at(q + params_.q_halfwidth); }

  int q_halfwidth() const { return params_.q_halfwidth; }
  int group_size() const { return params_.group_size(); }
  int dimension() const { return params_.group_size() * params_.group_count(); }
  int flat_index(int q, int s) const { return (q + params_.q_halfwidth) * group_size() + s; }
  int group_of(int flat) const { return flat / group_size() - params_.q_halfwidth; }
  int level_of(int flat) const { return flat % group_size(); }

  /// E^M_{q,s} for every basis state in flat order.
  Eigen::VectorXd flat_levels() const;

  friend ResonanceBasis diagonalize_groups(const ResonanceParams& params,
                                           const OscillatorSpectrum& spectrum);
  friend ResonanceBasis assemble_basis(ResonanceParams params, ResonanceScales scales,
                                       std::vector<GroupSpectrum> groups,
                                       std::vector<Eigen::MatrixXd> up_blocks);

 private:
  ResonanceParams params_;
  ResonanceScales scales_;
  std::vector<GroupSpectrum> groups_;
  std::vector<Eigen::MatrixXd> up_blocks_;  // q = -Q .. Q-1
};

/// Builds, diagonalizes and classifies every group q in [-Q, Q] and computes the
/// adjacent-group transition blocks. Groups without a separatrix are left
/// unclassified instead of failing.
ResonanceBasis diagonalize_groups(const ResonanceParams& params,
                                  const OscillatorSpectrum& spectrum);

/// Reassembles a basis from stored parts (used by the export reader).
ResonanceBasis assemble_basis(ResonanceParams params, ResonanceScales scales,
                              std::vector<GroupSpectrum> groups,
                              std::vector<Eigen::MatrixXd> up_blocks);

/// Adjacent-group transition blocks x_{q,s;q+1,s'} for q = -Q .. Q-1.
std::vector<Eigen::MatrixXd> transition_elements(const std::vector<GroupSpectrum>& groups,
                                                 const OscillatorSpectrum& spectrum,
                                                 const ResonanceParams& params);

}  // namespace qad
