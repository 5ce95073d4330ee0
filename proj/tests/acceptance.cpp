// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Uses QAD_CACHE_DIR / QAD_OUTPUT_DIR like the tool; expensive stages are cached.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qad/classical_reference.hpp"
#include "qad/config.hpp"
#include "qad/fit.hpp"
#include "qad/io.hpp"
#include "qad/pipeline.hpp"

using namespace qad;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (ok ? "" : "!") << what << "; ";
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

RunConfig base_config() {
  RunConfig c;
  apply_environment(c);
  validate(c);
  return c;
}

RunConfig at_mu(double mu) { return base_config().with_mu(mu); }

const OscillatorSpectrum& production_spectrum() {
  static const OscillatorSpectrum s = load_spectrum(base_config());
  return s;
}

Verdict oscillator() {
  Verdict v;
  const OscillatorSpectrum& sp = production_spectrum();
  const OscillatorSpectrum unit = solve_spectrum({1.0, sp.n_max});
  const Eigen::VectorXd ho = oracles::harmonic_basis_levels(1200, 10.0);
  const double scale = std::pow(sp.hbar0, 4.0 / 3.0);
  double scaling = 0.0, oracle = 0.0;
  for (int n : {0, 10, 100, 446}) {
    scaling = std::max(scaling, std::abs(sp.energies[n] / (scale * unit.energies[n]) - 1.0));
    oracle = std::max(oracle, std::abs(unit.energies[n] / ho(n) - 1.0));
  }
  // Same-parity elements by full-grid quadrature of freshly solved wavefunctions.
  const OscillatorSpectrum fresh = solve_spectrum(base_config().oscillator);
  double largest = 0.0, same_parity = 0.0;
  const int half = fresh.grid.half_points();
  for (int n = 0; n <= fresh.n_max; ++n) {
    for (int m = n; m <= std::min(fresh.n_max, n + 6); ++m) {
      if ((m - n) % 2) {
        largest = std::max(largest, std::abs(fresh.x(n, m)));
        continue;
      }
      double sum = 0.0;
      for (int k = -half; k <= half; ++k) sum += fresh.psi(n, k) * fresh.node_position(k) * fresh.psi(m, k);
      same_parity = std::max(same_parity, std::abs(sum));
    }
  }
  v.require(scaling < 1e-6, "scaling " + num(scaling) + " < 1e-6");
  v.require(oracle < 1e-7, "oscillator-basis oracle " + num(oracle) + " < 1e-7");
  v.require(same_parity < 1e-12 * largest,
            "same-parity x " + num(same_parity / largest) + " max|x| < 1e-12 max|x|");
  return v;
}

Verdict fig1_structure() {
  Verdict v;
  const RunConfig c = at_mu(1e-4);
  const ResonanceBasis basis = build_basis(c, production_spectrum());
  bool sizes = basis.group_size() == 121;
  for (const auto& g : basis.groups()) sizes = sizes && g.levels.size() == 121;
  v.require(sizes && basis.groups().size() >= 5, "121 levels in each of " +
                                                      std::to_string(basis.groups().size()) + " groups");
  const double shift = level_shift_deviation(basis), tol = level_shift_tolerance(basis);
  v.require(shift <= tol, "E^M shift across q " + num(shift) + " <= " + num(tol));

  const Eigen::VectorXd& e = basis.group(0).levels;
  std::vector<double> gaps;
  for (int s = 0; s < 5; ++s) gaps.push_back(e(s + 1) - e(s));
  const auto [lo, hi] = std::minmax_element(gaps.begin(), gaps.end());
  const double variation = (*hi - *lo) / mean(gaps);
  v.require(variation < 0.05, "bottom spacing variation " + num(variation) + " < 0.05");

  // Spacing minimum: the pair spacing (E_{s+2} - E_s)/2 falls from the bottom
  // and rises again before the top.
  std::vector<double> pair;
  for (int s = 0; s + 2 < e.size(); ++s) pair.push_back(0.5 * (e(s + 2) - e(s)));
  const auto at = std::min_element(pair.begin(), pair.end()) - pair.begin();
  const bool interior = at > 2 && at + 3 < static_cast<long>(pair.size()) &&
                        pair[at] < 0.8 * pair.front() && pair[at] < 0.8 * pair.back();
  const auto& classes = basis.group(0).classes;
  v.require(interior && basis.group(0).classified(),
            "spacing minimum at s=" + std::to_string(at) + ", separatrix level " +
                std::to_string(classes.separatrix_level));

  // Doublets: above the separatrix, alternate gaps are much smaller than the
  // neighbouring gaps.
  int doublets = 0;
  bool all_above = !classes.doublets.empty();
  for (const auto& [a, b] : classes.doublets) {
    all_above = all_above && a > classes.separatrix_level && b > classes.separatrix_level;
    const double gap = e(b) - e(a);
    const double next = b + 1 < e.size() ? e(b + 1) - e(b) : e(a) - e(a - 1);
    if (gap < 0.5 * next) ++doublets;
  }
  v.require(all_above && doublets == static_cast<int>(classes.doublets.size()),
            std::to_string(doublets) + " doublets above the separatrix");
  return v;
}

Verdict fig2_structure() {
  Verdict v;
  const RunConfig c = at_mu(1e-4);
  const ResonanceBasis basis = build_basis(c, production_spectrum());
  const Eigen::MatrixXd& x = basis.up_block(0);
  const auto& rows = basis.group(0).classes;
  const auto& cols = basis.group(1).classes;
  std::vector<double> sep, far;
  for (int s : rows.separatrix)
    for (int t : cols.separatrix) sep.push_back(std::abs(x(s, t)));
  for (int s : rows.inside)
    for (int t : cols.above) far.push_back(std::abs(x(s, t)));
  const double ratio = mean(sep) / mean(far);
  v.require(ratio >= 10.0, "separatrix/far block mean " + num(ratio) + " >= 10");

  // Medians over bands |s - s'| in [5b, 5b + 5), above the roundoff floor.
  std::vector<double> medians;
  for (int b = 0; b < 7; ++b) {
    std::vector<double> band;
    for (int s = 0; s < x.rows(); ++s)
      for (int t = 0; t < x.cols(); ++t)
        if (std::abs(s - t) / 5 == b) band.push_back(std::abs(x(s, t)));
    medians.push_back(median(band));
  }
  bool falling = true;
  for (std::size_t i = 1; i < medians.size(); ++i) falling = falling && medians[i] < medians[i - 1];
  v.require(falling, "band medians fall from " + num(medians.front()) + " to " + num(medians.back()));
  return v;
}

Verdict floquet_integrity() {
  Verdict v;
  const RunConfig c = at_mu(1e-4);
  const ResonanceBasis basis = build_basis(c, production_spectrum());
  const FloquetOperator op = load_or_build_operator(c, basis);
  const int n = op.dimension();
  const double defect = (op.U.adjoint() * op.U - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
  v.require(defect < 1e-8, "unitarity defect " + num(defect) + " < 1e-8");

  // A smaller window on the production spectrum for the direct comparisons.
  ResonanceParams p = c.resonance;
  p.k_halfwidth = 10;
  p.q_halfwidth = 2;
  const ResonanceBasis small = diagonalize_groups(p, production_spectrum());
  const double omega = small.scales().omega;
  FloquetOptions o = c.floquet;
  o.leak_threshold = 1.0;
  const FloquetOperator still = assemble_operator(small, make_drive(omega, 0.0, c.drive.detuning), o);
  const Eigen::VectorXd e = small.flat_levels();
  double diag = 0.0;
  for (int a = 0; a < still.dimension(); ++a) {
    for (int b = 0; b < still.dimension(); ++b) {
      const std::complex<double> expected =
          a == b ? std::polar(1.0, -(small.group_of(a) * omega + e(a) / small.scales().hbar0) *
                                       still.drive.period())
                 : 0.0;
      diag = std::max(diag, std::abs(still.U(a, b) - expected));
    }
  }
  v.require(diag < 1e-10, "f0=0 deviation from diagonal phases " + num(diag) + " < 1e-10");

  double previous = 1e300;
  bool falling = true;
  std::string trail;
  const double f0 = c.drive.f0_over_mu * c.resonance.mu;
  for (double factor : {8.0, 1.0, 0.125}) {
    const DriveParams d = make_drive(omega, factor * f0, c.drive.detuning);
    const double deviation = (oracles::own_propagator(small, d, false, 6000) -
                              oracles::own_propagator(small, d, true, 6000))
                                 .cwiseAbs()
                                 .maxCoeff();
    falling = falling && deviation < previous;
    previous = deviation;
    trail += num(deviation) + " ";
  }
  v.require(falling, "reduced-vs-full deviation at f0 x8, x1, /8: " + trail);
  return v;
}

double delocalized_fraction(double mu) {
  const RunConfig c = at_mu(mu);
  const ResonanceBasis basis = build_basis(c, production_spectrum());
  const FloquetOperator op = load_or_build_operator(c, basis);
  const int g = op.group_size, Q = op.q_halfwidth;
  int count = 0;
  for (int k = 0; k < op.dimension(); ++k) {
    double m1 = 0.0, m2 = 0.0;
    for (int a = 0; a < op.dimension(); ++a) {
      const double q = a / g - Q;
      const double p = op.eigenvectors(a, k) * op.eigenvectors(a, k);
      m1 += q * p;
      m2 += q * q * p;
    }
    if (std::sqrt(std::max(0.0, m2 - m1 * m1)) > 0.5) ++count;
  }
  return static_cast<double>(count) / op.dimension();
}

Verdict fig3_contrast() {
  Verdict v;
  const double high = delocalized_fraction(1e-4);
  const double low = delocalized_fraction(3e-5);
  v.require(high > 0.0 && high >= 5.0 * low,
            "delocalized fraction " + num(high) + " at 1e-4 vs " + num(low) + " at 3e-5, ratio >= 5");
  return v;
}

Verdict fig4_behavior() {
  Verdict v;
  const RunConfig c = at_mu(1.25e-4);
  const ResonanceBasis basis = build_basis(c, production_spectrum());
  const FloquetOperator op = load_or_build_operator(c, basis);
  const auto traj = fig4_trajectories(c, op, basis);
  const auto& sep = traj.at(2).delta_q;
  const LinearFit fit = fit_line(sep, 50, 500);
  const double rise = fit.slope * 450.0;
  v.require(fit.slope > 0.0 && fit.residual < 0.3 * rise,
            "separatrix slope " + num(fit.slope) + ", residual " + num(fit.residual) + " < 0.3 rise " +
                num(rise));
  const int w = c.dynamics.trailing_window;
  const double final_value = mean(std::vector<double>(sep.end() - w, sep.end()));
  for (int i : {0, 1}) {
    const double peak = *std::max_element(traj[i].delta_q.begin(), traj[i].delta_q.end());
    v.require(peak < 0.25 * final_value,
              traj[i].label + " max " + num(peak) + " < 0.25 separatrix final " + num(final_value));
  }
  const auto N_sat = detect_saturation(sep, saturation_options(c.dynamics));
  v.require(N_sat && *N_sat >= 316 && *N_sat <= 3162,
            "N_sat " + (N_sat ? std::to_string(*N_sat) : std::string("none")) + " in [316, 3162]");
  return v;
}

void copy_missing(const fs::path& from, const fs::path& to) {
  fs::create_directories(to);
  for (const auto& entry : fs::directory_iterator(from)) {
    const fs::path target = to / entry.path().filename();
    if (entry.is_regular_file() && !fs::exists(target)) fs::copy_file(entry.path(), target);
  }
}

Verdict fig5_relations() {
  Verdict v;
  const RunConfig main = base_config();
  const fs::path root = fs::path(main.output_dir) / "acceptance_scan";
  fs::remove_all(root);

  RunConfig reduced = main;
  reduced.cache_dir = (root / "cache").string();
  reduced.output_dir = (root / "out").string();
  reduced.scan.mu_values = {3e-5, 1e-4, 2e-4};
  const auto t0 = std::chrono::steady_clock::now();
  const ScanOutcome small = run_scan(reduced);
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  v.require(small.failed == 0 && minutes < 30.0,
            "reduced 3-point grid from a cold cache " + num(minutes) + " min < 30");

  if (fs::exists(main.cache_dir)) copy_missing(main.cache_dir, reduced.cache_dir);
  RunConfig full = reduced;
  full.scan.mu_values = {3e-5, 5e-5, 7.5e-5, 1e-4, 1.25e-4, 2e-4};
  const ScanOutcome out = run_scan(full);
  copy_missing(reduced.cache_dir, main.cache_dir);
  v.require(out.failed == 0 && out.reused == 3, std::to_string(out.rows.size()) + " points, " +
                                                    std::to_string(out.reused) + " reused");

  // Pointwise on the separatrix-set mean, trends on the median.
  std::vector<double> mu, dq, dq_se, dcl, dcl_se;
  bool below = true;
  std::string table;
  for (const ScanRow& r : out.rows) {
    if (r.status != "ok") continue;
    mu.push_back(r.mu);
    dq.push_back(r.D_quantum_median);
    dq_se.push_back(r.D_quantum_median_se);
    dcl.push_back(r.D_classical);
    dcl_se.push_back(r.D_classical_se);
    below = below && r.D_quantum < r.D_classical;
    table += num(r.mu) + ":" + num(r.D_quantum) + "/" + num(r.D_quantum_median) + "+-" + num(r.D_quantum_median_se) + "/" +
             num(r.D_classical) + "+-" + num(r.D_classical_se) + "/" +
             std::to_string(r.M_s) + " ";
  }
  std::fprintf(stderr, "scan mu:Dq mean/Dq median/Dcl/M_s %s\n", table.c_str());
  v.require(mu.size() >= 5 && below, "D_quantum < D_classical at every point");
  v.require(non_increasing_within_errors(mu, dq, dq_se), "D_quantum falls as 1/sqrt(mu) grows");
  v.require(non_increasing_within_errors(mu, dcl, dcl_se), "D_classical falls as 1/sqrt(mu) grows");
  int ms_ref = -1, ms_low = -1;
  for (const ScanRow& r : out.rows) {
    if (std::abs(r.mu - 1.25e-4) < 1e-9) ms_ref = r.M_s;
    if (r.mu == out.rows.front().mu) ms_low = r.M_s;
  }
  v.require(ms_ref >= 5 && ms_ref <= 20, "M_s " + std::to_string(ms_ref) + " at 1.25e-4 in [5, 20]");
  v.require(ms_low == 1, "M_s " + std::to_string(ms_low) + " at the smallest mu is 1");
  return v;
}

Verdict classical_integrity() {
  Verdict v;
  const RunConfig c = at_mu(1.25e-4);
  const PendulumModel pendulum = make_pendulum(c.oscillator.hbar0, c.resonance.n0, c.resonance.mu);
  const double omega = quartic::frequency(quartic::energy_of_action(pendulum.action));
  const ClassicalState start = pendulum.state(
      pendulum.action_offset(0.5 * (pendulum.bottom() + pendulum.separatrix())), 0.0, 0.7);
  const double omega_max = quartic::frequency(
      std::max(quartic::energy(start.x, start.px), quartic::energy(start.y, start.py)));

  const ClassicalParams still = classical_params(c.resonance.mu, make_drive(omega, 0.0, c.drive.detuning));
  const double h = 0.05 / omega_max;
  const double e0 = total_energy(start, still);
  ClassicalState s = start;
  const SplittingIntegrator free_run(still, h);
  double drift = 0.0;
  for (int block = 0; block < 200; ++block) {
    free_run.advance(s, 1000);
    drift = std::max(drift, std::abs(total_energy(s, still) / e0 - 1.0));
  }
  v.require(drift < 1e-8, "relative energy drift " + num(drift) + " < 1e-8 over 2e5 steps");

  const DriveParams drive = make_drive(omega, c.drive.f0_over_mu * c.resonance.mu, c.drive.detuning);
  const ClassicalParams driven = classical_params(c.resonance.mu, drive);
  const auto distance = [](const ClassicalState& a, const ClassicalState& b) {
    return std::hypot(a.x - b.x, a.px - b.px, std::hypot(a.y - b.y, a.py - b.py));
  };
  const auto run = [&](double step, long steps) {
    ClassicalState r = start;
    SplittingIntegrator(driven, step).advance(r, steps);
    return r;
  };
  const double t_end = 20.0 * 2.0 * std::numbers::pi / omega_max;
  const ClassicalState ref = run(t_end / 64000, 64000);
  const double coarse = distance(run(t_end / 1000, 1000), ref);
  const double fine = distance(run(t_end / 2000, 2000), ref);
  v.require(std::abs(coarse / fine / 16.0 - 1.0) < 0.15, "h-halving error ratio " + num(coarse / fine) + " ~ 16");

  ClassicalState back = start;
  SplittingIntegrator(driven, h).advance(back, 100000);
  SplittingIntegrator(driven, -h).advance(back, 100000);
  const double returned = distance(back, start);
  v.require(returned < 1e-6, "forward-backward distance " + num(returned) + " < 1e-6");
  return v;
}

Verdict determinism() {
  Verdict v;
  const fs::path root = fs::path(base_config().output_dir) / "acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto twice = [&](const std::string& name, const std::function<void(const std::string&)>& write) {
    write((root / ("a_" + name)).string());
    write((root / ("b_" + name)).string());
    const bool same = slurp((root / ("a_" + name)).string()) == slurp((root / ("b_" + name)).string());
    v.require(same, name + " identical");
  };

  const RunConfig c = at_mu(1.25e-4);
  const auto build = [&] { return build_basis(c, load_spectrum(c)); };
  twice("fig1.csv", [&](const std::string& p) { write_fig1(c, build(), p); });
  twice("fig2.csv", [&](const std::string& p) { write_fig2(c, build(), p); });
  twice("fig3.csv", [&](const std::string& p) {
    const ResonanceBasis b = build();
    write_fig3(c, load_or_build_operator(c, b), p);
  });
  twice("fig4.csv", [&](const std::string& p) {
    const ResonanceBasis b = build();
    write_fig4(c, fig4_trajectories(c, load_or_build_operator(c, b), b), p);
  });
  RunConfig quick = c;
  quick.classical.ensemble_size = 12;
  quick.classical.bootstrap = 20;
  quick.classical.layer_points = 60;
  twice("classical.csv", [&](const std::string& p) {
    write_classical_ensemble(quick, classical_reference(quick, build()).diffusion, p);
  });
  fs::remove_all(root);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"oscillator scaling and oracle", oscillator},
      {"fig1 group structure", fig1_structure},
      {"fig2 block structure", fig2_structure},
      {"floquet integrity", floquet_integrity},
      {"fig3 localization contrast", fig3_contrast},
      {"fig4 trajectories", fig4_behavior},
      {"fig5 diffusion relations", fig5_relations},
      {"classical integrator", classical_integrity},
      {"determinism", determinism},
  };
  // Optional arguments pick criteria by number.
  std::vector<bool> wanted(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) wanted[k - 1] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!wanted[i]) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "error: " << e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %zu %s: %s (%.0f s) %s\n", i + 1, criteria[i].first.c_str(),
                v.pass ? "PASS" : "FAIL", seconds, v.detail.str().c_str());
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed ? 1 : 0;
}
