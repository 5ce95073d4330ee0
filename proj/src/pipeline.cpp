#include "qad/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

#include "qad/errors.hpp"
#include "qad/io.hpp"

namespace qad {

using nlohmann::json;

OscillatorSpectrum load_spectrum(const RunConfig& config, bool* cache_hit) {
  validate_grid(config.oscillator, resolve_grid(config.oscillator));
  const std::string key = config_hash(stage_json(config, "oscillator"));
  return cached_spectrum(config.cache_dir, key, config.oscillator, cache_hit);
}

ResonanceBasis build_basis(const RunConfig& config, const OscillatorSpectrum& spectrum) {
  return diagonalize_groups(config.resonance, spectrum);
}

FloquetOperator load_or_build_operator(const RunConfig& config, const ResonanceBasis& basis,
                                       bool* cache_hit) {
  const std::string key = config_hash(stage_json(config, "operator"));
  const std::string path = operator_cache_path(config.cache_dir, key);
  std::optional<FloquetOperator> op = load_operator(path, key);
  if (cache_hit) *cache_hit = op.has_value();
  if (!op) {
    op = assemble_operator(basis, drive_for(config, basis.scales().omega), config.floquet);
    store_operator(path, *op, key);
  }
  op->leak_flagged = op->edge_leakage > config.floquet.leak_threshold;
  if (op->leak_flagged) {
    throw NumericalError("edge groups |q|=Q hold " + std::to_string(op->edge_leakage) +
                         " of a q=0 column after one period (limit " +
                         std::to_string(config.floquet.leak_threshold) + "); increase Q");
  }
  return *op;
}

double level_shift_deviation(const ResonanceBasis& basis) {
  const Eigen::VectorXd& ref = basis.group(0).levels;
  double worst = 0.0;
  for (const auto& g : basis.groups()) {
    worst = std::max(worst, (g.levels - ref).cwiseAbs().maxCoeff());
  }
  return worst / basis.scales().hbar_omega();
}

double level_shift_tolerance(const ResonanceBasis& basis) {
  const double K = basis.params().k_halfwidth;
  const double Q = basis.q_halfwidth();
  return basis.scales().anharmonicity * (K + 1.0 + 0.5 * Q * Q) / basis.scales().hbar_omega();
}

DiffusionEstimate fit_trajectory(const std::vector<double>& delta_q, const DynamicsConfig& d) {
  const std::optional<int> N_sat = detect_saturation(delta_q, saturation_options(d));
  DiffusionEstimate e = fit_diffusion(delta_q, d.fit_first, d.fit_last, std::nullopt);
  e.N_sat = N_sat;
  return e;
}

namespace {

json physics(const RunConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  j.erase("cache_dir");
  return j;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

QuantumDiffusion quantum_diffusion(const FloquetOperator& op, const ResonanceBasis& basis,
                                   const DynamicsConfig& d, std::uint64_t seed) {
  const GroupSpectrum& g = basis.group(d.q_start);
  require(g.classified(), "group q=" + std::to_string(d.q_start) +
                              " has no separatrix classification (increase mu or K)");
  QuantumDiffusion out;
  out.states = g.classes.separatrix;
  std::vector<PacketState> initial;
  for (int s : out.states) initial.push_back(basis_state(basis, d.q_start, s));
  const auto trajectories = evolve(op, basis, initial, d.periods);
  std::vector<double> slopes;
  for (const auto& t : trajectories) {
    out.fits.push_back(fit_trajectory(t.delta_q, d));
    slopes.push_back(out.fits.back().D);
  }
  for (double s : slopes) out.mean += s / slopes.size();
  out.median = median(slopes);
  std::mt19937_64 boot(seed ^ 0x5851f42d4c957f2dULL);
  std::uniform_int_distribution<std::size_t> pick(0, slopes.size() - 1);
  double s1 = 0.0, s2 = 0.0;
  for (int b = 0; b < d.bootstrap; ++b) {
    std::vector<double> sample(slopes.size());
    for (auto& v : sample) v = slopes[pick(boot)];
    const double m = median(sample);
    s1 += m;
    s2 += m * m;
  }
  if (d.bootstrap > 1) {
    const double m = s1 / d.bootstrap;
    out.median_se = std::sqrt(std::max(0.0, s2 / d.bootstrap - m * m));
  }
  return out;
}

ClassicalReference classical_reference(const RunConfig& config, const ResonanceBasis& basis,
                                       bool with_diffusion) {
  ClassicalReference out;
  const auto& r = config.resonance;
  out.pendulum = make_pendulum(config.oscillator.hbar0, r.n0, r.mu);
  const DriveParams drive = drive_for(config, basis.scales().omega);
  out.layer = map_stochastic_layer(out.pendulum, drive, basis.group(0).levels,
                                   layer_options(config.classical));
  if (with_diffusion) {
    out.diffusion = classical_diffusion(out.pendulum, drive, out.layer.band_low,
                                        out.layer.band_high, basis.scales().hbar_omega(),
                                        diffusion_options(config.classical, config.seed));
  }
  return out;
}

json to_json(const ScanRow& r) {
  return {{"mu", r.mu},
          {"status", r.status},
          {"error", r.error},
          {"D_quantum", r.D_quantum},
          {"D_quantum_median", r.D_quantum_median},
          {"D_quantum_median_se", r.D_quantum_median_se},
          {"D_classical", r.D_classical},
          {"D_classical_se", r.D_classical_se},
          {"M_s", r.M_s},
          {"drive_i", r.drive_i},
          {"drive_j", r.drive_j},
          {"unitarity_defect", r.unitarity_defect},
          {"edge_leakage", r.edge_leakage}};
}

ScanRow scan_row_from_json(const json& j) {
  ScanRow r;
  r.mu = j.at("mu").get<double>();
  r.status = j.at("status").get<std::string>();
  r.error = j.value("error", "");
  r.D_quantum = j.value("D_quantum", 0.0);
  r.D_quantum_median = j.value("D_quantum_median", 0.0);
  r.D_quantum_median_se = j.value("D_quantum_median_se", 0.0);
  r.D_classical = j.value("D_classical", 0.0);
  r.D_classical_se = j.value("D_classical_se", 0.0);
  r.M_s = j.value("M_s", 0);
  r.drive_i = j.value("drive_i", 0);
  r.drive_j = j.value("drive_j", 0);
  r.unitarity_defect = j.value("unitarity_defect", 0.0);
  r.edge_leakage = j.value("edge_leakage", 0.0);
  return r;
}

ScanRow scan_point(const RunConfig& config) {
  ScanRow row;
  row.mu = config.resonance.mu;
  const OscillatorSpectrum spectrum = load_spectrum(config);
  const ResonanceBasis basis = build_basis(config, spectrum);
  const FloquetOperator op = load_or_build_operator(config, basis);
  row.drive_i = op.drive.i;
  row.drive_j = op.drive.j;
  row.unitarity_defect = op.unitarity_defect;
  row.edge_leakage = op.edge_leakage;
  const QuantumDiffusion q = quantum_diffusion(op, basis, config.dynamics, config.seed);
  row.D_quantum = q.mean;
  row.D_quantum_median = q.median;
  row.D_quantum_median_se = q.median_se;
  const ClassicalReference c = classical_reference(config, basis);
  row.D_classical = c.diffusion.D;
  row.D_classical_se = c.diffusion.standard_error;
  row.M_s = c.layer.M_s;
  return row;
}

ScanOutcome run_scan(const RunConfig& config, const PointRunner& point) {
  ScanOutcome out;
  ensure_directory(config.output_dir);
  out.manifest_path = config.output_dir + "/scan_manifest.json";
  RunManifest manifest(out.manifest_path, point_hash(config));
  manifest.load();
  for (double mu : mu_grid(config.scan)) {
    const std::string id = format_number(mu);
    if (manifest.point_done(id)) {
      out.rows.push_back(scan_row_from_json(*manifest.point(id)));
      ++out.reused;
      std::cerr << "scan: mu=" << id << " reused\n";
      continue;
    }
    ScanRow row;
    row.mu = mu;
    try {
      row = point(config.with_mu(mu));
      row.mu = mu;
      ++out.computed;
    } catch (const std::exception& e) {
      row.status = "failed";
      row.error = e.what();
      ++out.failed;
      std::cerr << "scan: mu=" << id << " failed: " << e.what() << "\n";
    }
    out.rows.push_back(row);
    manifest.record_point(id, to_json(row));
    manifest.save();
  }
  out.fig5_path = write_fig5(config.with_mu(out.rows.front().mu), out.rows,
                             config.output_dir + "/fig5.csv");
  manifest.record_file(out.fig5_path);
  manifest.save();
  return out;
}

bool non_increasing_in_inv_sqrt_mu(const std::vector<double>& mu, const std::vector<double>& values,
                                   double tolerance) {
  std::vector<std::size_t> order(mu.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Increasing 1/sqrt(mu) means decreasing mu.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mu[a] > mu[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const double prev = values[order[k - 1]];
    const double cur = values[order[k]];
    if (cur > prev + tolerance * std::abs(prev)) return false;
  }
  return true;
}

bool non_increasing_within_errors(const std::vector<double>& mu, const std::vector<double>& values,
                                  const std::vector<double>& errors) {
  std::vector<std::size_t> order(mu.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mu[a] > mu[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const std::size_t a = order[k - 1], b = order[k];
    if (values[b] - values[a] > std::hypot(errors[a], errors[b])) return false;
  }
  return true;
}

namespace {

std::string class_label(const GroupSpectrum& g, int s) {
  if (!g.classified()) return "unclassified";
  const auto& c = g.classes;
  if (std::find(c.inside.begin(), c.inside.end(), s) != c.inside.end()) return "inside";
  if (std::find(c.separatrix.begin(), c.separatrix.end(), s) != c.separatrix.end()) {
    return "separatrix";
  }
  for (const auto& [a, b] : c.doublets) {
    if (s == a || s == b) return "doublet";
  }
  return "above";
}

bool sector_selected(ParitySector sector, int q) {
  if (sector == ParitySector::Both) return true;
  const bool even = q % 2 == 0;
  return sector == ParitySector::Even ? even : !even;
}

std::string write_group_rows(const RunConfig& config, const ResonanceBasis& basis,
                             const std::string& path, int q_limit, const std::string& title) {
  CsvWriter csv(path, title, config_hash(config), physics(config),
                {"q", "s", "energy_over_hbar_omega", "level_over_hbar_omega", "class"});
  const double hw = basis.scales().hbar_omega();
  for (const auto& g : basis.groups()) {
    if (std::abs(g.q) > q_limit || !sector_selected(config.resonance.parity_sector, g.q)) continue;
    for (int s = 0; s < g.levels.size(); ++s) {
      csv << g.q << s << g.q + g.levels(s) / hw << g.levels(s) / hw << class_label(g, s);
      csv.end_row();
    }
  }
  return path;
}

}  // namespace

std::string write_groups(const RunConfig& config, const ResonanceBasis& basis,
                         const std::string& path) {
  return write_group_rows(config, basis, path, basis.q_halfwidth(), "qad resonance groups");
}

std::string write_fig1(const RunConfig& config, const ResonanceBasis& basis, const std::string& path) {
  return write_group_rows(config, basis, path, 2, "qad fig1: group spectra q=-2..2");
}

std::string write_fig2(const RunConfig& config, const ResonanceBasis& basis, const std::string& path) {
  require(basis.q_halfwidth() >= 1, "fig2 needs groups q=0 and q=1");
  CsvWriter csv(path, "qad fig2: transition elements x_{0,s;1,s'}", config_hash(config),
                physics(config), {"s", "s_prime", "x", "abs_x"});
  const Eigen::MatrixXd& x = basis.up_block(0);
  for (int s = 0; s < x.rows(); ++s) {
    for (int sp = 0; sp < x.cols(); ++sp) {
      csv << s << sp << x(s, sp) << std::abs(x(s, sp));
      csv.end_row();
    }
  }
  return path;
}

std::string write_fig3(const RunConfig& config, const FloquetOperator& op, const std::string& path) {
  CsvWriter csv(path, "qad fig3: quasienergy state centers and widths", config_hash(config),
                physics(config), {"Q", "q_bar", "sqrt_sigma_q", "quasienergy"});
  const auto measures = delocalization_measures(op);
  for (std::size_t k = 0; k < measures.size(); ++k) {
    csv << static_cast<int>(k) << measures[k].q_bar << std::sqrt(std::max(0.0, measures[k].sigma_q))
        << op.quasienergies(static_cast<Eigen::Index>(k));
    csv.end_row();
  }
  return path;
}

std::string write_fig4(const RunConfig& config, const std::vector<PacketTrajectory>& trajectories,
                       const std::string& path) {
  CsvWriter csv(path, "qad fig4: energy dispersion versus N", config_hash(config), physics(config),
                {"N", "Delta_q", "energy_dispersion", "group_variance", "q_mean", "label"});
  for (const auto& t : trajectories) {
    for (std::size_t n = 0; n < t.N.size(); ++n) {
      csv << t.N[n] << t.delta_q[n] << t.energy_dispersion[n] << t.group_variance[n] << t.q_mean[n]
          << t.label;
      csv.end_row();
    }
  }
  return path;
}

std::string write_fig5(const RunConfig& config, const std::vector<ScanRow>& rows,
                       const std::string& path) {
  CsvWriter csv(path, "qad fig5: diffusion coefficients versus 1/sqrt(mu)", config_hash(config),
                physics(config),
                {"inv_sqrt_mu", "mu", "D_quantum", "D_quantum_median", "D_quantum_median_se", "D_classical",
                 "D_classical_se", "M_s", "status"});
  for (const auto& r : rows) {
    csv << 1.0 / std::sqrt(r.mu) << r.mu << r.D_quantum << r.D_quantum_median << r.D_quantum_median_se << r.D_classical
        << r.D_classical_se << r.M_s << r.status;
    csv.end_row();
  }
  return path;
}

std::string write_layer_scan(const RunConfig& config, const LayerMeasurement& layer,
                             const std::string& path) {
  CsvWriter csv(path, "qad classical layer scan", config_hash(config), physics(config),
                {"offset", "pendulum_energy", "indicator", "chaotic"});
  for (const auto& p : layer.scan) {
    csv << p.offset << p.energy << p.indicator << static_cast<int>(p.chaotic);
    csv.end_row();
  }
  return path;
}

std::string write_classical_ensemble(const RunConfig& config, const ClassicalDiffusionResult& r,
                                     const std::string& path) {
  CsvWriter csv(path, "qad classical ensemble energy-change variance", config_hash(config),
                physics(config), {"N", "variance"});
  for (std::size_t n = 0; n < r.variance.size(); ++n) {
    csv << static_cast<int>(n) << r.variance[n];
    csv.end_row();
  }
  return path;
}

std::vector<PacketTrajectory> fig4_trajectories(const RunConfig& config, const FloquetOperator& op,
                                                const ResonanceBasis& basis) {
  const auto& d = config.dynamics;
  std::vector<PacketState> initial;
  std::vector<std::string> labels;
  for (InitialKind kind : {InitialKind::Center, InitialKind::Above, InitialKind::Separatrix}) {
    initial.push_back(make_initial_state(basis, kind, d.q_start, d.above_index));
    labels.push_back(to_string(kind));
  }
  auto out = evolve(op, basis, initial, d.periods);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].label = labels[i];
  return out;
}

}  // namespace qad
