// qad: command-line front end for the simulator stages.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qad/config.hpp"
#include "qad/errors.hpp"
#include "qad/io.hpp"
#include "qad/pipeline.hpp"

using nlohmann::json;
using namespace qad;

namespace {

enum Exit { Ok = 0, Validation = 1, Numerical = 2, PartialScan = 3 };

// Every leaf of the default config becomes a flag: --section.key or --key.
struct Overrides {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;

  void install(CLI::App& app) {
    app.add_option("--config", config_file, "JSON config file (missing keys keep defaults)")
        ->check(CLI::ExistingFile);
    app.add_option("--set", sets, "override as section.key=value (repeatable)");
    const json defaults = to_json(RunConfig{});
    for (auto it = defaults.begin(); it != defaults.end(); ++it) {
      if (it.value().is_object()) {
        for (auto leaf = it.value().begin(); leaf != it.value().end(); ++leaf) {
          add_flag(app, it.key() + "." + leaf.key(), leaf.value());
        }
      } else {
        add_flag(app, it.key(), it.value());
      }
    }
  }

  void add_flag(CLI::App& app, const std::string& path, const json& fallback) {
    app.add_option("--" + path, values[path], "default " + fallback.dump())->group("Config");
  }

  RunConfig resolve() const {
    RunConfig base = config_file.empty() ? RunConfig{} : load_config(config_file);
    apply_environment(base);
    json j = to_json(base);
    for (const auto& [path, text] : values) {
      if (!text.empty()) assign(j, path, text);
    }
    for (const auto& item : sets) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + item + "'");
      assign(j, item.substr(0, eq), item.substr(eq + 1));
    }
    RunConfig c = config_from_json(j);
    validate(c);
    return c;
  }

  static void assign(json& j, const std::string& path, const std::string& text) {
    json* slot = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
      if (!slot->is_object() || !slot->contains(key)) {
        throw ValidationError("unknown config key '" + path + "'");
      }
      slot = &(*slot)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    *slot = parse_like(*slot, text, path);
  }

  static json parse_like(const json& current, const std::string& text, const std::string& path) {
    const auto bad = [&] { return ValidationError("invalid value '" + text + "' for " + path); };
    std::size_t used = 0;
    try {
      if (current.is_boolean()) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw bad();
      }
      if (current.is_number_unsigned()) {
        if (!text.empty() && text[0] == '-') throw bad();
        const unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) throw bad();
        return v;
      }
      if (current.is_number_integer()) {
        const long long v = std::stoll(text, &used);
        if (used != text.size()) throw bad();
        return v;
      }
      if (current.is_number()) {
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) throw bad();
        return v;
      }
      if (current.is_array()) {
        // Comma-separated numbers, optionally bracketed.
        std::string body = text;
        if (!body.empty() && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
        json list = json::array();
        std::stringstream items(body);
        for (std::string item; std::getline(items, item, ',');) list.push_back(parse_like(0.0, item, path));
        return list;
      }
    } catch (const std::logic_error&) {
      throw bad();
    }
    return text;
  }
};

void print(const std::string& key, double v) { std::cout << key << " " << format_number(v) << "\n"; }
void print(const std::string& key, int v) { std::cout << key << " " << v << "\n"; }
void print(const std::string& key, const std::string& v) { std::cout << key << " " << v << "\n"; }

void note_cache(const std::string& what, bool hit) {
  std::cerr << what << (hit ? ": cache hit\n" : ": computed and cached\n");
}

std::string out_path(const RunConfig& c, const std::string& name) {
  ensure_directory(c.output_dir);
  return c.output_dir + "/" + name;
}

void record(const RunConfig& c, const std::vector<std::string>& files) {
  RunManifest manifest(c.output_dir + "/manifest.json", config_hash(c));
  manifest.load();
  for (const auto& f : files) manifest.record_file(f);
  manifest.save();
  for (const auto& f : files) std::cerr << "wrote " << f << "\n";
}

struct Stages {
  OscillatorSpectrum spectrum;
  ResonanceBasis basis;
};

Stages basis_stage(const RunConfig& c) {
  bool hit = false;
  Stages s;
  s.spectrum = load_spectrum(c, &hit);
  note_cache("spectrum", hit);
  s.basis = build_basis(c, s.spectrum);
  return s;
}

FloquetOperator operator_stage(const RunConfig& c, const ResonanceBasis& basis) {
  bool hit = false;
  FloquetOperator op = load_or_build_operator(c, basis, &hit);
  note_cache("floquet operator", hit);
  return op;
}

double bottom_spacing_variation(const GroupSpectrum& g, int gaps) {
  std::vector<double> d;
  for (int s = 0; s < gaps && s + 1 < g.levels.size(); ++s) d.push_back(g.levels(s + 1) - g.levels(s));
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  double mean = 0.0;
  for (double v : d) mean += v / d.size();
  return (*hi - *lo) / mean;
}

double delocalized_fraction(const FloquetOperator& op, double threshold) {
  const auto m = delocalization_measures(op);
  const auto n = std::count_if(m.begin(), m.end(),
                               [&](const Delocalization& d) { return std::sqrt(std::max(0.0, d.sigma_q)) > threshold; });
  return static_cast<double>(n) / m.size();
}

int cmd_spectrum(const RunConfig& c) {
  bool hit = false;
  const OscillatorSpectrum sp = load_spectrum(c, &hit);
  note_cache("spectrum", hit);
  const ResonanceScales sc = resonance_scales(sp, c.resonance.n0);
  const std::string path = out_path(c, "spectrum.csv");
  {
    CsvWriter csv(path, "qad oscillator spectrum", config_hash(c), stage_json(c, "oscillator"),
                  {"n", "energy"});
    for (std::size_t n = 0; n < sp.energies.size(); ++n) {
      csv << static_cast<int>(n) << sp.energies[n];
      csv.end_row();
    }
  }
  record(c, {path});
  print("hbar0", sp.hbar0);
  print("n_max", sp.n_max);
  print("grid_points", sp.grid.points);
  print("grid_halfwidth", sp.grid.halfwidth);
  print("convergence_change", sp.convergence_change);
  print("n0", c.resonance.n0);
  print("E_n0", sp.energies.at(c.resonance.n0));
  print("omega_n0", sc.omega);
  print("anharmonicity_n0", sc.anharmonicity);
  print("hbar_omega", sc.hbar_omega());
  return Ok;
}

int cmd_resonance(const RunConfig& c) {
  const Stages s = basis_stage(c);
  const std::string path = write_groups(c, s.basis, out_path(c, "groups.csv"));
  record(c, {path});
  const GroupSpectrum& g0 = s.basis.group(0);
  print("mu", c.resonance.mu);
  print("levels_per_group", s.basis.group_size());
  print("groups", static_cast<int>(s.basis.groups().size()));
  print("level_shift_deviation", level_shift_deviation(s.basis));
  print("level_shift_tolerance", level_shift_tolerance(s.basis));
  print("bottom_spacing_variation", bottom_spacing_variation(g0, 5));
  if (g0.classified()) {
    print("separatrix_level", g0.classes.separatrix_level);
    print("inside_states", static_cast<int>(g0.classes.inside.size()));
    print("separatrix_states", static_cast<int>(g0.classes.separatrix.size()));
    print("above_states", static_cast<int>(g0.classes.above.size()));
    print("doublets", static_cast<int>(g0.classes.doublets.size()));
  } else {
    print("separatrix_level", "none");
  }
  return Ok;
}

int cmd_floquet(const RunConfig& c) {
  const Stages s = basis_stage(c);
  const FloquetOperator op = operator_stage(c, s.basis);
  const std::string path = write_fig3(c, op, out_path(c, "quasienergies.csv"));
  record(c, {path});
  print("drive_i", op.drive.i);
  print("drive_j", op.drive.j);
  print("period", op.drive.period());
  print("f0", op.drive.f0);
  print("dimension", op.dimension());
  print("unitarity_defect", op.unitarity_defect);
  print("symmetry_defect", op.symmetry_defect);
  print("edge_leakage", op.edge_leakage);
  print("eigen_residual", op.eigen_residual);
  print("fraction_sqrt_sigma_above_0.5", delocalized_fraction(op, 0.5));
  return Ok;
}

int cmd_evolve(const RunConfig& c, bool all) {
  const Stages s = basis_stage(c);
  const FloquetOperator op = operator_stage(c, s.basis);
  std::vector<PacketTrajectory> traj;
  if (all) {
    traj = fig4_trajectories(c, op, s.basis);
  } else {
    const InitialKind kind = parse_initial_kind(c.dynamics.initial);
    traj.push_back(evolve(op, s.basis, make_initial_state(s.basis, kind, c.dynamics.q_start,
                                                          c.dynamics.above_index),
                          c.dynamics.periods));
    traj.back().label = to_string(kind);
  }
  const std::string path = write_fig4(c, traj, out_path(c, "evolve.csv"));
  record(c, {path});
  for (const auto& t : traj) {
    const DiffusionEstimate e = fit_trajectory(t.delta_q, c.dynamics);
    std::cout << t.label << " D " << format_number(e.D) << " window " << e.first << " " << e.last
              << " N_sat " << (e.N_sat ? std::to_string(*e.N_sat) : std::string("none"))
              << " final_Delta_q " << format_number(t.delta_q.back()) << " max_norm_defect "
              << format_number(t.max_norm_defect) << "\n";
  }
  return Ok;
}

int cmd_classical(const RunConfig& c, bool with_diffusion) {
  const Stages s = basis_stage(c);
  const ClassicalReference ref = classical_reference(c, s.basis, with_diffusion);
  std::vector<std::string> files{write_layer_scan(c, ref.layer, out_path(c, "layer.csv"))};
  if (with_diffusion) {
    files.push_back(write_classical_ensemble(c, ref.diffusion, out_path(c, "classical.csv")));
  }
  record(c, files);
  print("separatrix_energy", ref.layer.separatrix_energy);
  print("band_low", ref.layer.band_low);
  print("band_high", ref.layer.band_high);
  print("layer_width", ref.layer.layer_width);
  print("touches_scan_edge", ref.layer.touches_scan_edge ? "yes" : "no");
  print("M_s", ref.layer.M_s);
  if (with_diffusion) {
    print("D_classical", ref.diffusion.D);
    print("D_classical_se", ref.diffusion.standard_error);
    print("escaped", ref.diffusion.escaped);
  }
  return Ok;
}

int report_scan(const ScanOutcome& out) {
  std::vector<double> mu, dq, dc;
  bool below = true;
  for (const auto& r : out.rows) {
    std::cout << "mu " << format_number(r.mu) << " status " << r.status << " D_quantum "
              << format_number(r.D_quantum) << " D_classical " << format_number(r.D_classical)
              << " M_s " << r.M_s << "\n";
    if (r.status != "ok") continue;
    mu.push_back(r.mu);
    dq.push_back(r.D_quantum_median);
    dc.push_back(r.D_classical);
    below = below && r.D_quantum < r.D_classical;
  }
  print("computed", out.computed);
  print("reused", out.reused);
  print("failed", out.failed);
  print("quantum_below_classical", below ? "yes" : "no");
  print("quantum_decreasing", non_increasing_in_inv_sqrt_mu(mu, dq) ? "yes" : "no");
  print("classical_decreasing", non_increasing_in_inv_sqrt_mu(mu, dc) ? "yes" : "no");
  std::cerr << "wrote " << out.fig5_path << "\n";
  return out.failed > 0 ? PartialScan : Ok;
}

int cmd_figure(const RunConfig& c, const std::string& which, const std::vector<double>& mu_values) {
  if (which == "fig5") return report_scan(run_scan(c));
  if (which == "fig3") {
    const std::vector<double> mus = mu_values.empty() ? std::vector<double>{c.resonance.mu} : mu_values;
    for (double mu : mus) require(mu > 0.0, "--mu-values must be positive");
    std::vector<std::string> files;
    for (double mu : mus) {
      const RunConfig cm = c.with_mu(mu);
      const Stages s = basis_stage(cm);
      const FloquetOperator op = operator_stage(cm, s.basis);
      const std::string name = mu_values.empty() ? "fig3.csv" : "fig3_mu" + format_number(mu) + ".csv";
      files.push_back(write_fig3(cm, op, out_path(cm, name)));
      std::cout << "mu " << format_number(mu) << " fraction_sqrt_sigma_above_0.5 "
                << format_number(delocalized_fraction(op, 0.5)) << "\n";
    }
    record(c, files);
    return Ok;
  }
  const Stages s = basis_stage(c);
  if (which == "fig1") {
    record(c, {write_fig1(c, s.basis, out_path(c, "fig1.csv"))});
  } else if (which == "fig2") {
    record(c, {write_fig2(c, s.basis, out_path(c, "fig2.csv"))});
  } else if (which == "fig4") {
    const FloquetOperator op = operator_stage(c, s.basis);
    record(c, {write_fig4(c, fig4_trajectories(c, op, s.basis), out_path(c, "fig4.csv"))});
  }
  return Ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qad: quantum diffusion in a driven quartic oscillator pair"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", QAD_VERSION);
  Overrides overrides;
  overrides.install(app);

  auto* spectrum = app.add_subcommand("spectrum", "single-oscillator levels and coordinate elements");
  auto* resonance = app.add_subcommand("resonance", "diagonalize the resonance groups");
  auto* floquet = app.add_subcommand("floquet", "one-period operator and its eigenstates");
  bool all_packets = false;
  auto* evolve_cmd = app.add_subcommand("evolve", "stroboscopic packet evolution");
  evolve_cmd->add_option("--initial", overrides.values["dynamics.initial"],
                         "center | separatrix | above");
  evolve_cmd->add_flag("--all", all_packets, "evolve center, above and separatrix packets");
  bool no_diffusion = false;
  auto* classical = app.add_subcommand("classical", "stochastic layer and classical diffusion");
  classical->add_flag("--no-diffusion", no_diffusion, "only map the layer");
  std::string figure_name;
  std::vector<double> mu_values;
  auto* figure = app.add_subcommand("figure", "write the data of one figure");
  figure->add_option("name", figure_name, "fig1 | fig2 | fig3 | fig4 | fig5")
      ->required()
      ->check(CLI::IsMember({"fig1", "fig2", "fig3", "fig4", "fig5"}));
  figure->add_option("--mu-values", mu_values, "fig3: one CSV per mu");
  auto* scan = app.add_subcommand("scan", "diffusion coefficients over the mu grid (resumable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : Validation;
  }

  try {
    const RunConfig config = overrides.resolve();
    if (*spectrum) return cmd_spectrum(config);
    if (*resonance) return cmd_resonance(config);
    if (*floquet) return cmd_floquet(config);
    if (*evolve_cmd) return cmd_evolve(config, all_packets);
    if (*classical) return cmd_classical(config, !no_diffusion);
    if (*figure) return cmd_figure(config, figure_name, mu_values);
    if (*scan) return report_scan(run_scan(config));
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return Validation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return Numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Numerical;
  }
  return Ok;
}
