#include "qad/classical_reference.hpp"

#include <algorithm>
#include <boost/math/special_functions/ellint_1.hpp>
#include <boost/math/special_functions/jacobi_elliptic.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "qad/errors.hpp"

namespace qad {

namespace {

constexpr double pi = std::numbers::pi;

// Symmetric 4th-order Runge-Kutta-Nystrom splitting (Blanes & Moan, six
// force stages): kick b1 drift a1 kick b2 drift a2 kick b3 drift a3 kick b4
// and the mirror image.
constexpr double a1 = 0.245298957184271;
constexpr double a2 = 0.604872665711080;
constexpr double a3 = 0.5 - (a1 + a2);
constexpr double b1 = 0.0829844064174052;
constexpr double b2 = 0.396309801498368;
constexpr double b3 = -0.0390563049223486;
constexpr double b4 = 1.0 - 2.0 * (b1 + b2 + b3);
constexpr double drift_weights[6] = {a1, a2, a3, a3, a2, a1};
constexpr double kick_weights[7] = {b1, b2, b3, b4, b3, b2, b1};
constexpr int stages = 6;  // kick times per step, the seventh is the next step's first

double kick_offset(int k) {
  double c = 0.0;
  for (int i = 0; i < k; ++i) c += drift_weights[i];
  return c;
}

double loop_constant() {
  const double g = std::tgamma(0.25);
  return g * g / (6.0 * std::sqrt(2.0 * pi));  // int_0^1 sqrt(1 - u^4) du
}

double modulus() { return 1.0 / std::sqrt(2.0); }

double complete_k() {
  static const double k = boost::math::ellint_1(modulus());
  return k;
}

double drive_value(const ClassicalParams& p, double t) {
  return p.f0 * (std::cos(p.omega1 * t) + std::cos(p.omega2 * t));
}

}  // namespace

ClassicalParams classical_params(double mu, const DriveParams& drive) {
  return {mu, drive.f0, drive.omega1(), drive.omega2()};
}

namespace quartic {

double energy(double x, double p) { return 0.5 * p * p + 0.25 * x * x * x * x; }

double action(double e) { return 8.0 * loop_constant() * std::pow(e, 0.75) / (2.0 * pi); }

double energy_of_action(double i) {
  return std::pow(2.0 * pi * i / (8.0 * loop_constant()), 4.0 / 3.0);
}

double frequency(double e) { return 2.0 * pi * std::pow(e, 0.25) / (6.0 * loop_constant()); }

double period(double e) { return 2.0 * pi / frequency(e); }

double d2e_di2(double i) {
  const double c = std::pow(2.0 * pi / (8.0 * loop_constant()), 4.0 / 3.0);
  return (4.0 / 9.0) * c * std::pow(i, -2.0 / 3.0);
}

double fourier_amplitude(double e, int r) {
  if (r % 2 == 0) return 0.0;
  const double a = std::pow(4.0 * e, 0.25);
  const double nome = std::exp(-pi);  // K'/K = 1 at k^2 = 1/2
  const double qr = std::pow(nome, r);
  return a * (2.0 * pi / (modulus() * complete_k())) * std::pow(nome, 0.5 * r) / (1.0 + qr);
}

std::pair<double, double> point(double e, double theta) {
  const double a = std::pow(4.0 * e, 0.25);
  const double u = 2.0 * complete_k() * theta / pi;
  double cn = 0.0, dn = 0.0;
  const double sn = boost::math::jacobi_elliptic(modulus(), u, &cn, &dn);
  return {a * cn, -a * a * sn * dn};
}

}  // namespace quartic

double oscillator_energy(double x, double p) { return quartic::energy(x, p); }

double unperturbed_energy(const ClassicalState& s, double mu) {
  return quartic::energy(s.x, s.px) + quartic::energy(s.y, s.py) - mu * s.x * s.y;
}

double total_energy(const ClassicalState& s, const ClassicalParams& params) {
  return unperturbed_energy(s, params.mu) - s.x * drive_value(params, s.t);
}

SplittingIntegrator::SplittingIntegrator(const ClassicalParams& params, double h,
                                         int steps_per_period)
    : params_(params), h_(h), steps_per_period_(steps_per_period) {
  require(h != 0.0 && std::isfinite(h), "integrator step must be finite and non-zero");
  if (steps_per_period_ > 0) {
    table_.resize(static_cast<std::size_t>(steps_per_period_) * stages);
    for (int n = 0; n < steps_per_period_; ++n) {
      for (int k = 0; k < stages; ++k) table_[stages * n + k] = drive(n * h_ + kick_offset(k) * h_);
    }
  }
}

double SplittingIntegrator::drive(double t) const { return drive_value(params_, t); }

double SplittingIntegrator::tabulated(long index, int stage) const {
  long n = index % steps_per_period_;
  if (n < 0) n += steps_per_period_;
  return table_[stages * n + stage];
}

void SplittingIntegrator::kick(ClassicalState& s, double tau, double f) const {
  s.px += tau * (-s.x * s.x * s.x + params_.mu * s.y + f);
  s.py += tau * (-s.y * s.y * s.y + params_.mu * s.x);
}

void SplittingIntegrator::step(ClassicalState& s) const {
  const double h = h_;
  double f[stages + 1];
  const double n_real = s.t / h;
  const long n = std::lround(n_real);
  if (steps_per_period_ > 0 && h > 0.0 && std::abs(n_real - n) < 1e-6) {
    for (int k = 0; k < stages; ++k) f[k] = tabulated(n, k);
    f[stages] = tabulated(n + 1, 0);
  } else {
    for (int k = 0; k < stages; ++k) f[k] = drive(s.t + kick_offset(k) * h);
    f[stages] = drive(s.t + h);
  }
  const double t0 = s.t;
  for (int k = 0; k < stages; ++k) {
    kick(s, kick_weights[k] * h, f[k]);
    s.x += drift_weights[k] * h * s.px;
    s.y += drift_weights[k] * h * s.py;
  }
  kick(s, kick_weights[stages] * h, f[stages]);
  s.t = t0 + h;
}

void SplittingIntegrator::advance(ClassicalState& s, long count) const {
  const double t0 = s.t;
  for (long i = 0; i < count; ++i) {
    step(s);
    // Re-anchor time on the step grid to avoid drift of the table index.
    s.t = t0 + (i + 1) * h_;
    if ((i & 1023) == 1023 || i + 1 == count) {
      if (!std::isfinite(s.x + s.y + s.px + s.py) || std::abs(s.x) > escape_radius ||
          std::abs(s.y) > escape_radius) {
        throw NumericalError("classical trajectory escaped at t=" + std::to_string(s.t));
      }
    }
  }
}

std::vector<ClassicalState> integrate_trajectory(const ClassicalState& s0,
                                                 const ClassicalParams& params, double t_end,
                                                 double h, double sample_interval,
                                                 double max_h_omega) {
  require(h > 0.0, "step size must be positive");
  require(t_end > s0.t, "t_end must exceed the start time");
  const double omega_max = std::max(quartic::frequency(quartic::energy(s0.x, s0.px)),
                                    quartic::frequency(quartic::energy(s0.y, s0.py)));
  if (h * omega_max > max_h_omega) {
    throw ValidationError("step-size violation: h*omega = " + std::to_string(h * omega_max) +
                          " exceeds " + std::to_string(max_h_omega));
  }
  const long per_sample = std::max(1L, std::lround(sample_interval / h));
  const long total = std::lround((t_end - s0.t) / h);
  SplittingIntegrator integrator(params, h);
  std::vector<ClassicalState> out{s0};
  ClassicalState s = s0;
  for (long done = 0; done < total;) {
    const long chunk = std::min(per_sample, total - done);
    integrator.advance(s, chunk);
    done += chunk;
    out.push_back(s);
  }
  return out;
}

double PendulumModel::h(double J, double phi) const {
  const double ex = quartic::energy_of_action(action + J);
  const double ey = quartic::energy_of_action(action - J);
  double coupling = 0.0;
  for (int r = 1; r <= harmonics; r += 2) {
    coupling += 0.5 * quartic::fourier_amplitude(ex, r) * quartic::fourier_amplitude(ey, r) *
                std::cos(r * phi);
  }
  return ex + ey - 2.0 * energy - mu * coupling;
}

double PendulumModel::small_oscillation_frequency() const {
  double curvature = 0.0;
  for (int r = 1; r <= harmonics; r += 2) {
    const double a = quartic::fourier_amplitude(energy, r);
    curvature += 0.5 * r * r * a * a;
  }
  return std::sqrt(2.0 * quartic::d2e_di2(action) * mu * curvature);
}

double PendulumModel::action_offset(double value) const {
  require(value > bottom(), "pendulum energy below the resonance centre");
  double hi = std::sqrt(std::max(value - bottom(), 1e-300) / quartic::d2e_di2(action));
  while (h(hi, 0.0) < value) {
    hi *= 2.0;
    require(hi < action, "pendulum energy outside the resonance region");
  }
  auto f = [&](double J) { return h(J, 0.0) - value; };
  boost::uintmax_t iterations = 200;
  const auto r = boost::math::tools::toms748_solve(
      f, 0.0, hi, boost::math::tools::eps_tolerance<double>(50), iterations);
  return 0.5 * (r.first + r.second);
}

ClassicalState PendulumModel::state(double J, double phi, double sum_angle) const {
  const auto [x, px] = quartic::point(quartic::energy_of_action(action + J), sum_angle + 0.5 * phi);
  const auto [y, py] = quartic::point(quartic::energy_of_action(action - J), sum_angle - 0.5 * phi);
  return {x, px, y, py, 0.0};
}

PendulumModel make_pendulum(double hbar0, int n0, double mu) {
  require(hbar0 > 0.0 && n0 >= 0, "invalid resonance centre");
  PendulumModel p;
  p.action = hbar0 * (n0 + 0.5);
  p.energy = quartic::energy_of_action(p.action);
  p.mu = mu;
  return p;
}

double chaos_indicator(const ClassicalState& s0, const ClassicalParams& params, double t_end,
                       double h, int steps_per_period, const ChaosOptions& options) {
  require(t_end > s0.t, "t_end must exceed the start time");
  require(options.twin_distance > 0.0, "twin distance must be positive");
  SplittingIntegrator integrator(params, h, steps_per_period);
  const long per_block =
      options.renormalize_interval > 0.0
          ? std::max(1L, std::lround(options.renormalize_interval / h))
          : std::max(1L, static_cast<long>(steps_per_period > 0 ? steps_per_period : 1000));
  const long total = std::lround((t_end - s0.t) / h);
  const double d0 = options.twin_distance;
  ClassicalState a = s0, b = s0;
  b.x += 0.5 * d0;
  b.px += 0.5 * d0;
  b.y += 0.5 * d0;
  b.py += 0.5 * d0;
  // Exponent over the second half of the run: shear of regular orbits only
  // grows the separation linearly, which the first half absorbs.
  double log_sum = 0.0, log_half = 0.0;
  long done = 0, half_done = 0;
  while (done < total) {
    if (half_done == 0 && 2 * done >= total) {
      half_done = done;
      log_half = log_sum;
    }
    const long chunk = std::min(per_block, total - done);
    integrator.advance(a, chunk);
    integrator.advance(b, chunk);
    done += chunk;
    const double dx = b.x - a.x, dpx = b.px - a.px, dy = b.y - a.y, dpy = b.py - a.py;
    const double d = std::sqrt(dx * dx + dpx * dpx + dy * dy + dpy * dpy);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NumericalError("twin trajectory separation underflow/overflow");
    }
    log_sum += std::log(d / d0);
    const double scale = d0 / d;
    b.x = a.x + dx * scale;
    b.px = a.px + dpx * scale;
    b.y = a.y + dy * scale;
    b.py = a.py + dpy * scale;
    b.t = a.t;
  }
  if (half_done == 0 || half_done == done) return log_sum / (done * h);
  return (log_sum - log_half) / ((done - half_done) * h);
}

int count_levels(const Eigen::VectorXd& levels, double low, double high) {
  int count = 0;
  for (Eigen::Index i = 0; i < levels.size(); ++i) {
    if (levels(i) >= low && levels(i) <= high) ++count;
  }
  return count;
}

namespace {

int steps_for(double period, double omega_max, double max_h_omega) {
  return static_cast<int>(std::ceil(period * omega_max / max_h_omega));
}

}  // namespace

namespace {

// Chaotic point nearest the separatrix grown into a band, bridging single
// regular points.
std::pair<int, int> grow_band(const std::vector<LayerScanPoint>& scan) {
  const int n = static_cast<int>(scan.size());
  int seed = -1;
  for (int i = 0; i < n; ++i) {
    if (!scan[i].chaotic) continue;
    if (seed < 0 || std::abs(scan[i].offset) < std::abs(scan[seed].offset)) seed = i;
  }
  if (seed < 0) throw NumericalError("no chaotic band found near the separatrix");
  int lo = seed, hi = seed;
  while (true) {
    if (lo - 1 >= 0 && scan[lo - 1].chaotic) --lo;
    else if (lo - 2 >= 0 && scan[lo - 2].chaotic) lo -= 2;
    else break;
  }
  while (true) {
    if (hi + 1 < n && scan[hi + 1].chaotic) ++hi;
    else if (hi + 2 < n && scan[hi + 2].chaotic) hi += 2;
    else break;
  }
  return {lo, hi};
}

}  // namespace

LayerMeasurement map_stochastic_layer(const PendulumModel& pendulum, const DriveParams& drive,
                                      const Eigen::VectorXd& levels,
                                      const LayerScanOptions& options) {
  require(pendulum.mu > 0.0, "layer scan needs mu > 0");
  require(options.points >= 3, "layer scan needs at least 3 points");
  require(options.phase_samples >= 1, "phase_samples must be >= 1");
  require(options.offset_range > 0.0 && options.offset_range < 1.0,
          "offset_range must lie in (0, 1)");
  const ClassicalParams params = classical_params(pendulum.mu, drive);
  const double period = drive.period();
  const double h_sep = pendulum.separatrix();

  LayerMeasurement out;
  out.separatrix_energy = h_sep;
  out.scan.resize(options.points);
  double j_max = 0.0;
  for (int i = 0; i < options.points; ++i) {
    auto& p = out.scan[i];
    p.offset = -options.offset_range + 2.0 * options.offset_range * i / (options.points - 1);
    p.energy = h_sep * (1.0 + p.offset);
    j_max = std::max(j_max, pendulum.action_offset(p.energy));
  }
  const double omega_max =
      quartic::frequency(quartic::energy_of_action(pendulum.action + j_max));
  const int spp = steps_for(period, omega_max, options.max_h_omega);
  const double h = period / spp;
  const double libration = 2.0 * pi / pendulum.small_oscillation_frequency();
  const double periods = std::ceil(options.libration_periods * libration / period);
  const double t_end = periods * period;

  auto measure_points = [&](std::vector<LayerScanPoint>& points) {
    for (auto& p : points) {
      const double J = pendulum.action_offset(p.energy);
      p.indicator = 0.0;
      for (int k = 0; k < options.phase_samples; ++k) {
        const double theta = options.sum_angle + 2.0 * pi * k / options.phase_samples;
        const ClassicalState s0 = pendulum.state(J, 0.0, theta);
        p.indicator =
            std::max(p.indicator, chaos_indicator(s0, params, t_end, h, spp, options.chaos));
      }
    }
  };
  measure_points(out.scan);
  std::vector<double> logs;
  // Regular orbits fluctuate around zero at the 1/t level.
  for (const auto& p : out.scan) logs.push_back(std::log10(std::max(p.indicator, 1.0 / t_end)));

  // Threshold halfway (in decades) between the regular baseline, taken as the
  // lower quartile of the scan, and the level of the points nearest the
  // separatrix.
  auto quantile = [](std::vector<double> v, double f) {
    const auto at = v.begin() + static_cast<std::ptrdiff_t>(f * (v.size() - 1));
    std::nth_element(v.begin(), at, v.end());
    return *at;
  };
  const double baseline = quantile(logs, 0.25);
  std::vector<int> order(out.scan.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(out.scan[a].offset) < std::abs(out.scan[b].offset);
  });
  std::vector<double> near;
  for (int k = 0; k < std::min<int>(options.core_points, order.size()); ++k) {
    near.push_back(logs[order[k]]);
  }
  const double core = quantile(near, 0.5);
  if (core - baseline < options.min_separation_decades) {
    throw NumericalError("no chaotic band: the separatrix indicator exceeds the regular baseline "
                         "by only " + std::to_string(core - baseline) + " decades");
  }
  out.threshold = std::pow(10.0, 0.5 * (baseline + core));
  for (auto& p : out.scan) p.chaotic = p.indicator > out.threshold;

  const double step = 2.0 * options.offset_range / (options.points - 1);
  const auto [lo, hi] = grow_band(out.scan);
  const double u_lo = out.scan[lo].offset - 0.5 * step;
  const double u_hi = out.scan[hi].offset + 0.5 * step;
  out.touches_scan_edge = lo == 0 || hi == options.points - 1;

  out.band_low = h_sep * (1.0 + (h_sep > 0.0 ? u_lo : u_hi));
  out.band_high = h_sep * (1.0 + (h_sep > 0.0 ? u_hi : u_lo));
  out.layer_width = out.band_high - out.band_low;
  out.M_s = count_levels(levels, out.band_low, out.band_high);
  return out;
}

ClassicalDiffusionResult classical_diffusion(const PendulumModel& pendulum,
                                             const DriveParams& drive, double band_low,
                                             double band_high, double hbar_omega,
                                             const ClassicalDiffusionOptions& options) {
  require(options.ensemble_size >= 2, "ensemble_size must be >= 2");
  require(band_high >= band_low, "empty energy band");
  require(options.fit_last <= options.periods, "fit window beyond the run");
  const ClassicalParams params = classical_params(pendulum.mu, drive);
  const double period = drive.period();
  const double j_top = pendulum.action_offset(band_high);
  const double omega_max = quartic::frequency(quartic::energy_of_action(pendulum.action + j_top));
  const int spp = steps_for(period, omega_max, options.max_h_omega);
  SplittingIntegrator integrator(params, period / spp, spp);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> energies;  // member -> H0/(hbar omega) per N
  ClassicalDiffusionResult out;
  for (int m = 0; m < options.ensemble_size; ++m) {
    const double value = band_low + (band_high - band_low) * unit(rng);
    const double theta = 2.0 * pi * unit(rng);
    ClassicalState s = pendulum.state(pendulum.action_offset(value), 0.0, theta);
    std::vector<double> series(options.periods + 1);
    series[0] = unperturbed_energy(s, pendulum.mu) / hbar_omega;
    try {
      for (int n = 1; n <= options.periods; ++n) {
        integrator.advance(s, spp);
        series[n] = unperturbed_energy(s, pendulum.mu) / hbar_omega;
      }
    } catch (const NumericalError&) {
      ++out.escaped;
      continue;
    }
    energies.push_back(std::move(series));
  }
  if (energies.size() < 2) throw NumericalError("classical ensemble escaped entirely");

  auto variance_series = [&](const std::vector<int>& members) {
    std::vector<double> var(options.periods + 1);
    for (int n = 0; n <= options.periods; ++n) {
      double mean = 0.0;
      for (int m : members) mean += energies[m][n] - energies[m][0];
      mean /= members.size();
      double v = 0.0;
      for (int m : members) {
        const double shift = energies[m][n] - energies[m][0] - mean;
        v += shift * shift;
      }
      var[n] = v / members.size();
    }
    return var;
  };

  std::vector<int> all(energies.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  out.variance = variance_series(all);
  const LinearFit fit = fit_line(out.variance, options.fit_first, options.fit_last);
  out.D = fit.slope;
  out.residual = fit.residual;
  out.ensemble_size = static_cast<int>(energies.size());
  out.fit_first = options.fit_first;
  out.fit_last = options.fit_last;

  std::mt19937_64 boot(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(energies.size()) - 1);
  double s1 = 0.0, s2 = 0.0;
  for (int b = 0; b < options.bootstrap; ++b) {
    std::vector<int> sample(energies.size());
    for (auto& m : sample) m = pick(boot);
    const double d = fit_line(variance_series(sample), options.fit_first, options.fit_last).slope;
    s1 += d;
    s2 += d * d;
  }
  if (options.bootstrap > 1) {
    const double mean = s1 / options.bootstrap;
    out.standard_error = std::sqrt(std::max(0.0, s2 / options.bootstrap - mean * mean));
  }
  return out;
}

}  // namespace qad
