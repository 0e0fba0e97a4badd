#include "rfcrystal/rf_chain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace rfcrystal {

PickupNetwork reference_pickup_network() {
  PickupNetwork network;
  network.c_trap = 10e-12;
  network.c_filter = 800e-12;
  network.r_filter = 0.0;
  network.c_feed = 3.2e-9;
  network.l_feed = 300e-9;
  network.r_feed = 0.0;
  network.drive_frequency = 2.0 * 3.141592653589793 * 27.51e6;
  return network;
}

namespace {

void check_network(const PickupNetwork& network) {
  if (!(network.drive_frequency > 0))
    throw ValidationError("singular impedance: drive frequency must be positive");
  const double values[] = {network.c_trap, network.c_filter, network.r_filter,
                           network.c_feed, network.l_feed, network.r_feed};
  for (double v : values)
    if (v < 0 || !std::isfinite(v)) throw ValidationError("component values must be >= 0");
  if (!(network.c_trap > 0)) throw ValidationError("trap capacitance must be positive");
}

double capacitor_impedance(double c, double omega) {
  if (c == 0) return std::numeric_limits<double>::infinity();
  return 1.0 / (omega * c);
}

}  // namespace

double pickup_fraction(const PickupNetwork& network, bool with_filter) {
  check_network(network);
  const double omega = network.drive_frequency;
  const double z1 = capacitor_impedance(network.c_trap, omega);

  // Branch magnitudes combine additively in series and reciprocally in
  // parallel, matching the source estimate (reactance signs dropped).
  double inverse_z2 = 0.0;
  const double feed =
      capacitor_impedance(network.c_feed, omega) + network.r_feed + omega * network.l_feed;
  if (std::isfinite(feed)) {
    if (feed == 0) return 0.0;  // dead short to ground
    inverse_z2 += 1.0 / feed;
  }
  if (with_filter) {
    const double filter = capacitor_impedance(network.c_filter, omega) + network.r_filter;
    if (std::isfinite(filter)) {
      if (filter == 0) return 0.0;  // perfect shunt
      inverse_z2 += 1.0 / filter;
    }
  }
  if (inverse_z2 == 0.0) return 1.0;  // both branches open: full pickup
  const double z2 = 1.0 / inverse_z2;
  return z2 / (z1 + z2);
}

double divider_ratio(double c3, double c4) {
  if (!(c3 > 0)) throw ValidationError("divider capacitance C3 must be positive");
  if (c4 < 0 || !std::isfinite(c4))
    throw ValidationError("divider capacitance C4 must be >= 0");
  return c3 / (c3 + c4);
}

void validate(const SweepTrace& trace) {
  if (trace.frequency.size() != trace.amplitude.size())
    throw ValidationError("sweep columns must have equal length");
  if (trace.frequency.size() < 8)
    throw ValidationError("sweep needs at least 8 samples");
  for (std::size_t i = 1; i < trace.frequency.size(); ++i)
    if (!(trace.frequency[i] > trace.frequency[i - 1]))
      throw ValidationError("sweep frequencies must be strictly increasing");
  for (double a : trace.amplitude)
    if (a < 0 || !std::isfinite(a)) throw ValidationError("sweep amplitudes must be >= 0");
}

namespace {

struct LorentzianParams {
  double peak, f0, hwhm, baseline;
};

double lorentzian(const LorentzianParams& p, double f) {
  const double u = (f - p.f0) / p.hwhm;
  return p.peak / (1.0 + u * u) + p.baseline;
}

// Robust noise scale from first differences.
double noise_sigma(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  std::vector<double> diffs(values.size() - 1);
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    diffs[i] = std::abs(values[i + 1] - values[i]);
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  return diffs[diffs.size() / 2] / (std::sqrt(2.0) * 0.6745);
}

}  // namespace

ResonanceFit q_factor(const SweepTrace& trace) {
  validate(trace);
  const auto& f = trace.frequency;
  const auto& a = trace.amplitude;
  const std::size_t n = f.size();

  const std::size_t peak_index =
      std::distance(a.begin(), std::max_element(a.begin(), a.end()));
  std::vector<double> sorted = a;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 4, sorted.end());
  const double baseline0 = sorted[sorted.size() / 4];
  const double peak0 = a[peak_index] - baseline0;
  const double sigma = noise_sigma(a);

  if (peak0 <= 0 || peak0 < 5.0 * sigma || peak0 < 1e-12 * std::abs(a[peak_index]))
    throw ValidationError("no resonance: no peak above the noise floor");
  if (peak_index == 0 || peak_index == n - 1)
    throw ValidationError("truncated sweep: resonance peak at the trace edge");

  // Half-maximum crossings bracket the initial width.
  const double half = baseline0 + peak0 / 2.0;
  double f_low = f.front(), f_high = f.back();
  bool low_found = false, high_found = false;
  for (std::size_t i = peak_index; i-- > 0;) {
    if (a[i] <= half) {
      const double t = (half - a[i]) / (a[i + 1] - a[i]);
      f_low = f[i] + t * (f[i + 1] - f[i]);
      low_found = true;
      break;
    }
  }
  for (std::size_t i = peak_index + 1; i < n; ++i) {
    if (a[i] <= half) {
      const double t = (a[i - 1] - half) / (a[i - 1] - a[i]);
      f_high = f[i - 1] + t * (f[i] - f[i - 1]);
      high_found = true;
      break;
    }
  }
  if (!low_found || !high_found)
    throw ValidationError("truncated sweep: half maximum not bracketed by the trace");

  LorentzianParams p{peak0, f[peak_index], std::max((f_high - f_low) / 2.0, f[1] - f[0]),
                     baseline0};

  // Damped Gauss-Newton on (peak, f0, hwhm, baseline).
  double lambda = 1e-3;
  double last_ss = std::numeric_limits<double>::max();
  for (int iteration = 0; iteration < 200; ++iteration) {
    Eigen::MatrixXd jac(n, 4);
    Eigen::VectorXd residual(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (f[i] - p.f0) / p.hwhm;
      const double denom = 1.0 + u * u;
      const double model = p.peak / denom + p.baseline;
      residual(i) = a[i] - model;
      jac(i, 0) = 1.0 / denom;
      jac(i, 1) = p.peak * 2.0 * u / (denom * denom * p.hwhm);
      jac(i, 2) = p.peak * 2.0 * u * u / (denom * denom * p.hwhm);
      jac(i, 3) = 1.0;
    }
    const double ss = residual.squaredNorm();
    Eigen::Matrix4d normal = jac.transpose() * jac;
    normal.diagonal() *= 1.0 + lambda;
    const Eigen::Vector4d step = normal.ldlt().solve(jac.transpose() * residual);
    LorentzianParams next{p.peak + step(0), p.f0 + step(1), p.hwhm + step(2),
                          p.baseline + step(3)};
    if (!(next.hwhm > 0) || !(next.peak > 0)) {
      lambda *= 10.0;
      continue;
    }
    double next_ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = a[i] - lorentzian(next, f[i]);
      next_ss += r * r;
    }
    if (next_ss <= ss) {
      p = next;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (ss - next_ss <= 1e-14 * std::max(ss, 1e-300)) break;
    } else {
      lambda *= 10.0;
    }
    if (std::abs(ss - last_ss) <= 1e-16 * std::max(ss, 1e-300)) break;
    last_ss = ss;
  }

  if (p.f0 <= f.front() || p.f0 >= f.back())
    throw ValidationError("truncated sweep: fitted peak outside the trace");

  ResonanceFit fit;
  fit.f0 = p.f0;
  fit.fwhm = 2.0 * p.hwhm;
  fit.q = p.f0 / fit.fwhm;
  fit.peak = p.peak;
  fit.baseline = p.baseline;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = a[i] - lorentzian(p, f[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(n)) / p.peak;
  return fit;
}

void validate(const AmplitudeLog& log) {
  if (log.time.size() != log.value.size())
    throw ValidationError("amplitude log columns must have equal length");
  if (log.time.size() < 2) throw ValidationError("amplitude log needs at least 2 samples");
  const double dt = log.time[1] - log.time[0];
  if (!(dt > 0)) throw ValidationError("amplitude log timestamps must increase");
  for (std::size_t i = 1; i < log.time.size(); ++i) {
    const double step = log.time[i] - log.time[i - 1];
    if (std::abs(step - dt) > 1e-6 * dt)
      throw ValidationError("amplitude log spacing not uniform within 1 ppm at row " +
                            std::to_string(i));
  }
}

std::vector<AllanPoint> allan_deviation(const AmplitudeLog& log,
                                        const std::vector<double>& taus) {
  validate(log);
  const std::size_t n = log.value.size();
  const double dt = log.time[1] - log.time[0];
  const double mean = std::accumulate(log.value.begin(), log.value.end(), 0.0) /
                      static_cast<double>(n);
  if (mean == 0) throw ValidationError("amplitude log mean is zero");

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = log.value[i] / mean;

  // Prefix sums make every m-sample window average O(1).
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + y[i];

  std::vector<AllanPoint> points;
  points.reserve(taus.size());
  for (double tau : taus) {
    AllanPoint point;
    point.tau = tau;
    const double m_real = tau / dt;
    const auto m = static_cast<long>(std::llround(m_real));
    if (m < 1 || std::abs(m_real - static_cast<double>(m)) > 1e-6 * std::max(m_real, 1.0))
      throw ValidationError("tau must be an integer multiple of the sample period");
    const long windows = static_cast<long>(n) - 2 * m + 1;  // overlapping pairs
    if (windows < 1) {
      point.valid = false;  // insufficient data at this tau
      points.push_back(point);
      continue;
    }
    double sum = 0;
    for (long j = 0; j < windows; ++j) {
      const double first = (prefix[j + m] - prefix[j]) / static_cast<double>(m);
      const double second = (prefix[j + 2 * m] - prefix[j + m]) / static_cast<double>(m);
      const double d = second - first;
      sum += d * d;
    }
    point.sigma = std::sqrt(sum / (2.0 * static_cast<double>(windows)));
    point.valid = true;
    points.push_back(point);
  }
  return points;
}

double rescale_white_noise_stability(double sigma, double tau_from, double tau_to) {
  if (!(sigma >= 0)) throw ValidationError("stability must be >= 0");
  if (!(tau_from > 0) || !(tau_to > 0)) throw ValidationError("taus must be positive");
  return sigma * std::sqrt(tau_from / tau_to);
}

std::array<double, 2> frequency_jitter(double relative_amplitude_stability,
                                       const SecularModel& model) {
  if (!(relative_amplitude_stability >= 0))
    throw ValidationError("relative stability must be >= 0");
  if (!model.stable[0] || !model.stable[1])
    throw ValidationError("frequency jitter requires stable radial axes");
  const double two_pi = 2.0 * 3.141592653589793;
  return {model.omega[0] / two_pi * relative_amplitude_stability,
          model.omega[1] / two_pi * relative_amplitude_stability};
}

}  // namespace rfcrystal
