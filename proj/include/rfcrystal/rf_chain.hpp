#pragma once

#include <optional>
#include <vector>

#include "rfcrystal/errors.hpp"
#include "rfcrystal/trap_model.hpp"

namespace rfcrystal {

/// In-vacuum dc-blade circuit: the ion trap as a capacitor (C_trap) feeding a
/// shunt filter branch (C_filter + R_filter) in parallel with the feedthrough
/// branch (C_feed + R_feed + L_feed).
struct PickupNetwork {
  double c_trap = 0;    // F
  double c_filter = 0;  // F
  double r_filter = 0;  // ohm
  double c_feed = 0;    // F
  double l_feed = 0;    // henry
  double r_feed = 0;    // ohm
  double drive_frequency = 0;  // rad/s
};

/// Component set back-derived from the quoted branch impedances
/// (|Z_C,feed| = 1.8, |Z_L,feed| = 52, |Z_C,filter| = 7.2, |Z_1| = 600 ohm
/// at 2 pi x 27.51 MHz): C_feed = 3.2 nF, L_feed = 300 nH, C_filter = 800 pF,
/// C_trap = 10 pF, negligible resistances.
PickupNetwork reference_pickup_network();

/// Fraction of the rf voltage appearing on the dc blades, |Z2|/(|Z1|+|Z2|).
/// Branch impedances combine as magnitude sums (|Z_C| + |Z_R| + |Z_L| in
/// series, reciprocal-magnitude addition in parallel), the estimation
/// convention of the source analysis. `with_filter = false` drops the shunt
/// branch entirely.
double pickup_fraction(const PickupNetwork& network, bool with_filter = true);

/// Capacitive divider pick-off ratio C3/(C3 + C4).
double divider_ratio(double c3, double c4);

/// Rectified pick-off amplitude versus rf input frequency.
struct SweepTrace {
  std::vector<double> frequency;  // Hz, strictly increasing
  std::vector<double> amplitude;  // V, >= 0
};

void validate(const SweepTrace& trace);

struct ResonanceFit {
  double f0 = 0;        // Hz, fitted peak
  double q = 0;         // f0 / FWHM
  double fwhm = 0;      // Hz
  double peak = 0;      // V above baseline
  double baseline = 0;  // V
  double residual = 0;  // rms misfit / peak
};

/// Lorentzian amplitude fit a/(1 + ((f-f0)/w)^2) + b. Throws ValidationError
/// "no resonance" when no peak rises above the noise floor and
/// "truncated sweep" when the peak or its half-maximum points run off the
/// trace edge.
ResonanceFit q_factor(const SweepTrace& trace);

/// Uniformly sampled amplitude record.
struct AmplitudeLog {
  std::vector<double> time;   // s, uniform spacing within 1 ppm
  std::vector<double> value;  // V
};

void validate(const AmplitudeLog& log);

struct AllanPoint {
  double tau = 0;    // s
  double sigma = 0;  // overlapping Allan deviation of y = V/<V>
  bool valid = false;  // false: insufficient data at this tau
};

/// Overlapping Allan deviation of the fractional amplitude at each requested
/// averaging time. Taus must be integer multiples of the sample period; taus
/// beyond half the record span are returned with valid = false.
std::vector<AllanPoint> allan_deviation(const AmplitudeLog& log, const std::vector<double>& taus);

/// White-noise 1/sqrt(tau) rescaling of an Allan deviation value.
double rescale_white_noise_stability(double sigma, double tau_from, double tau_to);

/// rms secular-frequency jitter per radial axis (Hz) from a relative rf
/// amplitude stability delta V / V: for q-dominated radial confinement
/// omega_r scales linearly with V0, so delta f = f_r * (delta V / V).
std::array<double, 2> frequency_jitter(double relative_amplitude_stability,
                                       const SecularModel& model);

}  // namespace rfcrystal
