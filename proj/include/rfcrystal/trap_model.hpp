#pragma once

#include <Eigen/Core>
#include <array>

#include "rfcrystal/errors.hpp"

namespace rfcrystal {

struct IonSpecies {
  double mass = 0;    // kg
  double charge = 0;  // C, positive
};

/// 171Yb+ (the species used throughout the reference data set).
IonSpecies ytterbium_171();

/// Per-axis scalar triple, indexed x=0, y=1, z=2.
using AxisTriple = std::array<double, 3>;

/// Relative tolerance on the Laplace closure sum(eta) = 0.
inline constexpr double laplace_tolerance = 1e-9;

/// Drive and static trap description. Curvatures eta are the quadratic
/// coefficients of the per-volt electrode potentials (1/m^2): the rf potential
/// is V0 cos(Omega t) * sum(eta_rf^a * a^2) and the dc part U0 * sum(eta_dc^a * a^2).
/// They come from field simulation or from one of the preset builders below.
struct TrapConfiguration {
  IonSpecies species;
  double rf_amplitude = 0;     // V0, volts
  double dc_voltage = 0;       // U0, volts
  double drive_frequency = 0;  // Omega_t, rad/s
  double radial_size = 0;      // d0, m
  double axial_size = 0;       // z0, m
  AxisTriple rf_curvature{};   // eta_rf, 1/m^2
  AxisTriple dc_curvature{};   // eta_dc, 1/m^2
};

/// Throws ValidationError on non-physical values or Laplace-violating curvatures.
void validate(const TrapConfiguration& config);

/// Hyperbolic-electrode curvatures: eta_rf = (+1,-1,0)/(2 d0^2),
/// eta_dc = kappa*(-chi/2, -gamma/2, 1)/z0^2. Requires chi + gamma = 2.
TrapConfiguration ideal_quadrupole_trap(const IonSpecies& species, double rf_amplitude,
                                        double dc_voltage, double drive_frequency,
                                        double radial_size, double axial_size,
                                        double kappa = 1.0, double chi = 1.0,
                                        double gamma = 1.0);

/// Curvature set reproducing measured secular frequencies exactly: the axial
/// curvature is inverted from omega_z, the radial dc split from omega_x/omega_y
/// with Laplace closure, and the rf curvature (purely radial, eta_rf^z = 0)
/// absorbs the remainder. Throws if the frequency set is unreachable.
TrapConfiguration frequency_fitted_trap(const IonSpecies& species, double rf_amplitude,
                                        double dc_voltage, double drive_frequency,
                                        double radial_size, double axial_size,
                                        const AxisTriple& secular_frequencies);

struct GeometricFactors {
  double kappa = 0;  // axial efficiency, order one
  double chi = 0;    // radial anisotropy, chi + gamma = 2
  double gamma = 0;
};

/// kappa = z0^2 eta_dc^z, chi = -2 z0^2 eta_dc^x / kappa, gamma = -2 z0^2 eta_dc^y / kappa.
GeometricFactors geometry_factors(const TrapConfiguration& config);

/// Single-ion Mathieu description per axis. Frequencies are left zero until
/// secular_frequencies_pseudo fills them.
struct SecularModel {
  AxisTriple a{};               // static Mathieu parameter
  AxisTriple q{};               // drive Mathieu parameter (signed)
  AxisTriple beta{};            // characteristic exponent sqrt(a + q^2/2)
  AxisTriple omega{};           // secular frequency, rad/s
  std::array<bool, 3> stable{};
  bool pseudopotential_valid = false;  // a < q^2 << 1 on every driven axis
  double drive_frequency = 0;          // rad/s
};

/// Largest q^2 for which the pseudopotential flag may be set.
inline constexpr double default_pseudopotential_q2_threshold = 0.09;

/// a_i = 8 Q U0 eta_dc^i / (m Omega^2), q_i = -4 Q V0 eta_rf^i / (m Omega^2).
SecularModel mathieu_parameters(const TrapConfiguration& config);

/// omega_i = (Omega/2) sqrt(a_i + q_i^2/2); axes with a + q^2/2 <= 0 are
/// flagged unstable (omega forced to 0 at the boundary).
SecularModel secular_frequencies_pseudo(
    SecularModel model, double q2_threshold = default_pseudopotential_q2_threshold);

/// mathieu_parameters followed by secular_frequencies_pseudo.
SecularModel secular_model(const TrapConfiguration& config,
                           double q2_threshold = default_pseudopotential_q2_threshold);

struct MonodromyOptions {
  int steps_per_period = 4096;         // fixed-step RK4 resolution
  double unit_circle_tolerance = 1e-8; // |lambda| - 1 allowed before "unstable"
};

/// Exact Mathieu characteristic exponent beta in the first stability region,
/// from the monodromy matrix of u'' + (a - 2q cos 2 xi) u = 0 over one period.
/// Throws UnstableMathieuError (with the per-period growth factor) when the
/// monodromy eigenvalues leave the unit circle.
double characteristic_exponent_numeric(double a, double q, const MonodromyOptions& options = {});

/// Radial-2D phase requires omega_z / omega_r > (2.264 N)^(1/4).
double aspect_ratio_threshold(int n_ions);

/// Leading-order micromotion amplitudes about time-averaged positions:
/// r1 = q_a r0_a / 2, r2 = q_a^2 r0_a / 32, componentwise. Signs follow the
/// signed q convention; magnitudes are the physical amplitudes.
struct MicromotionFirstOrder {
  Eigen::MatrixX3d first_order;   // m, one row per ion
  Eigen::MatrixX3d second_order;  // m
};

struct IonCrystal;  // equilibrium.hpp

MicromotionFirstOrder first_order_micromotion(const Eigen::MatrixX3d& equilibrium_positions,
                                              const SecularModel& model);
MicromotionFirstOrder first_order_micromotion(const IonCrystal& crystal,
                                              const SecularModel& model);

}  // namespace rfcrystal
