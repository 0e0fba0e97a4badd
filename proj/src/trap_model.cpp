#include "rfcrystal/trap_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rfcrystal/constants.hpp"
#include "rfcrystal/equilibrium.hpp"

namespace rfcrystal {

namespace {

double curvature_scale(const AxisTriple& eta) {
  return std::max({std::abs(eta[0]), std::abs(eta[1]), std::abs(eta[2])});
}

void check_laplace(const AxisTriple& eta, const char* name) {
  const double sum = eta[0] + eta[1] + eta[2];
  const double scale = curvature_scale(eta);
  if (std::abs(sum) > laplace_tolerance * std::max(scale, 1.0)) {
    throw ValidationError(std::string(name) +
                          " curvatures violate Laplace closure: sum = " + std::to_string(sum));
  }
}

}  // namespace

IonSpecies ytterbium_171() {
  return IonSpecies{170.9363 * constants::atomic_mass_unit, constants::elementary_charge};
}

void validate(const TrapConfiguration& config) {
  if (!(config.species.mass > 0)) throw ValidationError("ion mass must be positive");
  if (!(config.species.charge > 0)) throw ValidationError("ion charge must be positive");
  if (!(config.drive_frequency > 0)) throw ValidationError("drive frequency must be positive");
  if (!(config.radial_size > 0)) throw ValidationError("radial size d0 must be positive");
  if (!(config.axial_size > 0)) throw ValidationError("axial size z0 must be positive");
  for (double eta : config.rf_curvature)
    if (!std::isfinite(eta)) throw ValidationError("rf curvature must be finite");
  for (double eta : config.dc_curvature)
    if (!std::isfinite(eta)) throw ValidationError("dc curvature must be finite");
  check_laplace(config.rf_curvature, "rf");
  check_laplace(config.dc_curvature, "dc");
}

TrapConfiguration ideal_quadrupole_trap(const IonSpecies& species, double rf_amplitude,
                                        double dc_voltage, double drive_frequency,
                                        double radial_size, double axial_size, double kappa,
                                        double chi, double gamma) {
  if (std::abs(chi + gamma - 2.0) > 1e-9)
    throw ValidationError("anisotropy factors must satisfy chi + gamma = 2");
  TrapConfiguration config;
  config.species = species;
  config.rf_amplitude = rf_amplitude;
  config.dc_voltage = dc_voltage;
  config.drive_frequency = drive_frequency;
  config.radial_size = radial_size;
  config.axial_size = axial_size;
  const double r2 = 2.0 * radial_size * radial_size;
  config.rf_curvature = {1.0 / r2, -1.0 / r2, 0.0};
  const double z2 = axial_size * axial_size;
  config.dc_curvature = {-kappa * chi / (2.0 * z2), -kappa * gamma / (2.0 * z2), kappa / z2};
  validate(config);
  return config;
}

TrapConfiguration frequency_fitted_trap(const IonSpecies& species, double rf_amplitude,
                                        double dc_voltage, double drive_frequency,
                                        double radial_size, double axial_size,
                                        const AxisTriple& secular_frequencies) {
  if (!(drive_frequency > 0)) throw ValidationError("drive frequency must be positive");
  if (!(rf_amplitude > 0)) throw ValidationError("frequency fit requires a positive rf amplitude");
  if (!(dc_voltage > 0)) throw ValidationError("frequency fit requires a positive dc voltage");
  for (double w : secular_frequencies)
    if (!(w > 0)) throw ValidationError("target secular frequencies must be positive");

  const double omega = drive_frequency;
  const auto beta2 = [omega](double w) {
    const double b = 2.0 * w / omega;
    return b * b;
  };
  const double bx2 = beta2(secular_frequencies[0]);
  const double by2 = beta2(secular_frequencies[1]);
  const double az = beta2(secular_frequencies[2]);  // q_z = 0, so beta_z^2 = a_z

  // Laplace closure a_x + a_y = -a_z plus q_y = -q_x split the radial targets.
  const double ax = (bx2 - by2 - az) / 2.0;
  const double ay = (by2 - bx2 - az) / 2.0;
  const double q2 = 2.0 * (bx2 - ax);
  if (!(q2 > 0))
    throw ValidationError("requested frequencies are unreachable: negative q^2 in fit");
  const double qx = -std::sqrt(q2);  // eta_rf^x > 0 under the signed-q convention

  const double m = species.mass;
  const double qc = species.charge;
  const double dc_scale = m * omega * omega / (8.0 * qc * dc_voltage);
  const double rf_scale = m * omega * omega / (4.0 * qc * rf_amplitude);

  TrapConfiguration config;
  config.species = species;
  config.rf_amplitude = rf_amplitude;
  config.dc_voltage = dc_voltage;
  config.drive_frequency = drive_frequency;
  config.radial_size = radial_size;
  config.axial_size = axial_size;
  config.dc_curvature = {ax * dc_scale, ay * dc_scale, az * dc_scale};
  config.rf_curvature = {-qx * rf_scale, qx * rf_scale, 0.0};
  validate(config);
  return config;
}

GeometricFactors geometry_factors(const TrapConfiguration& config) {
  validate(config);
  if (!(config.dc_curvature[2] > 0))
    throw ValidationError("axially deconfining dc curvature: eta_dc^z must be positive");
  const double z2 = config.axial_size * config.axial_size;
  GeometricFactors factors;
  factors.kappa = z2 * config.dc_curvature[2];
  factors.chi = -2.0 * z2 * config.dc_curvature[0] / factors.kappa;
  factors.gamma = -2.0 * z2 * config.dc_curvature[1] / factors.kappa;
  return factors;
}

SecularModel mathieu_parameters(const TrapConfiguration& config) {
  validate(config);
  const double m = config.species.mass;
  const double qc = config.species.charge;
  const double omega2 = config.drive_frequency * config.drive_frequency;
  SecularModel model;
  model.drive_frequency = config.drive_frequency;
  for (int i = 0; i < 3; ++i) {
    model.a[i] = 8.0 * qc * config.dc_voltage * config.dc_curvature[i] / (m * omega2);
    model.q[i] = -4.0 * qc * config.rf_amplitude * config.rf_curvature[i] / (m * omega2);
  }
  return model;
}

SecularModel secular_frequencies_pseudo(SecularModel model, double q2_threshold) {
  bool valid = true;
  for (int i = 0; i < 3; ++i) {
    const double b2 = model.a[i] + model.q[i] * model.q[i] / 2.0;
    if (b2 > 0) {
      model.beta[i] = std::sqrt(b2);
      model.omega[i] = model.beta[i] * model.drive_frequency / 2.0;
      model.stable[i] = true;
    } else {
      model.beta[i] = 0.0;
      model.omega[i] = 0.0;
      model.stable[i] = false;  // includes the marginal b2 == 0 boundary
    }
    const double q2 = model.q[i] * model.q[i];
    if (q2 > 0) {
      valid = valid && (model.a[i] < q2) && (q2 < q2_threshold);
    } else {
      valid = valid && (model.a[i] >= 0);  // undriven axis: pseudopotential exact
    }
  }
  model.pseudopotential_valid = valid;
  return model;
}

SecularModel secular_model(const TrapConfiguration& config, double q2_threshold) {
  return secular_frequencies_pseudo(mathieu_parameters(config), q2_threshold);
}

namespace {

// One RK4 step of u'' = -(a - 2 q cos 2 xi) u for the 2x2 fundamental matrix.
struct MathieuState {
  double u1, v1, u2, v2;
};

MathieuState mathieu_derivative(const MathieuState& s, double xi, double a, double q) {
  const double k = -(a - 2.0 * q * std::cos(2.0 * xi));
  return {s.v1, k * s.u1, s.v2, k * s.u2};
}

MathieuState axpy(const MathieuState& s, const MathieuState& d, double h) {
  return {s.u1 + h * d.u1, s.v1 + h * d.v1, s.u2 + h * d.u2, s.v2 + h * d.v2};
}

}  // namespace

double characteristic_exponent_numeric(double a, double q, const MonodromyOptions& options) {
  const int steps = options.steps_per_period;
  const double h = constants::pi / steps;
  MathieuState s{1.0, 0.0, 0.0, 1.0};
  for (int i = 0; i < steps; ++i) {
    const double xi = i * h;
    const MathieuState k1 = mathieu_derivative(s, xi, a, q);
    const MathieuState k2 = mathieu_derivative(axpy(s, k1, h / 2), xi + h / 2, a, q);
    const MathieuState k3 = mathieu_derivative(axpy(s, k2, h / 2), xi + h / 2, a, q);
    const MathieuState k4 = mathieu_derivative(axpy(s, k3, h), xi + h, a, q);
    s.u1 += h / 6 * (k1.u1 + 2 * k2.u1 + 2 * k3.u1 + k4.u1);
    s.v1 += h / 6 * (k1.v1 + 2 * k2.v1 + 2 * k3.v1 + k4.v1);
    s.u2 += h / 6 * (k1.u2 + 2 * k2.u2 + 2 * k3.u2 + k4.u2);
    s.v2 += h / 6 * (k1.v2 + 2 * k2.v2 + 2 * k3.v2 + k4.v2);
  }

  // Monodromy eigenvalues: lambda^2 - T lambda + det = 0 with det = 1 (Wronskian).
  const double trace = s.u1 + s.v2;
  const double half = trace / 2.0;
  if (std::abs(half) > 1.0) {
    const double growth = std::abs(half) + std::sqrt(half * half - 1.0);
    if (growth - 1.0 > options.unit_circle_tolerance) {
      throw UnstableMathieuError("unstable (a,q): monodromy eigenvalue off the unit circle, "
                                 "growth factor " + std::to_string(growth) + " per period",
                                 growth);
    }
    return std::abs(half) >= 1.0 ? (half > 0 ? 0.0 : 1.0)
                                 : std::acos(half) / constants::pi;
  }
  return std::acos(half) / constants::pi;
}

double aspect_ratio_threshold(int n_ions) {
  if (n_ions < 1) throw ValidationError("ion count must be at least 1");
  return std::pow(2.264 * n_ions, 0.25);
}

MicromotionFirstOrder first_order_micromotion(const Eigen::MatrixX3d& equilibrium_positions,
                                              const SecularModel& model) {
  MicromotionFirstOrder result;
  const auto n = equilibrium_positions.rows();
  result.first_order.resize(n, 3);
  result.second_order.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int axis = 0; axis < 3; ++axis) {
      const double q = model.q[axis];
      const double r0 = equilibrium_positions(i, axis);
      result.first_order(i, axis) = q * r0 / 2.0;
      result.second_order(i, axis) = q * q * r0 / 32.0;
    }
  }
  return result;
}

MicromotionFirstOrder first_order_micromotion(const IonCrystal& crystal,
                                              const SecularModel& model) {
  return first_order_micromotion(crystal.positions, model);
}

}  // namespace rfcrystal
