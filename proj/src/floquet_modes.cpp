#include "rfcrystal/floquet_modes.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "rfcrystal/constants.hpp"

namespace rfcrystal {

TimeDependentTrapCoefficients trap_coefficients(const TrapConfiguration& config) {
  validate(config);
  TimeDependentTrapCoefficients coefficients;
  coefficients.drive_frequency = config.drive_frequency;
  for (int axis = 0; axis < 3; ++axis) {
    coefficients.drive[axis] =
        2.0 * config.species.charge * config.rf_amplitude * config.rf_curvature[axis];
    coefficients.statics[axis] =
        2.0 * config.species.charge * config.dc_voltage * config.dc_curvature[axis];
  }
  return coefficients;
}

ModeDecomposition hessian_normal_modes(const IonCrystal& crystal,
                                       const PseudoHarmonicTrap& trap) {
  if (!crystal.converged)
    throw ValidationError("normal modes require a converged crystal");
  const int n = crystal.size();
  const int dim = 3 * n;
  const double m = trap.species.mass;
  const double kq2 =
      constants::coulomb_constant * trap.species.charge * trap.species.charge;
  const Eigen::MatrixX3d& r = crystal.positions;

  Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < n; ++i)
    for (int axis = 0; axis < 3; ++axis)
      hessian(3 * i + axis, 3 * i + axis) = m * trap.omega[axis] * trap.omega[axis];

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Eigen::RowVector3d d = r.row(i) - r.row(j);
      const double dist = d.norm();
      const double inv3 = 1.0 / (dist * dist * dist);
      const double inv5 = inv3 / (dist * dist);
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          // d^2/dr_i dr_i of k/|r_i - r_j| = 3 d_a d_b / d^5 - delta_ab / d^3
          const double block = kq2 * (3.0 * d(a) * d(b) * inv5 - (a == b ? inv3 : 0.0));
          hessian(3 * i + a, 3 * i + b) += block;
          hessian(3 * j + a, 3 * j + b) += block;
          hessian(3 * i + a, 3 * j + b) -= block;
          hessian(3 * j + a, 3 * i + b) -= block;
        }
      }
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hessian / m);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("Hessian eigendecomposition failed");

  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending, s^-2
  const double scale = std::max(std::abs(values(0)), std::abs(values(dim - 1)));
  ModeDecomposition decomposition;
  decomposition.frequencies.resize(dim);
  for (int k = 0; k < dim; ++k) {
    if (values(k) < -1e-10 * scale) {
      throw UnstableConfigurationError(
          "unstable configuration: mode " + std::to_string(k) +
              " has negative curvature " + std::to_string(values(k)),
          k, values(k));
    }
    decomposition.frequencies(k) = std::sqrt(std::max(values(k), 0.0));
  }
  decomposition.mode_matrix = solver.eigenvectors();
  decomposition.equilibrium = crystal.positions;
  decomposition.species = trap.species;
  return decomposition;
}

namespace {

Eigen::VectorXd flatten(const Eigen::MatrixX3d& positions) {
  Eigen::VectorXd flat(3 * positions.rows());
  for (int i = 0; i < positions.rows(); ++i)
    for (int axis = 0; axis < 3; ++axis) flat(3 * i + axis) = positions(i, axis);
  return flat;
}

Eigen::VectorXd axis_diagonal(const AxisTriple& values, int n) {
  Eigen::VectorXd diag(3 * n);
  for (int i = 0; i < n; ++i)
    for (int axis = 0; axis < 3; ++axis) diag(3 * i + axis) = values[axis];
  return diag;
}

}  // namespace

MathieuSystem assemble_mathieu_system(const ModeDecomposition& decomposition,
                                      const TimeDependentTrapCoefficients& coefficients,
                                      const PseudoHarmonicTrap& trap) {
  const int n = decomposition.n_ions();
  const int dim = 3 * n;
  if (decomposition.mode_matrix.rows() != dim || decomposition.mode_matrix.cols() != dim ||
      decomposition.frequencies.size() != dim)
    throw ValidationError("mode decomposition has inconsistent dimensions");
  if (!(coefficients.drive_frequency > 0))
    throw ValidationError("drive frequency must be positive");

  const double m = trap.species.mass;
  const double drive = coefficients.drive_frequency;

  AxisTriple w1_axis{}, w2_axis{};
  for (int axis = 0; axis < 3; ++axis) {
    w1_axis[axis] = coefficients.statics[axis] - m * trap.omega[axis] * trap.omega[axis];
    w2_axis[axis] = coefficients.drive[axis];
  }
  const Eigen::VectorXd w1 = axis_diagonal(w1_axis, n);
  const Eigen::VectorXd w2 = axis_diagonal(w2_axis, n);
  const Eigen::VectorXd r0 = flatten(decomposition.equilibrium);
  const Eigen::MatrixXd& gamma = decomposition.mode_matrix;

  MathieuSystem system;
  system.drive_frequency = drive;
  system.j_matrix = gamma.transpose() * w1.asDiagonal() * gamma;
  system.y_matrix = gamma.transpose() * w2.asDiagonal() * gamma;
  system.p_vector = gamma.transpose() * (w1.asDiagonal() * r0);
  system.l_vector = gamma.transpose() * (w2.asDiagonal() * r0);

  const double scale = 4.0 / (drive * drive * m);
  Eigen::VectorXd lambda(dim);
  for (int k = 0; k < dim; ++k)
    lambda(k) = m * decomposition.frequencies(k) * decomposition.frequencies(k);

  system.a_matrix = scale * system.j_matrix;
  system.a_matrix += (scale * lambda).asDiagonal();
  system.q_matrix = -0.5 * scale * system.y_matrix;
  system.g_vector = -scale * system.p_vector;
  system.f_vector = -0.5 * scale * system.l_vector;
  return system;
}

namespace {

Eigen::MatrixXd c_matrix(const MathieuSystem& system, int harmonic) {
  const int dim = static_cast<int>(system.a_matrix.rows());
  return system.a_matrix -
         4.0 * harmonic * harmonic * Eigen::MatrixXd::Identity(dim, dim);
}

Eigen::MatrixXd invert_level(const Eigen::MatrixXd& matrix, int harmonic) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(matrix);
  if (!lu.isInvertible())
    throw ResonantHarmonicError(
        "resonant drive harmonic: C_" + std::to_string(2 * harmonic) + " is singular",
        harmonic);
  return lu.inverse();
}

// Tail ladder T_depth .. T_2 for a fixed truncation depth.
std::vector<Eigen::MatrixXd> tail_ladder(const MathieuSystem& system, int depth) {
  std::vector<Eigen::MatrixXd> ladder(static_cast<std::size_t>(depth - 1));
  Eigen::MatrixXd t = invert_level(c_matrix(system, depth), depth);
  ladder[depth - 2] = t;
  for (int level = depth - 1; level >= 2; --level) {
    t = invert_level(c_matrix(system, level) - system.q_matrix * t * system.q_matrix, level);
    ladder[level - 2] = t;
  }
  return ladder;
}

}  // namespace

ContinuedFractionTail continued_fraction_tail(const MathieuSystem& system, int max_depth,
                                              double tolerance) {
  if (max_depth < 2) throw ValidationError("continued fraction depth must be at least 2");
  ContinuedFractionTail result;
  Eigen::MatrixXd previous;
  for (int depth = 2; depth <= max_depth; ++depth) {
    std::vector<Eigen::MatrixXd> ladder = tail_ladder(system, depth);
    const Eigen::MatrixXd& t2 = ladder.front();
    if (depth > 2) {
      const double change = (t2 - previous).cwiseAbs().maxCoeff();
      if (change < tolerance) {
        result.t2 = t2;
        result.ladder = std::move(ladder);
        result.depth = depth;
        return result;
      }
    }
    previous = t2;
  }
  // Small drive terms give geometric decay; reaching this means the expansion
  // is outside its regime.
  throw std::runtime_error("continued fraction tail did not converge by depth " +
                           std::to_string(max_depth));
}

MicromotionSolution solve_micromotion(const MathieuSystem& system,
                                      const ContinuedFractionTail& tail) {
  const int dim = static_cast<int>(system.a_matrix.rows());
  Eigen::MatrixXd block(2 * dim, 2 * dim);
  block.topLeftCorner(dim, dim) = system.a_matrix;
  block.topRightCorner(dim, dim) = -2.0 * system.q_matrix;
  block.bottomLeftCorner(dim, dim) = -system.q_matrix;
  block.bottomRightCorner(dim, dim) =
      c_matrix(system, 1) - system.q_matrix * tail.t2 * system.q_matrix;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues()(2 * dim - 1);
  const double smax = svd.singularValues()(0);
  if (!(smin > 0) || !std::isfinite(smax))
    throw ParametricResonanceError(
        "parametric resonance vicinity: driven block system is singular");

  Eigen::VectorXd rhs(2 * dim);
  rhs.head(dim) = system.g_vector;
  rhs.tail(dim) = system.f_vector;
  const Eigen::VectorXd solution = svd.solve(rhs);

  MicromotionSolution result;
  result.drive_frequency = system.drive_frequency;
  result.block_condition = smax / smin;
  result.trusted = result.block_condition < resonance_condition_guard;
  result.truncation_depth = tail.depth;
  result.b_coefficients.resize(static_cast<std::size_t>(tail.depth) + 1);
  result.b_coefficients[0] = solution.head(dim);
  result.b_coefficients[1] = solution.tail(dim);
  for (int k = 2; k <= tail.depth; ++k) {
    result.b_coefficients[k] =
        tail.ladder[k - 2] * (system.q_matrix * result.b_coefficients[k - 1]);
  }

  // Residuals of the recursion rows, truncated series treated as zero beyond depth.
  const auto& b = result.b_coefficients;
  const double scale = std::max({system.g_vector.cwiseAbs().maxCoeff(),
                                 system.f_vector.cwiseAbs().maxCoeff(),
                                 std::numeric_limits<double>::min()});
  double worst = 0.0;
  for (int row = 0; row <= tail.depth; ++row) {
    Eigen::VectorXd residual = c_matrix(system, row) * b[row];
    if (row == 0) {
      residual -= 2.0 * system.q_matrix * b[1];
      residual -= system.g_vector;
    } else {
      residual -= system.q_matrix * b[row - 1];
      if (row + 1 <= tail.depth) residual -= system.q_matrix * b[row + 1];
      if (row == 1) residual -= system.f_vector;
    }
    worst = std::max(worst, residual.cwiseAbs().maxCoeff());
  }
  result.residual = worst / scale;
  return result;
}

TrajectorySeries ion_trajectories(const MicromotionSolution& solution,
                                  const ModeDecomposition& decomposition,
                                  const IonCrystal& crystal, const std::vector<double>& times) {
  const int n = crystal.size();
  const int dim = 3 * n;
  if (decomposition.mode_matrix.rows() != dim)
    throw ValidationError("decomposition does not match the crystal size");

  TrajectorySeries series;
  series.times = times;
  series.positions.reserve(times.size());
  const double drive = solution.drive_frequency;
  for (double t : times) {
    Eigen::VectorXd s = solution.b_coefficients[0];
    for (std::size_t k = 1; k < solution.b_coefficients.size(); ++k)
      s += 2.0 * std::cos(static_cast<double>(k) * drive * t) * solution.b_coefficients[k];
    const Eigen::VectorXd u = decomposition.mode_matrix * s;
    Eigen::MatrixX3d frame = crystal.positions;
    for (int i = 0; i < n; ++i)
      for (int axis = 0; axis < 3; ++axis) frame(i, axis) += u(3 * i + axis);
    series.positions.push_back(std::move(frame));
  }
  return series;
}

MicromotionAmplitudes micromotion_amplitudes(const MicromotionSolution& solution,
                                             const ModeDecomposition& decomposition,
                                             const IonCrystal& crystal) {
  const int n = crystal.size();
  constexpr int samples = 256;
  MicromotionAmplitudes amplitudes;
  amplitudes.radial = Eigen::VectorXd::Zero(n);
  amplitudes.axial = Eigen::VectorXd::Zero(n);

  // Displacement about the time average R0 + Gamma B0: only the oscillating terms.
  const double drive = solution.drive_frequency;
  const double period = 2.0 * constants::pi / drive;
  for (int sample = 0; sample < samples; ++sample) {
    const double t = period * sample / samples;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(3 * n);
    for (std::size_t k = 1; k < solution.b_coefficients.size(); ++k)
      s += 2.0 * std::cos(static_cast<double>(k) * drive * t) * solution.b_coefficients[k];
    const Eigen::VectorXd u = decomposition.mode_matrix * s;
    for (int i = 0; i < n; ++i) {
      const double in_plane = std::hypot(u(3 * i), u(3 * i + 1));
      amplitudes.radial(i) = std::max(amplitudes.radial(i), in_plane);
      amplitudes.axial(i) = std::max(amplitudes.axial(i), std::abs(u(3 * i + 2)));
    }
  }
  return amplitudes;
}

}  // namespace rfcrystal
