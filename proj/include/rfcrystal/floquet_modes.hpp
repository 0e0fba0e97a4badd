#pragma once

#include <Eigen/Core>
#include <vector>

#include "rfcrystal/equilibrium.hpp"
#include "rfcrystal/trap_model.hpp"

namespace rfcrystal {

/// Energy-curvature form of the drive: the trap potential energy per ion is
/// (1/2) Lambda_a(t) r_a^2 with Lambda_a = B_a + A_a cos(Omega t),
/// B_a = 2 Q U0 eta_dc^a, A_a = 2 Q V0 eta_rf^a.
struct TimeDependentTrapCoefficients {
  AxisTriple drive{};   // A_a, J/m^2
  AxisTriple statics{}; // B_a, J/m^2
  double drive_frequency = 0;  // rad/s
};

TimeDependentTrapCoefficients trap_coefficients(const TrapConfiguration& config);

/// Normal modes of the pseudopotential-plus-Coulomb energy about equilibrium.
/// mode_matrix columns are modes, rows are ion-axis pairs (row 3*i + a);
/// columns are orthonormal, frequencies sorted ascending.
struct ModeDecomposition {
  Eigen::VectorXd frequencies;  // rad/s, 3N
  Eigen::MatrixXd mode_matrix;  // Gamma, 3N x 3N
  Eigen::MatrixX3d equilibrium; // R0, the expansion point
  IonSpecies species;

  int n_ions() const { return static_cast<int>(equilibrium.rows()); }
};

/// Mass-scaled eigendecomposition of the Hessian at equilibrium. Center-of-mass
/// modes come out at exactly the trap frequencies. Throws
/// UnstableConfigurationError when a Hessian eigenvalue is negative.
ModeDecomposition hessian_normal_modes(const IonCrystal& crystal, const PseudoHarmonicTrap& trap);

/// Dimensionless driven-mode system in scaled time tau = Omega t / 2:
///   S'' + (A - 2 Q cos 2 tau) S = G + 2 F cos 2 tau
/// with A = 4(Lambda + J)/(Omega^2 m), Q = -2 Y/(Omega^2 m),
/// G = -4 P/(Omega^2 m), F = -2 L/(Omega^2 m), built from
/// W1 = diag{B_a - m omega_a^2}, W2 = diag{A_a} via
/// J = G^T W1 G, Y = G^T W2 G, P = G^T W1 R0, L = G^T W2 R0.
struct MathieuSystem {
  Eigen::MatrixXd a_matrix;  // A, symmetric
  Eigen::MatrixXd q_matrix;  // Q, symmetric
  Eigen::VectorXd g_vector;  // G
  Eigen::VectorXd f_vector;  // F
  // intermediates kept for audit
  Eigen::MatrixXd j_matrix;
  Eigen::MatrixXd y_matrix;
  Eigen::VectorXd p_vector;
  Eigen::VectorXd l_vector;
  double drive_frequency = 0;  // rad/s
};

MathieuSystem assemble_mathieu_system(const ModeDecomposition& decomposition,
                                      const TimeDependentTrapCoefficients& coefficients,
                                      const PseudoHarmonicTrap& trap);

/// Continued-fraction tail T2 = [C4 - Q[C6 - Q[...]^-1 Q]^-1 Q]^-1 with
/// C_2n = A - 4 n^2. `ladder[k]` holds T_{k+2}, so B_{2n} = ladder[n-2] Q B_{2n-2}.
struct ContinuedFractionTail {
  Eigen::MatrixXd t2;
  std::vector<Eigen::MatrixXd> ladder;  // T_2 .. T_depth
  int depth = 0;                        // converged n_max
};

/// Evaluates the tail, deepening until ||T2|| changes by less than `tolerance`
/// (max-norm) or max_depth is reached. Throws ResonantHarmonicError when some
/// C_2n is numerically singular.
ContinuedFractionTail continued_fraction_tail(const MathieuSystem& system, int max_depth = 10,
                                              double tolerance = 1e-12);

/// Fourier coefficients of the pi-periodic driven solution
/// S(tau) = B0 + 2 sum_{n>=1} B_2n cos(2 n tau).
struct MicromotionSolution {
  std::vector<Eigen::VectorXd> b_coefficients;  // B0, B2, ..., B_{2 depth}
  int truncation_depth = 0;
  double residual = 0;          // max row residual, relative to the drive terms
  double block_condition = 0;   // condition number of the (B0, B2) block solve
  bool trusted = true;          // block_condition below the resonance guard
  double drive_frequency = 0;   // rad/s
};

/// Condition number above which the driven solve is flagged untrusted.
inline constexpr double resonance_condition_guard = 1e8;

/// Solves the (B0, B2) block system [A, -2Q; -Q, C2 - Q T2 Q] and fills the
/// higher harmonics through the tail ladder. Throws ParametricResonanceError
/// when the block system is singular.
MicromotionSolution solve_micromotion(const MathieuSystem& system,
                                      const ContinuedFractionTail& tail);

/// Driven trajectories r_i(t) = R0_i + Gamma S(t) sampled at the given times.
struct TrajectorySeries {
  std::vector<double> times;                 // s
  std::vector<Eigen::MatrixX3d> positions;   // one N x 3 frame per time
};

TrajectorySeries ion_trajectories(const MicromotionSolution& solution,
                                  const ModeDecomposition& decomposition,
                                  const IonCrystal& crystal, const std::vector<double>& times);

/// Peak displacement about the time-averaged position over one drive period,
/// split into the in-plane (radial) magnitude and the axial component.
struct MicromotionAmplitudes {
  Eigen::VectorXd radial;  // m, per ion
  Eigen::VectorXd axial;   // m, per ion
};

MicromotionAmplitudes micromotion_amplitudes(const MicromotionSolution& solution,
                                             const ModeDecomposition& decomposition,
                                             const IonCrystal& crystal);

}  // namespace rfcrystal
