#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>

#include "rfcrystal/trap_model.hpp"

namespace rfcrystal {

/// Static harmonic well standing in for the time-averaged trap.
struct PseudoHarmonicTrap {
  AxisTriple omega{};  // rad/s, all > 0
  IonSpecies species;
};

PseudoHarmonicTrap pseudo_trap(const TrapConfiguration& config);

enum class CrystalPhase { Linear, Zigzag, ThreeD, Radial2D };

std::string to_string(CrystalPhase phase);

struct IonCrystal {
  Eigen::MatrixX3d positions;   // m, one row per ion
  double energy = 0;            // J
  double gradient_norm = 0;     // N, max per-ion force magnitude
  bool converged = false;
  CrystalPhase phase = CrystalPhase::ThreeD;
  std::uint64_t seed = 0;
  long steps = 0;               // integrator steps of the winning restart

  int size() const { return static_cast<int>(positions.rows()); }
};

/// Trap energy plus pairwise Coulomb energy of a configuration.
/// Throws ValidationError on coincident ions.
double total_potential(const PseudoHarmonicTrap& trap, const Eigen::MatrixX3d& positions);

/// Analytic gradient of total_potential, N x 3, newtons.
Eigen::MatrixX3d potential_gradient(const PseudoHarmonicTrap& trap,
                                    const Eigen::MatrixX3d& positions);

struct EquilibriumOptions {
  int restarts = 8;
  long max_steps = 400000;          // per restart
  double force_tolerance = 1e-18;   // N, max per-ion
  double energy_rel_tolerance = 1e-12;
  int energy_window = 100;          // steps between energy-change checks
  double planar_extent_tolerance = 1e-9;  // m, for the phase label
};

class ConvergenceError;

/// Damped-dynamics minimization of the N-ion potential: velocity-Verlet with a
/// viscous term, critically damped against the slowest trap frequency, ions
/// seeded uniformly in a size-matched ellipsoid from a deterministic generator.
/// Runs `restarts` seeds derived from `seed` and keeps the lowest energy
/// (ties by seed). Deterministic: same inputs give bit-identical positions.
/// Throws ConvergenceError carrying the best configuration if no restart meets
/// the tolerances.
IonCrystal find_equilibrium(const PseudoHarmonicTrap& trap, int n_ions, std::uint64_t seed,
                            const EquilibriumOptions& options = {});

/// Axis-extent classification of a converged crystal. Extents below the
/// tolerance count as collapsed: two collapsed axes give Linear, one collapsed
/// gives Radial2D (z) or Zigzag (a radial axis), none gives ThreeD.
CrystalPhase classify_phase(const IonCrystal& crystal, double planar_extent_tolerance = 1e-9);

/// Non-convergence report that still carries the best configuration found.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, IonCrystal best)
      : std::runtime_error(what), best_effort(std::move(best)) {}
  IonCrystal best_effort;
};

}  // namespace rfcrystal
