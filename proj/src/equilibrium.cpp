#include "rfcrystal/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rfcrystal/constants.hpp"

namespace rfcrystal {

namespace {

constexpr double coincidence_threshold = 1e-15;  // m

double coulomb_prefactor(const IonSpecies& species) {
  return constants::coulomb_constant * species.charge * species.charge;
}

void check_trap(const PseudoHarmonicTrap& trap) {
  if (!(trap.species.mass > 0)) throw ValidationError("ion mass must be positive");
  if (!(trap.species.charge > 0)) throw ValidationError("ion charge must be positive");
  for (double w : trap.omega)
    if (!(w > 0)) throw ValidationError("pseudopotential frequencies must be positive");
}

double energy_unchecked(const PseudoHarmonicTrap& trap, const Eigen::MatrixX3d& r) {
  const auto n = r.rows();
  const double m = trap.species.mass;
  double e = 0;
  for (int i = 0; i < n; ++i)
    for (int axis = 0; axis < 3; ++axis)
      e += 0.5 * m * trap.omega[axis] * trap.omega[axis] * r(i, axis) * r(i, axis);
  const double kq2 = coulomb_prefactor(trap.species);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (r.row(i) - r.row(j)).norm();
      if (d < coincidence_threshold)
        throw ValidationError("coincident ions: Coulomb energy is singular");
      e += kq2 / d;
    }
  }
  return e;
}

double gradient_unchecked(const PseudoHarmonicTrap& trap, const Eigen::MatrixX3d& r,
                          Eigen::MatrixX3d& grad) {
  const auto n = r.rows();
  const double m = trap.species.mass;
  for (int i = 0; i < n; ++i)
    for (int axis = 0; axis < 3; ++axis)
      grad(i, axis) = m * trap.omega[axis] * trap.omega[axis] * r(i, axis);
  const double kq2 = coulomb_prefactor(trap.species);
  double min_distance = std::numeric_limits<double>::max();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Eigen::RowVector3d d = r.row(i) - r.row(j);
      const double dist = d.norm();
      if (dist < coincidence_threshold)
        throw ValidationError("coincident ions: Coulomb gradient is singular");
      min_distance = std::min(min_distance, dist);
      const Eigen::RowVector3d pair = -kq2 / (dist * dist * dist) * d;
      grad.row(i) -= pair;
      grad.row(j) += pair;
    }
  }
  return min_distance;
}

double max_row_norm(const Eigen::MatrixX3d& m) {
  double best = 0;
  for (int i = 0; i < m.rows(); ++i) best = std::max(best, m.row(i).norm());
  return best;
}

// [0, 1) from the top 53 bits; avoids the unspecified behaviour of
// std::uniform_real_distribution so seeds reproduce across platforms.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform draws inside an axis-aligned ellipsoid with the given semi-axes.
Eigen::RowVector3d draw_in_ellipsoid(std::mt19937_64& rng, const AxisTriple& semi) {
  while (true) {
    const double x = 2.0 * uniform01(rng) - 1.0;
    const double y = 2.0 * uniform01(rng) - 1.0;
    const double z = 2.0 * uniform01(rng) - 1.0;
    if (x * x + y * y + z * z <= 1.0)
      return {x * semi[0], y * semi[1], z * semi[2]};
  }
}

struct RestartResult {
  IonCrystal crystal;
  bool ok = false;
};

RestartResult run_restart(const PseudoHarmonicTrap& trap, int n_ions, std::uint64_t seed,
                          const EquilibriumOptions& options) {
  const double m = trap.species.mass;
  const double omega_min = *std::min_element(trap.omega.begin(), trap.omega.end());
  const double omega_max = *std::max_element(trap.omega.begin(), trap.omega.end());

  // Expected crystal size: two-ion length scale per axis, grown by N^(1/3).
  const double kq2 = coulomb_prefactor(trap.species);
  AxisTriple semi{};
  double two_ion_min = std::numeric_limits<double>::max();
  for (int axis = 0; axis < 3; ++axis) {
    const double two_ion = std::cbrt(2.0 * kq2 / (m * trap.omega[axis] * trap.omega[axis]));
    semi[axis] = two_ion * std::cbrt(static_cast<double>(n_ions));
    two_ion_min = std::min(two_ion_min, two_ion);
  }
  // Seeds closer than half the two-ion scale produce pair frequencies the
  // fixed step cannot integrate; keep them apart.
  const double min_separation = 0.5 * two_ion_min;

  std::mt19937_64 rng(seed);
  Eigen::MatrixX3d r(n_ions, 3);
  for (int i = 0; i < n_ions; ++i) {
    for (int attempt = 0;; ++attempt) {
      const Eigen::RowVector3d candidate = draw_in_ellipsoid(rng, semi);
      bool clear = true;
      for (int j = 0; j < i; ++j)
        if ((r.row(j) - candidate).norm() < min_separation) clear = false;
      if (clear || attempt > 5000) {
        r.row(i) = candidate;
        break;
      }
    }
  }

  // Damped velocity-Verlet: friction critically damps the slowest trap mode.
  const double gamma = 2.0 * omega_min;
  const double dt = 2.0 * constants::pi / (50.0 * omega_max);

  // Largest step resolving the stiffest instantaneous pair interaction,
  // omega_pair^2 = 4 k q^2 / (m d^3). Transient close encounters during the
  // collapse are orders of magnitude stiffer than any trap mode, so the base
  // step is subdivided while they last; at crystal spacings this returns the
  // plain fixed step.
  const auto safe_step = [&](double min_distance) {
    const double omega_pair = std::sqrt(4.0 * kq2 / (m * min_distance * min_distance * min_distance));
    return std::min(dt, 0.3 / omega_pair);
  };

  Eigen::MatrixX3d v = Eigen::MatrixX3d::Zero(n_ions, 3);
  Eigen::MatrixX3d grad(n_ions, 3), grad_new(n_ions, 3);
  double min_distance = gradient_unchecked(trap, r, grad);

  double energy = energy_unchecked(trap, r);
  double window_energy = energy;
  bool energy_settled = false;
  double fmax = max_row_norm(grad);
  long step = 0;

  for (; step < options.max_steps; ++step) {
    double remaining = dt;
    for (int substep = 0; remaining > 0 && substep < 10000; ++substep) {
      const double h = std::min(remaining, safe_step(min_distance));
      const Eigen::MatrixX3d v_half = v + 0.5 * h * (-grad / m - gamma * v);
      r += h * v_half;
      min_distance = gradient_unchecked(trap, r, grad_new);
      v = (v_half - 0.5 * h / m * grad_new) / (1.0 + 0.5 * h * gamma);
      grad.swap(grad_new);
      remaining -= h;
    }
    fmax = max_row_norm(grad);

    if ((step + 1) % options.energy_window == 0) {
      energy = energy_unchecked(trap, r);
      const double scale = std::max(std::abs(energy), std::numeric_limits<double>::min());
      energy_settled = std::abs(energy - window_energy) <= options.energy_rel_tolerance * scale;
      window_energy = energy;
    }
    if (energy_settled && fmax <= options.force_tolerance) {
      ++step;
      break;
    }
  }

  RestartResult result;
  result.crystal.positions = r;
  result.crystal.energy = energy_unchecked(trap, r);
  result.crystal.gradient_norm = fmax;
  result.crystal.converged = energy_settled && fmax <= options.force_tolerance;
  result.crystal.seed = seed;
  result.crystal.steps = step;
  result.ok = result.crystal.converged;
  return result;
}

}  // namespace

PseudoHarmonicTrap pseudo_trap(const TrapConfiguration& config) {
  const SecularModel model = secular_model(config);
  for (int i = 0; i < 3; ++i)
    if (!model.stable[i])
      throw ValidationError("pseudopotential trap requires all axes stable (axis " +
                            std::string(1, "xyz"[i]) + " is not)");
  return PseudoHarmonicTrap{model.omega, config.species};
}

std::string to_string(CrystalPhase phase) {
  switch (phase) {
    case CrystalPhase::Linear: return "linear";
    case CrystalPhase::Zigzag: return "zigzag";
    case CrystalPhase::ThreeD: return "3d";
    case CrystalPhase::Radial2D: return "radial-2d";
  }
  return "unknown";
}

double total_potential(const PseudoHarmonicTrap& trap, const Eigen::MatrixX3d& positions) {
  check_trap(trap);
  return energy_unchecked(trap, positions);
}

Eigen::MatrixX3d potential_gradient(const PseudoHarmonicTrap& trap,
                                    const Eigen::MatrixX3d& positions) {
  check_trap(trap);
  Eigen::MatrixX3d grad(positions.rows(), 3);
  gradient_unchecked(trap, positions, grad);
  return grad;
}

IonCrystal find_equilibrium(const PseudoHarmonicTrap& trap, int n_ions, std::uint64_t seed,
                            const EquilibriumOptions& options) {
  check_trap(trap);
  if (n_ions < 1) throw ValidationError("ion count must be at least 1");
  if (options.restarts < 1) throw ValidationError("at least one restart is required");

  bool have_winner = false;
  IonCrystal winner;
  bool have_best_failed = false;
  IonCrystal best_failed;

  for (int restart = 0; restart < options.restarts; ++restart) {
    const std::uint64_t sub_seed = seed + static_cast<std::uint64_t>(restart);
    RestartResult result = run_restart(trap, n_ions, sub_seed, options);
    if (result.ok) {
      if (!have_winner || result.crystal.energy < winner.energy ||
          (result.crystal.energy == winner.energy && result.crystal.seed < winner.seed)) {
        winner = std::move(result.crystal);
        have_winner = true;
      }
    } else if (!have_best_failed || result.crystal.gradient_norm < best_failed.gradient_norm) {
      best_failed = std::move(result.crystal);
      have_best_failed = true;
    }
  }

  if (!have_winner) {
    throw ConvergenceError(
        "equilibrium search did not converge: best max per-ion force " +
            std::to_string(best_failed.gradient_norm) + " N after " +
            std::to_string(best_failed.steps) + " steps",
        best_failed);
  }
  winner.phase = classify_phase(winner, options.planar_extent_tolerance);
  return winner;
}

CrystalPhase classify_phase(const IonCrystal& crystal, double planar_extent_tolerance) {
  if (!crystal.converged)
    throw ValidationError("phase classification requires a converged crystal");
  const Eigen::RowVector3d extent =
      crystal.positions.colwise().maxCoeff() - crystal.positions.colwise().minCoeff();
  int collapsed = 0;
  for (int axis = 0; axis < 3; ++axis)
    if (extent(axis) < planar_extent_tolerance) ++collapsed;
  if (collapsed >= 2) return CrystalPhase::Linear;
  if (collapsed == 1)
    return extent(2) < planar_extent_tolerance ? CrystalPhase::Radial2D : CrystalPhase::Zigzag;
  return CrystalPhase::ThreeD;
}

}  // namespace rfcrystal
