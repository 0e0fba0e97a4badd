#pragma once

#include <stdexcept>
#include <string>

namespace rfcrystal {

/// Invalid physical or structural input (bad curvatures, dimensions, ...).
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// (a, q) outside the first stability region of the Mathieu equation.
class UnstableMathieuError : public std::runtime_error {
 public:
  UnstableMathieuError(const std::string& what, double growth)
      : std::runtime_error(what), growth_factor(growth) {}
  double growth_factor;  // |largest monodromy eigenvalue| per period
};

/// Equilibrium Hessian has a negative eigenvalue.
class UnstableConfigurationError : public std::runtime_error {
 public:
  UnstableConfigurationError(const std::string& what, int mode, double eigenvalue)
      : std::runtime_error(what), mode_index(mode), hessian_eigenvalue(eigenvalue) {}
  int mode_index;
  double hessian_eigenvalue;
};

/// A drive harmonic coincides with a normal-mode band: C_2n is singular.
class ResonantHarmonicError : public std::runtime_error {
 public:
  ResonantHarmonicError(const std::string& what, int harmonic)
      : std::runtime_error(what), harmonic_index(harmonic) {}
  int harmonic_index;  // n with singular C_2n = A - 4 n^2
};

/// Block system of the driven-mode solve is singular (parametric resonance vicinity).
class ParametricResonanceError : public std::runtime_error {
 public:
  explicit ParametricResonanceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rfcrystal
