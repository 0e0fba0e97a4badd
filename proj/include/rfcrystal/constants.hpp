#pragma once

namespace rfcrystal::constants {

// CODATA 2018 values, SI.
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double elementary_charge = 1.602176634e-19;     // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;    // kg
inline constexpr double pi = 3.141592653589793238462643383279502884;

// 1/(4*pi*eps0)
inline constexpr double coulomb_constant =
    1.0 / (4.0 * pi * vacuum_permittivity);  // N m^2 / C^2

}  // namespace rfcrystal::constants
