#pragma once

// Unit conventions used throughout the library:
//   hbar = 1, Hamiltonians and rates stored in rad/us,
//   times in us, field amplitudes in mT, inputs in MHz and mT.

namespace spinqoct::units {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Bohr magneton over Planck's constant, CODATA value.
inline constexpr double mu_B_MHz_per_mT = 13.996245;

// MHz -> rad/us
inline constexpr double rad_us_per_MHz = two_pi;

// Zeeman coupling per unit field: rad/us per mT (before the g factor)
inline constexpr double mu_B_rad_us_per_mT = two_pi * mu_B_MHz_per_mT;

}  // namespace spinqoct::units
