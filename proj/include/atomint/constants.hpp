#pragma once

#include <numbers>

namespace atomint::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * pi;

// CODATA 2018 exact / recommended values, SI units.
inline constexpr double planck = 6.62607015e-34;        // J s
inline constexpr double hbar = planck / two_pi;         // J s
inline constexpr double boltzmann = 1.380649e-23;       // J/K
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double elementary_charge = 1.602176634e-19;   // C

inline constexpr double hbar_ev_s = hbar / elementary_charge;  // eV s

inline constexpr double argon_mass = 39.948 * atomic_mass_unit;

}  // namespace atomint::constants
