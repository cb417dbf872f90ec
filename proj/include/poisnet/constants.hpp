#pragma once

// Physical constants (CODATA 2018), SI units.
namespace poisnet::constants {

inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double electron_mass = 9.1093837015e-31;     // kg
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double boltzmann = 1.380649e-23;             // J/K

}  // namespace poisnet::constants
