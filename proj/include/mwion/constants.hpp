#pragma once

// Physical constants, CODATA 2018, SI units.
namespace mwion::constants {

inline constexpr double h       = 6.62607015e-34;      // J s
inline constexpr double hbar    = 1.054571817e-34;     // J s
inline constexpr double mu_b    = 9.2740100783e-24;    // J/T
inline constexpr double mu_n    = 5.0507837461e-27;    // J/T
inline constexpr double c_light = 299792458.0;         // m/s
inline constexpr double amu     = 1.66053906660e-27;   // kg
inline constexpr double pi      = 3.14159265358979323846;

} // namespace mwion::constants
