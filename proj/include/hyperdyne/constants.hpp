#pragma once

#include <numbers>

// Fundamental constants (CODATA 2018, SI units). Single source of truth for
// both the simulation and the test oracles.
namespace hyperdyne::constants {

inline constexpr double pi = std::numbers::pi;

// vacuum magnetic permeability [N/A^2]
inline constexpr double mu0 = 1.25663706212e-6;

// reduced Planck constant [J s]
inline constexpr double hbar = 1.054571817e-34;

// electron gyromagnetic ratio, magnitude [rad s^-1 T^-1]
inline constexpr double gamma_e = 1.76085963023e11;

// proton gyromagnetic ratio [rad s^-1 T^-1]
inline constexpr double gamma_p = 2.6752218744e8;

// proton number density of water at room temperature [m^-3]
inline constexpr double water_proton_density = 6.69e28;

// Avogadro constant [1/mol]
inline constexpr double n_avogadro = 6.02214076e23;

// molar concentration [mol/L] -> number density [m^-3]
inline constexpr double per_molar = n_avogadro * 1.0e3;

} // namespace hyperdyne::constants
