#pragma once

#include <array>
#include <cmath>

// Physical layer: sensor / sample descriptions, secular dipolar couplings and
// analytic statistics of the field produced by an unpolarized half-space of
// nuclei above the diamond surface. Everything here is deterministic and pure.
namespace hyperdyne {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

struct NVSensor {
  double depth;            // below the diamond surface [m], > 0
  Vec3 axis{0.0, 0.0, 1.0}; // quantization axis, unit vector
  double t2_nv;            // sensor coherence time [s]
  double p_bright;         // photon detection probability in |0>
  double p_dark;           // photon detection probability in |-1>

  // throws std::invalid_argument on violated invariants
  void validate() const;
};

struct NuclearSpecies {
  double gamma;      // gyromagnetic ratio [rad/(s T)]
  double density;    // number density [spins/m^3]
  double diffusion;  // diffusion coefficient [m^2/s]
  double t1;         // longitudinal relaxation [s]
  double t2;         // transverse relaxation [s], T1 >= T2 > 0

  void validate() const;
};

// Secular dipolar coupling components between the NV electron spin and a
// nuclear spin at the given position relative to the NV [rad/s].
struct CouplingComponents {
  double a_x; // transverse (flip-flop filtered) component
  double a_z; // longitudinal component, proportional to 3 cos^2(theta) - 1
};

// Point-dipole secular coupling; position is nucleus minus NV location.
// Throws std::domain_error for zero separation.
CouplingComponents dipolar_coupling(const NVSensor& nv, const Vec3& position,
                                    double gamma_n);

// rms statistical field at the NV from an unpolarized half-space of spins-1/2
// at the species density, measured through the transverse dipolar kernel
// [Tesla]. Closed form; B_rms^2 scales as density / depth^3.
double brms_analytic(const NVSensor& nv, const NuclearSpecies& species);

// Larmor angular frequency gamma_n * B0 [rad/s].
inline double larmor_frequency(double b0, double gamma_n) { return gamma_n * b0; }

// Accumulated-phase safety condition gamma_e * B_rms * tau_m < pi/2.
struct PhaseCondition {
  bool pass;
  double ratio; // accumulated phase over the pi/2 bound
};
PhaseCondition validate_phase_condition(double b_rms, double tau_m);

} // namespace hyperdyne
