#pragma once

#include <cstdint>
#include <vector>

#include "hyperdyne/physics.hpp"
#include "hyperdyne/rng.hpp"

// Brownian-dynamics generation of the time-dependent field at the NV from
// diffusing, partially polarized nuclei, plus the Ornstein-Uhlenbeck
// surrogate used as a fast stand-in for the atomistic trace.
namespace hyperdyne {

enum class TopBoundary { Reflect, Reservoir };

struct SimulationBox {
  double lx, ly, lz;              // extents [m]; z in [0, lz] above the surface
  TopBoundary top = TopBoundary::Reflect;
  // lateral boundaries are periodic; bottom (diamond surface, z = 0) reflects

  void validate() const;
};

struct SpinEnsemble {
  std::vector<Vec3> positions;      // inside the box
  std::vector<double> longitudinal; // in [-1, 1], ensemble mean ~ P_n
  std::vector<double> phase;        // transverse phase [rad]
  NuclearSpecies species;
  SimulationBox box;
  std::uint64_t seed = 0;

  std::size_t size() const { return positions.size(); }
};

struct FieldTrace {
  double dt = 0.0;                // uniform grid step [s]
  std::uint64_t seed = 0;
  std::vector<double> b_stat;     // statistical transverse field [T]
  std::vector<double> b_coh;      // coherent (M_z-derived) field [T]

  std::size_t size() const { return b_stat.size(); }
  double duration() const { return dt * static_cast<double>(b_stat.size()); }
};

struct CorrelationFit {
  double b_rms;     // sqrt of fitted zero-lag variance [T]
  double tau_c;     // fitted correlation time [s]
  double residual;  // rms misfit normalized by the zero-lag value
};

// N_I = round(density * V); positions uniform, longitudinal components +-1
// with mean P_n, transverse phases uniform. Throws on P_n outside [0,1].
SpinEnsemble init_ensemble(const SimulationBox& box, const NuclearSpecies& species,
                           double polarization, std::uint64_t seed);

// One Brownian step: Gaussian displacement with variance 2 D dt per axis,
// then the boundary policy. Spin states are untouched.
void advance(SpinEnsemble& ensemble, double dt, Rng& rng);

struct TraceParams {
  double duration;                     // [s]
  double dt;                          // [s]
  double polarization;                // P_n for the coherent component
  std::vector<double> chemical_shifts; // beat offsets delta_j [rad/s], >= 1 entry
  int image_rings = 3;                // lateral periodic images per side
};

// Generate both field components at the NV (centered laterally, depth d below
// the surface). Statistical part sums A_x^i/gamma_e over spins with static
// random phases in the rotating frame; coherent part is the P_n-weighted FID
// precessing at the chemical-shift offsets with T2 decay.
FieldTrace field_trace(SpinEnsemble ensemble, const NVSensor& nv,
                       const TraceParams& params);

// Largest stable step for the trace generator given the geometry and the
// fastest coherent oscillation.
double dt_max_bound(const NVSensor& nv, const NuclearSpecies& species,
                    double delta_max);

// Empirical autocorrelation of b_stat fit to B_rms^2 exp(-tau/tau_c).
// Requires duration >= 20 * expected_tau_c, else throws std::runtime_error.
CorrelationFit fit_correlation(const FieldTrace& trace, double expected_tau_c);

// Exact-discretization OU process with stationary std b_rms and correlation
// time tau_c; requires tau_c > dt.
FieldTrace ou_surrogate_trace(double b_rms, double tau_c, double duration,
                              double dt, std::uint64_t seed);

} // namespace hyperdyne
