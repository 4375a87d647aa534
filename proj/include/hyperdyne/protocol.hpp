#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hyperdyne/diffusion.hpp"
#include "hyperdyne/physics.hpp"

// Qdyne / M_z-Qdyne measurement sequences on a field trace, down to
// per-measurement photon detection. Produces the raw data vector D.
namespace hyperdyne {

enum class ReadoutMode {
  Bernoulli, // single NV, one photon threshold per readout
  Poisson,   // NV ensemble, counts with mean N_NV * p
  Analytic,  // no sampling: expected probabilities only
};

struct ProtocolConfig {
  double tau_m;          // interaction time per measurement [s]
  double t_l;            // sequence period >= tau_m (includes dead time) [s]
  std::uint64_t n_m;     // measurements per run
  std::uint64_t n_nv;    // sensors (Poisson mode scale)
  ReadoutMode readout = ReadoutMode::Bernoulli;
  double k = 0.0;              // interaction strength [rad/s] (analytic mode)
  double filter_center = 0.0;  // XY8 filter center [rad/s], bookkeeping only
  bool literal_eq1 = false;    // evaluate the unnormalized probability, clamped

  void validate() const;
};

struct PhotonRecord {
  std::vector<std::uint64_t> counts;   // length n_m (empty in analytic mode)
  std::vector<double> probabilities;   // expected detection probabilities p_j
  ProtocolConfig config;
  std::uint64_t run_index = 0;
  std::uint64_t seed = 0;
};

struct AveragedSignal {
  std::vector<double> mean;     // per-slot mean counts (or probabilities)
  std::vector<double> variance; // per-slot variance across runs
  std::uint64_t n_runs = 0;
  double t_l = 0.0;
};

// Lock-in detection probability P = (1 + sin(g cos(delta t + phi))) / 2.
// literal = true evaluates sin(.) + 1/2 clamped to [0,1] for comparison.
double qdyne_probability(double g, double delta, double t, double phi,
                         bool literal = false);

// Analytic signal parameters for trace-free protocol runs.
struct AnalyticSignal {
  double g;        // signal amplitude 4 k tau_m / pi
  double delta;    // beat frequency [rad/s]
  double phi;      // initial phase [rad]
  double t2 = 0.0; // FID decay applied to g; 0 disables
};

// M_z Qdyne on a field trace: the pi/2 pulse fixes the coherent initial phase
// to 0; per measurement j at t_j = j T_L the phase argument combines the
// coherent and instantaneous statistical field.
PhotonRecord simulate_mz_qdyne(const FieldTrace& trace, const NVSensor& nv,
                               const ProtocolConfig& config, std::uint64_t seed,
                               std::uint64_t run_index = 0);

// Same pipeline from analytic parameters instead of a trace; optional
// statistical field trace adds the stochastic phase contribution.
PhotonRecord simulate_mz_qdyne(const AnalyticSignal& signal, const NVSensor& nv,
                               const ProtocolConfig& config, std::uint64_t seed,
                               std::uint64_t run_index = 0,
                               const FieldTrace* stat_trace = nullptr);

// Statistical-polarization-only Qdyne: no pi/2 initialization, the phase is
// the stochastic phase of the statistical field.
PhotonRecord simulate_statistical_qdyne(const FieldTrace& trace,
                                        const NVSensor& nv,
                                        const ProtocolConfig& config,
                                        std::uint64_t seed,
                                        std::uint64_t run_index = 0);

// Pointwise mean / variance across runs sharing one config.
AveragedSignal average_runs(const std::vector<PhotonRecord>& records);

} // namespace hyperdyne
