#pragma once

#include <cstdint>
#include <vector>

// Analytic planning layer: shot-noise SNR, the two-regime measurement-time
// law, polarization-buildup dynamics and detection-limit curves.
namespace hyperdyne {

struct SensitivityModel {
  double density;      // nuclear spin concentration rho [m^-3]
  double polarization; // average polarization P_n
  double volume;       // detection volume V_s [m^3]
  double nv_density;   // NV concentration rho_NV [m^-3]
  double tau_m;        // single-measurement interaction time [s]
  double t2_nv;        // sensor coherence time [s]
  double k;            // interaction strength [rad/s]
  double n_m;          // runs per acquisition
  double n_nv;         // sensors read in parallel
  double calibration;  // C mapping the proportionality to absolute SNR
  // duty-cycle accounting for wall-clock budgets
  double t_pol = 0.0;      // hyperpolarization period per run [s]
  double duty_overhead = 1.0; // wall time per unit interaction time, >= 1

  void validate() const;

  // consistency helper: sensors contained in the probed volume
  double nv_count_from_volume() const { return nv_density * volume; }
};

// SNR = C sqrt(N_m N_NV) rho P_n tau_m (shot-noise limited form).
double snr_estimate(const SensitivityModel& model);

enum class SnrRegime { Coherent, Averaging };

struct RequiredTime {
  double time;          // total interaction time T for the target SNR [s]
  SnrRegime regime;
  double crossover_tau; // tau_m where the regimes meet, min(T2_NV, pi/4k)
  bool reachable;       // false if time exceeds the configured cap
};

// Inverts snr_estimate: grows tau_m at fixed N_m while
// tau_m < min(T2_NV, pi/4k) (1/T ~ sqrt(V rho_NV) rho P_n), afterwards grows
// N_m at the capped tau (1/T ~ V rho_NV rho^2 P_n^2).
RequiredTime required_time(const SensitivityModel& model, double target_snr,
                           double time_cap = 0.0);

struct PolarizationConfig {
  double gamma_pol;      // polarization transfer rate into the shell [1/s]
  double t1;             // nuclear relaxation [s]
  double k_ex;           // shell <-> bulk diffusive exchange rate [1/s]
  double shell_fraction; // V_shell / V_total in (0, 1]

  void validate() const;
};

// Gamma_pol from the total flip-flop coupling g_tot = g sqrt(N_I) in the
// weak-coupling regime g_tot tau_c < 1.
double flip_flop_rate(double g, double n_spins, double tau_c);

// Defaults anchored to a 22 x 22 x 150 nm per-NV region, T1 = 2 s,
// D = 1e-11 m^2/s; reproduces ~0.5% bulk polarization after 2 s.
PolarizationConfig reference_polarization_config();

struct PolarizationTrajectory {
  std::vector<double> time;    // [s]
  std::vector<double> shell;   // near-NV compartment polarization
  std::vector<double> bulk;    // remaining volume polarization
  std::vector<double> average; // volume-weighted mean
};

// Two-compartment rate model integrated from P(0) = 0.
PolarizationTrajectory polarization_buildup(const PolarizationConfig& config,
                                            double duration, double dt = 0.0);

struct DetectionLimitPoint {
  double volume;            // [m^3]
  double min_concentration; // [m^-3]
};

// Smallest density reaching target_snr within the wall-clock budget for each
// volume, via the two-regime required-time inversion with the model's duty
// cycle. The
// bayesian_advantage divides the minimal concentration (1.0 = FFT analysis).
std::vector<DetectionLimitPoint> detection_limit_curve(
    const std::vector<double>& volumes, double time_budget, double threshold_snr,
    SensitivityModel model, double bayesian_advantage = 1.0);

// Microcoil sensitivity-per-unit-volume reference: ~1/d above the 100 um
// crossover, ~1/sqrt(d) below, continuous at the boundary.
std::vector<double> microcoil_reference(const std::vector<double>& diameters,
                                        double normalization = 1.0);

} // namespace hyperdyne
