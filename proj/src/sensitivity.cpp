#include "hyperdyne/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hyperdyne/constants.hpp"

namespace hyperdyne {

void SensitivityModel::validate() const {
  if (!(density > 0.0 && polarization > 0.0 && volume > 0.0 &&
        nv_density > 0.0 && tau_m > 0.0 && t2_nv > 0.0 && k > 0.0 &&
        n_m >= 1.0 && n_nv >= 1.0 && calibration > 0.0))
    throw std::invalid_argument("SensitivityModel: all fields must be positive");
  if (t_pol < 0.0 || duty_overhead < 1.0)
    throw std::invalid_argument("SensitivityModel: bad duty-cycle fields");
}

double snr_estimate(const SensitivityModel& model) {
  model.validate();
  return model.calibration * std::sqrt(model.n_m * model.n_nv) * model.density *
         model.polarization * model.tau_m;
}

RequiredTime required_time(const SensitivityModel& model, double target_snr,
                           double time_cap) {
  model.validate();
  if (!(target_snr > 0.0))
    throw std::invalid_argument("required_time: target SNR must be > 0");

  const double tau_cap = std::min(model.t2_nv, constants::pi / (4.0 * model.k));
  const double signal = model.calibration * model.density * model.polarization;

  RequiredTime out;
  out.crossover_tau = tau_cap;

  // regime 1: grow tau_m at fixed N_m until the cap
  const double tau_req =
      target_snr / (signal * std::sqrt(model.n_m * model.n_nv));
  if (tau_req < tau_cap) {
    out.regime = SnrRegime::Coherent;
    out.time = model.n_m * tau_req;
  } else {
    // regime 2: tau_m pinned at the cap, grow the number of runs
    const double n_req =
        std::pow(target_snr / (signal * std::sqrt(model.n_nv) * tau_cap), 2.0);
    out.regime = SnrRegime::Averaging;
    out.time = n_req * tau_cap;
  }
  out.reachable = time_cap <= 0.0 || out.time <= time_cap;
  return out;
}

void PolarizationConfig::validate() const {
  if (gamma_pol < 0.0 || k_ex < 0.0)
    throw std::invalid_argument("PolarizationConfig: negative rates");
  if (!(t1 > 0.0))
    throw std::invalid_argument("PolarizationConfig: T1 must be > 0");
  if (!(shell_fraction > 0.0 && shell_fraction <= 1.0))
    throw std::invalid_argument("PolarizationConfig: shell fraction outside (0,1]");
}

double flip_flop_rate(double g, double n_spins, double tau_c) {
  if (g < 0.0 || n_spins < 0.0 || tau_c < 0.0)
    throw std::invalid_argument("flip_flop_rate: negative inputs");
  const double g_tot = g * std::sqrt(n_spins);
  return g_tot * g_tot * tau_c;
}

PolarizationConfig reference_polarization_config() {
  PolarizationConfig cfg;
  cfg.t1 = 2.0;
  // 22 x 22 x 150 nm region with a 10 nm polarization shell at the NV
  cfg.shell_fraction = 10.0 / 150.0;
  // k_ex = D / L^2 with D = 1e-11 m^2/s and L = 75 nm shell-to-bulk distance
  cfg.k_ex = 1.0e-11 / (75e-9 * 75e-9);
  // transfer rate chosen to reproduce the 0.5%-at-2-s polarization anchor
  cfg.gamma_pol = 0.06;
  return cfg;
}

PolarizationTrajectory polarization_buildup(const PolarizationConfig& cfg,
                                            double duration, double dt) {
  cfg.validate();
  if (!(duration > 0.0))
    throw std::invalid_argument("polarization_buildup: duration must be > 0");

  // resolve the fastest rate in the system
  const double fastest =
      std::max({cfg.gamma_pol, 1.0 / cfg.t1, cfg.k_ex, 1.0});
  if (dt <= 0.0) dt = 0.05 / fastest;

  const double fs = cfg.shell_fraction;
  const double bulk_weight = fs < 1.0 ? fs / (1.0 - fs) : 0.0;
  const auto deriv = [&](double ps, double pb, double& dps, double& dpb) {
    dps = cfg.gamma_pol * (1.0 - ps) - ps / cfg.t1 - cfg.k_ex * (ps - pb);
    dpb = -pb / cfg.t1 + cfg.k_ex * bulk_weight * (ps - pb);
  };

  const auto n = static_cast<std::size_t>(std::ceil(duration / dt));
  PolarizationTrajectory traj;
  traj.time.reserve(n + 1);
  double ps = 0.0, pb = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    traj.time.push_back(static_cast<double>(i) * dt);
    traj.shell.push_back(ps);
    traj.bulk.push_back(pb);
    traj.average.push_back(fs * ps + (1.0 - fs) * pb);

    // classic RK4 step
    double k1s, k1b, k2s, k2b, k3s, k3b, k4s, k4b;
    deriv(ps, pb, k1s, k1b);
    deriv(ps + 0.5 * dt * k1s, pb + 0.5 * dt * k1b, k2s, k2b);
    deriv(ps + 0.5 * dt * k2s, pb + 0.5 * dt * k2b, k3s, k3b);
    deriv(ps + dt * k3s, pb + dt * k3b, k4s, k4b);
    ps += dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
    pb += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    ps = std::clamp(ps, 0.0, 1.0);
    pb = std::clamp(pb, 0.0, 1.0);
  }
  return traj;
}

std::vector<DetectionLimitPoint> detection_limit_curve(
    const std::vector<double>& volumes, double time_budget, double threshold_snr,
    SensitivityModel model, double bayesian_advantage) {
  if (!(time_budget > 0.0))
    throw std::invalid_argument("detection_limit_curve: budget must be > 0");
  if (!(bayesian_advantage >= 1.0))
    throw std::invalid_argument("detection_limit_curve: advantage must be >= 1");

  // wall clock = polarization dead time plus interaction time with overhead
  const auto wall_time = [&](const SensitivityModel& m, double rho) {
    SensitivityModel probe = m;
    probe.density = rho;
    const RequiredTime rt = required_time(probe, threshold_snr);
    const double runs = rt.time / probe.tau_m;
    return rt.time * probe.duty_overhead + runs / probe.n_m * probe.t_pol;
  };

  std::vector<DetectionLimitPoint> curve;
  curve.reserve(volumes.size());
  for (double v : volumes) {
    SensitivityModel m = model;
    m.volume = v;
    m.n_nv = std::max(1.0, m.nv_count_from_volume());

    // bracket then bisect the smallest density meeting the budget
    double lo = m.density * 1e-12, hi = m.density * 1e12;
    if (wall_time(m, hi) > time_budget) {
      curve.push_back({v, std::numeric_limits<double>::infinity()});
      continue;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(lo * hi);
      if (wall_time(m, mid) > time_budget)
        lo = mid;
      else
        hi = mid;
    }
    curve.push_back({v, hi / bayesian_advantage});
  }
  return curve;
}

std::vector<double> microcoil_reference(const std::vector<double>& diameters,
                                        double normalization) {
  constexpr double d_cross = 100e-6;
  std::vector<double> out;
  out.reserve(diameters.size());
  for (double d : diameters) {
    if (!(d > 0.0))
      throw std::invalid_argument("microcoil_reference: diameter <= 0");
    out.push_back(normalization *
                  (d >= d_cross ? d_cross / d : std::sqrt(d_cross / d)));
  }
  return out;
}

} // namespace hyperdyne
