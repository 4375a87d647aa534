#include "hyperdyne/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hyperdyne/constants.hpp"
#include "hyperdyne/rng.hpp"

namespace hyperdyne {

void ProtocolConfig::validate() const {
  if (!(tau_m > 0.0) || !(t_l >= tau_m))
    throw std::invalid_argument("ProtocolConfig: need T_L >= tau_m > 0");
  if (n_m < 1 || n_nv < 1)
    throw std::invalid_argument("ProtocolConfig: need N_m >= 1 and N_NV >= 1");
}

double qdyne_probability(double g, double delta, double t, double phi,
                         bool literal) {
  if (g < 0.0) throw std::invalid_argument("qdyne_probability: g < 0");
  const double s = std::sin(g * std::cos(delta * t + phi));
  if (literal) return std::clamp(s + 0.5, 0.0, 1.0);
  return 0.5 * (1.0 + s);
}

namespace {

// phase -> detection probability -> photon count
void record_measurement(double phase_arg, const NVSensor& nv,
                        const ProtocolConfig& cfg, Rng& rng, PhotonRecord& out) {
  double p_signal = cfg.literal_eq1
                        ? std::clamp(std::sin(phase_arg) + 0.5, 0.0, 1.0)
                        : 0.5 * (1.0 + std::sin(phase_arg));
  const double p = nv.p_dark + (nv.p_bright - nv.p_dark) * p_signal;
  out.probabilities.push_back(p);
  switch (cfg.readout) {
    case ReadoutMode::Bernoulli:
      out.counts.push_back(rng.bernoulli(p) ? 1 : 0);
      break;
    case ReadoutMode::Poisson:
      out.counts.push_back(rng.poisson(static_cast<double>(cfg.n_nv) * p));
      break;
    case ReadoutMode::Analytic:
      break;
  }
}

double trace_sample(const FieldTrace& trace, double t) {
  const auto idx = static_cast<std::size_t>(std::llround(t / trace.dt));
  return trace.b_stat[std::min(idx, trace.size() - 1)];
}

} // namespace

PhotonRecord simulate_mz_qdyne(const FieldTrace& trace, const NVSensor& nv,
                               const ProtocolConfig& config, std::uint64_t seed,
                               std::uint64_t run_index) {
  config.validate();
  nv.validate();
  const double needed = static_cast<double>(config.n_m) * config.t_l;
  if (trace.duration() + 0.5 * trace.dt < needed)
    throw std::invalid_argument("simulate_mz_qdyne: trace shorter than protocol");

  PhotonRecord rec;
  rec.config = config;
  rec.run_index = run_index;
  rec.seed = seed;
  Rng rng(derive_seed(seed, 0x10 + run_index));

  // the XY8 block converts the instantaneous field into an accumulated phase
  const double field_to_phase =
      4.0 * config.tau_m / constants::pi * constants::gamma_e;
  for (std::uint64_t j = 0; j < config.n_m; ++j) {
    const double t = static_cast<double>(j) * config.t_l;
    const auto idx = static_cast<std::size_t>(std::llround(t / trace.dt));
    const std::size_t i = std::min(idx, trace.size() - 1);
    const double phase = field_to_phase * (trace.b_coh[i] + trace.b_stat[i]);
    record_measurement(phase, nv, config, rng, rec);
  }
  return rec;
}

PhotonRecord simulate_mz_qdyne(const AnalyticSignal& signal, const NVSensor& nv,
                               const ProtocolConfig& config, std::uint64_t seed,
                               std::uint64_t run_index,
                               const FieldTrace* stat_trace) {
  config.validate();
  nv.validate();
  if (signal.g < 0.0) throw std::invalid_argument("simulate_mz_qdyne: g < 0");

  PhotonRecord rec;
  rec.config = config;
  rec.run_index = run_index;
  rec.seed = seed;
  Rng rng(derive_seed(seed, 0x10 + run_index));

  const double field_to_phase =
      4.0 * config.tau_m / constants::pi * constants::gamma_e;
  for (std::uint64_t j = 0; j < config.n_m; ++j) {
    const double t = static_cast<double>(j) * config.t_l;
    const double env = signal.t2 > 0.0 ? std::exp(-t / signal.t2) : 1.0;
    double phase = signal.g * env * std::cos(signal.delta * t + signal.phi);
    if (stat_trace) phase += field_to_phase * trace_sample(*stat_trace, t);
    record_measurement(phase, nv, config, rng, rec);
  }
  return rec;
}

PhotonRecord simulate_statistical_qdyne(const FieldTrace& trace,
                                        const NVSensor& nv,
                                        const ProtocolConfig& config,
                                        std::uint64_t seed,
                                        std::uint64_t run_index) {
  config.validate();
  nv.validate();
  const double needed = static_cast<double>(config.n_m) * config.t_l;
  if (trace.duration() + 0.5 * trace.dt < needed)
    throw std::invalid_argument(
        "simulate_statistical_qdyne: trace shorter than protocol");

  PhotonRecord rec;
  rec.config = config;
  rec.run_index = run_index;
  rec.seed = seed;
  Rng rng(derive_seed(seed, 0x10 + run_index));

  const double field_to_phase =
      4.0 * config.tau_m / constants::pi * constants::gamma_e;
  for (std::uint64_t j = 0; j < config.n_m; ++j) {
    const double t = static_cast<double>(j) * config.t_l;
    const double phase = field_to_phase * trace_sample(trace, t);
    record_measurement(phase, nv, config, rng, rec);
  }
  return rec;
}

AveragedSignal average_runs(const std::vector<PhotonRecord>& records) {
  if (records.empty())
    throw std::invalid_argument("average_runs: no records");
  const auto& first = records.front();
  const bool use_counts = !first.counts.empty();
  const std::size_t n =
      use_counts ? first.counts.size() : first.probabilities.size();

  for (const auto& r : records) {
    const std::size_t len = use_counts ? r.counts.size() : r.probabilities.size();
    if (len != n || r.config.t_l != first.config.t_l ||
        r.config.n_m != first.config.n_m)
      throw std::invalid_argument("average_runs: mismatched records");
  }

  AveragedSignal avg;
  avg.n_runs = records.size();
  avg.t_l = first.config.t_l;
  avg.mean.assign(n, 0.0);
  avg.variance.assign(n, 0.0);

  for (const auto& r : records)
    for (std::size_t j = 0; j < n; ++j)
      avg.mean[j] += use_counts ? static_cast<double>(r.counts[j])
                                : r.probabilities[j];
  for (auto& m : avg.mean) m /= static_cast<double>(records.size());

  if (records.size() > 1) {
    for (const auto& r : records)
      for (std::size_t j = 0; j < n; ++j) {
        const double v = (use_counts ? static_cast<double>(r.counts[j])
                                     : r.probabilities[j]) -
                         avg.mean[j];
        avg.variance[j] += v * v;
      }
    for (auto& v : avg.variance) v /= static_cast<double>(records.size() - 1);
  }
  return avg;
}

} // namespace hyperdyne
