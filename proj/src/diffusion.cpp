#include "hyperdyne/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hyperdyne/constants.hpp"

namespace hyperdyne {

void SimulationBox::validate() const {
  if (!(lx > 0.0 && ly > 0.0 && lz > 0.0))
    throw std::invalid_argument("SimulationBox: extents must be > 0");
}

SpinEnsemble init_ensemble(const SimulationBox& box, const NuclearSpecies& species,
                           double polarization, std::uint64_t seed) {
  box.validate();
  species.validate();
  if (!(polarization >= 0.0 && polarization <= 1.0))
    throw std::invalid_argument("init_ensemble: polarization outside [0,1]");

  const double volume = box.lx * box.ly * box.lz;
  const auto n = static_cast<std::size_t>(std::llround(species.density * volume));

  SpinEnsemble ens;
  ens.species = species;
  ens.box = box;
  ens.seed = seed;
  ens.positions.resize(n);
  ens.longitudinal.resize(n);
  ens.phase.resize(n);

  Rng rng(derive_seed(seed, 0x1));
  const double p_up = 0.5 * (1.0 + polarization);
  for (std::size_t i = 0; i < n; ++i) {
    ens.positions[i] = {rng.uniform(0.0, box.lx), rng.uniform(0.0, box.ly),
                        rng.uniform(0.0, box.lz)};
    ens.longitudinal[i] = rng.bernoulli(p_up) ? 1.0 : -1.0;
    ens.phase[i] = rng.uniform(0.0, 2.0 * constants::pi);
  }
  return ens;
}

namespace {

double wrap_periodic(double x, double l) {
  x = std::fmod(x, l);
  return x < 0.0 ? x + l : x;
}

// fold into [0, l] by reflection; handles multi-length excursions
double reflect_fold(double x, double l) {
  const double period = 2.0 * l;
  x = std::fmod(x, period);
  if (x < 0.0) x += period;
  return x > l ? period - x : x;
}

} // namespace

void advance(SpinEnsemble& ens, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance: dt must be > 0");
  const double sigma = std::sqrt(2.0 * ens.species.diffusion * dt);
  const auto& box = ens.box;
  for (auto& p : ens.positions) {
    p[0] = wrap_periodic(p[0] + sigma * rng.normal(), box.lx);
    p[1] = wrap_periodic(p[1] + sigma * rng.normal(), box.ly);
    double z = p[2] + sigma * rng.normal();
    if (z >= 0.0 && z <= box.lz) {
      p[2] = z;
    } else if (z > box.lz && box.top == TopBoundary::Reservoir) {
      p = {rng.uniform(0.0, box.lx), rng.uniform(0.0, box.ly),
           rng.uniform(0.0, box.lz)};
    } else {
      p[2] = reflect_fold(z, box.lz);
    }
  }
}

double dt_max_bound(const NVSensor& nv, const NuclearSpecies& species,
                    double delta_max) {
  double bound = std::numeric_limits<double>::infinity();
  if (species.diffusion > 0.0)
    bound = nv.depth * nv.depth / (100.0 * species.diffusion);
  if (delta_max > 0.0) bound = std::min(bound, 1.0 / (50.0 * delta_max));
  return bound;
}

FieldTrace field_trace(SpinEnsemble ens, const NVSensor& nv,
                       const TraceParams& params) {
  nv.validate();
  if (ens.size() == 0) throw std::invalid_argument("field_trace: empty ensemble");
  if (!(params.duration >= params.dt) || !(params.dt > 0.0))
    throw std::invalid_argument("field_trace: need duration >= dt > 0");
  if (params.chemical_shifts.empty())
    throw std::invalid_argument("field_trace: need at least one shift entry");

  double delta_max = 0.0;
  for (double d : params.chemical_shifts) delta_max = std::max(delta_max, std::abs(d));
  if (params.dt > dt_max_bound(nv, ens.species, delta_max))
    throw std::invalid_argument("field_trace: dt exceeds stability bound");

  const auto n_steps = static_cast<std::size_t>(params.duration / params.dt);
  const Vec3 nv_pos{0.5 * ens.box.lx, 0.5 * ens.box.ly, -nv.depth};
  const int rings = std::max(0, params.image_rings);
  const std::size_t n_shifts = params.chemical_shifts.size();

  FieldTrace trace;
  trace.dt = params.dt;
  trace.seed = ens.seed;
  trace.b_stat.resize(n_steps);
  trace.b_coh.resize(n_steps);

  Rng motion_rng(derive_seed(ens.seed, 0x2));
  // Pauli-unit convention: longitudinal components are +-1, so the transverse
  // component per spin has unit variance; sqrt(2) cos(.) delivers that. The
  // same convention fixes the brms_analytic normalization.
  const double stat_amp = std::sqrt(2.0);
  const double t2 = ens.species.t2;

  for (std::size_t step = 0; step < n_steps; ++step) {
    const double t = static_cast<double>(step) * params.dt;
    const double decay = std::exp(-t / t2);

    double b_stat = 0.0;
    double gain = 0.0; // sum of A_x / gamma_e over particles [T]
    for (std::size_t i = 0; i < ens.size(); ++i) {
      double ax = 0.0;
      for (int ix = -rings; ix <= rings; ++ix) {
        for (int iy = -rings; iy <= rings; ++iy) {
          const Vec3 rel{ens.positions[i][0] + ix * ens.box.lx - nv_pos[0],
                         ens.positions[i][1] + iy * ens.box.ly - nv_pos[1],
                         ens.positions[i][2] - nv_pos[2]};
          ax += dipolar_coupling(nv, rel, ens.species.gamma).a_x;
        }
      }
      const double field = ax / constants::gamma_e;
      const double delta_i = params.chemical_shifts[i % n_shifts];
      b_stat += field * stat_amp * std::cos(delta_i * t + ens.phase[i]);
      gain += field;
    }

    double carrier = 0.0;
    for (double d : params.chemical_shifts) carrier += std::cos(d * t);
    carrier /= static_cast<double>(n_shifts);

    // the statistical polarization is stationary (continuously refreshed by
    // the bath), so only the phase-locked FID carries the T2 envelope
    trace.b_stat[step] = b_stat;
    trace.b_coh[step] = gain * params.polarization * carrier * decay;

    if (step + 1 < n_steps) advance(ens, params.dt, motion_rng);
  }
  return trace;
}

FieldTrace ou_surrogate_trace(double b_rms, double tau_c, double duration,
                              double dt, std::uint64_t seed) {
  if (!(tau_c > dt) || !(dt > 0.0))
    throw std::invalid_argument("ou_surrogate_trace: need tau_c > dt > 0");

  const auto n = static_cast<std::size_t>(duration / dt);
  FieldTrace trace;
  trace.dt = dt;
  trace.seed = seed;
  trace.b_stat.resize(n);
  trace.b_coh.assign(n, 0.0);

  Rng rng(derive_seed(seed, 0x3));
  const double decay = std::exp(-dt / tau_c);
  const double kick = b_rms * std::sqrt(1.0 - decay * decay);
  double x = b_rms * rng.normal(); // start in the stationary distribution
  for (std::size_t i = 0; i < n; ++i) {
    trace.b_stat[i] = x;
    x = decay * x + kick * rng.normal();
  }
  return trace;
}

CorrelationFit fit_correlation(const FieldTrace& trace, double expected_tau_c) {
  const std::size_t n = trace.size();
  if (!(expected_tau_c > 0.0))
    throw std::invalid_argument("fit_correlation: expected_tau_c must be > 0");
  if (trace.duration() < 20.0 * expected_tau_c)
    throw std::runtime_error("fit_correlation: trace shorter than 20 tau_c");

  double mean = 0.0;
  for (double v : trace.b_stat) mean += v;
  mean /= static_cast<double>(n);

  const auto lag_max = std::min<std::size_t>(
      n / 5, static_cast<std::size_t>(10.0 * expected_tau_c / trace.dt) + 2);
  std::vector<double> corr(lag_max + 1);
  for (std::size_t k = 0; k <= lag_max; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i + k < n; ++i)
      acc += (trace.b_stat[i] - mean) * (trace.b_stat[i + k] - mean);
    corr[k] = acc / static_cast<double>(n - k);
  }
  const double c0 = corr[0];
  if (!(c0 > 0.0)) throw std::runtime_error("fit_correlation: zero variance");

  // integral estimate of tau_c as the golden-section starting point
  double tau0 = 0.5 * trace.dt;
  for (std::size_t k = 1; k <= lag_max && corr[k] > 0.0; ++k)
    tau0 += corr[k] / c0 * trace.dt;

  // 1-D search over tau; the amplitude is solved in closed form per tau
  const auto sse = [&](double tau, double* amp_out) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k <= lag_max; ++k) {
      const double e = std::exp(-static_cast<double>(k) * trace.dt / tau);
      num += corr[k] * e;
      den += e * e;
    }
    const double amp = num / den;
    if (amp_out) *amp_out = amp;
    double acc = 0.0;
    for (std::size_t k = 0; k <= lag_max; ++k) {
      const double r = corr[k] - amp * std::exp(-static_cast<double>(k) * trace.dt / tau);
      acc += r * r;
    }
    return acc;
  };

  double lo = std::max(0.05 * tau0, 0.1 * trace.dt);
  double hi = 10.0 * tau0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = sse(x1, nullptr), f2 = sse(x2, nullptr);
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - gr * (b - a); f1 = sse(x1, nullptr);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + gr * (b - a); f2 = sse(x2, nullptr);
    }
  }
  const double tau = 0.5 * (a + b);
  double amp = 0.0;
  const double err = sse(tau, &amp);

  CorrelationFit fit;
  fit.tau_c = tau;
  fit.b_rms = std::sqrt(std::max(0.0, amp));
  fit.residual = std::sqrt(err / static_cast<double>(lag_max + 1)) / c0;
  return fit;
}

} // namespace hyperdyne
