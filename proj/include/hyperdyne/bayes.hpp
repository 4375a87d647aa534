#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperdyne/protocol.hpp"

// Bayesian inference over the raw photon-count vector D through the
// hierarchical model Theta = {g, delta, phi} -> detection probability ->
// Poisson / Bernoulli counts, with Metropolis-Hastings and Hamiltonian Monte
// Carlo samplers.
namespace hyperdyne {

struct Theta {
  double g;     // signal amplitude, 4 k tau_m / pi
  double delta; // beat frequency [rad/s]
  double phi;   // initial phase [rad], periodic
};

struct ModelPriors {
  double g_mean;    // mu_g = 4 k tau_m / pi
  double g_std;     // > 0
  double delta_lo;  // uniform support [delta0 - a, delta0 + b]
  double delta_hi;
  // phi ~ uniform on the circle

  void validate() const;
};

struct PGM {
  ModelPriors priors;
  double p_bright;
  double p_dark;
  ReadoutMode readout = ReadoutMode::Poisson;
  double scale = 1.0; // Poisson rate scale, N_NV in ensemble mode
  double t_l;         // slot spacing [s]
  std::uint64_t n_m;  // slot count

  void validate() const;
};

enum class SamplerMethod { MH, HMC };

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::MH;
  int chains = 4;
  int steps = 4000;   // post burn-in draws per chain
  int burn_in = 1000;
  std::uint64_t seed = 0;
  // MH proposal scales (fractions of the prior scales)
  double mh_step_g = 0.2;
  double mh_step_delta = 0.1;
  double mh_step_phi = 0.3;
  // HMC controls
  int leapfrog_steps = 12;
  double hmc_step0 = 0.05;          // initial step size (dual-averaged)
  double hmc_target_accept = 0.8;
  double max_divergent_frac = 0.05; // exceeding this flags the result
};

struct ChainDiagnostics {
  std::array<double, 3> r_hat{};  // split-Rhat for g, delta, phi
  std::array<double, 3> ess{};    // effective sample sizes
  std::vector<double> accept_rate; // per chain
  std::uint64_t divergences = 0;
  bool converged = true;
};

struct PosteriorSamples {
  // draws[chain][i] per parameter
  std::vector<std::vector<double>> g;
  std::vector<std::vector<double>> delta;
  std::vector<std::vector<double>> phi;
  int burn_in = 0;
  ChainDiagnostics diagnostics;
  SamplerConfig config;

  std::size_t total_draws() const;
};

// Sum over measurements of the count log-probability at rate
// lambda_j = scale * (p_dark + (p_bright - p_dark) P_j(Theta)).
double log_likelihood(const Theta& theta, const PhotonRecord& data,
                      const PGM& model);

double log_prior(const Theta& theta, const PGM& model);

inline double log_posterior(const Theta& theta, const PhotonRecord& data,
                            const PGM& model) {
  return log_prior(theta, model) + log_likelihood(theta, data, model);
}

// Analytic gradient of log prior + log likelihood wrt (g, delta, phi).
std::array<double, 3> grad_log_posterior(const Theta& theta,
                                         const PhotonRecord& data,
                                         const PGM& model);

PosteriorSamples sample_posterior(const PGM& model, const PhotonRecord& data,
                                  const SamplerConfig& config);

struct PosteriorSummary {
  Theta mean;
  Theta median;
  std::array<double, 2> g_ci95;
  std::array<double, 2> delta_ci95;
  std::array<double, 2> phi_ci95;        // centered on the circular mean
  double detection_probability = 0.0;    // mass of {g > g_min, delta in window}
  bool detected = false;
  bool converged = true;
  std::string warning;
};

// Posterior point estimates, central 95% intervals and the detection decision
// detected iff P(g > g_min and delta in [f_lo, f_hi]) >= threshold.
PosteriorSummary summarize_and_decide(const PosteriorSamples& samples,
                                      double delta_lo, double delta_hi,
                                      double g_min, double threshold);

} // namespace hyperdyne
