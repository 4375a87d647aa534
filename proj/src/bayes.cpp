#include "hyperdyne/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "hyperdyne/constants.hpp"
#include "hyperdyne/rng.hpp"

namespace hyperdyne {

void ModelPriors::validate() const {
  if (!(g_std > 0.0)) throw std::invalid_argument("ModelPriors: g_std <= 0");
  if (!(delta_lo < delta_hi))
    throw std::invalid_argument("ModelPriors: empty delta support");
  if (!std::isfinite(delta_lo) || !std::isfinite(delta_hi))
    throw std::invalid_argument("ModelPriors: delta support must be finite");
}

void PGM::validate() const {
  priors.validate();
  if (!(p_dark >= 0.0 && p_dark < p_bright && p_bright <= 1.0))
    throw std::invalid_argument("PGM: need 0 <= p_dark < p_bright <= 1");
  if (!(scale > 0.0)) throw std::invalid_argument("PGM: scale <= 0");
  if (!(t_l > 0.0) || n_m < 1) throw std::invalid_argument("PGM: bad timing");
}

std::size_t PosteriorSamples::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : g) n += c.size();
  return n;
}

namespace {

double wrap_phi(double phi) {
  const double two_pi = 2.0 * constants::pi;
  phi = std::fmod(phi, two_pi);
  return phi < 0.0 ? phi + two_pi : phi;
}

void check_theta(const Theta& theta) {
  if (!std::isfinite(theta.g) || !std::isfinite(theta.delta) ||
      !std::isfinite(theta.phi))
    throw std::invalid_argument("bayes: non-finite Theta");
}

} // namespace

double log_prior(const Theta& theta, const PGM& model) {
  check_theta(theta);
  const auto& pr = model.priors;
  if (theta.delta < pr.delta_lo || theta.delta > pr.delta_hi)
    return -std::numeric_limits<double>::infinity();
  const double z = (theta.g - pr.g_mean) / pr.g_std;
  return -0.5 * z * z - std::log(pr.g_std) -
         0.5 * std::log(2.0 * constants::pi) -
         std::log(pr.delta_hi - pr.delta_lo) - std::log(2.0 * constants::pi);
}

double log_likelihood(const Theta& theta, const PhotonRecord& data,
                      const PGM& model) {
  check_theta(theta);
  model.validate();
  if (data.counts.size() != model.n_m)
    throw std::invalid_argument("log_likelihood: data / model length mismatch");

  const double dp = model.p_bright - model.p_dark;
  double ll = 0.0;
  for (std::uint64_t j = 0; j < model.n_m; ++j) {
    const double t = static_cast<double>(j) * model.t_l;
    const double p_sig =
        0.5 * (1.0 + std::sin(theta.g * std::cos(theta.delta * t + theta.phi)));
    const double p = model.p_dark + dp * p_sig;
    const auto d = static_cast<double>(data.counts[j]);
    if (model.readout == ReadoutMode::Bernoulli) {
      ll += d * std::log(p) + (1.0 - d) * std::log1p(-p);
    } else {
      const double lambda = model.scale * p;
      ll += d * std::log(lambda) - lambda - std::lgamma(d + 1.0);
    }
  }
  return ll;
}

std::array<double, 3> grad_log_posterior(const Theta& theta,
                                         const PhotonRecord& data,
                                         const PGM& model) {
  check_theta(theta);
  model.validate();
  const auto& pr = model.priors;
  if (theta.delta <= pr.delta_lo || theta.delta >= pr.delta_hi)
    throw std::domain_error("grad_log_posterior: delta on the support boundary");
  if (data.counts.size() != model.n_m)
    throw std::invalid_argument("grad_log_posterior: length mismatch");

  const double dp = model.p_bright - model.p_dark;
  std::array<double, 3> grad{-(theta.g - pr.g_mean) / (pr.g_std * pr.g_std), 0.0,
                             0.0};
  for (std::uint64_t j = 0; j < model.n_m; ++j) {
    const double t = static_cast<double>(j) * model.t_l;
    const double arg = theta.delta * t + theta.phi;
    const double c = std::cos(arg);
    const double s = std::sin(arg);
    const double p_sig = 0.5 * (1.0 + std::sin(theta.g * c));
    const double p = model.p_dark + dp * p_sig;
    const auto d = static_cast<double>(data.counts[j]);

    double dll_dp; // d(log-lik term) / d(detection probability)
    if (model.readout == ReadoutMode::Bernoulli) {
      dll_dp = d / p - (1.0 - d) / (1.0 - p);
    } else {
      dll_dp = (d / (model.scale * p) - 1.0) * model.scale;
    }
    const double common = dll_dp * dp * 0.5 * std::cos(theta.g * c);
    grad[0] += common * c;
    grad[1] += common * theta.g * (-s) * t;
    grad[2] += common * theta.g * (-s);
  }
  return grad;
}

namespace {

struct Chain {
  std::vector<double> g, delta, phi;
  double accept_rate = 0.0;
  std::uint64_t divergences = 0;
};

// Coarse (delta, phi) likelihood scan at the prior-mean amplitude. The delta
// likelihood has sidelobes spaced 1/T_rec apart; starting every chain near the
// global ridge keeps them from freezing in different sidelobes once the
// adapted step sizes become small.
Theta mode_scan(const PGM& model, const PhotonRecord& data) {
  const auto& pr = model.priors;
  const double t_rec = model.t_l * static_cast<double>(model.n_m);
  const double width = pr.delta_hi - pr.delta_lo;
  const double cycles = width * t_rec / (2.0 * constants::pi);
  const int n_delta = std::clamp(static_cast<int>(std::ceil(4.0 * cycles)), 8, 8192);
  const int n_phi = 8;

  Theta best{pr.g_mean, 0.5 * (pr.delta_lo + pr.delta_hi), 0.0};
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_delta; ++i) {
    const double d = pr.delta_lo +
                     width * (static_cast<double>(i) + 0.5) /
                         static_cast<double>(n_delta);
    for (int k = 0; k < n_phi; ++k) {
      const double phi =
          2.0 * constants::pi * static_cast<double>(k) / static_cast<double>(n_phi);
      const Theta th{pr.g_mean, d, phi};
      const double ll = log_likelihood(th, data, model);
      if (ll > best_ll) {
        best_ll = ll;
        best = th;
      }
    }
  }
  return best;
}

Theta initial_point(const PGM& model, const Theta& mode, Rng& rng) {
  const auto& pr = model.priors;
  const double t_rec = model.t_l * static_cast<double>(model.n_m);
  Theta theta;
  theta.g = std::abs(rng.normal(pr.g_mean, 0.25 * pr.g_std));
  theta.delta = std::clamp(
      mode.delta + 0.1 * (2.0 * constants::pi / t_rec) * rng.normal(),
      pr.delta_lo + 1e-9 * (pr.delta_hi - pr.delta_lo),
      pr.delta_hi - 1e-9 * (pr.delta_hi - pr.delta_lo));
  theta.phi = wrap_phi(mode.phi + 0.2 * rng.normal());
  return theta;
}

Chain run_mh_chain(const PGM& model, const PhotonRecord& data,
                   const SamplerConfig& cfg, const Theta& mode,
                   std::uint64_t chain_seed) {
  Rng rng(chain_seed);
  Theta theta = initial_point(model, mode, rng);
  double lp = log_posterior(theta, data, model);

  // single-site cyclic updates with per-coordinate step sizes, adapted during
  // burn-in toward the 0.44 one-dimensional optimum, then frozen
  std::array<double, 3> step{
      cfg.mh_step_g * model.priors.g_std,
      cfg.mh_step_delta * (model.priors.delta_hi - model.priors.delta_lo),
      cfg.mh_step_phi * 2.0 * constants::pi};
  std::array<std::uint64_t, 3> acc{}, tries{};
  constexpr double target_accept = 0.44;
  constexpr int adapt_window = 40;

  Chain chain;
  chain.g.reserve(cfg.steps);
  std::uint64_t accepted = 0, proposals = 0;
  const int total = cfg.burn_in + cfg.steps;
  for (int i = 0; i < total; ++i) {
    for (int k = 0; k < 3; ++k) {
      Theta prop = theta;
      double* coord = k == 0 ? &prop.g : (k == 1 ? &prop.delta : &prop.phi);
      *coord += step[k] * rng.normal();
      if (k == 2) prop.phi = wrap_phi(prop.phi);
      double lp_prop = -std::numeric_limits<double>::infinity();
      if (prop.delta >= model.priors.delta_lo &&
          prop.delta <= model.priors.delta_hi)
        lp_prop = log_posterior(prop, data, model);
      ++tries[k];
      if (i >= cfg.burn_in) ++proposals;
      if (std::log(rng.uniform_pos()) < lp_prop - lp) {
        theta = prop;
        lp = lp_prop;
        ++acc[k];
        if (i >= cfg.burn_in) ++accepted;
      }
    }
    if (i < cfg.burn_in && (i + 1) % adapt_window == 0) {
      for (int k = 0; k < 3; ++k) {
        const double rate =
            static_cast<double>(acc[k]) / static_cast<double>(tries[k]);
        step[k] *= std::exp(rate - target_accept);
        acc[k] = tries[k] = 0;
      }
    }
    if (i >= cfg.burn_in) {
      chain.g.push_back(theta.g);
      chain.delta.push_back(theta.delta);
      chain.phi.push_back(theta.phi);
    }
  }
  chain.accept_rate =
      static_cast<double>(accepted) / static_cast<double>(proposals);
  return chain;
}

Chain run_hmc_chain(const PGM& model, const PhotonRecord& data,
                    const SamplerConfig& cfg, const Theta& mode,
                    std::uint64_t chain_seed) {
  Rng rng(chain_seed);
  Theta theta = initial_point(model, mode, rng);

  // diagonal mass through per-coordinate scales; re-estimated from the first
  // half of burn-in (the posterior is typically far narrower than the prior)
  std::array<double, 3> scale{
      model.priors.g_std, 0.25 * (model.priors.delta_hi - model.priors.delta_lo),
      1.0};

  const auto grad_scaled = [&](const Theta& th) {
    const auto gr = grad_log_posterior(th, data, model);
    return std::array<double, 3>{gr[0] * scale[0], gr[1] * scale[1],
                                 gr[2] * scale[2]};
  };
  const auto reflect_delta = [&](double& d, double& p) {
    const double lo = model.priors.delta_lo, hi = model.priors.delta_hi;
    // keep strictly inside so the gradient stays defined
    const double eps = 1e-12 * (hi - lo);
    for (int guard = 0; guard < 64; ++guard) {
      if (d > hi - eps) {
        d = 2.0 * (hi - eps) - d;
        p = -p;
      } else if (d < lo + eps) {
        d = 2.0 * (lo + eps) - d;
        p = -p;
      } else {
        return;
      }
    }
    d = std::clamp(d, lo + eps, hi - eps);
  };

  double lp = log_posterior(theta, data, model);

  // dual averaging state (Nesterov scheme)
  double log_eps = std::log(cfg.hmc_step0);
  double log_eps_bar = log_eps;
  double h_bar = 0.0;
  double mu = std::log(10.0 * cfg.hmc_step0);
  const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  int adapt_iter = 0;

  // first-half-of-burn-in draws feed the mass re-estimation
  const int warm1 = cfg.burn_in / 2;
  std::vector<double> wg, wd, wp_sin, wp_cos;

  Chain chain;
  std::uint64_t accepted = 0;
  const int total = cfg.burn_in + cfg.steps;
  for (int i = 0; i < total; ++i) {
    if (i == warm1 && warm1 > 16) {
      const auto n = static_cast<double>(wg.size());
      const auto std_of = [&](const std::vector<double>& v) {
        double m0 = 0.0;
        for (double x : v) m0 += x;
        m0 /= n;
        double var = 0.0;
        for (double x : v) var += (x - m0) * (x - m0);
        return std::sqrt(var / n);
      };
      // circular spread of phi around its mean direction
      double ss = 0.0, cc = 0.0;
      for (std::size_t j = 0; j < wp_sin.size(); ++j) {
        ss += wp_sin[j];
        cc += wp_cos[j];
      }
      const double center = std::atan2(ss, cc);
      std::vector<double> centered(wp_sin.size());
      for (std::size_t j = 0; j < wp_sin.size(); ++j)
        centered[j] = std::remainder(std::atan2(wp_sin[j], wp_cos[j]) - center,
                                     2.0 * constants::pi);
      const std::array<double, 3> est{std_of(wg), std_of(wd), std_of(centered)};
      for (int k = 0; k < 3; ++k)
        if (est[k] > 1e-10 * scale[k]) scale[k] = est[k];
      // restart step-size adaptation for the new metric
      log_eps = std::log(cfg.hmc_step0);
      log_eps_bar = log_eps;
      h_bar = 0.0;
      mu = std::log(10.0 * cfg.hmc_step0);
      adapt_iter = 0;
    }
    const double eps = std::exp(i < cfg.burn_in ? log_eps : log_eps_bar);
    std::array<double, 3> p{rng.normal(), rng.normal(), rng.normal()};
    const double ke0 = 0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);

    Theta q = theta;
    auto gr = grad_scaled(q);
    bool divergent = false;
    // leapfrog with reflection at the delta bounds and periodic phi
    for (int l = 0; l < cfg.leapfrog_steps; ++l) {
      for (int k = 0; k < 3; ++k) p[k] += 0.5 * eps * gr[k];
      q.g += eps * scale[0] * p[0];
      q.delta += eps * scale[1] * p[1];
      q.phi = wrap_phi(q.phi + eps * scale[2] * p[2]);
      reflect_delta(q.delta, p[1]);
      gr = grad_scaled(q);
      for (int k = 0; k < 3; ++k) p[k] += 0.5 * eps * gr[k];
      if (!std::isfinite(q.g) || !std::isfinite(q.delta)) {
        divergent = true;
        break;
      }
    }

    double accept_prob = 0.0;
    double lp_prop = -std::numeric_limits<double>::infinity();
    if (!divergent) {
      lp_prop = log_posterior(q, data, model);
      const double ke1 = 0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
      const double dh = (lp_prop - ke1) - (lp - ke0);
      if (!std::isfinite(dh) || dh < -50.0) {
        divergent = true;
      } else {
        accept_prob = std::min(1.0, std::exp(dh));
      }
    }
    if (divergent) ++chain.divergences;
    if (!divergent && rng.uniform() < accept_prob) {
      theta = q;
      lp = lp_prop;
      if (i >= cfg.burn_in) ++accepted;
    }

    if (i < cfg.burn_in) {
      const double m = static_cast<double>(++adapt_iter);
      h_bar = (1.0 - 1.0 / (m + t0)) * h_bar +
              (cfg.hmc_target_accept - accept_prob) / (m + t0);
      log_eps = mu - std::sqrt(m) / gamma * h_bar;
      const double w = std::pow(m, -kappa);
      log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
      if (i < warm1) {
        wg.push_back(theta.g);
        wd.push_back(theta.delta);
        wp_sin.push_back(std::sin(theta.phi));
        wp_cos.push_back(std::cos(theta.phi));
      }
    } else {
      chain.g.push_back(theta.g);
      chain.delta.push_back(theta.delta);
      chain.phi.push_back(theta.phi);
    }
  }
  chain.accept_rate =
      static_cast<double>(accepted) / static_cast<double>(cfg.steps);
  return chain;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    halves.emplace_back(c.begin(), c.begin() + h);
    halves.emplace_back(c.begin() + h, c.begin() + 2 * h);
  }
  const auto m = static_cast<double>(halves.size());
  const auto n = static_cast<double>(halves.front().size());

  std::vector<double> means, vars;
  for (const auto& h : halves) {
    double mu = 0.0;
    for (double v : h) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : h) var += (v - mu) * (v - mu);
    var /= (n - 1.0);
    means.push_back(mu);
    vars.push_back(var);
  }
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= m;
  double b = 0.0;
  for (double v : means) b += (v - grand) * (v - grand);
  b *= n / (m - 1.0);
  double w = 0.0;
  for (double v : vars) w += v;
  w /= m;
  if (w <= 0.0) return 1.0;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  double ess = 0.0;
  for (const auto& c : chains) {
    const std::size_t n = c.size();
    double mu = 0.0;
    for (double v : c) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : c) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    if (var <= 0.0) continue;

    double sum_rho = 0.0;
    // Geyer initial-positive-sequence truncation on paired autocorrelations
    for (std::size_t lag = 1; lag + 1 < n; lag += 2) {
      double r1 = 0.0, r2 = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i)
        r1 += (c[i] - mu) * (c[i + lag] - mu);
      for (std::size_t i = 0; i + lag + 1 < n; ++i)
        r2 += (c[i] - mu) * (c[i + lag + 1] - mu);
      r1 /= static_cast<double>(n) * var;
      r2 /= static_cast<double>(n) * var;
      if (r1 + r2 < 0.0) break;
      sum_rho += r1 + r2;
    }
    ess += static_cast<double>(n) / (1.0 + 2.0 * sum_rho);
  }
  return ess;
}

// recenter angular draws around their circular mean so variance-based
// diagnostics are meaningful
std::vector<std::vector<double>> unwrap_chains(
    const std::vector<std::vector<double>>& chains) {
  double s = 0.0, c = 0.0;
  for (const auto& ch : chains)
    for (double v : ch) {
      s += std::sin(v);
      c += std::cos(v);
    }
  const double center = std::atan2(s, c);
  auto out = chains;
  for (auto& ch : out)
    for (double& v : ch) {
      v = std::remainder(v - center, 2.0 * constants::pi);
    }
  return out;
}

} // namespace

PosteriorSamples sample_posterior(const PGM& model, const PhotonRecord& data,
                                  const SamplerConfig& config) {
  model.validate();
  if (config.steps <= 0 || config.burn_in < 0)
    throw std::invalid_argument("sample_posterior: bad step counts");
  if (config.chains < 2)
    throw std::invalid_argument("sample_posterior: need >= 2 chains");

  const Theta mode = mode_scan(model, data);

  std::vector<Chain> chains(config.chains);
  {
    std::vector<std::thread> workers;
    for (int c = 0; c < config.chains; ++c) {
      workers.emplace_back([&, c] {
        const std::uint64_t chain_seed =
            derive_seed(config.seed, 0x100 + static_cast<std::uint64_t>(c));
        chains[c] = config.method == SamplerMethod::MH
                        ? run_mh_chain(model, data, config, mode, chain_seed)
                        : run_hmc_chain(model, data, config, mode, chain_seed);
      });
    }
    for (auto& w : workers) w.join();
  }

  PosteriorSamples out;
  out.burn_in = config.burn_in;
  out.config = config;
  for (auto& ch : chains) {
    out.g.push_back(std::move(ch.g));
    out.delta.push_back(std::move(ch.delta));
    out.phi.push_back(std::move(ch.phi));
    out.diagnostics.accept_rate.push_back(ch.accept_rate);
    out.diagnostics.divergences += ch.divergences;
  }

  const auto phi_unwrapped = unwrap_chains(out.phi);
  out.diagnostics.r_hat = {split_rhat(out.g), split_rhat(out.delta),
                           split_rhat(phi_unwrapped)};
  out.diagnostics.ess = {effective_sample_size(out.g),
                         effective_sample_size(out.delta),
                         effective_sample_size(phi_unwrapped)};

  const auto total_iters = static_cast<double>(config.chains) *
                           static_cast<double>(config.burn_in + config.steps);
  const double div_frac =
      static_cast<double>(out.diagnostics.divergences) / total_iters;
  out.diagnostics.converged = out.diagnostics.r_hat[0] < 1.1 &&
                              out.diagnostics.r_hat[1] < 1.1 &&
                              out.diagnostics.r_hat[2] < 1.1 &&
                              div_frac <= config.max_divergent_frac;
  return out;
}

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double idx = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

std::vector<double> pooled(const std::vector<std::vector<double>>& chains) {
  std::vector<double> out;
  for (const auto& c : chains) out.insert(out.end(), c.begin(), c.end());
  return out;
}

} // namespace

PosteriorSummary summarize_and_decide(const PosteriorSamples& samples,
                                      double delta_lo, double delta_hi,
                                      double g_min, double threshold) {
  if (samples.total_draws() == 0)
    throw std::invalid_argument("summarize_and_decide: no draws");

  PosteriorSummary summary;
  summary.converged = samples.diagnostics.converged;
  if (!summary.converged)
    summary.warning = "chains not converged (R-hat >= 1.1 or divergences)";

  const auto g = pooled(samples.g);
  const auto d = pooled(samples.delta);

  // circular statistics for phi
  double s = 0.0, c = 0.0;
  for (const auto& ch : samples.phi)
    for (double v : ch) {
      s += std::sin(v);
      c += std::cos(v);
    }
  const double phi_mean = wrap_phi(std::atan2(s, c));
  std::vector<double> phi_centered;
  for (const auto& ch : samples.phi)
    for (double v : ch)
      phi_centered.push_back(std::remainder(v - phi_mean, 2.0 * constants::pi));

  const auto mean_of = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
  };

  summary.mean = {mean_of(g), mean_of(d), phi_mean};
  summary.median = {quantile(g, 0.5), quantile(d, 0.5),
                    wrap_phi(phi_mean + quantile(phi_centered, 0.5))};
  summary.g_ci95 = {quantile(g, 0.025), quantile(g, 0.975)};
  summary.delta_ci95 = {quantile(d, 0.025), quantile(d, 0.975)};
  summary.phi_ci95 = {phi_mean + quantile(phi_centered, 0.025),
                      phi_mean + quantile(phi_centered, 0.975)};

  std::size_t hits = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] > g_min && d[i] >= delta_lo && d[i] <= delta_hi) ++hits;
  summary.detection_probability =
      static_cast<double>(hits) / static_cast<double>(g.size());
  summary.detected = summary.detection_probability >= threshold;
  return summary;
}

} // namespace hyperdyne
