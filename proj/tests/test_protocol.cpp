#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hyperdyne/constants.hpp"
#include "hyperdyne/protocol.hpp"
#include "hyperdyne/spectral.hpp"

using namespace hyperdyne;
namespace hc = hyperdyne::constants;

namespace {

NVSensor make_nv(double pb = 0.04, double pd = 0.025) {
  NVSensor nv;
  nv.depth = 6.2e-9;
  nv.t2_nv = 100e-6;
  nv.p_bright = pb;
  nv.p_dark = pd;
  return nv;
}

ProtocolConfig make_config(std::uint64_t n_m = 512, ReadoutMode mode = ReadoutMode::Analytic) {
  ProtocolConfig cfg;
  cfg.tau_m = 4.1e-6;
  cfg.t_l = cfg.tau_m + 2.5e-6;
  cfg.n_m = n_m;
  cfg.n_nv = 1;
  cfg.readout = mode;
  return cfg;
}

FieldTrace zero_trace(double dt, std::size_t n) {
  FieldTrace tr;
  tr.dt = dt;
  tr.b_stat.assign(n, 0.0);
  tr.b_coh.assign(n, 0.0);
  return tr;
}

} // namespace

TEST_CASE("qdyne_probability basics") {
  CHECK(qdyne_probability(0.0, 1.0, 0.3, 0.7) == 0.5);
  // node where the cosine vanishes
  CHECK(qdyne_probability(0.8, 1.0, 0.0, hc::pi / 2.0) ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(qdyne_probability(0.3, 1.0, 0.0, 0.0) ==
        doctest::Approx(0.5 * (1.0 + std::sin(0.3))).epsilon(1e-14));
  CHECK(qdyne_probability(0.3, 1.0, 0.0, 0.0) == doctest::Approx(0.6478).epsilon(1e-3));
  CHECK_THROWS(qdyne_probability(-0.1, 0.0, 0.0, 0.0));
}

TEST_CASE("qdyne_probability stays in [0,1]; literal mode clamps") {
  for (double g : {0.1, 0.8, 2.0, 5.0})
    for (double arg = 0.0; arg < 6.3; arg += 0.05) {
      const double p = qdyne_probability(g, 1.0, arg, 0.0);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      const double pl = qdyne_probability(g, 1.0, arg, 0.0, true);
      CHECK(pl >= 0.0);
      CHECK(pl <= 1.0);
    }
  // the literal printed form exceeds 1 before clamping at large arguments
  CHECK(qdyne_probability(2.0, 0.0, 0.0, 0.0, true) == 1.0);
}

TEST_CASE("config validation") {
  auto cfg = make_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.t_l = cfg.tau_m * 0.5;
  CHECK_THROWS(cfg.validate());
  cfg = make_config();
  cfg.n_m = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("mz qdyne: flat background on a zero trace") {
  const auto nv = make_nv();
  auto cfg = make_config(4000, ReadoutMode::Bernoulli);
  const auto trace = zero_trace(cfg.t_l, cfg.n_m + 1);
  const auto rec = simulate_mz_qdyne(trace, nv, cfg, 123);

  REQUIRE(rec.counts.size() == cfg.n_m);
  const double expected = nv.p_dark + 0.5 * (nv.p_bright - nv.p_dark);
  for (double p : rec.probabilities) CHECK(p == doctest::Approx(expected));
  double mean = 0.0;
  for (auto c : rec.counts) {
    CHECK(c <= 1);
    mean += static_cast<double>(c);
  }
  mean /= static_cast<double>(cfg.n_m);
  const double se = std::sqrt(expected / static_cast<double>(cfg.n_m));
  CHECK(std::abs(mean - expected) < 4.0 * se);
}

TEST_CASE("mz qdyne analytic mode reproduces qdyne_probability exactly") {
  const auto nv = make_nv();
  const auto cfg = make_config(512, ReadoutMode::Analytic);
  AnalyticSignal sig{0.45, 2.0 * hc::pi * 3000.0, 0.0, 0.0};
  const auto rec = simulate_mz_qdyne(sig, nv, cfg, 7);

  REQUIRE(rec.counts.empty());
  REQUIRE(rec.probabilities.size() == cfg.n_m);
  for (std::uint64_t j = 0; j < cfg.n_m; ++j) {
    const double t = static_cast<double>(j) * cfg.t_l;
    const double p = qdyne_probability(sig.g, sig.delta, t, sig.phi);
    const double expected = nv.p_dark + (nv.p_bright - nv.p_dark) * p;
    CHECK(std::abs(rec.probabilities[j] - expected) <= 1e-12);
  }
}

TEST_CASE("mz qdyne: sampled mean converges to the analytic mean") {
  const auto nv = make_nv(0.6, 0.3);
  auto cfg = make_config(64, ReadoutMode::Bernoulli);
  AnalyticSignal sig{0.5, 2.0 * hc::pi * 1800.0, 0.0, 0.0};

  const auto analytic =
      simulate_mz_qdyne(sig, nv, make_config(64, ReadoutMode::Analytic), 0);
  const int reps = 20000;
  std::vector<double> mean(cfg.n_m, 0.0);
  for (int r = 0; r < reps; ++r) {
    const auto rec = simulate_mz_qdyne(sig, nv, cfg, 1000, r);
    for (std::size_t j = 0; j < mean.size(); ++j)
      mean[j] += static_cast<double>(rec.counts[j]);
  }
  int outside = 0;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    mean[j] /= reps;
    const double p = analytic.probabilities[j];
    const double se = std::sqrt(p * (1.0 - p) / reps);
    if (std::abs(mean[j] - p) > 3.0 * se) ++outside;
  }
  // ~0.3% expected outside 3 sigma; allow a small count
  CHECK(outside <= 3);
}

TEST_CASE("mz qdyne: poisson ensemble counts bounded by bright/dark rates") {
  const auto nv = make_nv();
  auto cfg = make_config(2000, ReadoutMode::Poisson);
  cfg.n_nv = 500;
  AnalyticSignal sig{0.6, 2.0 * hc::pi * 2500.0, 0.4, 0.0};
  const auto rec = simulate_mz_qdyne(sig, nv, cfg, 3);
  for (double p : rec.probabilities) {
    CHECK(p >= nv.p_dark);
    CHECK(p <= nv.p_bright);
  }
  double mean = 0.0;
  for (auto c : rec.counts) mean += static_cast<double>(c);
  mean /= static_cast<double>(cfg.n_m);
  CHECK(mean > nv.p_dark * cfg.n_nv);
  CHECK(mean < nv.p_bright * cfg.n_nv);
}

TEST_CASE("mz qdyne errors") {
  const auto nv = make_nv();
  const auto cfg = make_config(512, ReadoutMode::Bernoulli);
  const auto trace = zero_trace(cfg.t_l, 16); // far too short
  CHECK_THROWS(simulate_mz_qdyne(trace, nv, cfg, 0));
}

TEST_CASE("statistical qdyne: frozen sample behaves as a fixed random phase") {
  const auto nv = make_nv(0.6, 0.3);
  auto cfg = make_config(256, ReadoutMode::Analytic);
  // effectively infinite correlation time
  const double duration = static_cast<double>(cfg.n_m + 1) * cfg.t_l;
  const auto trace = ou_surrogate_trace(2e-7, 1e9, duration, cfg.t_l, 5);
  const auto rec = simulate_statistical_qdyne(trace, nv, cfg, 5);

  // (near-)constant field -> constant probability across the run
  for (double p : rec.probabilities)
    CHECK(p == doctest::Approx(rec.probabilities[0]).epsilon(1e-6));

  // different runs see different phases
  const auto trace2 = ou_surrogate_trace(2e-7, 1e9, duration, cfg.t_l, 6);
  const auto rec2 = simulate_statistical_qdyne(trace2, nv, cfg, 6);
  CHECK(rec.probabilities[0] != rec2.probabilities[0]);
}

TEST_CASE("average_runs: degenerate and mismatched inputs") {
  const auto nv = make_nv();
  const auto cfg = make_config(128, ReadoutMode::Bernoulli);
  const auto trace = zero_trace(cfg.t_l, cfg.n_m + 1);
  const auto rec = simulate_mz_qdyne(trace, nv, cfg, 9);

  const auto avg = average_runs({rec, rec});
  for (std::size_t j = 0; j < avg.mean.size(); ++j) {
    CHECK(avg.mean[j] == static_cast<double>(rec.counts[j]));
    CHECK(avg.variance[j] == 0.0);
  }

  auto other = simulate_mz_qdyne(trace, nv, make_config(64, ReadoutMode::Bernoulli), 9);
  CHECK_THROWS(average_runs({rec, other}));
  CHECK_THROWS(average_runs({}));
}

TEST_CASE("average_runs: noise suppressed as 1/sqrt(N) (CLT)") {
  const auto nv = make_nv(0.6, 0.3);
  auto cfg = make_config(256, ReadoutMode::Analytic);
  const double duration = static_cast<double>(cfg.n_m + 1) * cfg.t_l;

  // rms of the averaged pure-noise signal vs run count
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int np = 0;
  std::uint64_t seed = 100;
  for (int n_runs : {8, 32, 128, 512}) {
    double rms2 = 0.0;
    const int reps = 12;
    for (int rep = 0; rep < reps; ++rep) {
      std::vector<PhotonRecord> records;
      for (int r = 0; r < n_runs; ++r) {
        const auto tr = ou_surrogate_trace(2e-7, 1e6, duration, cfg.t_l, seed++);
        records.push_back(simulate_statistical_qdyne(tr, nv, cfg, seed++));
      }
      const auto avg = average_runs(records);
      double mean = 0.0;
      for (double v : avg.mean) mean += v;
      mean /= static_cast<double>(avg.mean.size());
      for (double v : avg.mean) rms2 += (v - mean) * (v - mean);
    }
    const double x = std::log(static_cast<double>(n_runs));
    const double y = 0.5 * std::log(rms2 / reps);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++np;
  }
  const double slope = (np * sxy - sx * sy) / (np * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.1));
}

TEST_CASE("phase-coherent averaging preserves the coherent peak (fig 1c scenario)") {
  const auto nv = make_nv(0.6, 0.3);
  auto cfg = make_config(300, ReadoutMode::Analytic);
  const double delta = 2.0 * hc::pi * 3000.0;
  const double g_coh = std::asin(0.9); // averaged signal oscillates +-0.45
  const double duration = static_cast<double>(cfg.n_m + 1) * cfg.t_l;

  // statistical phase std 0.3 g: attenuates the averaged oscillation by only
  // exp(-sigma^2/2) ~ 0.95 while still dephasing incoherent contributions
  const double b_stat_rms =
      0.3 * g_coh / (4.0 * cfg.tau_m / hc::pi * hc::gamma_e);

  std::uint64_t seed = 7000;
  const auto averaged_for = [&](int n_runs) {
    std::vector<PhotonRecord> records;
    for (int r = 0; r < n_runs; ++r) {
      const auto tr =
          ou_surrogate_trace(b_stat_rms, 1e6, duration, cfg.t_l, seed++);
      AnalyticSignal sig{g_coh, delta, 0.0, 0.0};
      records.push_back(simulate_mz_qdyne(sig, nv, cfg, seed++, 0, &tr));
    }
    return average_runs(records);
  };

  const auto avg300 = averaged_for(300);
  const auto avg30 = averaged_for(30);

  // coherent spectral amplitude independent of N within 5%
  const auto spec300 = power_spectrum(avg300);
  const auto spec30 = power_spectrum(avg30);
  const auto peak300 = peak_metrics(spec300, 2500.0, 3500.0);
  const auto peak30 = peak_metrics(spec30, 2500.0, 3500.0);
  CHECK(std::sqrt(peak300.peak_power) ==
        doctest::Approx(std::sqrt(peak30.peak_power)).epsilon(0.05));

  // averaged oscillation reaches roughly +-0.45 in normalized units
  double lo = 1e9, hi = -1e9;
  for (std::size_t j = 0; j < 40; ++j) {
    const double norm =
        (avg300.mean[j] - nv.p_dark) / (nv.p_bright - nv.p_dark) - 0.5;
    lo = std::min(lo, norm);
    hi = std::max(hi, norm);
  }
  CHECK(hi == doctest::Approx(0.45).epsilon(0.12));
  CHECK(lo == doctest::Approx(-0.45).epsilon(0.12));
}

TEST_CASE("undersampling aliases the beat into the Nyquist band") {
  const auto nv = make_nv(0.6, 0.3);
  auto cfg = make_config(512, ReadoutMode::Analytic);
  const double f_s = 1.0 / cfg.t_l;
  const double f_true = 3.7 * f_s + 1234.0; // far above Nyquist
  AnalyticSignal sig{0.5, 2.0 * hc::pi * f_true, 0.0, 0.0};
  const auto rec = simulate_mz_qdyne(sig, nv, cfg, 1);

  AveragedSignal one;
  one.mean = rec.probabilities;
  one.variance.assign(rec.probabilities.size(), 0.0);
  one.n_runs = 1;
  one.t_l = cfg.t_l;
  const auto spec = power_spectrum(one);
  const auto peak = peak_metrics(spec, 100.0, 0.5 * f_s);

  double expected = std::fmod(f_true, f_s);
  if (expected > 0.5 * f_s) expected = f_s - expected;
  CHECK(peak.frequency == doctest::Approx(expected).epsilon(0.02));
}
