#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "hyperdyne/constants.hpp"
#include "hyperdyne/sensitivity.hpp"

using namespace hyperdyne;
namespace hc = hyperdyne::constants;

namespace {

SensitivityModel base_model() {
  SensitivityModel m;
  m.density = 6.69e28;       // water protons
  m.polarization = 1e-3;
  m.volume = 1e-19;          // (100 nm)^2 x 10 um scale
  m.nv_density = 1e22;
  m.tau_m = 4.1e-6;
  m.t2_nv = 100e-6;
  m.k = 2.0 * hc::pi * 5e3;
  m.n_m = 1e4;
  m.n_nv = m.nv_count_from_volume();
  m.calibration = 1e-33;
  return m;
}

} // namespace

TEST_CASE("model validation") {
  auto m = base_model();
  CHECK_NOTHROW(m.validate());
  m.density = 0.0;
  CHECK_THROWS(m.validate());
  m = base_model();
  m.duty_overhead = 0.5;
  CHECK_THROWS(m.validate());
}

TEST_CASE("snr proportionalities") {
  const auto m0 = base_model();
  const double s0 = snr_estimate(m0);
  CHECK(s0 > 0.0);

  auto m = m0;
  m.density *= 2.0;
  CHECK(snr_estimate(m) == doctest::Approx(2.0 * s0).epsilon(1e-12));

  m = m0;
  m.polarization *= 3.0;
  CHECK(snr_estimate(m) == doctest::Approx(3.0 * s0).epsilon(1e-12));

  m = m0;
  m.tau_m *= 2.0;
  CHECK(snr_estimate(m) == doctest::Approx(2.0 * s0).epsilon(1e-12));

  m = m0;
  m.n_m *= 4.0;
  CHECK(snr_estimate(m) == doctest::Approx(2.0 * s0).epsilon(1e-12));

  m = m0;
  m.n_nv *= 4.0;
  CHECK(snr_estimate(m) == doctest::Approx(2.0 * s0).epsilon(1e-12));
}

TEST_CASE("required time: regimes, crossover and continuity") {
  auto m = base_model();
  const double tau_cap = std::min(m.t2_nv, hc::pi / (4.0 * m.k));

  // largest SNR reachable while still growing tau_m at the model's N_m
  const double snr_at_cap = [&] {
    auto mm = m;
    mm.tau_m = tau_cap;
    return snr_estimate(mm);
  }();

  const auto easy = required_time(m, 0.1 * snr_at_cap);
  CHECK(easy.regime == SnrRegime::Coherent);
  CHECK(easy.crossover_tau == doctest::Approx(tau_cap).epsilon(1e-12));
  CHECK(easy.reachable);

  const auto hard = required_time(m, 10.0 * snr_at_cap);
  CHECK(hard.regime == SnrRegime::Averaging);
  CHECK(hard.time > easy.time);

  // continuity: times just below / above the crossover target agree
  const auto below = required_time(m, snr_at_cap * (1.0 - 1e-9));
  const auto above = required_time(m, snr_at_cap * (1.0 + 1e-9));
  CHECK(below.time == doctest::Approx(above.time).epsilon(1e-6));

  // coherent regime: tau per run grows linearly with the target, so T does too
  const auto c1 = required_time(m, 0.02 * snr_at_cap);
  const auto c2 = required_time(m, 0.04 * snr_at_cap);
  CHECK(c2.time == doctest::Approx(2.0 * c1.time).epsilon(1e-9));

  // averaging regime: T ~ target^2
  const auto a1 = required_time(m, 10.0 * snr_at_cap);
  const auto a2 = required_time(m, 20.0 * snr_at_cap);
  CHECK(a2.time == doctest::Approx(4.0 * a1.time).epsilon(1e-9));

  // doubled density: averaging-regime time drops by 4
  auto m2 = m;
  m2.density *= 2.0;
  const auto a1d = required_time(m2, 10.0 * snr_at_cap);
  CHECK(a1.time == doctest::Approx(4.0 * a1d.time).epsilon(1e-9));

  // cap enforcement
  const auto capped = required_time(m, 10.0 * snr_at_cap, a1.time * 0.5);
  CHECK_FALSE(capped.reachable);
}

TEST_CASE("crossover tau respects both limits") {
  auto m = base_model();
  m.k = 2.0 * hc::pi * 1e2; // pi/4k >> T2
  CHECK(required_time(m, 1.0).crossover_tau == doctest::Approx(m.t2_nv));
  m.k = 2.0 * hc::pi * 1e6; // pi/4k << T2
  CHECK(required_time(m, 1.0).crossover_tau ==
        doctest::Approx(hc::pi / (4.0 * m.k)));
}

TEST_CASE("flip-flop rate") {
  CHECK(flip_flop_rate(2.0, 100.0, 0.05) ==
        doctest::Approx(2.0 * 2.0 * 100.0 * 0.05).epsilon(1e-12));
  CHECK_THROWS(flip_flop_rate(-1.0, 100.0, 0.05));
}

TEST_CASE("polarization buildup: limits and the headline working point") {
  const auto cfg = reference_polarization_config();
  CHECK_NOTHROW(cfg.validate());

  const auto traj = polarization_buildup(cfg, 2.0);
  REQUIRE(!traj.time.empty());
  REQUIRE(traj.time.size() == traj.shell.size());
  REQUIRE(traj.time.size() == traj.bulk.size());

  // monotone rise from zero, bounded by 1
  CHECK(traj.average.front() < 1e-6);
  for (std::size_t i = 1; i < traj.average.size(); ++i) {
    CHECK(traj.average[i] >= traj.average[i - 1] - 1e-12);
    CHECK(traj.average[i] <= 1.0);
    CHECK(traj.shell[i] >= traj.bulk[i] - 1e-12); // source is in the shell
  }

  // ~0.5% average polarization after 2 s of pumping
  CHECK(traj.average.back() == doctest::Approx(5e-3).epsilon(0.25));

  // steady state of the ODE system, derived by setting both rates to zero
  const auto long_traj = polarization_buildup(cfg, 60.0);
  const double fs = cfg.shell_fraction;
  const double a = cfg.gamma_pol + 1.0 / cfg.t1 + cfg.k_ex;
  const double b = cfg.k_ex;
  const double c = cfg.k_ex * fs / (1.0 - fs);
  const double d = 1.0 / cfg.t1 + c;
  const double ps = cfg.gamma_pol * d / (a * d - b * c);
  const double pb = c * ps / d;
  CHECK(long_traj.shell.back() == doctest::Approx(ps).epsilon(1e-3));
  CHECK(long_traj.bulk.back() == doctest::Approx(pb).epsilon(1e-3));
}

TEST_CASE("polarization buildup halves against an RK4-independent oracle") {
  // step-halving convergence: dt and dt/2 agree to high order
  const auto cfg = reference_polarization_config();
  const auto coarse = polarization_buildup(cfg, 2.0, 1e-3);
  const auto fine = polarization_buildup(cfg, 2.0, 5e-4);
  CHECK(coarse.average.back() ==
        doctest::Approx(fine.average.back()).epsilon(1e-8));
}

TEST_CASE("detection limit curve: shape and bayesian advantage") {
  auto m = base_model();
  std::vector<double> volumes = {1e-21, 1e-20, 1e-19, 1e-18};
  const auto curve = detection_limit_curve(volumes, 3600.0, 10.0, m);
  REQUIRE(curve.size() == volumes.size());
  for (std::size_t i = 0; i < curve.size(); ++i)
    CHECK(curve[i].volume == volumes[i]);
  // larger probed volume -> lower detectable concentration
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i].min_concentration <= curve[i - 1].min_concentration);

  // each returned point indeed reaches the target inside the budget
  for (const auto& pt : curve) {
    if (!std::isfinite(pt.min_concentration)) continue;
    auto mm = m;
    mm.volume = pt.volume;
    mm.n_nv = mm.nv_count_from_volume();
    mm.density = pt.min_concentration * 1.001;
    const auto rt = required_time(mm, 10.0);
    CHECK(rt.reachable);
    CHECK(rt.time * mm.duty_overhead <= 3600.0 * 1.01);
  }

  const auto adv = detection_limit_curve(volumes, 3600.0, 10.0, m, 3.0);
  for (std::size_t i = 0; i < curve.size(); ++i)
    CHECK(adv[i].min_concentration ==
          doctest::Approx(curve[i].min_concentration / 3.0).epsilon(1e-9));

  // impossible budget -> infinity sentinel
  const auto none = detection_limit_curve({1e-21}, 1e-12, 1e9, m);
  CHECK(std::isinf(none[0].min_concentration));
}

TEST_CASE("microcoil reference crossover") {
  const double dc = 100e-6;
  const std::vector<double> d = {dc / 4.0, dc, 4.0 * dc};
  const auto s = microcoil_reference(d, 2.0);
  // continuous at the boundary and the right power laws on each side
  CHECK(s[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s[2] == doctest::Approx(s[1] / 4.0).epsilon(1e-12));        // 1/d
  CHECK(s[0] == doctest::Approx(s[1] * 2.0).epsilon(1e-12));        // 1/sqrt(d)
}
