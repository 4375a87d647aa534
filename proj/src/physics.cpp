#include "hyperdyne/physics.hpp"

#include <cmath>
#include <stdexcept>

#include "hyperdyne/constants.hpp"

namespace hyperdyne {

namespace {
constexpr double kAxisTol = 1e-12;
}

void NVSensor::validate() const {
  if (!(depth > 0.0)) throw std::invalid_argument("NVSensor: depth must be > 0");
  if (std::abs(norm(axis) - 1.0) > kAxisTol)
    throw std::invalid_argument("NVSensor: axis must be normalized");
  if (!(p_dark >= 0.0 && p_dark < p_bright && p_bright <= 1.0))
    throw std::invalid_argument("NVSensor: need 0 <= p_dark < p_bright <= 1");
}

void NuclearSpecies::validate() const {
  if (density < 0.0) throw std::invalid_argument("NuclearSpecies: density < 0");
  if (diffusion < 0.0) throw std::invalid_argument("NuclearSpecies: diffusion < 0");
  if (!(t2 > 0.0 && t1 >= t2))
    throw std::invalid_argument("NuclearSpecies: need T1 >= T2 > 0");
}

CouplingComponents dipolar_coupling(const NVSensor& nv, const Vec3& position,
                                    double gamma_n) {
  const double r = norm(position);
  if (r <= 0.0) throw std::domain_error("dipolar_coupling: zero separation");

  const double ct = dot(position, nv.axis) / r; // cos(theta) wrt the NV axis
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));

  const double pref = constants::mu0 * constants::hbar * constants::gamma_e *
                      gamma_n / (4.0 * constants::pi * r * r * r);
  return CouplingComponents{pref * 3.0 * st * ct, pref * (3.0 * ct * ct - 1.0)};
}

double brms_analytic(const NVSensor& nv, const NuclearSpecies& species) {
  if (!(nv.depth > 0.0)) throw std::invalid_argument("brms_analytic: depth <= 0");
  if (!(species.density > 0.0))
    throw std::invalid_argument("brms_analytic: density <= 0");

  // Half-space integral of (A_x / gamma_e)^2 * <s_x^2> * rho in the Pauli
  // units used throughout (longitudinal components +-1, so <s_x^2> = 1); the
  // angular and radial integral reduces to pi / (4 d^3), giving
  // B_rms^2 = pref^2 * rho * pi / (4 d^3).
  const double pref =
      constants::mu0 * constants::hbar * species.gamma / (4.0 * constants::pi);
  const double d = nv.depth;
  const double brms2 =
      pref * pref * species.density * constants::pi / (4.0 * d * d * d);
  return std::sqrt(brms2);
}

PhaseCondition validate_phase_condition(double b_rms, double tau_m) {
  if (b_rms < 0.0 || !(tau_m > 0.0))
    throw std::invalid_argument("validate_phase_condition: bad inputs");
  const double phase = constants::gamma_e * b_rms * tau_m;
  const double bound = constants::pi / 2.0;
  return PhaseCondition{phase < bound, phase / bound};
}

} // namespace hyperdyne
