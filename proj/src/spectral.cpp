#include "hyperdyne/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "hyperdyne/constants.hpp"

namespace hyperdyne {

Spectrum power_spectrum(const std::vector<double>& samples, double dt,
                        Window window, int pad) {
  const std::size_t n = samples.size();
  if (n < 8) throw std::invalid_argument("power_spectrum: signal shorter than 8");
  if (!(dt > 0.0)) throw std::invalid_argument("power_spectrum: dt must be > 0");
  if (pad < 1) throw std::invalid_argument("power_spectrum: pad must be >= 1");

  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> x(n);
  double wsum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (window == Window::Hann)
      w = 0.5 * (1.0 - std::cos(2.0 * constants::pi * static_cast<double>(i) /
                                static_cast<double>(n - 1)));
    x[i] = (samples[i] - mean) * w;
    wsum2 += w * w;
  }

  const std::size_t m_total = n * static_cast<std::size_t>(pad);
  const std::size_t m_half = m_total / 2;

  Spectrum spec;
  spec.t_rec = dt * static_cast<double>(n);
  spec.window = window;
  spec.frequency.resize(m_half + 1);
  spec.power.resize(m_half + 1);

  const double norm = static_cast<double>(m_total) * wsum2;
  for (std::size_t m = 0; m <= m_half; ++m) {
    const double w = -2.0 * constants::pi * static_cast<double>(m) /
                     static_cast<double>(m_total);
    const std::complex<double> rot(std::cos(w), std::sin(w));
    std::complex<double> phase(1.0, 0.0);
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * phase;
      phase *= rot;
    }
    const double mult = (m == 0 || 2 * m == m_total) ? 1.0 : 2.0;
    spec.frequency[m] =
        static_cast<double>(m) / (static_cast<double>(m_total) * dt);
    spec.power[m] = mult * std::norm(acc) / norm;
  }
  return spec;
}

Spectrum power_spectrum(const AveragedSignal& signal, Window window, int pad) {
  return power_spectrum(signal.mean, signal.t_l, window, pad);
}

namespace {

struct NoiseFloor {
  double floor;
};

// median + 1.4826 * MAD of off-window amplitudes (robust to the peak itself)
double noise_floor_amplitude(const Spectrum& spec, std::size_t i_lo,
                             std::size_t i_hi) {
  std::vector<double> amps;
  amps.reserve(spec.size());
  for (std::size_t i = 1; i < spec.size(); ++i)
    if (i < i_lo || i > i_hi) amps.push_back(std::sqrt(spec.power[i]));
  if (amps.size() < 8) {
    // window covers (nearly) the whole band: fall back to every bin. The
    // median/MAD pair is robust against the handful of peak bins included.
    amps.clear();
    for (std::size_t i = 1; i < spec.size(); ++i)
      amps.push_back(std::sqrt(spec.power[i]));
  }
  if (amps.size() < 4)
    throw std::invalid_argument("peak_metrics: too few bins for a noise floor");

  const auto median_of = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
  };
  const double med = median_of(amps);
  std::vector<double> dev(amps.size());
  for (std::size_t i = 0; i < amps.size(); ++i) dev[i] = std::abs(amps[i] - med);
  const double mad = median_of(dev);
  return med + 1.4826 * mad;
}

std::pair<std::size_t, std::size_t> window_bins(const Spectrum& spec, double f_lo,
                                                double f_hi) {
  if (!(f_lo < f_hi) || f_hi < spec.frequency.front() ||
      f_lo > spec.frequency.back())
    throw std::invalid_argument("peak_metrics: empty search window");
  const double df = spec.frequency[1] - spec.frequency[0];
  const auto clampi = [&](double f) {
    const double idx = f / df;
    return static_cast<std::size_t>(
        std::clamp(idx, 0.0, static_cast<double>(spec.size() - 1)));
  };
  std::size_t i_lo = clampi(f_lo);
  std::size_t i_hi = clampi(f_hi);
  if (spec.frequency[i_lo] < f_lo && i_lo + 1 < spec.size()) ++i_lo;
  return {i_lo, i_hi};
}

} // namespace

PeakReport peak_metrics(const Spectrum& spec, double f_lo, double f_hi) {
  const auto [i_lo, i_hi] = window_bins(spec, f_lo, f_hi);
  if (i_lo > i_hi) throw std::invalid_argument("peak_metrics: empty search window");

  std::size_t peak = i_lo;
  for (std::size_t i = i_lo; i <= i_hi; ++i)
    if (spec.power[i] > spec.power[peak]) peak = i;

  const double df = spec.frequency[1] - spec.frequency[0];

  // 3-point parabolic sub-bin interpolation
  double f_peak = spec.frequency[peak];
  if (peak > 0 && peak + 1 < spec.size()) {
    const double ym = spec.power[peak - 1], y0 = spec.power[peak],
                 yp = spec.power[peak + 1];
    const double denom = ym - 2.0 * y0 + yp;
    if (denom < 0.0) f_peak += 0.5 * (ym - yp) / denom * df;
  }

  // half-power crossings, linearly interpolated
  const double half = 0.5 * spec.power[peak];
  double f_left = spec.frequency.front();
  for (std::size_t i = peak; i-- > 0;) {
    if (spec.power[i] <= half) {
      const double frac = (spec.power[i + 1] - half) / (spec.power[i + 1] - spec.power[i]);
      f_left = spec.frequency[i + 1] - frac * df;
      break;
    }
  }
  double f_right = spec.frequency.back();
  for (std::size_t i = peak + 1; i < spec.size(); ++i) {
    if (spec.power[i] <= half) {
      const double frac = (spec.power[i - 1] - half) / (spec.power[i - 1] - spec.power[i]);
      f_right = spec.frequency[i - 1] + frac * df;
      break;
    }
  }

  PeakReport report;
  report.frequency = f_peak;
  report.peak_power = spec.power[peak];
  report.noise_floor = noise_floor_amplitude(spec, i_lo, i_hi);
  report.snr = std::sqrt(spec.power[peak]) / report.noise_floor;
  report.fwhm = std::max(f_right - f_left, df);
  return report;
}

std::vector<Detection> detect(const Spectrum& spec, double threshold, double f_lo,
                              double f_hi) {
  if (!(threshold > 0.0)) throw std::invalid_argument("detect: threshold <= 0");
  const auto [i_lo, i_hi] = window_bins(spec, f_lo, f_hi);
  const double floor = noise_floor_amplitude(spec, i_lo, i_hi);

  std::vector<Detection> found;
  for (std::size_t i = std::max<std::size_t>(i_lo, 1);
       i <= i_hi && i + 1 < spec.size(); ++i) {
    if (spec.power[i] > spec.power[i - 1] && spec.power[i] >= spec.power[i + 1]) {
      const double snr = std::sqrt(spec.power[i]) / floor;
      if (snr >= threshold) found.push_back({spec.frequency[i], snr});
    }
  }
  std::sort(found.begin(), found.end(),
            [](const Detection& a, const Detection& b) { return a.snr > b.snr; });
  return found;
}

} // namespace hyperdyne
