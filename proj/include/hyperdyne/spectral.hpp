#pragma once

#include <cstddef>
#include <vector>

#include "hyperdyne/protocol.hpp"

// Fourier-domain recovery: power spectra, peak SNR and linewidth of averaged
// Qdyne signals.
namespace hyperdyne {

enum class Window { Rectangular, Hann };

struct Spectrum {
  std::vector<double> frequency; // [Hz], one-sided grid
  std::vector<double> power;     // normalized so that the sum (with the
                                 // one-sided doubling) equals the variance
  double t_rec = 0.0;            // record length [s]
  Window window = Window::Rectangular;

  std::size_t size() const { return frequency.size(); }
  double resolution() const { return 1.0 / t_rec; }
};

struct PeakReport {
  double frequency;   // sub-bin interpolated peak location [Hz]
  double snr;         // amplitude over the median-based noise floor
  double fwhm;        // half-power width [Hz]
  double noise_floor; // robust off-peak amplitude level
  double peak_power;
};

// Mean-subtracted, windowed one-sided power spectrum on the grid
// m / (pad * N * dt). pad > 1 zero-pads for sub-bin lineshape sampling; the
// stated resolution stays 1 / (N dt). Throws for signals shorter than 8.
Spectrum power_spectrum(const std::vector<double>& samples, double dt,
                        Window window = Window::Rectangular, int pad = 1);

Spectrum power_spectrum(const AveragedSignal& signal,
                        Window window = Window::Rectangular, int pad = 1);

// Peak location / SNR / FWHM in [f_lo, f_hi]; the noise floor comes from the
// bins outside the window.
PeakReport peak_metrics(const Spectrum& spectrum, double f_lo, double f_hi);

struct Detection {
  double frequency;
  double snr;
};

// All local maxima with SNR >= threshold inside [f_lo, f_hi], sorted by SNR
// descending.
std::vector<Detection> detect(const Spectrum& spectrum, double threshold,
                              double f_lo, double f_hi);

} // namespace hyperdyne
