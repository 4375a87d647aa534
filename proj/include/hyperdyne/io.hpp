#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hyperdyne/bayes.hpp"
#include "hyperdyne/diffusion.hpp"
#include "hyperdyne/protocol.hpp"
#include "hyperdyne/sensitivity.hpp"
#include "hyperdyne/spectral.hpp"

// Artifact persistence. The binary trace container is versioned and
// little-endian; all writes go through a temp-file-then-rename step so
// partially written artifacts never appear under their final name.
namespace hyperdyne::io {

inline constexpr char kTraceMagic[4] = {'H', 'D', 'Y', 'N'};
inline constexpr std::uint32_t kTraceVersion = 1;

// Binary container: magic "HDYN", version u32, dt f64, length u64, seed u64,
// then length b_stat samples followed by length b_coh samples (f64 LE).
void save_trace(const FieldTrace& trace, const std::filesystem::path& path);
FieldTrace load_trace(const std::filesystem::path& path);

// CSV (time_s, b_stat_t, b_coh_t) for plotting.
void export_trace_csv(const FieldTrace& trace, const std::filesystem::path& path);

// CSV (measurement_index, time_s, count) plus a structured-text sidecar
// <path>.meta with the full protocol configuration.
void save_photon_record(const PhotonRecord& record,
                        const std::filesystem::path& path);
PhotonRecord load_photon_record(const std::filesystem::path& path);

void export_averaged_csv(const AveragedSignal& signal,
                         const std::filesystem::path& path);

void export_spectrum_csv(const Spectrum& spectrum,
                         const std::filesystem::path& path);

void export_peak_report(const PeakReport& report,
                        const std::filesystem::path& path);

// CSV (chain, step, g, delta, phi).
void export_posterior_csv(const PosteriorSamples& samples,
                          const std::filesystem::path& path);

void export_posterior_summary(const PosteriorSummary& summary,
                              const PosteriorSamples& samples,
                              const std::filesystem::path& path);

void export_curve_csv(const std::vector<std::pair<double, double>>& points,
                      const std::string& header,
                      const std::filesystem::path& path);

// Atomic text write used by every exporter.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);

std::string read_file(const std::filesystem::path& path);

// FNV-1a over the bytes of a string; used for config hashes in manifests.
std::string fnv1a_hex(const std::string& bytes);

} // namespace hyperdyne::io
