#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hyperdyne/bayes.hpp"
#include "hyperdyne/diffusion.hpp"
#include "hyperdyne/physics.hpp"
#include "hyperdyne/protocol.hpp"
#include "hyperdyne/sensitivity.hpp"
#include "hyperdyne/spectral.hpp"

// Strict structured-text (JSON) run configuration. Every physical quantity
// carries an explicit unit suffix in its key; unknown keys are rejected so
// typos fail loudly instead of silently falling back to defaults.
namespace hyperdyne {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TraceMode { Atomistic, OuSurrogate };

struct TraceConfig {
  TraceMode mode = TraceMode::Atomistic;
  double duration = 0.0;  // [s]
  double dt = 0.0;        // [s]
  double polarization = 0.0;
  std::vector<double> chemical_shifts; // [rad/s]
  int image_rings = 3;
  // OU-surrogate parameters
  double b_rms = 0.0; // [T]
  double tau_c = 0.0; // [s]
};

struct MeasureConfig {
  ProtocolConfig protocol;
  std::uint64_t n_runs = 1;
  bool statistical_only = false;       // no pi/2: stochastic-phase runs
  std::optional<AnalyticSignal> signal; // analytic carrier instead of b_coh
  bool use_trace_statistical = true;   // feed b_stat into the phase
};

struct SpectrumConfig {
  Window window = Window::Rectangular;
  int pad = 8;
  double f_lo = 0.0;          // search window [Hz]
  double f_hi = 0.0;
  double detection_threshold = 10.0;
};

struct BayesConfig {
  ModelPriors priors;
  SamplerConfig sampler;
  double g_min = 0.0;
  double threshold = 0.95;
};

struct SensitivityRunConfig {
  SensitivityModel model;
  std::vector<double> volumes;  // [m^3] detection-limit sweep
  double time_budget = 0.0;     // [s]
  double target_snr = 10.0;
  double bayesian_advantage = 1.0;
  PolarizationConfig polarization = reference_polarization_config();
  double buildup_duration = 2.0; // [s]
};

struct RunConfig {
  std::string scenario;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  std::optional<NVSensor> nv;
  std::optional<NuclearSpecies> species;
  std::optional<SimulationBox> box;
  std::optional<TraceConfig> trace;
  std::optional<MeasureConfig> measure;
  std::optional<SpectrumConfig> spectrum;
  std::optional<BayesConfig> bayes;
  std::optional<SensitivityRunConfig> sensitivity;

  std::string raw; // canonical file bytes, hashed into the manifest
};

// Parse + schema-validate. Throws ConfigError on any violation: bad JSON,
// unknown keys, wrong types, missing required fields, failed invariants.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::string& origin);

} // namespace hyperdyne
