#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hyperdyne/config.hpp"

// Stage orchestration: executes the simulate -> measure -> analyze ->
// sensitivity chain on a RunConfig, persisting every intermediate artifact and
// an index manifest. All errors map onto stable process exit codes.
namespace hyperdyne {

// exit code 3: a stage was requested without its upstream artifacts
struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// exit code 4: non-finite or otherwise invalid numerical results
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitSchema = 2;
inline constexpr int kExitMissingArtifact = 3;
inline constexpr int kExitNumerical = 4;

enum class Stage { Simulate, Measure, AnalyzeFft, AnalyzeBayes, Sensitivity, All };

// "simulate" | "measure" | "analyze-fft" | "analyze-bayes" | "sensitivity" |
// "all"; throws ConfigError on anything else.
Stage parse_stage(const std::string& name);
std::string stage_name(Stage stage);

enum class ArtifactFormat { Csv, Binary };

struct PipelineOptions {
  Stage stage = Stage::All;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::filesystem::path> out_override;
  int threads = 0; // 0 = hardware concurrency
  ArtifactFormat format = ArtifactFormat::Csv;
};

struct ResultBundle {
  std::string config_hash;
  std::vector<std::filesystem::path> artifacts;
  double wall_seconds = 0.0;
};

// Runs the requested stage(s); each stage is skipped when its config section
// is absent (stage = all) or raises ConfigError when requested explicitly
// without its section. Identical (config, seed) inputs reproduce bit-identical
// artifacts regardless of the thread count.
ResultBundle run_pipeline(const RunConfig& config, const PipelineOptions& options);

// Deterministic worker pool: f(i) for i in [0, n), assignment-independent
// results (callers write into preallocated slots).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f);

} // namespace hyperdyne
