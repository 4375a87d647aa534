#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyperdyne/pipeline.hpp"

namespace {

// One structured error record on stderr so callers can parse failures without
// scraping prose.
int fail(int code, const std::string& kind, const std::string& message) {
  nlohmann::json record{{"error", kind}, {"exit_code", code}, {"message", message}};
  std::cerr << record.dump() << '\n';
  return code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperdyne: nanoscale-NMR lock-in simulation and analysis pipeline"};

  std::string config_path;
  std::string stage_str = "all";
  std::string format_str = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 0;

  app.add_option("--config", config_path, "run configuration file (JSON)")
      ->required();
  app.add_option("--stage", stage_str,
                 "simulate | measure | analyze-fft | analyze-bayes | "
                 "sensitivity | all");
  app.add_option("--seed", seed, "master seed override");
  app.add_option("--out", out_dir, "output directory override");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_option("--format", format_str, "artifact format: csv | binary");

  CLI11_PARSE(app, argc, argv);

  try {
    hyperdyne::PipelineOptions options;
    options.stage = hyperdyne::parse_stage(stage_str);
    if (format_str == "csv") {
      options.format = hyperdyne::ArtifactFormat::Csv;
    } else if (format_str == "binary") {
      options.format = hyperdyne::ArtifactFormat::Binary;
    } else {
      throw hyperdyne::ConfigError("unknown format '" + format_str +
                                   "' (expected csv or binary)");
    }
    options.seed_override = seed;
    if (out_dir) options.out_override = std::filesystem::path(*out_dir);
    options.threads = threads;

    const auto config = hyperdyne::load_run_config(config_path);
    const auto bundle = hyperdyne::run_pipeline(config, options);

    std::cout << "scenario = " << config.scenario << '\n'
              << "config_hash = " << bundle.config_hash << '\n'
              << "artifacts = " << bundle.artifacts.size() << '\n'
              << "wall_seconds = " << bundle.wall_seconds << '\n';
    return 0;
  } catch (const hyperdyne::ConfigError& e) {
    return fail(hyperdyne::kExitSchema, "schema", e.what());
  } catch (const hyperdyne::MissingArtifactError& e) {
    return fail(hyperdyne::kExitMissingArtifact, "missing_artifact", e.what());
  } catch (const hyperdyne::NumericalError& e) {
    return fail(hyperdyne::kExitNumerical, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}
