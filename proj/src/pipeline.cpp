#include "hyperdyne/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "hyperdyne/constants.hpp"
#include "hyperdyne/io.hpp"
#include "hyperdyne/rng.hpp"

namespace hyperdyne {

namespace fs = std::filesystem;

Stage parse_stage(const std::string& name) {
  if (name == "simulate") return Stage::Simulate;
  if (name == "measure") return Stage::Measure;
  if (name == "analyze-fft") return Stage::AnalyzeFft;
  if (name == "analyze-bayes") return Stage::AnalyzeBayes;
  if (name == "sensitivity") return Stage::Sensitivity;
  if (name == "all") return Stage::All;
  throw ConfigError("unknown stage '" + name + "'");
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Simulate: return "simulate";
    case Stage::Measure: return "measure";
    case Stage::AnalyzeFft: return "analyze-fft";
    case Stage::AnalyzeBayes: return "analyze-bayes";
    case Stage::Sensitivity: return "sensitivity";
    case Stage::All: return "all";
  }
  return "?";
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& f) {
  if (n == 0) return;
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
          f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

// RNG stream ids hanging off the master seed (photon streams 0x10 + run live
// inside protocol.cpp)
constexpr std::uint64_t kStreamEnsemble = 0x1;
constexpr std::uint64_t kStreamChains = 0x2000;
constexpr std::uint64_t kStreamRunTrace = 0xA000; // + run index

struct StageContext {
  const RunConfig& cfg;
  std::uint64_t seed;
  fs::path out;
  int threads;
  ArtifactFormat format;
  std::vector<fs::path>* artifacts;
};

void note(StageContext& ctx, const fs::path& path) {
  ctx.artifacts->push_back(path);
}

void check_finite(const std::vector<double>& values, const std::string& what) {
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError(what + ": non-finite value");
}

fs::path trace_path(const StageContext& ctx) { return ctx.out / "trace.hdyn"; }
fs::path averaged_path(const StageContext& ctx) { return ctx.out / "averaged.csv"; }
fs::path record_path(const StageContext& ctx, std::uint64_t run) {
  char name[32];
  std::snprintf(name, sizeof(name), "record_%04llu.csv",
                static_cast<unsigned long long>(run));
  return ctx.out / "records" / name;
}

FieldTrace build_trace(const StageContext& ctx) {
  const auto& tc = *ctx.cfg.trace;
  if (tc.mode == TraceMode::OuSurrogate)
    return ou_surrogate_trace(tc.b_rms, tc.tau_c, tc.duration, tc.dt,
                              derive_seed(ctx.seed, kStreamEnsemble));
  const auto ensemble =
      init_ensemble(*ctx.cfg.box, *ctx.cfg.species, tc.polarization,
                    derive_seed(ctx.seed, kStreamEnsemble));
  TraceParams params{tc.duration, tc.dt, tc.polarization, tc.chemical_shifts,
                     tc.image_rings};
  return field_trace(ensemble, *ctx.cfg.nv, params);
}

void stage_simulate(StageContext& ctx) {
  if (!ctx.cfg.trace)
    throw ConfigError("stage simulate requires the trace section");
  const auto trace = build_trace(ctx);
  check_finite(trace.b_stat, "trace.b_stat");
  check_finite(trace.b_coh, "trace.b_coh");
  io::save_trace(trace, trace_path(ctx));
  note(ctx, trace_path(ctx));
  if (ctx.format == ArtifactFormat::Csv) {
    io::export_trace_csv(trace, ctx.out / "trace.csv");
    note(ctx, ctx.out / "trace.csv");
  }
}

// per-run statistical field: an independent OU realization per run when the
// trace section is the surrogate, otherwise the shared atomistic trace
FieldTrace per_run_trace(const StageContext& ctx, std::uint64_t run,
                         const FieldTrace* shared) {
  const auto& tc = *ctx.cfg.trace;
  if (tc.mode == TraceMode::OuSurrogate)
    return ou_surrogate_trace(tc.b_rms, tc.tau_c, tc.duration, tc.dt,
                              derive_seed(ctx.seed, kStreamRunTrace + run));
  return *shared;
}

void stage_measure(StageContext& ctx) {
  if (!ctx.cfg.measure)
    throw ConfigError("stage measure requires the measure section");
  const auto& mc = *ctx.cfg.measure;
  const auto& nv = *ctx.cfg.nv;

  const bool needs_trace =
      mc.statistical_only || !mc.signal ||
      (mc.use_trace_statistical && ctx.cfg.trace.has_value());
  FieldTrace shared;
  if (needs_trace) {
    if (!ctx.cfg.trace)
      throw ConfigError("measure without a signal needs the trace section");
    if (ctx.cfg.trace->mode == TraceMode::Atomistic) {
      if (!fs::exists(trace_path(ctx)))
        throw MissingArtifactError("measure: missing upstream artifact " +
                                   trace_path(ctx).string() +
                                   " (run the simulate stage first)");
      shared = io::load_trace(trace_path(ctx));
    }
  }

  fs::create_directories(ctx.out / "records");
  std::vector<PhotonRecord> records(mc.n_runs);
  parallel_for(mc.n_runs, ctx.threads, [&](std::size_t r) {
    const auto run = static_cast<std::uint64_t>(r);
    if (mc.statistical_only) {
      const auto tr = per_run_trace(ctx, run, &shared);
      records[r] = simulate_statistical_qdyne(tr, nv, mc.protocol, ctx.seed, run);
    } else if (mc.signal) {
      if (mc.use_trace_statistical && ctx.cfg.trace) {
        const auto tr = per_run_trace(ctx, run, &shared);
        records[r] =
            simulate_mz_qdyne(*mc.signal, nv, mc.protocol, ctx.seed, run, &tr);
      } else {
        records[r] = simulate_mz_qdyne(*mc.signal, nv, mc.protocol, ctx.seed, run);
      }
    } else {
      const auto tr = per_run_trace(ctx, run, &shared);
      records[r] = simulate_mz_qdyne(tr, nv, mc.protocol, ctx.seed, run);
    }
    check_finite(records[r].probabilities, "record probabilities");
  });

  for (std::uint64_t r = 0; r < mc.n_runs; ++r) {
    io::save_photon_record(records[r], record_path(ctx, r));
    note(ctx, record_path(ctx, r));
  }
  const auto averaged = average_runs(records);
  check_finite(averaged.mean, "averaged signal");
  io::export_averaged_csv(averaged, averaged_path(ctx));
  note(ctx, averaged_path(ctx));
}

AveragedSignal load_averaged(const fs::path& path, std::uint64_t n_runs) {
  if (!fs::exists(path))
    throw MissingArtifactError("analyze-fft: missing upstream artifact " +
                               path.string() + " (run the measure stage first)");
  const auto text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line); // header
  AveragedSignal avg;
  avg.n_runs = n_runs;
  double prev_t = 0.0, t = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double mean = 0.0, variance = 0.0;
    unsigned long long index = 0;
    if (std::sscanf(line.c_str(), "%llu,%lf,%lf,%lf", &index, &t, &mean,
                    &variance) != 4)
      throw MissingArtifactError("analyze-fft: corrupt averaged signal file " +
                                 path.string());
    avg.mean.push_back(mean);
    avg.variance.push_back(variance);
    if (avg.mean.size() == 2) avg.t_l = t - prev_t;
    prev_t = t;
  }
  if (avg.mean.size() < 8)
    throw MissingArtifactError("analyze-fft: averaged signal too short in " +
                               path.string());
  return avg;
}

void stage_analyze_fft(StageContext& ctx) {
  if (!ctx.cfg.spectrum)
    throw ConfigError("stage analyze-fft requires the spectrum section");
  const auto& sc = *ctx.cfg.spectrum;
  const std::uint64_t n_runs = ctx.cfg.measure ? ctx.cfg.measure->n_runs : 1;
  const auto averaged = load_averaged(averaged_path(ctx), n_runs);
  const auto spectrum = power_spectrum(averaged, sc.window, sc.pad);
  check_finite(spectrum.power, "spectrum");
  io::export_spectrum_csv(spectrum, ctx.out / "spectrum.csv");
  note(ctx, ctx.out / "spectrum.csv");

  const auto peak = peak_metrics(spectrum, sc.f_lo, sc.f_hi);
  io::export_peak_report(peak, ctx.out / "peak.txt");
  note(ctx, ctx.out / "peak.txt");

  const auto hits = detect(spectrum, sc.detection_threshold, sc.f_lo, sc.f_hi);
  std::vector<std::pair<double, double>> rows;
  for (const auto& h : hits) rows.emplace_back(h.frequency, h.snr);
  io::export_curve_csv(rows, "frequency_hz,snr", ctx.out / "detections.csv");
  note(ctx, ctx.out / "detections.csv");
}

void stage_analyze_bayes(StageContext& ctx) {
  if (!ctx.cfg.bayes)
    throw ConfigError("stage analyze-bayes requires the bayes section");
  if (!ctx.cfg.measure || !ctx.cfg.nv)
    throw ConfigError("stage analyze-bayes requires measure and nv sections");
  const auto path = record_path(ctx, 0);
  if (!fs::exists(path))
    throw MissingArtifactError("analyze-bayes: missing upstream artifact " +
                               path.string() + " (run the measure stage first)");
  const auto record = io::load_photon_record(path);
  if (record.counts.empty())
    throw MissingArtifactError(
        "analyze-bayes: record has no sampled counts (analytic readout?)");

  const auto& bc = *ctx.cfg.bayes;
  PGM model;
  model.priors = bc.priors;
  model.p_bright = ctx.cfg.nv->p_bright;
  model.p_dark = ctx.cfg.nv->p_dark;
  model.readout = record.config.readout;
  model.scale = static_cast<double>(record.config.n_nv);
  model.t_l = record.config.t_l;
  model.n_m = record.config.n_m;

  auto sampler = bc.sampler;
  sampler.seed = derive_seed(ctx.seed, kStreamChains);
  const auto samples = sample_posterior(model, record, sampler);
  const auto summary = summarize_and_decide(samples, bc.priors.delta_lo,
                                            bc.priors.delta_hi, bc.g_min,
                                            bc.threshold);
  if (!std::isfinite(summary.mean.g) || !std::isfinite(summary.mean.delta))
    throw NumericalError("analyze-bayes: non-finite posterior summary");

  io::export_posterior_csv(samples, ctx.out / "posterior.csv");
  note(ctx, ctx.out / "posterior.csv");
  io::export_posterior_summary(summary, samples, ctx.out / "posterior_summary.txt");
  note(ctx, ctx.out / "posterior_summary.txt");
}

void stage_sensitivity(StageContext& ctx) {
  if (!ctx.cfg.sensitivity)
    throw ConfigError("stage sensitivity requires the sensitivity section");
  const auto& sc = *ctx.cfg.sensitivity;

  const double snr = snr_estimate(sc.model);
  const auto rt = required_time(sc.model, sc.target_snr);
  if (!std::isfinite(snr)) throw NumericalError("sensitivity: non-finite SNR");
  std::ostringstream os;
  os.precision(17);
  os << "snr = " << snr << '\n'
     << "target_snr = " << sc.target_snr << '\n'
     << "required_time_s = " << rt.time << '\n'
     << "regime = " << (rt.regime == SnrRegime::Coherent ? "coherent" : "averaging")
     << '\n'
     << "crossover_tau_s = " << rt.crossover_tau << '\n'
     << "reachable = " << (rt.reachable ? 1 : 0) << '\n';
  io::write_file_atomic(ctx.out / "sensitivity.txt", os.str());
  note(ctx, ctx.out / "sensitivity.txt");

  const auto traj = polarization_buildup(sc.polarization, sc.buildup_duration);
  check_finite(traj.average, "polarization buildup");
  std::ostringstream pb;
  pb.precision(17);
  pb << "time_s,shell,bulk,average\n";
  for (std::size_t i = 0; i < traj.time.size(); ++i)
    pb << traj.time[i] << ',' << traj.shell[i] << ',' << traj.bulk[i] << ','
       << traj.average[i] << '\n';
  io::write_file_atomic(ctx.out / "buildup.csv", pb.str());
  note(ctx, ctx.out / "buildup.csv");

  if (!sc.volumes.empty()) {
    if (!(sc.time_budget > 0.0))
      throw ConfigError("sensitivity.volumes_m3 needs time_budget_s > 0");
    const auto curve = detection_limit_curve(sc.volumes, sc.time_budget,
                                             sc.target_snr, sc.model,
                                             sc.bayesian_advantage);
    std::vector<std::pair<double, double>> rows;
    for (const auto& p : curve)
      rows.emplace_back(p.volume,
                        p.min_concentration / constants::per_molar);
    io::export_curve_csv(rows, "volume_m3,min_concentration_molar",
                         ctx.out / "detection_limit.csv");
    note(ctx, ctx.out / "detection_limit.csv");
  }
}

} // namespace

ResultBundle run_pipeline(const RunConfig& config, const PipelineOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();

  ResultBundle bundle;
  bundle.config_hash = io::fnv1a_hex(config.raw);

  const fs::path out = options.out_override.value_or(config.output_dir);
  const std::uint64_t seed = options.seed_override.value_or(config.seed);
  fs::create_directories(out);

  StageContext ctx{config, seed,   out, options.threads,
                   options.format, &bundle.artifacts};

  const auto want = [&](Stage s) {
    return options.stage == s || options.stage == Stage::All;
  };
  // stage = all silently skips stages whose sections are absent
  const auto have_section = [&](Stage s) {
    switch (s) {
      case Stage::Simulate: return config.trace.has_value();
      case Stage::Measure: return config.measure.has_value();
      case Stage::AnalyzeFft: return config.spectrum.has_value();
      case Stage::AnalyzeBayes: return config.bayes.has_value();
      case Stage::Sensitivity: return config.sensitivity.has_value();
      default: return false;
    }
  };
  const auto run_stage = [&](Stage s, auto&& fn) {
    if (!want(s)) return;
    if (options.stage == Stage::All && !have_section(s)) return;
    fn(ctx);
  };

  run_stage(Stage::Simulate, stage_simulate);
  run_stage(Stage::Measure, stage_measure);
  run_stage(Stage::AnalyzeFft, stage_analyze_fft);
  run_stage(Stage::AnalyzeBayes, stage_analyze_bayes);
  run_stage(Stage::Sensitivity, stage_sensitivity);

  // deterministic manifest (wall time goes to a separate, unlisted file so
  // identical runs stay bit-identical)
  std::ostringstream mf;
  mf << "scenario = " << config.scenario << '\n'
     << "config_hash = " << bundle.config_hash << '\n'
     << "seed = " << seed << '\n'
     << "stage = " << stage_name(options.stage) << '\n';
  for (const auto& a : bundle.artifacts)
    mf << "artifact = " << fs::relative(a, out).generic_string() << '\n';
  io::write_file_atomic(out / "manifest.txt", mf.str());

  bundle.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream ri;
  ri << "wall_seconds = " << bundle.wall_seconds << '\n';
  io::write_file_atomic(out / "runinfo.txt", ri.str());
  return bundle;
}

} // namespace hyperdyne
