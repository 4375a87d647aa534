#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "hyperdyne/io.hpp"
#include "hyperdyne/rng.hpp"

using namespace hyperdyne;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    const auto tick = static_cast<std::uint64_t>(
        std::chrono::steady_clock::now().time_since_epoch().count());
    path = fs::temp_directory_path() /
           ("hyperdyne_test_" + std::to_string(Rng(tick).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

FieldTrace make_trace(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  FieldTrace tr;
  tr.dt = 6.6e-6;
  tr.seed = seed;
  tr.b_stat.resize(n);
  tr.b_coh.resize(n);
  for (auto& v : tr.b_stat) v = 1e-7 * rng.normal();
  for (auto& v : tr.b_coh) v = 1e-8 * rng.normal();
  return tr;
}

} // namespace

TEST_CASE("trace binary roundtrip is bit exact") {
  TempDir dir;
  const auto tr = make_trace(517, 99);
  const auto file = dir.path / "trace.hdyn";
  io::save_trace(tr, file);
  const auto back = io::load_trace(file);
  CHECK(back.dt == tr.dt);
  CHECK(back.seed == tr.seed);
  REQUIRE(back.b_stat.size() == tr.b_stat.size());
  REQUIRE(back.b_coh.size() == tr.b_coh.size());
  for (std::size_t i = 0; i < tr.b_stat.size(); ++i) {
    CHECK(back.b_stat[i] == tr.b_stat[i]);
    CHECK(back.b_coh[i] == tr.b_coh[i]);
  }
}

TEST_CASE("trace loader rejects corrupt containers") {
  TempDir dir;
  const auto tr = make_trace(64, 5);
  const auto file = dir.path / "trace.hdyn";
  io::save_trace(tr, file);

  // bad magic
  {
    auto bytes = io::read_file(file);
    bytes[0] = 'X';
    io::write_file_atomic(dir.path / "bad_magic.hdyn", bytes);
    CHECK_THROWS(io::load_trace(dir.path / "bad_magic.hdyn"));
  }
  // wrong version
  {
    auto bytes = io::read_file(file);
    bytes[4] = 9;
    io::write_file_atomic(dir.path / "bad_version.hdyn", bytes);
    CHECK_THROWS(io::load_trace(dir.path / "bad_version.hdyn"));
  }
  // truncated payload
  {
    auto bytes = io::read_file(file);
    bytes.resize(bytes.size() / 2);
    io::write_file_atomic(dir.path / "trunc.hdyn", bytes);
    CHECK_THROWS(io::load_trace(dir.path / "trunc.hdyn"));
  }
  // missing file
  CHECK_THROWS(io::load_trace(dir.path / "missing.hdyn"));
}

TEST_CASE("photon record roundtrip with metadata sidecar") {
  TempDir dir;
  PhotonRecord rec;
  rec.config.tau_m = 4.1e-6;
  rec.config.t_l = 6.6e-6;
  rec.config.n_m = 7;
  rec.config.n_nv = 300;
  rec.config.readout = ReadoutMode::Poisson;
  rec.run_index = 3;
  rec.seed = 42;
  rec.counts = {0, 5, 3, 11, 2, 0, 7};
  rec.probabilities = {0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07};

  const auto file = dir.path / "record.csv";
  io::save_photon_record(rec, file);
  CHECK(fs::exists(dir.path / "record.csv.meta"));

  const auto back = io::load_photon_record(file);
  CHECK(back.counts == rec.counts);
  REQUIRE(back.probabilities.size() == rec.probabilities.size());
  for (std::size_t i = 0; i < rec.probabilities.size(); ++i)
    CHECK(back.probabilities[i] == doctest::Approx(rec.probabilities[i]).epsilon(1e-12));
  CHECK(back.config.n_m == rec.config.n_m);
  CHECK(back.config.n_nv == rec.config.n_nv);
  CHECK(back.config.t_l == doctest::Approx(rec.config.t_l).epsilon(1e-12));
  CHECK(back.config.tau_m == doctest::Approx(rec.config.tau_m).epsilon(1e-12));
  CHECK(back.config.readout == ReadoutMode::Poisson);
  CHECK(back.run_index == rec.run_index);
  CHECK(back.seed == rec.seed);

  CHECK_THROWS(io::load_photon_record(dir.path / "absent.csv"));
}

TEST_CASE("csv exporters emit headers and one row per element") {
  TempDir dir;

  const auto tr = make_trace(10, 1);
  io::export_trace_csv(tr, dir.path / "trace.csv");
  const auto text = io::read_file(dir.path / "trace.csv");
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 11); // header + 10 rows
  CHECK(text.find("time_s") != std::string::npos);

  AveragedSignal avg;
  avg.mean = {0.1, 0.2, 0.3};
  avg.variance = {0.01, 0.01, 0.01};
  avg.n_runs = 5;
  avg.t_l = 6.6e-6;
  io::export_averaged_csv(avg, dir.path / "avg.csv");
  const auto avg_text = io::read_file(dir.path / "avg.csv");
  lines = 0;
  for (char c : avg_text) lines += c == '\n';
  CHECK(lines == 4);

  Spectrum spec;
  spec.frequency = {0.0, 10.0, 20.0};
  spec.power = {0.0, 1.0, 0.5};
  spec.t_rec = 0.1;
  io::export_spectrum_csv(spec, dir.path / "spec.csv");
  CHECK(io::read_file(dir.path / "spec.csv").find("frequency_hz") !=
        std::string::npos);

  PeakReport report{170.0, 12.5, 150.0, 0.01, 2.0};
  io::export_peak_report(report, dir.path / "peak.txt");
  const auto rep_text = io::read_file(dir.path / "peak.txt");
  CHECK(rep_text.find("snr") != std::string::npos);
  CHECK(rep_text.find("12.5") != std::string::npos);

  io::export_curve_csv({{1.0, 2.0}, {3.0, 4.0}}, "x,y", dir.path / "curve.csv");
  const auto curve_text = io::read_file(dir.path / "curve.csv");
  CHECK(curve_text.rfind("x,y", 0) == 0);
}

TEST_CASE("posterior exports") {
  TempDir dir;
  PosteriorSamples samples;
  samples.g = {{0.1, 0.2}, {0.3, 0.4}};
  samples.delta = {{10.0, 11.0}, {12.0, 13.0}};
  samples.phi = {{0.0, 0.1}, {0.2, 0.3}};
  io::export_posterior_csv(samples, dir.path / "post.csv");
  const auto text = io::read_file(dir.path / "post.csv");
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 5); // header + 4 draws
  CHECK(text.find("chain") != std::string::npos);

  PosteriorSummary summary;
  summary.mean = {0.25, 11.5, 0.15};
  summary.median = {0.25, 11.5, 0.15};
  summary.g_ci95 = {0.1, 0.4};
  summary.delta_ci95 = {10.0, 13.0};
  summary.phi_ci95 = {0.0, 0.3};
  summary.detection_probability = 0.5;
  summary.detected = true;
  io::export_posterior_summary(summary, samples, dir.path / "summary.txt");
  const auto sum_text = io::read_file(dir.path / "summary.txt");
  CHECK(sum_text.find("detected = 1") != std::string::npos);
  CHECK(sum_text.find("detection_probability = 0.5") != std::string::npos);
}

TEST_CASE("atomic write leaves no temp files and read_file errors cleanly") {
  TempDir dir;
  io::write_file_atomic(dir.path / "out.txt", "hello\n");
  CHECK(io::read_file(dir.path / "out.txt") == "hello\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++entries;
  CHECK(entries == 1);
  CHECK_THROWS(io::read_file(dir.path / "nope.txt"));
}

TEST_CASE("fnv1a hashes are stable and collision-visible") {
  // reference value of the 64-bit FNV-1a offset basis for the empty string
  CHECK(io::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(io::fnv1a_hex("a") != io::fnv1a_hex("b"));
  CHECK(io::fnv1a_hex("config") == io::fnv1a_hex("config"));
}
