#include "hyperdyne/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hyperdyne::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "trace container assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& offset) {
  if (offset + sizeof(T) > in.size())
    throw std::runtime_error("trace file truncated");
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

} // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_trace(const FieldTrace& trace, const fs::path& path) {
  std::string out;
  out.reserve(28 + 16 * trace.size());
  out.append(kTraceMagic, 4);
  put<std::uint32_t>(out, kTraceVersion);
  put<double>(out, trace.dt);
  put<std::uint64_t>(out, trace.size());
  put<std::uint64_t>(out, trace.seed);
  for (double v : trace.b_stat) put<double>(out, v);
  for (double v : trace.b_coh) put<double>(out, v);
  write_file_atomic(path, out);
}

FieldTrace load_trace(const fs::path& path) {
  const std::string in = read_file(path);
  if (in.size() < 4 || std::memcmp(in.data(), kTraceMagic, 4) != 0)
    throw std::runtime_error("bad trace magic in " + path.string());
  std::size_t off = 4;
  const auto version = take<std::uint32_t>(in, off);
  if (version != kTraceVersion)
    throw std::runtime_error("unsupported trace version " +
                             std::to_string(version) + " in " + path.string());
  FieldTrace trace;
  trace.dt = take<double>(in, off);
  const auto n = take<std::uint64_t>(in, off);
  trace.seed = take<std::uint64_t>(in, off);
  trace.b_stat.resize(n);
  trace.b_coh.resize(n);
  for (auto& v : trace.b_stat) v = take<double>(in, off);
  for (auto& v : trace.b_coh) v = take<double>(in, off);
  return trace;
}

void export_trace_csv(const FieldTrace& trace, const fs::path& path) {
  std::string out = "time_s,b_stat_t,b_coh_t\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += format_double(static_cast<double>(i) * trace.dt);
    out += ',';
    out += format_double(trace.b_stat[i]);
    out += ',';
    out += format_double(trace.b_coh[i]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

namespace {

const char* readout_name(ReadoutMode mode) {
  switch (mode) {
    case ReadoutMode::Bernoulli: return "bernoulli";
    case ReadoutMode::Poisson: return "poisson";
    case ReadoutMode::Analytic: return "analytic";
  }
  return "unknown";
}

ReadoutMode readout_from_name(const std::string& name) {
  if (name == "bernoulli") return ReadoutMode::Bernoulli;
  if (name == "poisson") return ReadoutMode::Poisson;
  if (name == "analytic") return ReadoutMode::Analytic;
  throw std::runtime_error("unknown readout mode: " + name);
}

} // namespace

void save_photon_record(const PhotonRecord& record, const fs::path& path) {
  std::string out = "measurement_index,time_s,count,probability\n";
  const std::size_t n = std::max(record.counts.size(), record.probabilities.size());
  for (std::size_t j = 0; j < n; ++j) {
    out += std::to_string(j);
    out += ',';
    out += format_double(static_cast<double>(j) * record.config.t_l);
    out += ',';
    out += j < record.counts.size() ? std::to_string(record.counts[j]) : "";
    out += ',';
    out += j < record.probabilities.size()
               ? format_double(record.probabilities[j])
               : "";
    out += '\n';
  }
  write_file_atomic(path, out);

  std::ostringstream meta;
  meta.precision(17);
  meta << "tau_m_s = " << record.config.tau_m << '\n'
       << "t_l_s = " << record.config.t_l << '\n'
       << "n_m = " << record.config.n_m << '\n'
       << "n_nv = " << record.config.n_nv << '\n'
       << "readout = " << readout_name(record.config.readout) << '\n'
       << "k_rad_per_s = " << record.config.k << '\n'
       << "filter_center_rad_per_s = " << record.config.filter_center << '\n'
       << "literal_eq1 = " << (record.config.literal_eq1 ? 1 : 0) << '\n'
       << "run_index = " << record.run_index << '\n'
       << "seed = " << record.seed << '\n';
  write_file_atomic(path.string() + ".meta", meta.str());
}

PhotonRecord load_photon_record(const fs::path& path) {
  PhotonRecord rec;

  // sidecar first: it carries the config
  std::istringstream meta(read_file(path.string() + ".meta"));
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    if (key == "tau_m_s") rec.config.tau_m = std::stod(value);
    else if (key == "t_l_s") rec.config.t_l = std::stod(value);
    else if (key == "n_m") rec.config.n_m = std::stoull(value);
    else if (key == "n_nv") rec.config.n_nv = std::stoull(value);
    else if (key == "readout") rec.config.readout = readout_from_name(value);
    else if (key == "k_rad_per_s") rec.config.k = std::stod(value);
    else if (key == "filter_center_rad_per_s") rec.config.filter_center = std::stod(value);
    else if (key == "literal_eq1") rec.config.literal_eq1 = value == "1";
    else if (key == "run_index") rec.run_index = std::stoull(value);
    else if (key == "seed") rec.seed = std::stoull(value);
  }

  std::istringstream csv(read_file(path));
  std::getline(csv, line); // header
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string idx, t, count, prob;
    std::getline(row, idx, ',');
    std::getline(row, t, ',');
    std::getline(row, count, ',');
    std::getline(row, prob, ',');
    if (!count.empty()) rec.counts.push_back(std::stoull(count));
    if (!prob.empty()) rec.probabilities.push_back(std::stod(prob));
  }
  return rec;
}

void export_averaged_csv(const AveragedSignal& signal, const fs::path& path) {
  std::string out = "measurement_index,time_s,mean,variance\n";
  for (std::size_t j = 0; j < signal.mean.size(); ++j) {
    out += std::to_string(j);
    out += ',';
    out += format_double(static_cast<double>(j) * signal.t_l);
    out += ',';
    out += format_double(signal.mean[j]);
    out += ',';
    out += format_double(signal.variance[j]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

void export_spectrum_csv(const Spectrum& spectrum, const fs::path& path) {
  std::string out = "frequency_hz,power\n";
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    out += format_double(spectrum.frequency[i]);
    out += ',';
    out += format_double(spectrum.power[i]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

void export_peak_report(const PeakReport& report, const fs::path& path) {
  std::ostringstream os;
  os.precision(17);
  os << "peak_frequency_hz = " << report.frequency << '\n'
     << "snr = " << report.snr << '\n'
     << "fwhm_hz = " << report.fwhm << '\n'
     << "noise_floor = " << report.noise_floor << '\n'
     << "peak_power = " << report.peak_power << '\n';
  write_file_atomic(path, os.str());
}

void export_posterior_csv(const PosteriorSamples& samples, const fs::path& path) {
  std::string out = "chain,step,g,delta,phi\n";
  for (std::size_t c = 0; c < samples.g.size(); ++c)
    for (std::size_t i = 0; i < samples.g[c].size(); ++i) {
      out += std::to_string(c);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += format_double(samples.g[c][i]);
      out += ',';
      out += format_double(samples.delta[c][i]);
      out += ',';
      out += format_double(samples.phi[c][i]);
      out += '\n';
    }
  write_file_atomic(path, out);
}

void export_posterior_summary(const PosteriorSummary& summary,
                              const PosteriorSamples& samples,
                              const fs::path& path) {
  const auto& diag = samples.diagnostics;
  std::ostringstream os;
  os.precision(17);
  os << "g_mean = " << summary.mean.g << '\n'
     << "g_median = " << summary.median.g << '\n'
     << "g_ci95 = [" << summary.g_ci95[0] << ", " << summary.g_ci95[1] << "]\n"
     << "delta_mean_rad_per_s = " << summary.mean.delta << '\n'
     << "delta_median_rad_per_s = " << summary.median.delta << '\n'
     << "delta_ci95_rad_per_s = [" << summary.delta_ci95[0] << ", "
     << summary.delta_ci95[1] << "]\n"
     << "phi_mean_rad = " << summary.mean.phi << '\n'
     << "phi_ci95_rad = [" << summary.phi_ci95[0] << ", " << summary.phi_ci95[1]
     << "]\n"
     << "detection_probability = " << summary.detection_probability << '\n'
     << "detected = " << (summary.detected ? 1 : 0) << '\n'
     << "converged = " << (summary.converged ? 1 : 0) << '\n'
     << "r_hat_g = " << diag.r_hat[0] << '\n'
     << "r_hat_delta = " << diag.r_hat[1] << '\n'
     << "r_hat_phi = " << diag.r_hat[2] << '\n'
     << "ess_g = " << diag.ess[0] << '\n'
     << "ess_delta = " << diag.ess[1] << '\n'
     << "ess_phi = " << diag.ess[2] << '\n'
     << "divergences = " << diag.divergences << '\n';
  if (!summary.warning.empty()) os << "warning = " << summary.warning << '\n';
  write_file_atomic(path, os.str());
}

void export_curve_csv(const std::vector<std::pair<double, double>>& points,
                      const std::string& header, const fs::path& path) {
  std::string out = header + "\n";
  for (const auto& [x, y] : points) {
    out += format_double(x);
    out += ',';
    out += format_double(y);
    out += '\n';
  }
  write_file_atomic(path, out);
}

} // namespace hyperdyne::io
