#include "hyperdyne/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hyperdyne {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ConfigError(origin + ": " + what);
}

void require_keys(const json& obj, const std::string& origin,
                  const std::string& section,
                  const std::set<std::string>& required,
                  const std::set<std::string>& optional = {}) {
  if (!obj.is_object()) fail(origin, section + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!required.count(key) && !optional.count(key))
      fail(origin, section + ": unknown key '" + key + "'");
  }
  for (const auto& key : required)
    if (!obj.contains(key))
      fail(origin, section + ": missing required key '" + key + "'");
}

double get_number(const json& obj, const std::string& origin,
                  const std::string& section, const std::string& key) {
  const auto& v = obj.at(key);
  if (!v.is_number()) fail(origin, section + "." + key + " must be a number");
  return v.get<double>();
}

double get_number_or(const json& obj, const std::string& origin,
                     const std::string& section, const std::string& key,
                     double fallback) {
  if (!obj.contains(key)) return fallback;
  return get_number(obj, origin, section, key);
}

std::uint64_t get_u64(const json& obj, const std::string& origin,
                      const std::string& section, const std::string& key) {
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    fail(origin, section + "." + key + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& origin,
                       const std::string& section, const std::string& key) {
  const auto& v = obj.at(key);
  if (!v.is_string()) fail(origin, section + "." + key + " must be a string");
  return v.get<std::string>();
}

std::vector<double> get_number_array(const json& obj, const std::string& origin,
                                     const std::string& section,
                                     const std::string& key) {
  const auto& v = obj.at(key);
  if (!v.is_array()) fail(origin, section + "." + key + " must be an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number())
      fail(origin, section + "." + key + " entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

NVSensor parse_nv(const json& obj, const std::string& origin) {
  require_keys(obj, origin, "nv",
               {"depth_m", "t2_nv_s", "p_bright", "p_dark"}, {"axis"});
  NVSensor nv;
  nv.depth = get_number(obj, origin, "nv", "depth_m");
  nv.t2_nv = get_number(obj, origin, "nv", "t2_nv_s");
  nv.p_bright = get_number(obj, origin, "nv", "p_bright");
  nv.p_dark = get_number(obj, origin, "nv", "p_dark");
  if (obj.contains("axis")) {
    const auto axis = get_number_array(obj, origin, "nv", "axis");
    if (axis.size() != 3) fail(origin, "nv.axis must have 3 components");
    nv.axis = {axis[0], axis[1], axis[2]};
  }
  try {
    nv.validate();
  } catch (const std::exception& e) {
    fail(origin, std::string("nv: ") + e.what());
  }
  return nv;
}

NuclearSpecies parse_species(const json& obj, const std::string& origin) {
  require_keys(obj, origin, "species",
               {"gamma_rad_per_s_per_t", "density_per_m3", "diffusion_m2_per_s",
                "t1_s", "t2_s"});
  NuclearSpecies sp;
  sp.gamma = get_number(obj, origin, "species", "gamma_rad_per_s_per_t");
  sp.density = get_number(obj, origin, "species", "density_per_m3");
  sp.diffusion = get_number(obj, origin, "species", "diffusion_m2_per_s");
  sp.t1 = get_number(obj, origin, "species", "t1_s");
  sp.t2 = get_number(obj, origin, "species", "t2_s");
  try {
    sp.validate();
  } catch (const std::exception& e) {
    fail(origin, std::string("species: ") + e.what());
  }
  return sp;
}

SimulationBox parse_box(const json& obj, const std::string& origin) {
  require_keys(obj, origin, "box", {"lx_m", "ly_m", "lz_m"}, {"top_boundary"});
  SimulationBox box;
  box.lx = get_number(obj, origin, "box", "lx_m");
  box.ly = get_number(obj, origin, "box", "ly_m");
  box.lz = get_number(obj, origin, "box", "lz_m");
  if (obj.contains("top_boundary")) {
    const auto s = get_string(obj, origin, "box", "top_boundary");
    if (s == "reflect")
      box.top = TopBoundary::Reflect;
    else if (s == "reservoir")
      box.top = TopBoundary::Reservoir;
    else
      fail(origin, "box.top_boundary must be 'reflect' or 'reservoir'");
  }
  try {
    box.validate();
  } catch (const std::exception& e) {
    fail(origin, std::string("box: ") + e.what());
  }
  return box;
}

TraceConfig parse_trace(const json& obj, const std::string& origin) {
  require_keys(obj, origin, "trace", {"mode", "duration_s", "dt_s"},
               {"polarization", "chemical_shifts_rad_per_s", "image_rings",
                "b_rms_t", "tau_c_s"});
  TraceConfig tc;
  const auto mode = get_string(obj, origin, "trace", "mode");
  if (mode == "atomistic")
    tc.mode = TraceMode::Atomistic;
  else if (mode == "ou")
    tc.mode = TraceMode::OuSurrogate;
  else
    fail(origin, "trace.mode must be 'atomistic' or 'ou'");
  tc.duration = get_number(obj, origin, "trace", "duration_s");
  tc.dt = get_number(obj, origin, "trace", "dt_s");
  tc.polarization = get_number_or(obj, origin, "trace", "polarization", 0.0);
  if (obj.contains("chemical_shifts_rad_per_s"))
    tc.chemical_shifts =
        get_number_array(obj, origin, "trace", "chemical_shifts_rad_per_s");
  if (tc.chemical_shifts.empty()) tc.chemical_shifts = {0.0};
  if (obj.contains("image_rings")) {
    tc.image_rings = static_cast<int>(get_number(obj, origin, "trace", "image_rings"));
    if (tc.image_rings < 0) fail(origin, "trace.image_rings must be >= 0");
  }
  tc.b_rms = get_number_or(obj, origin, "trace", "b_rms_t", 0.0);
  tc.tau_c = get_number_or(obj, origin, "trace", "tau_c_s", 0.0);
  if (!(tc.duration > 0.0) || !(tc.dt > 0.0) || tc.duration < tc.dt)
    fail(origin, "trace: need duration_s >= dt_s > 0");
  if (tc.mode == TraceMode::OuSurrogate && (!(tc.b_rms > 0.0) || !(tc.tau_c > tc.dt)))
    fail(origin, "trace: ou mode needs b_rms_t > 0 and tau_c_s > dt_s");
  if (tc.polarization < 0.0 || tc.polarization > 1.0)
    fail(origin, "trace.polarization must lie in [0, 1]");
  return tc;
}

MeasureConfig parse_measure(const json& obj, const std::string& origin) {
  require_keys(obj, origin, "measure",
               {"tau_m_s", "t_l_s", "n_m", "n_nv", "readout"},
               {"n_runs", "statistical_only", "signal", "k_rad_per_s",
                "filter_center_rad_per_s", "literal_eq1",
                "use_trace_statistical"});
  MeasureConfig mc;
  auto& p = mc.protocol;
  p.tau_m = get_number(obj, origin, "measure", "tau_m_s");
  p.t_l = get_number(obj, origin, "measure", "t_l_s");
  p.n_m = get_u64(obj, origin, "measure", "n_m");
  p.n_nv = get_u64(obj, origin, "measure", "n_nv");
  const auto readout = get_string(obj, origin, "measure", "readout");
  if (readout == "bernoulli")
    p.readout = ReadoutMode::Bernoulli;
  else if (readout == "poisson")
    p.readout = ReadoutMode::Poisson;
  else if (readout == "analytic")
    p.readout = ReadoutMode::Analytic;
  else
    fail(origin, "measure.readout must be bernoulli | poisson | analytic");
  p.k = get_number_or(obj, origin, "measure", "k_rad_per_s", 0.0);
  p.filter_center =
      get_number_or(obj, origin, "measure", "filter_center_rad_per_s", 0.0);
  if (obj.contains("literal_eq1")) {
    if (!obj.at("literal_eq1").is_boolean())
      fail(origin, "measure.literal_eq1 must be a boolean");
    p.literal_eq1 = obj.at("literal_eq1").get<bool>();
  }
  if (obj.contains("n_runs")) mc.n_runs = get_u64(obj, origin, "measure", "n_runs");
  if (mc.n_runs < 1) fail(origin, "measure.n_runs must be >= 1");
  if (obj.contains("statistical_only")) {
    if (!obj.at("statistical_only").is_boolean())
      fail(origin, "measure.statistical_only must be a boolean");
    mc.statistical_only = obj.at("statistical_only").get<bool>();
  }
  if (obj.contains("use_trace_statistical")) {
    if (!obj.at("use_trace_statistical").is_boolean())
      fail(origin, "measure.use_trace_statistical must be a boolean");
    mc.use_trace_statistical = obj.at("use_trace_statistical").get<bool>();
  }
  if (obj.contains("signal")) {
    const auto& sig = obj.at("signal");
    require_keys(sig, origin, "measure.signal", {"g", "delta_rad_per_s"},
                 {"phi_rad", "t2_s"});
    AnalyticSignal s;
    s.g = get_number(sig, origin, "measure.signal", "g");
    s.delta = get_number(sig, origin, "measure.signal", "delta_rad_per_s");
    s.phi = get_number_or(sig, origin, "measure.signal", "phi_rad", 0.0);
    s.t2 = get_number_or(sig, origin, "measure.signal", "t2_s", 0.0);
    mc.signal = s;
  }
  try {
    p.validate();
  } catch (const std::exception& e) {
    fail(origin, std::string("measure: ") + e.what());
  }
  return mc;
}

SpectrumConfig parse_spectrum(const json& obj, const std::string& origin) {
  require_keys(obj, origin, "spectrum", {"f_lo_hz", "f_hi_hz"},
               {"window", "pad", "detection_threshold"});
  SpectrumConfig sc;
  sc.f_lo = get_number(obj, origin, "spectrum", "f_lo_hz");
  sc.f_hi = get_number(obj, origin, "spectrum", "f_hi_hz");
  if (!(sc.f_lo < sc.f_hi)) fail(origin, "spectrum: need f_lo_hz < f_hi_hz");
  if (obj.contains("window")) {
    const auto w = get_string(obj, origin, "spectrum", "window");
    if (w == "rectangular")
      sc.window = Window::Rectangular;
    else if (w == "hann")
      sc.window = Window::Hann;
    else
      fail(origin, "spectrum.window must be 'rectangular' or 'hann'");
  }
  if (obj.contains("pad")) {
    sc.pad = static_cast<int>(get_number(obj, origin, "spectrum", "pad"));
    if (sc.pad < 1) fail(origin, "spectrum.pad must be >= 1");
  }
  sc.detection_threshold =
      get_number_or(obj, origin, "spectrum", "detection_threshold", 10.0);
  return sc;
}

BayesConfig parse_bayes(const json& obj, const std::string& origin) {
  require_keys(obj, origin, "bayes",
               {"g_mean", "g_std", "delta_lo_rad_per_s", "delta_hi_rad_per_s"},
               {"method", "chains", "steps", "burn_in", "g_min", "threshold",
                "leapfrog_steps"});
  BayesConfig bc;
  bc.priors.g_mean = get_number(obj, origin, "bayes", "g_mean");
  bc.priors.g_std = get_number(obj, origin, "bayes", "g_std");
  bc.priors.delta_lo = get_number(obj, origin, "bayes", "delta_lo_rad_per_s");
  bc.priors.delta_hi = get_number(obj, origin, "bayes", "delta_hi_rad_per_s");
  try {
    bc.priors.validate();
  } catch (const std::exception& e) {
    fail(origin, std::string("bayes: ") + e.what());
  }
  if (obj.contains("method")) {
    const auto m = get_string(obj, origin, "bayes", "method");
    if (m == "mh")
      bc.sampler.method = SamplerMethod::MH;
    else if (m == "hmc")
      bc.sampler.method = SamplerMethod::HMC;
    else
      fail(origin, "bayes.method must be 'mh' or 'hmc'");
  }
  if (obj.contains("chains")) {
    bc.sampler.chains = static_cast<int>(get_u64(obj, origin, "bayes", "chains"));
    if (bc.sampler.chains < 2) fail(origin, "bayes.chains must be >= 2");
  }
  if (obj.contains("steps"))
    bc.sampler.steps = static_cast<int>(get_u64(obj, origin, "bayes", "steps"));
  if (obj.contains("burn_in"))
    bc.sampler.burn_in = static_cast<int>(get_u64(obj, origin, "bayes", "burn_in"));
  if (obj.contains("leapfrog_steps"))
    bc.sampler.leapfrog_steps =
        static_cast<int>(get_u64(obj, origin, "bayes", "leapfrog_steps"));
  bc.g_min = get_number_or(obj, origin, "bayes", "g_min", 0.0);
  bc.threshold = get_number_or(obj, origin, "bayes", "threshold", 0.95);
  if (bc.threshold <= 0.0 || bc.threshold > 1.0)
    fail(origin, "bayes.threshold must lie in (0, 1]");
  return bc;
}

SensitivityRunConfig parse_sensitivity(const json& obj, const std::string& origin) {
  require_keys(
      obj, origin, "sensitivity",
      {"density_per_m3", "polarization", "volume_m3", "nv_density_per_m3",
       "tau_m_s", "t2_nv_s", "k_rad_per_s", "n_m", "calibration"},
      {"t_pol_s", "duty_overhead", "volumes_m3", "time_budget_s", "target_snr",
       "bayesian_advantage", "buildup_duration_s", "gamma_pol_per_s", "t1_s",
       "k_ex_per_s", "shell_fraction"});
  SensitivityRunConfig sc;
  auto& m = sc.model;
  m.density = get_number(obj, origin, "sensitivity", "density_per_m3");
  m.polarization = get_number(obj, origin, "sensitivity", "polarization");
  m.volume = get_number(obj, origin, "sensitivity", "volume_m3");
  m.nv_density = get_number(obj, origin, "sensitivity", "nv_density_per_m3");
  m.tau_m = get_number(obj, origin, "sensitivity", "tau_m_s");
  m.t2_nv = get_number(obj, origin, "sensitivity", "t2_nv_s");
  m.k = get_number(obj, origin, "sensitivity", "k_rad_per_s");
  m.n_m = get_number(obj, origin, "sensitivity", "n_m");
  m.n_nv = m.nv_count_from_volume();
  m.calibration = get_number(obj, origin, "sensitivity", "calibration");
  m.t_pol = get_number_or(obj, origin, "sensitivity", "t_pol_s", 0.0);
  m.duty_overhead = get_number_or(obj, origin, "sensitivity", "duty_overhead", 1.0);
  try {
    m.validate();
  } catch (const std::exception& e) {
    fail(origin, std::string("sensitivity: ") + e.what());
  }
  if (obj.contains("volumes_m3"))
    sc.volumes = get_number_array(obj, origin, "sensitivity", "volumes_m3");
  sc.time_budget = get_number_or(obj, origin, "sensitivity", "time_budget_s", 0.0);
  sc.target_snr = get_number_or(obj, origin, "sensitivity", "target_snr", 10.0);
  sc.bayesian_advantage =
      get_number_or(obj, origin, "sensitivity", "bayesian_advantage", 1.0);
  sc.polarization.gamma_pol = get_number_or(obj, origin, "sensitivity",
                                            "gamma_pol_per_s",
                                            sc.polarization.gamma_pol);
  sc.polarization.t1 =
      get_number_or(obj, origin, "sensitivity", "t1_s", sc.polarization.t1);
  sc.polarization.k_ex =
      get_number_or(obj, origin, "sensitivity", "k_ex_per_s", sc.polarization.k_ex);
  sc.polarization.shell_fraction = get_number_or(
      obj, origin, "sensitivity", "shell_fraction", sc.polarization.shell_fraction);
  try {
    sc.polarization.validate();
  } catch (const std::exception& e) {
    fail(origin, std::string("sensitivity polarization: ") + e.what());
  }
  sc.buildup_duration =
      get_number_or(obj, origin, "sensitivity", "buildup_duration_s", 2.0);
  if (!(sc.buildup_duration > 0.0))
    fail(origin, "sensitivity.buildup_duration_s must be > 0");
  return sc;
}

} // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const std::exception& e) {
    fail(origin, std::string("invalid JSON: ") + e.what());
  }
  require_keys(root, origin, "config", {"scenario", "seed", "output_dir"},
               {"nv", "species", "box", "trace", "measure", "spectrum", "bayes",
                "sensitivity"});

  RunConfig cfg;
  cfg.raw = text;
  cfg.scenario = get_string(root, origin, "config", "scenario");
  if (cfg.scenario.empty()) fail(origin, "scenario must be non-empty");
  cfg.seed = get_u64(root, origin, "config", "seed");
  cfg.output_dir = get_string(root, origin, "config", "output_dir");
  if (cfg.output_dir.empty()) fail(origin, "output_dir must be non-empty");

  if (root.contains("nv")) cfg.nv = parse_nv(root.at("nv"), origin);
  if (root.contains("species"))
    cfg.species = parse_species(root.at("species"), origin);
  if (root.contains("box")) cfg.box = parse_box(root.at("box"), origin);
  if (root.contains("trace")) cfg.trace = parse_trace(root.at("trace"), origin);
  if (root.contains("measure"))
    cfg.measure = parse_measure(root.at("measure"), origin);
  if (root.contains("spectrum"))
    cfg.spectrum = parse_spectrum(root.at("spectrum"), origin);
  if (root.contains("bayes")) cfg.bayes = parse_bayes(root.at("bayes"), origin);
  if (root.contains("sensitivity"))
    cfg.sensitivity = parse_sensitivity(root.at("sensitivity"), origin);

  // cross-section consistency
  if (cfg.trace && cfg.trace->mode == TraceMode::Atomistic &&
      (!cfg.box || !cfg.species || !cfg.nv))
    fail(origin, "trace.mode = atomistic requires nv, species and box sections");
  if (cfg.measure && !cfg.nv)
    fail(origin, "measure requires the nv section");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

} // namespace hyperdyne
