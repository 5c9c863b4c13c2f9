#include "ulfspin/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <openssl/evp.h>

#include "ulfspin/io.hpp"
#include "ulfspin/presets.hpp"
#include "ulfspin/sabre.hpp"

namespace ulfspin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::size_t kMaxSamples = std::size_t{1} << 27;

const std::vector<std::string> kPreparations = {"sabre", "longitudinal"};
const std::vector<std::string> kObservables = {"substrate", "complex", "h2"};
const std::vector<std::string> kSequences = {"fafos", "cosy", "cosy-cycled", "pulse-acquire"};

double r12(double v) { return std::stod(format_real(v)); }

bool is_preset(const std::string& name) {
  const auto names = preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

void require_one_of(const std::string& key, const std::string& value, const std::vector<std::string>& allowed) {
  if (std::find(allowed.begin(), allowed.end(), value) == allowed.end())
    throw ValidationError(fmt::format("{} must be one of {}, got '{}'", key, fmt::join(allowed, " | "), value));
}

class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(fmt::format("{} must be an object", where_));
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& dst) {
    if (auto v = find(key)) {
      if (!v->is_number()) throw ValidationError(fmt::format("{} must be a number", name(key)));
      dst = v->get<double>();
    }
  }

  void count(const std::string& key, std::size_t& dst) {
    if (auto v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0)
        throw ValidationError(fmt::format("{} must be a nonnegative integer", name(key)));
      dst = v->get<std::size_t>();
    }
  }

  void integer(const std::string& key, int& dst) {
    if (auto v = find(key)) {
      if (!v->is_number_integer()) throw ValidationError(fmt::format("{} must be an integer", name(key)));
      dst = v->get<int>();
    }
  }

  void text(const std::string& key, std::string& dst) {
    if (auto v = find(key)) {
      if (!v->is_string()) throw ValidationError(fmt::format("{} must be a string", name(key)));
      dst = v->get<std::string>();
    }
  }

  void flag(const std::string& key, bool& dst) {
    if (auto v = find(key)) {
      if (!v->is_boolean()) throw ValidationError(fmt::format("{} must be true or false", name(key)));
      dst = v->get<bool>();
    }
  }

  std::string name(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ValidationError(fmt::format("unknown key '{}'", name(it.key())));
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void check_finite(const std::string& key, double v) {
  if (!std::isfinite(v)) throw ValidationError(fmt::format("{} must be finite", key));
}

void validate(const ExperimentConfig& c) {
  if (c.system.empty()) throw ValidationError("system must name a preset or a file");
  if (!(c.b0_tesla > 0.0) || !std::isfinite(c.b0_tesla)) throw ValidationError("b0_tesla must be > 0");
  if (!(c.bp_tesla >= 0.0) || !std::isfinite(c.bp_tesla)) throw ValidationError("bp_tesla must be >= 0");
  if (!(c.decohere_tol_hz >= 0.0) || !std::isfinite(c.decohere_tol_hz))
    throw ValidationError("decohere_tol_hz must be >= 0");
  require_one_of("preparation", c.preparation, kPreparations);
  require_one_of("observe", c.observe, kObservables);
  require_one_of("sequence", c.sequence, kSequences);
  if (c.preparation == "longitudinal" && c.observe != "substrate")
    throw ValidationError("observe applies to the sabre preparation only");
  if (c.preparation == "sabre" && !c.polarization.empty())
    throw ValidationError("polarization applies to the longitudinal preparation only");
  for (const auto& [label, p] : c.polarization)
    if (!std::isfinite(p) || std::abs(p) > 1.0)
      throw ValidationError(fmt::format("polarization of '{}' must lie in [-1, 1]", label));
  if (c.n_angles < 8 || c.n_angles > 4096) throw ValidationError("fafos.n_angles must lie in 8..4096");
  if (c.k_max < 1 || static_cast<std::size_t>(2 * c.k_max) >= c.n_angles)
    throw ValidationError("fafos.k_max must lie in 1..n_angles/2");
  c.grid.validate();
  if (c.grid.n1 > 65536) throw ValidationError("cosy.n1 must be <= 65536");
  check_finite("cosy.phases_deg", c.phases.phi1_deg);
  check_finite("cosy.phases_deg", c.phases.phi2_deg);
  check_finite("cosy.phases_deg", c.phases.rec_deg);
  const auto scheme = PhaseCycleScheme::named(c.scheme);
  check_finite("pulse_acquire.flip_deg", c.flip_deg);
  if (c.acquisition.n_points < 1 || c.acquisition.n_points > (std::size_t{1} << 20))
    throw ValidationError("acquisition.n_points must lie in 1..1048576");
  if (!(c.acquisition.dwell_s > 0.0) || !std::isfinite(c.acquisition.dwell_s))
    throw ValidationError("acquisition.dwell_s must be > 0");
  if (!(c.acquisition.broadening_hz >= 0.0) || !std::isfinite(c.acquisition.broadening_hz))
    throw ValidationError("acquisition.broadening_hz must be >= 0");
  if (!(c.broadening_indirect_hz >= 0.0) || !std::isfinite(c.broadening_indirect_hz))
    throw ValidationError("acquisition.broadening_indirect_hz must be >= 0");
  if (!(c.threshold_rel > 0.0) || !(c.threshold_rel < 1.0))
    throw ValidationError("analysis.threshold_rel must lie in (0, 1)");
  if (!(c.min_window_hz >= 0.0) || !std::isfinite(c.min_window_hz))
    throw ValidationError("analysis.min_window_hz must be >= 0");
  if (!c.timing.is_null() && !c.timing.is_object()) throw ValidationError("timing must be an object or null");
  const std::size_t steps = c.sequence == "cosy-cycled" ? scheme.steps.size() : 1;
  if (c.sequence.starts_with("cosy") && c.grid.n1 * c.acquisition.n_points * steps > kMaxSamples)
    throw ValidationError(fmt::format("cosy data of {} x {} x {} samples exceeds the limit of {}", c.grid.n1,
                                      c.acquisition.n_points, steps, kMaxSamples));
}

struct Prepared {
  DensityState state;
  std::string system_name;
};

Prepared prepare(const ExperimentConfig& c) {
  if (c.preparation == "longitudinal") {
    auto sys = resolve_system(c.system, c.base_dir);
    return {prepare_longitudinal(sys, c.polarization), c.system};
  }
  SpinSystem substrate = is_preset(c.system) ? load_preset(substrate_preset_of(c.system))
                                             : resolve_system(c.system, c.base_dir);
  std::string cx_name = c.complex_system;
  if (cx_name.empty()) {
    if (!is_preset(c.system)) throw ValidationError("complex_system is required when system is a file");
    cx_name = complex_preset_of(c.system);
  }
  SabrePreparation prep(substrate, resolve_system(cx_name, c.base_dir), c.bp_tesla, c.decohere_tol_hz);
  auto states = prepare_sabre(prep);
  if (c.observe == "complex") return {std::move(states.complex), cx_name};
  if (c.observe == "h2") return {std::move(states.h2), "h2"};
  return {std::move(states.substrate), is_preset(c.system) ? substrate_preset_of(c.system) : c.system};
}

json coherence_json(const DensityState& state) {
  json out;
  out["dimension"] = state.dimension();
  auto& spins = out["spins"] = json::array();
  for (const auto& n : state.system().nuclei())
    spins.push_back({{"label", n.label}, {"species", std::string(species_name(n.species))}});
  const auto dec = coherence_decompose(state);
  auto& rows = out["coherences"] = json::array();
  for (const auto& [label, mag] : dec)
    rows.push_back({{"p_h", label.p_h},
                    {"p_f", label.p_f},
                    {"total", label.total()},
                    {"label", coherence_name(label)},
                    {"family", coherence_family(label)},
                    {"magnitude", r12(mag)}});
  auto& totals = out["total_orders"] = json::array();
  for (const auto& [p, mag] : total_order_magnitudes(dec)) totals.push_back({{"p", p}, {"magnitude", r12(mag)}});
  return out;
}

std::string fafos_csv(const FafosResult& r) {
  std::string out = "flip_rad,freq_hz,re,im,mag\n";
  for (std::size_t i = 0; i < r.flip_angles.size(); ++i)
    for (std::size_t j = 0; j < r.freq_hz.size(); ++j) {
      const auto a = r.spectra(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out += fmt::format("{},{},{},{},{}\n", format_real(r.flip_angles[i]), format_real(r.freq_hz[j]),
                         format_real(a.real()), format_real(a.imag()), format_real(std::abs(a)));
    }
  return out;
}

std::string fourier_csv(const std::vector<double>& freq, const ComplexMatrix& c) {
  std::string out = "k,freq_hz,re,im,mag\n";
  for (Eigen::Index k = 0; k < c.rows(); ++k)
    for (std::size_t j = 0; j < freq.size(); ++j) {
      const auto a = c(k, static_cast<Eigen::Index>(j));
      out += fmt::format("{},{},{},{},{}\n", k + 1, format_real(freq[j]), format_real(a.real()),
                         format_real(a.imag()), format_real(std::abs(a)));
    }
  return out;
}

template <class M>
bool all_zero(const M& m) {
  return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0;
}

std::string resolve_out(const std::string& flag, const std::string& from_config) {
  if (const char* env = std::getenv("ULFSPIN_OUT"); env && *env) return env;
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  return "ulfspin_out";
}

json error_json(const std::string& type, const std::string& message) {
  return {{"error", {{"type", type}, {"message", message}}}};
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc, const fs::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  Fields top(doc, "");
  top.text("system", c.system);
  top.text("complex_system", c.complex_system);
  top.number("b0_tesla", c.b0_tesla);
  top.number("bp_tesla", c.bp_tesla);
  top.number("decohere_tol_hz", c.decohere_tol_hz);
  top.text("preparation", c.preparation);
  if (auto p = top.find("polarization")) {
    if (!p->is_object()) throw ValidationError("polarization must map spin labels to numbers");
    for (auto it = p->begin(); it != p->end(); ++it) {
      if (!it->is_number()) throw ValidationError(fmt::format("polarization.{} must be a number", it.key()));
      c.polarization[it.key()] = it->get<double>();
    }
  }
  top.text("observe", c.observe);
  top.text("sequence", c.sequence);
  if (auto f = top.find("fafos")) {
    Fields s(*f, "fafos");
    s.count("n_angles", c.n_angles);
    s.integer("k_max", c.k_max);
    s.finish();
  }
  if (auto f = top.find("cosy")) {
    Fields s(*f, "cosy");
    s.number("t1_start_s", c.grid.t1_start_s);
    s.number("dt1_s", c.grid.dt1_s);
    s.count("n1", c.grid.n1);
    if (auto ph = s.find("phases_deg")) {
      if (!ph->is_array() || ph->size() != 3 || !std::all_of(ph->begin(), ph->end(), [](auto& v) { return v.is_number(); }))
        throw ValidationError("cosy.phases_deg must be [phi1, phi2, receiver]");
      c.phases = {(*ph)[0].get<double>(), (*ph)[1].get<double>(), (*ph)[2].get<double>()};
    }
    s.text("scheme", c.scheme);
    s.flag("export_raw", c.export_raw);
    s.finish();
  }
  if (auto f = top.find("pulse_acquire")) {
    Fields s(*f, "pulse_acquire");
    s.number("flip_deg", c.flip_deg);
    s.finish();
  }
  if (auto f = top.find("acquisition")) {
    Fields s(*f, "acquisition");
    s.count("n_points", c.acquisition.n_points);
    s.number("dwell_s", c.acquisition.dwell_s);
    s.number("broadening_hz", c.acquisition.broadening_hz);
    s.number("broadening_indirect_hz", c.broadening_indirect_hz);
    s.finish();
  }
  if (auto f = top.find("analysis")) {
    Fields s(*f, "analysis");
    s.number("threshold_rel", c.threshold_rel);
    s.number("min_window_hz", c.min_window_hz);
    s.flag("include_opposed", c.include_opposed);
    s.finish();
  }
  if (auto t = top.find("timing"))
    c.timing = *t;
  else
    c.timing = default_timing(c.system, c.sequence);
  top.text("out", c.out);
  top.finish();
  validate(c);
  return c;
}

namespace {

json read_config_doc(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{} is not valid JSON: {}", path.string(), e.what()));
  }
}

}  // namespace

ExperimentConfig load_experiment_config(const fs::path& path) {
  return parse_experiment_config(read_config_doc(path), path.parent_path());
}

json canonical_json(const ExperimentConfig& c) {
  json pol = json::object();
  for (const auto& [label, p] : c.polarization) pol[label] = p;
  return {
      {"system", c.system},
      {"complex_system", c.complex_system},
      {"b0_tesla", c.b0_tesla},
      {"bp_tesla", c.bp_tesla},
      {"decohere_tol_hz", c.decohere_tol_hz},
      {"preparation", c.preparation},
      {"polarization", pol},
      {"observe", c.observe},
      {"sequence", c.sequence},
      {"fafos", {{"n_angles", c.n_angles}, {"k_max", c.k_max}}},
      {"cosy",
       {{"t1_start_s", c.grid.t1_start_s},
        {"dt1_s", c.grid.dt1_s},
        {"n1", c.grid.n1},
        {"phases_deg", {c.phases.phi1_deg, c.phases.phi2_deg, c.phases.rec_deg}},
        {"scheme", c.scheme},
        {"export_raw", c.export_raw}}},
      {"pulse_acquire", {{"flip_deg", c.flip_deg}}},
      {"acquisition",
       {{"n_points", c.acquisition.n_points},
        {"dwell_s", c.acquisition.dwell_s},
        {"broadening_hz", c.acquisition.broadening_hz},
        {"broadening_indirect_hz", c.broadening_indirect_hz}}},
      {"analysis",
       {{"threshold_rel", c.threshold_rel}, {"min_window_hz", c.min_window_hz}, {"include_opposed", c.include_opposed}}},
      {"timing", c.timing},
  };
}

json default_timing(const std::string& system, const std::string& sequence) {
  if (!is_preset(system)) return nullptr;
  const std::string family = substrate_preset_of(system);
  const bool tfp = family == "3fpy";
  auto row = [](double t_bp_s, double t_b1_ms, double t_b1w_ms, double t_acq_s, json tr_ms, json t1_ms, int steps,
                int avg, double b1_h_hz, double nmr_h_hz) {
    return json{{"t_ramp_ms", 30.0},  {"t_bp_s", t_bp_s},   {"t_w_ms", 11.0},          {"t_b1_ms", t_b1_ms},
                {"t_b1w_ms", t_b1w_ms}, {"t_acq_s", t_acq_s}, {"tr_ms", tr_ms},         {"t1_ms", t1_ms},
                {"steps", steps},     {"averages", avg},    {"b1_freq_h_hz", b1_h_hz}, {"b1_freq_f_hz", 3650.0},
                {"nmr_freq_h_hz", nmr_h_hz}};
  };
  if (sequence == "fafos")
    return tfp ? row(4.0, 15.0, 7.0, 8.0, 12150.0, nullptr, 141, 2, 3880.0, 3882.5)
               : row(4.0, 20.0, 7.0, 8.0, 12160.0, nullptr, 241, 2, 3880.0, 3882.0);
  if (sequence == "cosy")
    return tfp ? row(2.0, 15.0, 7.0, 2.0, {4300.0, 5900.0}, {20.0, 1720.0}, 6801, 1, 3875.0, 3877.9)
               : row(2.5, 15.0, 7.0, 2.0, {4572.0, 6572.0}, {20.0, 2020.0}, 4001, 1, 3880.0, 3881.9);
  if (sequence == "cosy-cycled")
    return tfp ? row(2.0, 15.0, 4.0, 2.0, {4169.0, 4829.0}, {20.0, 780.0}, 1521, 4, 3875.0, 3881.1)
               : row(2.5, 15.0, 7.0, 2.0, {4572.0, 5132.0}, {20.0, 580.0}, 1121, 4, 3880.0, 3882.0);
  return nullptr;
}

std::string sha1_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string git_blob_sha1(std::string_view content) {
  std::string blob = fmt::format("blob {}", content.size());
  blob.push_back('\0');
  blob.append(content);
  return sha1_hex(blob);
}

std::string config_sha1(const ExperimentConfig& config) { return sha1_hex(canonical_json(config).dump()); }

SpinSystem resolve_system(const std::string& name, const fs::path& base_dir) {
  if (is_preset(name)) return load_preset(name);
  fs::path p(name);
  if (p.is_relative() && !base_dir.empty() && fs::exists(base_dir / p)) p = base_dir / p;
  if (!fs::exists(p))
    throw ValidationError(fmt::format("system '{}' is neither a preset ({}) nor a readable file", name,
                                      fmt::join(preset_names(), ", ")));
  return load_spin_system_file(p);
}

json cmd_simulate(const ExperimentConfig& c, const fs::path& out_dir, std::size_t threads) {
  validate(c);
  if (threads < 1) throw ValidationError("threads must be >= 1");
  const auto prepared = prepare(c);
  const DensityState& rho = prepared.state;
  const SpinSystem& sys = rho.system();
  const auto h = build_hamiltonian(sys, c.b0_tesla);

  std::vector<std::string> files;
  std::vector<std::string> warnings;
  auto add_warnings = [&](const std::vector<std::string>& w) {
    for (const auto& s : w)
      if (std::find(warnings.begin(), warnings.end(), s) == warnings.end()) warnings.push_back(s);
  };
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text_file(out_dir / name, text);
    files.push_back(name);
  };
  auto emitted = [&](const std::string& name) { files.push_back(name); };

  fs::create_directories(out_dir);
  auto coherence = coherence_json(rho);
  coherence["system"] = prepared.system_name;
  coherence["observe"] = c.observe;
  coherence["preparation"] = c.preparation;
  emit("coherence.json", coherence.dump(2) + "\n");

  bool zero = false;
  if (c.sequence == "fafos") {
    const auto res = run_fafos(rho, h, c.n_angles, c.acquisition);
    add_warnings(res.warnings);
    emit("fafos_spectra.csv", fafos_csv(res));
    emit("fafos_fourier.csv", fourier_csv(res.freq_hz, fourier_coefficients(res, c.k_max)));
    zero = all_zero(res.spectra);
  } else if (c.sequence == "pulse-acquire") {
    const auto fid = pulse_acquire(rho, h, c.flip_deg * kDeg, c.acquisition);
    add_warnings(fid.warnings);
    write_fid_csv(out_dir / "fid.csv", fid);
    emitted("fid.csv");
    const auto spec = fft_1d(fid, c.acquisition.broadening_hz);
    write_spectrum1d_csv(out_dir / "spectrum.csv", spec);
    emitted("spectrum.csv");
    zero = std::all_of(spec.amp.begin(), spec.amp.end(), [](Complex a) { return a == Complex{}; });
  } else {
    const bool cycled = c.sequence == "cosy-cycled";
    const auto scheme = PhaseCycleScheme::named(c.scheme);
    const auto steps = cycled ? scheme.steps : std::vector<PhaseStep>{c.phases};
    const auto raw = run_cosy(rho, h, c.grid, steps, c.acquisition, threads);
    add_warnings(raw.warnings);
    if (c.export_raw) {
      write_cosy_raw_csv(out_dir / "cosy_raw.csv", raw);
      emitted("cosy_raw.csv");
      emit("cosy_raw.json", cosy_metadata(raw, c.grid, c.acquisition).dump(2) + "\n");
    }
    const auto spec = fft_2d(combine_steps(raw), c.acquisition.broadening_hz, c.broadening_indirect_hz);
    write_spectrum2d_csv(out_dir / "spectrum2d.csv", spec);
    emitted("spectrum2d.csv");
    zero = all_zero(spec.amp);

    const double sw = 1.0 / c.grid.dt1_s;
    auto table = predict_qc_frequencies(sys, c.b0_tesla, sw);
    if (!c.include_opposed) table = without_opposed(table);
    write_qc_csv(out_dir / "qc_table.csv", table);
    emitted("qc_table.csv");

    AssignOptions opts;
    opts.threshold_rel = c.threshold_rel;
    opts.min_window_hz = c.min_window_hz;
    opts.multiplet_halfwidth_hz = multiplet_halfwidth_hz(sys);
    if (cycled) opts.selected_class = scheme.selected_class;
    auto report = to_json(assign_peaks(spec, table, opts));
    report["sw_indirect_hz"] = r12(sw);
    report["scheme"] = cycled ? json(c.scheme) : json(nullptr);
    emit("assignment.json", report.dump(2) + "\n");
  }
  if (zero) warnings.push_back("signal is identically zero");

  json outputs = json::array();
  for (const auto& name : files) {
    const auto content = read_text_file(out_dir / name);
    outputs.push_back({{"file", name}, {"bytes", content.size()}, {"blob_sha1", git_blob_sha1(content)}});
  }
  json manifest = {{"command", "simulate"},
                   {"config", canonical_json(c)},
                   {"config_sha1", config_sha1(c)},
                   {"outputs", outputs},
                   {"warnings", warnings}};
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

json cmd_decompose(const ExperimentConfig& c, std::optional<double> flip_deg) {
  validate(c);
  if (flip_deg && !std::isfinite(*flip_deg)) throw ValidationError("flip angle must be finite");
  const auto prepared = prepare(c);
  const auto state = flip_deg ? hard_pulse(prepared.state, uniform_flip(*flip_deg * kDeg), 0.0) : prepared.state;
  auto out = coherence_json(state);
  out["system"] = prepared.system_name;
  out["observe"] = c.observe;
  out["preparation"] = c.preparation;
  out["flip_deg"] = flip_deg ? json(*flip_deg) : json(nullptr);
  return out;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ultralow-field NMR simulator: SABRE, FAFOS and phase-cycled COSY", "ulfspin"};
  app.require_subcommand(1);

  std::string config_path, preset, out_flag;
  std::size_t threads = 1;
  long long seed = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment config JSON")->check(CLI::ExistingFile);
    sub->add_option("--preset", preset, "Bundled system, overrides the config system");
    sub->add_option("--out", out_flag, "Output directory (ULFSPIN_OUT takes precedence)");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Reserved; no step is random");
  };

  auto* simulate = app.add_subcommand("simulate", "Prepare, run the sequence, process and write outputs");
  common(simulate);

  auto* predict = app.add_subcommand("predict-qc", "Aliased multiple-quantum frequency table");
  common(predict);
  std::optional<double> b0_flag, sw_flag;
  bool all_lines = false;
  predict->add_option("--b0", b0_flag, "Detection field, T");
  predict->add_option("--sw", sw_flag, "Indirect spectral width, Hz (default 1/dt1)");
  predict->add_flag("--all", all_lines, "Include the opposed-sign H-F family");

  auto* fit = app.add_subcommand("fit-weights", "Fit nonnegative weights of component spectra to a target");
  std::vector<std::string> components;
  std::string target;
  fit->add_option("--component", components, "Component spectrum CSV, optionally NAME=PATH")->required();
  fit->add_option("--target", target, "Target spectrum CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", out_flag, "Output directory (ULFSPIN_OUT takes precedence)");
  fit->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  fit->add_option("--seed", seed, "Reserved; no step is random");

  auto* decompose = app.add_subcommand("decompose", "Coherence map of the prepared state");
  common(decompose);
  std::optional<double> flip_flag;
  decompose->add_option("--flip-deg", flip_flag, "Hard pulse on all spins before decomposing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_json("usage", e.what()).dump() << "\n";
    return 2;
  }

  try {
    auto load_config = [&] {
      json doc = config_path.empty() ? json::object() : read_config_doc(config_path);
      if (!preset.empty()) {
        if (!is_preset(preset))
          throw ValidationError(fmt::format("unknown preset '{}' (expected {})", preset, fmt::join(preset_names(), ", ")));
        if (!doc.is_object()) throw ValidationError("config must be an object");
        doc["system"] = preset;
      }
      return parse_experiment_config(doc, config_path.empty() ? fs::path{} : fs::path(config_path).parent_path());
    };

    if (simulate->parsed()) {
      const auto c = load_config();
      const fs::path dir = resolve_out(out_flag, c.out);
      const auto manifest = cmd_simulate(c, dir, threads);
      out << json{{"out", dir.string()}, {"manifest", "manifest.json"}, {"config_sha1", manifest["config_sha1"]},
                  {"outputs", manifest["outputs"].size()}, {"warnings", manifest["warnings"]}}
                 .dump(2)
          << "\n";
    } else if (predict->parsed()) {
      const auto c = load_config();
      const double b0 = b0_flag.value_or(c.b0_tesla);
      const double sw = sw_flag.value_or(1.0 / c.grid.dt1_s);
      if (!(sw > 0.0) || !std::isfinite(sw)) throw ValidationError("spectral width must be > 0");
      if (!(b0 > 0.0) || !std::isfinite(b0)) throw ValidationError("b0 must be > 0");
      auto table = predict_qc_frequencies(resolve_system(c.system, c.base_dir), b0, sw);
      if (!all_lines) table = without_opposed(table);
      const fs::path dir = resolve_out(out_flag, c.out);
      write_qc_csv(dir / "qc_table.csv", table);
      out << format_qc_table(table);
    } else if (fit->parsed()) {
      std::vector<Spectrum1D> specs;
      std::vector<std::string> names, paths;
      for (const auto& arg : components) {
        const auto eq = arg.find('=');
        const std::string path = eq == std::string::npos ? arg : arg.substr(eq + 1);
        names.push_back(eq == std::string::npos ? fs::path(path).stem().string() : arg.substr(0, eq));
        if (!fs::exists(path)) throw ValidationError(fmt::format("component file '{}' does not exist", path));
        paths.push_back(path);
        specs.push_back(read_spectrum1d_csv(path));
      }
      auto tspec = read_spectrum1d_csv(target);
      const auto tmag = tspec.magnitude();
      const double scale = tmag.empty() ? 0.0 : *std::max_element(tmag.begin(), tmag.end());
      if (!(scale > 0.0)) throw ValidationError(fmt::format("target '{}' is identically zero", target));
      for (auto& a : tspec.amp) a /= scale;
      const auto result = fit_composite_weights(specs, tspec, names);
      double total = 0.0;
      for (double w : result.weights) total += w;
      json comps = json::array();
      for (std::size_t k = 0; k < names.size(); ++k)
        comps.push_back({{"name", names[k]},
                         {"file", paths[k]},
                         {"weight", r12(result.weights[k])},
                         {"fraction", total > 0.0 ? r12(result.weights[k] / total) : 0.0}});
      const json doc = {{"target", target},
                        {"target_scale", r12(scale)},
                        {"components", comps},
                        {"residual_rel", r12(result.residual_rel)},
                        {"warnings", result.warnings}};
      const fs::path dir = resolve_out(out_flag, "");
      write_text_file(dir / "weights.json", doc.dump(2) + "\n");
      out << doc.dump(2) << "\n";
    } else if (decompose->parsed()) {
      const auto c = load_config();
      const auto doc = cmd_decompose(c, flip_flag);
      const fs::path dir = resolve_out(out_flag, c.out);
      write_text_file(dir / "coherence.json", doc.dump(2) + "\n");
      out << doc.dump(2) << "\n";
    }
  } catch (const ValidationError& e) {
    err << error_json("validation", e.what()).dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << error_json("runtime", e.what()).dump() << "\n";
    return 1;
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"ulfspin"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ulfspin
