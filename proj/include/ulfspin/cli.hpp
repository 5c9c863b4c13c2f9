#pragma once

// Experiment configs, the run manifest and the ulfspin command line.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ulfspin/sequences.hpp"

namespace ulfspin {

struct ExperimentConfig {
  /// Preset name or path to a spin-system JSON file.
  std::string system = "3fpy";
  /// Complex used for SABRE; empty picks the matching preset.
  std::string complex_system;
  double b0_tesla = 91.18e-6;
  double bp_tesla = 5.2e-3;
  double decohere_tol_hz = 0.01;
  std::string preparation = "sabre";  // sabre | longitudinal
  std::map<std::string, double> polarization;
  std::string observe = "substrate";  // substrate | complex | h2
  std::string sequence = "cosy";      // fafos | cosy | cosy-cycled | pulse-acquire
  std::size_t n_angles = 101;
  int k_max = 5;
  CosyGrid grid;
  PhaseStep phases;
  std::string scheme = "A";
  bool export_raw = true;
  double flip_deg = 90.0;
  AcquisitionParams acquisition;
  double broadening_indirect_hz = 0.5;
  double threshold_rel = 0.01;
  double min_window_hz = 6.0;
  bool include_opposed = false;
  /// Measured sequence timing, echoed only.
  nlohmann::json timing;
  /// Directory of the config file; relative system paths resolve against it.
  std::filesystem::path base_dir;
  /// Output directory named in the config file, lowest precedence.
  std::string out;
};

/// Strict parse: unknown keys and out-of-range values throw ValidationError.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Every simulation field with defaults filled in; excludes the output directory.
nlohmann::json canonical_json(const ExperimentConfig& config);

/// Measured timing for a preset family and sequence, or null.
nlohmann::json default_timing(const std::string& system, const std::string& sequence);

std::string sha1_hex(std::string_view data);

/// Hash git assigns to a blob with this content.
std::string git_blob_sha1(std::string_view content);

std::string config_sha1(const ExperimentConfig& config);

SpinSystem resolve_system(const std::string& name, const std::filesystem::path& base_dir = {});

/// Runs preparation, sequence and processing, writes outputs and manifest.json
/// into `out_dir` and returns the manifest.
nlohmann::json cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                            std::size_t threads = 1);

/// Coherence map of the prepared state, optionally after a hard pulse on all spins.
nlohmann::json cmd_decompose(const ExperimentConfig& config, std::optional<double> flip_deg = std::nullopt);

/// argv[0] is the program name. Results go to `out`, error JSON to `err`.
/// Exit 0 on success, 2 on validation or usage errors, 1 otherwise.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ulfspin
