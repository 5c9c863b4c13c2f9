#pragma once

// FFT processing, coherence-order bookkeeping, multiple-quantum frequency
// tables, peak assignment and composite weight fitting.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ulfspin/dynamics.hpp"

namespace ulfspin {

struct Spectrum1D {
  std::vector<double> freq_hz;
  std::vector<Complex> amp;

  std::vector<double> magnitude() const;
};

/// Complex 2D time data: rows are t1 points, columns direct-dimension samples.
struct TimeData2D {
  std::vector<double> t1_s;
  double dwell_s = 0.0;
  ComplexMatrix samples;
};

struct Spectrum2D {
  std::vector<double> f1_hz;  // direct, columns
  std::vector<double> f2_hz;  // indirect, rows
  ComplexMatrix amp;
};

std::size_t next_power_of_two(std::size_t n);

/// Centered frequency axis [-SW/2, SW/2) for n points at spacing dt.
std::vector<double> centered_axis(std::size_t n, double dt_s);

/// Apodization exp(-pi b t), zero-fill to a power of two, FFT, centered axis.
Spectrum1D fft_1d(const Fid& fid, double broadening_hz);

/// FFT along the direct dimension, then along t1; both axes centered.
Spectrum2D fft_2d(const TimeData2D& data, double broadening_direct_hz, double broadening_indirect_hz);

/// nu - sw * round(nu / sw), folded into [-sw/2, sw/2).
double alias_frequency(double nu_hz, double sw_hz);

struct CoherenceLabel {
  int p_h = 0;
  int p_f = 0;
  int total() const { return p_h + p_f; }
  auto operator<=>(const CoherenceLabel&) const = default;
};

std::string coherence_family(const CoherenceLabel& c);

/// "T_{+5}^{HF}", "T_{0}^{H}", "T_{-2}^{H-F}".
std::string coherence_name(const CoherenceLabel& c);

struct QcTableEntry {
  CoherenceLabel label;
  std::string name;
  std::string family;  // H, HF or H-F
  double true_freq_hz = 0.0;
  double aliased_freq_hz = 0.0;
};

/// All (p_h, p_f) with |p_h| <= n_H, |p_f| <= n_F; true = p_h nu_H + p_f nu_F.
std::vector<QcTableEntry> predict_qc_frequencies(const SpinSystem& system, double b0_tesla, double sw_hz);

/// Drops the opposed-sign H-F family.
std::vector<QcTableEntry> without_opposed(const std::vector<QcTableEntry>& table);

/// Per (p_h, p_f): sqrt of summed |rho_rs|^2 over elements with that order.
std::map<CoherenceLabel, double> coherence_decompose(const SpinSystem& system, const ComplexMatrix& rho);
std::map<CoherenceLabel, double> coherence_decompose(const DensityState& state);

/// Collapses a decomposition onto total order p_h + p_f.
std::map<int, double> total_order_magnitudes(const std::map<CoherenceLabel, double>& decomposition);

/// Keeps only elements of total order p (M_r - M_s = p).
ComplexMatrix filter_total_order(const SpinSystem& system, const ComplexMatrix& rho, int p);

struct Peak {
  double f1_hz = 0.0;
  double f2_hz = 0.0;
  double magnitude = 0.0;
  double relative = 0.0;
};

/// 3x3 local maxima of |amp| above threshold_rel * global max.
std::vector<Peak> find_peaks(const Spectrum2D& spec, double threshold_rel);

struct AssignOptions {
  double threshold_rel = 0.01;
  /// Matching window is max(2 indirect bins, min_window_hz, multiplet_halfwidth_hz + 1 bin).
  double min_window_hz = 6.0;
  /// Half extent of J multiplets about each coherence frequency.
  double multiplet_halfwidth_hz = 0.0;
  /// Keep only candidates whose t1 order is in this residue class mod 4.
  std::optional<int> selected_class;
};

struct Candidate {
  QcTableEntry entry;
  /// Coherence order during t1 that produces a line at this table entry.
  int t1_order = 0;
};

struct PeakAssignment {
  Peak peak;
  std::size_t group = 0;
  std::vector<Candidate> candidates;
  bool ambiguous = false;
};

struct AssignmentReport {
  double tolerance_hz = 0.0;
  double threshold_rel = 0.0;
  std::vector<PeakAssignment> assigned;
  std::vector<Peak> unassigned;
  /// Table entries grouped by coincident aliased frequency.
  std::vector<std::vector<QcTableEntry>> groups;
  std::vector<std::size_t> coincident_groups;
  /// Indices of groups hit by at least one assigned peak.
  std::vector<std::size_t> groups_hit;
};

/// Half the summed |J| over all spin pairs, the J multiplet half extent used
/// as the default matching window.
double multiplet_halfwidth_hz(const SpinSystem& system);

/// Single-linkage grouping of entries whose aliased frequencies lie within tol.
std::vector<std::vector<QcTableEntry>> group_table(const std::vector<QcTableEntry>& table, double tol_hz);

AssignmentReport assign_peaks(const Spectrum2D& spec, const std::vector<QcTableEntry>& table,
                              const AssignOptions& options);

nlohmann::json to_json(const AssignmentReport& report);

struct FitResult {
  std::vector<double> weights;
  double residual_rel = 0.0;
  std::vector<std::string> warnings;
};

/// Nonnegative least squares: min ||A x - b||, x >= 0 (Lawson-Hanson).
Eigen::VectorXd nnls(const RealMatrix& a, const Eigen::VectorXd& b);

/// Fits |target| by sum_k w_k |c_k| / max|c_k| with w >= 0. Components must
/// share one axis; a target on another axis is linearly resampled.
FitResult fit_composite_weights(const std::vector<Spectrum1D>& components, const Spectrum1D& target,
                                const std::vector<std::string>& names = {});

void write_spectrum1d_csv(const std::filesystem::path& path, const Spectrum1D& spec);
Spectrum1D read_spectrum1d_csv(const std::filesystem::path& path);
void write_spectrum2d_csv(const std::filesystem::path& path, const Spectrum2D& spec);
void write_qc_csv(const std::filesystem::path& path, const std::vector<QcTableEntry>& table);
std::string format_qc_table(const std::vector<QcTableEntry>& table);

}  // namespace ulfspin
