#pragma once

// FAFOS flip-angle sweeps and two-pulse COSY with four-step phase cycling.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ulfspin/spectra.hpp"

namespace ulfspin {

struct AcquisitionParams {
  std::size_t n_points = 1024;
  double dwell_s = 50e-6;
  double broadening_hz = 0.5;
};

struct FafosResult {
  std::vector<double> flip_angles;
  std::vector<double> freq_hz;
  /// Rows are flip angles, columns frequencies.
  ComplexMatrix spectra;
  std::vector<std::string> warnings;
};

/// Hard pulse of `flip` on every spin, then acquisition.
Fid pulse_acquire(const DensityState& rho0, const Hamiltonian& h, double flip, const AcquisitionParams& acq);

/// phi_j = 2 pi j / L, j = 1..L.
std::vector<double> fafos_flip_angles(std::size_t n_angles);

FafosResult run_fafos(const DensityState& rho0, const Hamiltonian& h, std::size_t n_angles,
                      const AcquisitionParams& acq);

/// Row k-1 holds c_k(w) = sum_j S(w, phi_j) sin(k phi_j).
ComplexMatrix fourier_coefficients(const FafosResult& result, int k_max);

/// Same sum for a single series sampled at `flip_angles`.
std::vector<Complex> fourier_coefficients(const std::vector<double>& flip_angles,
                                          const std::vector<Complex>& series, int k_max);

/// Antiphase order -1 amplitude of spin `detected` against 2Iz of the other
/// spins in `spins` after a hard pulse of `flip` on every spin. Scaled so that
/// (1 + prod 2Iz) / 2^N gives sin(flip) cos^(n-1)(flip).
Complex fafos_antiphase_amplitude(const DensityState& rho0, const std::vector<std::size_t>& spins,
                                  std::size_t detected, double flip);

/// sin(phi) cos^(n-1)(phi), n in 1..5.
double analytic_fafos_response(int n, double phi);

struct PhaseStep {
  double phi1_deg = 0.0;
  double phi2_deg = 0.0;
  double rec_deg = 0.0;
};

struct PhaseCycleScheme {
  std::string name = "custom";
  std::vector<PhaseStep> steps;
  /// Residue class mod 4 of the first-pulse order p1 that survives.
  std::optional<int> selected_class;

  /// A: p1 = 1 mod 4, B: p1 = 3 mod 4, C: p1 = 2 mod 4, D: p1 = 0 mod 4.
  static PhaseCycleScheme named(const std::string& name);
  static std::vector<std::string> names();

  /// Sum over steps of exp(-i p1 phi1) exp(i (1 + p1) phi2) exp(-i phi_rec)
  /// for a pathway 0 -> p1 -> -1.
  Complex pathway_weight(int p1) const;

  void validate() const;
};

struct CosyGrid {
  double t1_start_s = 20e-3;
  double dt1_s = 0.25e-3;
  std::size_t n1 = 256;

  std::vector<double> t1_values() const;
  void validate() const;
};

struct CosyRaw {
  std::vector<double> t1_values;
  std::vector<PhaseStep> phases;
  /// One record per phase step: rows t1, columns direct samples.
  std::vector<ComplexMatrix> fids;
  double dwell_s = 0.0;
  std::vector<std::string> warnings;
};

/// Per t1: pulse(90, phi1), evolve(t1), pulse(90, phi2), acquire(phi_rec), for each step.
CosyRaw run_cosy(const DensityState& rho0, const Hamiltonian& h, const CosyGrid& grid,
                 const std::vector<PhaseStep>& steps, const AcquisitionParams& acq, std::size_t threads = 1);

CosyRaw run_cosy(const DensityState& rho0, const Hamiltonian& h, const CosyGrid& grid, const PhaseStep& step,
                 const AcquisitionParams& acq, std::size_t threads = 1);

/// Receiver-rotated FIDs of every step summed per t1 in step order.
TimeData2D combine_steps(const CosyRaw& raw);

TimeData2D run_cosy_cycled(const DensityState& rho0, const Hamiltonian& h, const CosyGrid& grid,
                           const PhaseCycleScheme& scheme, const AcquisitionParams& acq, std::size_t threads = 1);

/// Uncycled run (all phases 0) restricted to first-pulse orders in `orders`.
TimeData2D run_cosy_orders(const DensityState& rho0, const Hamiltonian& h, const CosyGrid& grid,
                           const std::vector<int>& orders, const AcquisitionParams& acq, std::size_t threads = 1);

/// Long-form CSV: t1_s, phase_step, t_s, re, im.
void write_cosy_raw_csv(const std::filesystem::path& path, const CosyRaw& raw);

nlohmann::json cosy_metadata(const CosyRaw& raw, const CosyGrid& grid, const AcquisitionParams& acq);

}  // namespace ulfspin
