#pragma once

// Density matrices, pulses, free evolution, eigenbasis decoherence, partial
// traces and quadrature FID acquisition.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ulfspin/spinsys.hpp"

namespace ulfspin {

class DensityState {
 public:
  /// Checks shape, Hermiticity and unit trace (tolerance `tol`).
  DensityState(SpinSystem system, ComplexMatrix matrix, double tol = 1e-9);

  static DensityState maximally_mixed(SpinSystem system);

  const SpinSystem& system() const { return system_; }
  const ComplexMatrix& matrix() const { return matrix_; }
  std::size_t dimension() const { return static_cast<std::size_t>(matrix_.rows()); }

  /// Tr(rho * op).
  Complex expectation(const ComplexMatrix& op) const;

  /// Same matrix on a system with identical nuclei (couplings may differ).
  DensityState rebind(SpinSystem system) const;

 private:
  SpinSystem system_;
  ComplexMatrix matrix_;
};

struct Fid {
  std::vector<Complex> samples;
  double dwell_s = 0.0;
  double t0_s = 0.0;
  std::vector<std::string> warnings;
};

using FlipMap = std::map<Species, double>;

/// |S><S| with |S> = (|up,down> - |down,up>)/sqrt(2).
ComplexMatrix singlet_pair_density();

/// Two-spin 1H system used for the hydride pair and free H2.
SpinSystem hydrogen_pair_system(const std::string& label_a = "Ha", const std::string& label_b = "Hb",
                                double shift_ppm = 0.0, double j_hz = 0.0);

DensityState tensor_state(const DensityState& a, const DensityState& b);

/// Sum over spins (optionally of one species) of an embedded local operator.
ComplexMatrix total_operator(const SpinSystem& system, const LocalOperator& op,
                             std::optional<Species> species = std::nullopt);

/// U = exp(-i sum_i flip_i (cos(phase) Ix_i + sin(phase) Iy_i)); species not
/// listed get no rotation.
ComplexMatrix pulse_propagator(const SpinSystem& system, const FlipMap& flips, double phase);

DensityState hard_pulse(const DensityState& state, const FlipMap& flips, double phase);

/// Same nominal flip for every species present.
FlipMap uniform_flip(double flip);

/// U = V exp(-i Lambda t) V^dagger.
ComplexMatrix propagator(const Hamiltonian& h, double t_s);

DensityState evolve(const DensityState& state, const Hamiltonian& h, double t_s);

/// Real waveform on [0, duration], linearly interpolated between samples.
class Waveform {
 public:
  Waveform(std::vector<double> samples, double duration_s);
  double operator()(double t_s) const;
  double duration_s() const { return duration_s_; }
  const std::vector<double>& samples() const { return samples_; }

 private:
  std::vector<double> samples_;
  double duration_s_;
};

/// f(t) = (sin(2 pi nu_a t) + sin(2 pi nu_b t)) * sinc(4 (t - T/2) / T),
/// sinc(x) = sin(x)/x.
Waveform dual_sinc_waveform(double nu_a_hz, double nu_b_hz, double duration_s, std::size_t n_samples);

/// Sliced lab-frame propagator for H + B1 f(t) sum_i gamma_i Ix_i.
ComplexMatrix shaped_pulse_propagator(const Hamiltonian& h, const Waveform& envelope, double b1_tesla,
                                      std::size_t n_slices);

DensityState shaped_pulse(const DensityState& state, const Hamiltonian& h, const Waveform& envelope,
                          double b1_tesla, double duration_s, std::size_t n_slices);

struct ShapedPulseCalibration {
  double b1_tesla = 0.0;
  double flip_h_rad = 0.0;
  double flip_f_rad = 0.0;
  /// 100 * (flip_f / flip_h - 1).
  double f_deviation_percent = 0.0;
};

/// Finds the B1 amplitude giving a 90 degree flip on a bare 1H spin at
/// `field_tesla`, and reports the flip the same pulse gives a bare 19F spin.
ShapedPulseCalibration calibrate_shaped_pulse(double field_tesla, const Waveform& envelope,
                                              std::size_t n_slices, double target_rad = kTwoPi / 4.0);

/// Zeroes eigenbasis elements whose energy gap exceeds tol_hz.
DensityState decohere_in_eigenbasis(const DensityState& state, const Hamiltonian& h, double tol_hz = 0.01);

/// Traces out the listed spins; the rest keep their order.
DensityState partial_trace(const DensityState& state, const std::vector<std::size_t>& remove);

/// D = sum_i (gamma_i / gamma_1H) I+_i; Tr(rho D) reads the order -1 part of rho.
ComplexMatrix detection_operator(const SpinSystem& system);

/// Precomputed eigenbasis data for repeated acquisitions under one Hamiltonian.
class Detector {
 public:
  explicit Detector(const Hamiltonian& h);

  /// Samples from a state already expressed in the eigenbasis (V^dagger rho V).
  Fid acquire_eigen(const ComplexMatrix& rho_eigen, std::size_t n_points, double dwell_s,
                    double receiver_phase) const;

  Fid acquire(const DensityState& state, std::size_t n_points, double dwell_s, double receiver_phase) const;

  /// Largest |E_r - E_s| / 2 pi over detectable pairs, Hz.
  double max_detectable_frequency_hz() const { return max_freq_hz_; }

 private:
  struct Pair {
    std::size_t r, s;
    Complex d_sr;
    double omega;  // E_r - E_s
  };
  ComplexMatrix v_;
  std::vector<Pair> pairs_;
  double max_freq_hz_ = 0.0;
};

/// S_k = exp(-i receiver_phase) Tr(rho(t_k) D), t_k = k * dwell.
Fid acquire(const DensityState& state, const Hamiltonian& h, std::size_t n_points, double dwell_s,
            double receiver_phase = 0.0);

void write_fid_csv(const std::filesystem::path& path, const Fid& fid);

}  // namespace ulfspin
