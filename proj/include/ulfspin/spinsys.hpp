#pragma once

// Spin systems of heteronuclear spin-1/2 nuclei, product operators in the
// Zeeman basis, and lab-frame Hamiltonians.
//
// Basis contract: spin 0 is the most significant tensor factor, and within
// each factor index 0 is |up> (m = +1/2), index 1 is |down> (m = -1/2).

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ulfspin {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using LocalOperator = Eigen::Matrix2cd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr std::size_t kMaxSpins = 8;

/// Thrown for malformed configs, out-of-range parameters and broken
/// invariants on user input.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Species { H1, F19 };

std::string_view species_name(Species s);
Species parse_species(std::string_view name);

/// Gyromagnetic ratio in MHz/T.
double gyromagnetic_ratio(Species s);

/// Larmor frequency in Hz (chemical shift excluded).
double larmor_frequency(Species s, double field_tesla);

struct Nucleus {
  std::string label;
  Species species = Species::H1;
  double gamma_mhz_per_t = 0.0;
  double shift_ppm = 0.0;
};

class SpinSystem {
 public:
  /// Validates label uniqueness, coupling symmetry and size limits.
  SpinSystem(std::vector<Nucleus> nuclei, RealMatrix j_hz);

  std::size_t size() const { return nuclei_.size(); }
  std::size_t dimension() const { return std::size_t{1} << nuclei_.size(); }

  const std::vector<Nucleus>& nuclei() const { return nuclei_; }
  const Nucleus& nucleus(std::size_t i) const { return nuclei_.at(i); }
  const RealMatrix& couplings() const { return j_hz_; }
  double coupling(std::size_t i, std::size_t j) const { return j_hz_(i, j); }

  std::optional<std::size_t> index_of(std::string_view label) const;
  std::size_t count(Species s) const;

  /// Chemical-shift-corrected Larmor frequency of spin i, Hz.
  double frequency_hz(std::size_t i, double field_tesla) const;

  /// Keeps the listed spins (in ascending order) and their mutual couplings.
  SpinSystem subsystem(const std::vector<std::size_t>& keep) const;

  /// Nuclei of `a` followed by those of `b`; no cross couplings.
  static SpinSystem concat(const SpinSystem& a, const SpinSystem& b);

  /// Same labels and species in the same order.
  bool same_nuclei(const SpinSystem& other) const;

 private:
  std::vector<Nucleus> nuclei_;
  RealMatrix j_hz_;
};

/// Parses {"nuclei":[{"label","species","shift_ppm"}...], "j_hz":{"A,B":2.8}}.
/// Couplings not listed are zero. Listing both "A,B" and "B,A" with
/// different values is an error.
SpinSystem load_spin_system(const nlohmann::json& config);
SpinSystem load_spin_system_file(const std::filesystem::path& path);
nlohmann::json to_json(const SpinSystem& system);

namespace local {
LocalOperator identity();
LocalOperator ix();
LocalOperator iy();
LocalOperator iz();
LocalOperator raising();   // I+ = Ix + i Iy, <up|I+|down> = 1
LocalOperator lowering();  // I- = Ix - i Iy
}  // namespace local

/// Kronecker embedding of a single-spin operator.
ComplexMatrix embed_operator(std::size_t n_spins, std::size_t spin_index, const LocalOperator& op);
ComplexMatrix embed_operator(const SpinSystem& system, std::size_t spin_index, const LocalOperator& op);

/// Twice the magnetic quantum number of each basis state, summed over the
/// spins of one species (or over all spins).
std::vector<int> twice_m(const SpinSystem& system, std::optional<Species> species = std::nullopt);

class Hamiltonian {
 public:
  Hamiltonian(SpinSystem system, double field_tesla, ComplexMatrix matrix);

  const SpinSystem& system() const { return system_; }
  double field_tesla() const { return field_tesla_; }
  const ComplexMatrix& matrix() const { return matrix_; }

  /// rad/s, one per eigenvector column.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const ComplexMatrix& eigenvectors() const { return eigenvectors_; }
  /// Twice the total magnetic quantum number of each eigenvector.
  const std::vector<int>& eigen_twice_m() const { return eigen_twice_m_; }

 private:
  SpinSystem system_;
  double field_tesla_;
  ComplexMatrix matrix_;
  Eigen::VectorXd eigenvalues_;
  ComplexMatrix eigenvectors_;
  std::vector<int> eigen_twice_m_;
};

/// H = sum_i 2 pi nu_i Iz_i + sum_{i<j} 2 pi J_ij I_i . I_j  (rad/s).
/// H conserves total Iz, so it is diagonalized block by block in total M;
/// every eigenvector therefore carries a definite total M.
Hamiltonian build_hamiltonian(const SpinSystem& system, double field_tesla);

}  // namespace ulfspin
