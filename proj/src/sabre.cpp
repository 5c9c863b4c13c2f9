#include "ulfspin/sabre.hpp"

#include <cmath>

#include <fmt/format.h>

#include "ulfspin/presets.hpp"

namespace ulfspin {

SabrePreparation::SabrePreparation(SpinSystem substrate_system, SpinSystem complex_system, double bp,
                                   double tol_hz)
    : substrate(std::move(substrate_system)), complex(std::move(complex_system)), bp_tesla(bp),
      decohere_tol_hz(tol_hz) {
  if (complex.size() != substrate.size() + 2)
    throw ValidationError("complex must be the substrate plus exactly two hydrides");
  for (std::size_t k = 0; k < 2; ++k)
    if (complex.nucleus(k).species != Species::H1) throw ValidationError("hydrides must be 1H");
  std::vector<std::size_t> sub_idx;
  for (std::size_t i = 2; i < complex.size(); ++i) sub_idx.push_back(i);
  auto part = complex.subsystem(sub_idx);
  if (!part.same_nuclei(substrate))
    throw ValidationError("complex substrate spins do not match the substrate system");
  if ((part.couplings() - substrate.couplings()).cwiseAbs().maxCoeff() > 1e-12)
    throw ValidationError("complex substrate couplings differ from the substrate system");
  if (!(bp_tesla >= 0.0) || !std::isfinite(bp_tesla)) throw ValidationError("bp_tesla must be >= 0");
  if (!(decohere_tol_hz >= 0.0)) throw ValidationError("decoherence tolerance must be >= 0");
}

PreparedStates prepare_sabre(const SabrePreparation& prep) {
  const auto& cx = prep.complex;
  SpinSystem pair = cx.subsystem({0, 1});
  DensityState singlet(pair, singlet_pair_density());
  DensityState unpolarized = DensityState::maximally_mixed(prep.substrate);
  DensityState joined = tensor_state(singlet, unpolarized).rebind(cx);

  auto h = build_hamiltonian(cx, prep.bp_tesla);
  DensityState rho_complex = decohere_in_eigenbasis(joined, h, prep.decohere_tol_hz);

  std::vector<std::size_t> sub_idx;
  for (std::size_t i = 2; i < cx.size(); ++i) sub_idx.push_back(i);
  DensityState rho_sub = partial_trace(rho_complex, {0, 1}).rebind(prep.substrate);
  DensityState rho_pair = partial_trace(rho_complex, sub_idx);
  DensityState rho_h2(hydrogen_pair_system("H2a", "H2b"), rho_pair.matrix());
  return {std::move(rho_complex), std::move(rho_sub), std::move(rho_h2)};
}

SabrePreparation sabre_from_preset(const std::string& preset, double bp_tesla, double tol_hz) {
  return SabrePreparation(load_preset(substrate_preset_of(preset)), load_preset(complex_preset_of(preset)), bp_tesla,
                          tol_hz);
}

DensityState prepare_longitudinal(const SpinSystem& system, const std::map<std::string, double>& polarization) {
  const auto dim = static_cast<Eigen::Index>(system.dimension());
  ComplexMatrix m = ComplexMatrix::Identity(dim, dim);
  for (const auto& [label, p] : polarization) {
    auto idx = system.index_of(label);
    if (!idx) throw ValidationError(fmt::format("polarization names unknown spin '{}'", label));
    if (!std::isfinite(p) || std::abs(p) > 1.0)
      throw ValidationError(fmt::format("polarization of '{}' must lie in [-1, 1]", label));
    m += (2.0 * p) * embed_operator(system, *idx, local::iz());
  }
  return DensityState(system, m / static_cast<double>(dim));
}

DensityState prepare_product_order(const SpinSystem& system, const std::vector<std::size_t>& spins,
                                   double amplitude) {
  if (spins.empty()) throw ValidationError("product order needs at least one spin");
  if (!std::isfinite(amplitude) || std::abs(amplitude) > 1.0)
    throw ValidationError("product order amplitude must lie in [-1, 1]");
  const auto dim = static_cast<Eigen::Index>(system.dimension());
  ComplexMatrix m = ComplexMatrix::Identity(dim, dim);
  for (std::size_t a = 0; a < spins.size(); ++a)
    for (std::size_t b = a + 1; b < spins.size(); ++b)
      if (spins[a] == spins[b]) throw ValidationError("product order lists a spin twice");
  const auto n = system.size();
  for (auto k : spins)
    if (k >= n) throw ValidationError(fmt::format("spin index {} out of range", k));
  for (Eigen::Index s = 0; s < dim; ++s) {
    double sign = 1.0;
    for (auto k : spins)
      if ((static_cast<std::size_t>(s) >> (n - 1 - k)) & 1u) sign = -sign;
    m(s, s) += amplitude * sign;
  }
  return DensityState(system, m / static_cast<double>(dim));
}

SpinSystem scale_hydride_couplings(const SpinSystem& complex, double scale) {
  RealMatrix j = complex.couplings();
  for (Eigen::Index a = 0; a < 2; ++a)
    for (Eigen::Index b = 2; b < j.cols(); ++b) {
      j(a, b) *= scale;
      j(b, a) *= scale;
    }
  return SpinSystem(complex.nuclei(), j);
}

}  // namespace ulfspin
