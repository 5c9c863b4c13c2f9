#pragma once

// SABRE preparation: non-polarized substrate plus a singlet hydride pair,
// eigenbasis decoherence at the polarizing field, then dissociation.

#include <map>
#include <string>
#include <vector>

#include "ulfspin/dynamics.hpp"

namespace ulfspin {

struct SabrePreparation {
  SpinSystem substrate;
  /// Two 1H hydrides first, then the substrate spins in the same order.
  SpinSystem complex;
  double bp_tesla = 5.2e-3;
  double decohere_tol_hz = 0.01;

  SabrePreparation(SpinSystem substrate_system, SpinSystem complex_system, double bp = 5.2e-3,
                   double tol_hz = 0.01);
};

struct PreparedStates {
  DensityState complex;
  DensityState substrate;
  /// Hydride pair as free H2: two equivalent 1H spins, no shift, no coupling.
  DensityState h2;
};

PreparedStates prepare_sabre(const SabrePreparation& prep);

/// Builds the preparation for a substrate and complex preset pair.
SabrePreparation sabre_from_preset(const std::string& preset, double bp_tesla = 5.2e-3, double tol_hz = 0.01);

/// rho = (1 + sum_i p_i 2 Iz_i) / 2^N; unlisted spins get p = 0.
DensityState prepare_longitudinal(const SpinSystem& system, const std::map<std::string, double>& polarization);

/// rho = (1 + amplitude prod_{k in spins} 2 Iz_k) / 2^N, the pure product order T_nZ.
DensityState prepare_product_order(const SpinSystem& system, const std::vector<std::size_t>& spins,
                                   double amplitude = 1.0);

/// Same system with every hydride-substrate coupling multiplied by `scale`.
SpinSystem scale_hydride_couplings(const SpinSystem& complex, double scale);

}  // namespace ulfspin
