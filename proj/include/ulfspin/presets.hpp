#pragma once

// Bundled spin systems: 3-fluoropyridine (3FPy) and EFNA, each as the free
// substrate and as the Ir-dihydride complex (hydrides first).

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ulfspin/spinsys.hpp"

namespace ulfspin {

std::vector<std::string> preset_names();

/// JSON document for a preset, in the load_spin_system format.
nlohmann::json preset_json(std::string_view name);

SpinSystem load_preset(std::string_view name);

/// Name of the substrate preset for a complex preset and vice versa.
std::string substrate_preset_of(std::string_view name);
std::string complex_preset_of(std::string_view name);

}  // namespace ulfspin
