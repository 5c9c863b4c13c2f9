#include "ulfspin/presets.hpp"

#include <fmt/format.h>

namespace ulfspin {

namespace {

nlohmann::json nucleus(const char* label, const char* species, double shift) {
  return {{"label", label}, {"species", species}, {"shift_ppm", shift}};
}

nlohmann::json fpy(bool with_hydrides) {
  nlohmann::json doc;
  auto& nuc = doc["nuclei"] = nlohmann::json::array();
  nlohmann::json j = nlohmann::json::object();
  if (with_hydrides) {
    nuc.push_back(nucleus("IrHa", "H1", -22.0));
    nuc.push_back(nucleus("IrHb", "H1", -22.0));
    j["IrHa,IrHb"] = -7.0;
    j["A,IrHa"] = 1.2;
    j["D,IrHb"] = 0.5;
    j["F,IrHa"] = 1.0;
  }
  nuc.push_back(nucleus("A", "H1", 8.47));
  nuc.push_back(nucleus("B", "H1", 7.65));
  nuc.push_back(nucleus("C", "H1", 7.49));
  nuc.push_back(nucleus("D", "H1", 8.40));
  nuc.push_back(nucleus("F", "F19", -127.72));
  j["A,B"] = 2.8;
  j["A,C"] = 0.7;
  j["B,C"] = 8.6;
  j["D,B"] = 1.2;
  j["D,C"] = 4.6;
  j["F,A"] = 1.0;
  j["F,B"] = 8.75;
  j["F,C"] = 4.9;
  j["F,D"] = 1.7;
  doc["j_hz"] = j;
  return doc;
}

nlohmann::json efna(bool with_hydrides) {
  nlohmann::json doc;
  auto& nuc = doc["nuclei"] = nlohmann::json::array();
  nlohmann::json j = nlohmann::json::object();
  if (with_hydrides) {
    nuc.push_back(nucleus("IrHa", "H1", -22.0));
    nuc.push_back(nucleus("IrHb", "H1", -22.0));
    j["IrHa,IrHb"] = -7.0;
    j["A,IrHa"] = 1.2;
    j["B,IrHb"] = 0.5;
    j["F,IrHa"] = 1.0;
  }
  nuc.push_back(nucleus("A", "H1", 8.99));
  nuc.push_back(nucleus("B", "H1", 8.70));
  nuc.push_back(nucleus("C", "H1", 8.14));
  nuc.push_back(nucleus("F", "F19", -127.72));
  // J(A,B) is not measured; kept at zero.
  j["A,B"] = 0.0;
  j["C,A"] = 1.62;
  j["C,B"] = 2.93;
  j["F,A"] = 1.60;
  j["F,B"] = 0.75;
  j["F,C"] = 8.76;
  doc["j_hz"] = j;
  doc["unmeasured"] = nlohmann::json::array({"A,B"});
  return doc;
}

}  // namespace

std::vector<std::string> preset_names() { return {"3fpy", "3fpy-complex", "efna", "efna-complex"}; }

nlohmann::json preset_json(std::string_view name) {
  if (name == "3fpy") return fpy(false);
  if (name == "3fpy-complex") return fpy(true);
  if (name == "efna") return efna(false);
  if (name == "efna-complex") return efna(true);
  throw ValidationError(fmt::format("unknown preset '{}'", name));
}

SpinSystem load_preset(std::string_view name) { return load_spin_system(preset_json(name)); }

std::string substrate_preset_of(std::string_view name) {
  preset_json(name);
  std::string s(name);
  if (auto pos = s.find("-complex"); pos != std::string::npos) s.erase(pos);
  return s;
}

std::string complex_preset_of(std::string_view name) { return substrate_preset_of(name) + "-complex"; }

}  // namespace ulfspin
