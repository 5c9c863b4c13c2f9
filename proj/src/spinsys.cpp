#include "ulfspin/spinsys.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace ulfspin {

std::string_view species_name(Species s) {
  switch (s) {
    case Species::H1:
      return "H1";
    case Species::F19:
      return "F19";
  }
  return "?";
}

Species parse_species(std::string_view name) {
  if (name == "H1" || name == "1H") return Species::H1;
  if (name == "F19" || name == "19F") return Species::F19;
  throw ValidationError(fmt::format("unsupported species '{}'", name));
}

// Bruker almanac values, MHz/T.
double gyromagnetic_ratio(Species s) {
  switch (s) {
    case Species::H1:
      return 42.577;
    case Species::F19:
      return 40.052;
  }
  throw ValidationError("unknown species");
}

double larmor_frequency(Species s, double field_tesla) {
  return gyromagnetic_ratio(s) * 1e6 * field_tesla;
}

SpinSystem::SpinSystem(std::vector<Nucleus> nuclei, RealMatrix j_hz)
    : nuclei_(std::move(nuclei)), j_hz_(std::move(j_hz)) {
  const auto n = nuclei_.size();
  if (n == 0 || n > kMaxSpins)
    throw ValidationError(fmt::format("spin system must have 1..{} nuclei, got {}", kMaxSpins, n));
  if (j_hz_.rows() != static_cast<Eigen::Index>(n) || j_hz_.cols() != static_cast<Eigen::Index>(n))
    throw ValidationError("coupling matrix shape does not match the number of nuclei");

  std::set<std::string> seen;
  for (auto& nuc : nuclei_) {
    if (nuc.label.empty()) throw ValidationError("empty nucleus label");
    if (!seen.insert(nuc.label).second) throw ValidationError(fmt::format("duplicate label '{}'", nuc.label));
    if (nuc.gamma_mhz_per_t <= 0.0) nuc.gamma_mhz_per_t = gyromagnetic_ratio(nuc.species);
    if (!std::isfinite(nuc.shift_ppm))
      throw ValidationError(fmt::format("non-finite shift for '{}'", nuc.label));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (j_hz_(i, i) != 0.0)
      throw ValidationError(fmt::format("self coupling on '{}'", nuclei_[i].label));
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!std::isfinite(j_hz_(i, j)) || j_hz_(i, j) != j_hz_(j, i))
        throw ValidationError(
            fmt::format("asymmetric coupling {}–{}", nuclei_[i].label, nuclei_[j].label));
    }
  }
}

std::optional<std::size_t> SpinSystem::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < nuclei_.size(); ++i)
    if (nuclei_[i].label == label) return i;
  return std::nullopt;
}

std::size_t SpinSystem::count(Species s) const {
  return static_cast<std::size_t>(
      std::count_if(nuclei_.begin(), nuclei_.end(), [s](const Nucleus& n) { return n.species == s; }));
}

double SpinSystem::frequency_hz(std::size_t i, double field_tesla) const {
  const auto& nuc = nuclei_.at(i);
  return nuc.gamma_mhz_per_t * 1e6 * field_tesla * (1.0 + nuc.shift_ppm * 1e-6);
}

SpinSystem SpinSystem::subsystem(const std::vector<std::size_t>& keep) const {
  std::vector<std::size_t> idx = keep;
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  std::vector<Nucleus> nuc;
  RealMatrix j = RealMatrix::Zero(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (idx[a] >= size()) throw ValidationError(fmt::format("spin index {} out of range", idx[a]));
    nuc.push_back(nuclei_[idx[a]]);
    for (std::size_t b = 0; b < idx.size(); ++b) j(a, b) = j_hz_(idx[a], idx[b]);
  }
  return SpinSystem(std::move(nuc), std::move(j));
}

SpinSystem SpinSystem::concat(const SpinSystem& a, const SpinSystem& b) {
  std::vector<Nucleus> nuc = a.nuclei_;
  nuc.insert(nuc.end(), b.nuclei_.begin(), b.nuclei_.end());
  const auto na = a.size();
  const auto n = nuc.size();
  if (n > kMaxSpins) throw ValidationError(fmt::format("combined system has {} spins (max {})", n, kMaxSpins));
  RealMatrix j = RealMatrix::Zero(n, n);
  j.topLeftCorner(na, na) = a.j_hz_;
  j.bottomRightCorner(b.size(), b.size()) = b.j_hz_;
  return SpinSystem(std::move(nuc), std::move(j));
}

bool SpinSystem::same_nuclei(const SpinSystem& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i)
    if (nuclei_[i].label != other.nuclei_[i].label || nuclei_[i].species != other.nuclei_[i].species)
      return false;
  return true;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

SpinSystem load_spin_system(const nlohmann::json& config) {
  if (!config.is_object() || !config.contains("nuclei") || !config["nuclei"].is_array())
    throw ValidationError("spin system config needs a 'nuclei' array");

  std::vector<Nucleus> nuclei;
  for (const auto& item : config["nuclei"]) {
    Nucleus n;
    if (!item.contains("label") || !item.contains("species"))
      throw ValidationError("each nucleus needs 'label' and 'species'");
    n.label = item["label"].get<std::string>();
    n.species = parse_species(item["species"].get<std::string>());
    n.gamma_mhz_per_t = gyromagnetic_ratio(n.species);
    n.shift_ppm = item.value("shift_ppm", 0.0);
    nuclei.push_back(std::move(n));
  }
  const auto n = nuclei.size();
  if (n == 0 || n > kMaxSpins)
    throw ValidationError(fmt::format("spin system must have 1..{} nuclei, got {}", kMaxSpins, n));

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i)
    if (!index.emplace(nuclei[i].label, i).second)
      throw ValidationError(fmt::format("duplicate label '{}'", nuclei[i].label));

  RealMatrix j = RealMatrix::Zero(n, n);
  Eigen::MatrixXi given = Eigen::MatrixXi::Zero(n, n);
  if (config.contains("j_hz")) {
    const auto& jobj = config["j_hz"];
    if (!jobj.is_object()) throw ValidationError("'j_hz' must be an object of \"A,B\": value");
    for (const auto& [key, value] : jobj.items()) {
      const auto comma = key.find(',');
      if (comma == std::string::npos) throw ValidationError(fmt::format("bad coupling key '{}'", key));
      const auto a = trim(std::string_view(key).substr(0, comma));
      const auto b = trim(std::string_view(key).substr(comma + 1));
      const auto ia = index.find(a);
      const auto ib = index.find(b);
      if (ia == index.end() || ib == index.end())
        throw ValidationError(fmt::format("coupling '{}' names an unknown nucleus", key));
      if (ia->second == ib->second) throw ValidationError(fmt::format("self coupling '{}'", key));
      if (!value.is_number()) throw ValidationError(fmt::format("coupling '{}' is not a number", key));
      const double v = value.get<double>();
      if (!std::isfinite(v)) throw ValidationError(fmt::format("coupling '{}' is not finite", key));
      const auto p = ia->second;
      const auto q = ib->second;
      if (given(p, q) || given(q, p)) {
        if (j(p, q) != v) throw ValidationError(fmt::format("asymmetric coupling {}–{}", a, b));
      }
      j(p, q) = v;
      j(q, p) = v;
      given(p, q) = 1;
    }
  }
  return SpinSystem(std::move(nuclei), std::move(j));
}

SpinSystem load_spin_system_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open spin system file '{}'", path.string()));
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("'{}': {}", path.string(), e.what()));
  }
  return load_spin_system(doc);
}

nlohmann::json to_json(const SpinSystem& system) {
  nlohmann::json out;
  out["nuclei"] = nlohmann::json::array();
  for (const auto& n : system.nuclei())
    out["nuclei"].push_back({{"label", n.label}, {"species", species_name(n.species)}, {"shift_ppm", n.shift_ppm}});
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t a = 0; a < system.size(); ++a)
    for (std::size_t b = a + 1; b < system.size(); ++b)
      if (system.coupling(a, b) != 0.0)
        j[system.nucleus(a).label + "," + system.nucleus(b).label] = system.coupling(a, b);
  out["j_hz"] = j;
  return out;
}

namespace local {
LocalOperator identity() { return LocalOperator::Identity(); }
LocalOperator ix() {
  LocalOperator m;
  m << 0.0, 0.5, 0.5, 0.0;
  return m;
}
LocalOperator iy() {
  LocalOperator m;
  m << 0.0, Complex(0, -0.5), Complex(0, 0.5), 0.0;
  return m;
}
LocalOperator iz() {
  LocalOperator m;
  m << 0.5, 0.0, 0.0, -0.5;
  return m;
}
LocalOperator raising() {
  LocalOperator m;
  m << 0.0, 1.0, 0.0, 0.0;
  return m;
}
LocalOperator lowering() {
  LocalOperator m;
  m << 0.0, 0.0, 1.0, 0.0;
  return m;
}
}  // namespace local

ComplexMatrix embed_operator(std::size_t n_spins, std::size_t spin_index, const LocalOperator& op) {
  if (n_spins == 0 || n_spins > kMaxSpins) throw ValidationError("bad number of spins");
  if (spin_index >= n_spins)
    throw ValidationError(fmt::format("spin index {} out of range for {} spins", spin_index, n_spins));
  const std::size_t dim = std::size_t{1} << n_spins;
  const std::size_t shift = n_spins - 1 - spin_index;
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  for (std::size_t r = 0; r < dim; ++r) {
    const std::size_t br = (r >> shift) & 1u;
    for (std::size_t bc = 0; bc < 2; ++bc) {
      const Complex v = op(br, bc);
      if (v == Complex{}) continue;
      const std::size_t c = (r & ~(std::size_t{1} << shift)) | (bc << shift);
      out(r, c) = v;
    }
  }
  return out;
}

ComplexMatrix embed_operator(const SpinSystem& system, std::size_t spin_index, const LocalOperator& op) {
  return embed_operator(system.size(), spin_index, op);
}

std::vector<int> twice_m(const SpinSystem& system, std::optional<Species> species) {
  const auto n = system.size();
  const auto dim = system.dimension();
  std::vector<int> out(dim, 0);
  for (std::size_t s = 0; s < dim; ++s) {
    int m2 = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (species && system.nucleus(k).species != *species) continue;
      m2 += ((s >> (n - 1 - k)) & 1u) ? -1 : 1;
    }
    out[s] = m2;
  }
  return out;
}

Hamiltonian::Hamiltonian(SpinSystem system, double field_tesla, ComplexMatrix matrix)
    : system_(std::move(system)), field_tesla_(field_tesla), matrix_(std::move(matrix)) {
  const auto dim = system_.dimension();
  const auto m2 = twice_m(system_);
  eigenvalues_.resize(dim);
  eigenvectors_ = ComplexMatrix::Zero(dim, dim);
  eigen_twice_m_.assign(dim, 0);

  std::map<int, std::vector<std::size_t>, std::greater<>> blocks;
  for (std::size_t s = 0; s < dim; ++s) blocks[m2[s]].push_back(s);

  std::size_t col = 0;
  for (const auto& [m, idx] : blocks) {
    const auto nb = idx.size();
    ComplexMatrix sub(nb, nb);
    for (std::size_t a = 0; a < nb; ++a)
      for (std::size_t b = 0; b < nb; ++b) sub(a, b) = matrix_(idx[a], idx[b]);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(sub);
    for (std::size_t k = 0; k < nb; ++k, ++col) {
      eigenvalues_(col) = es.eigenvalues()(k);
      eigen_twice_m_[col] = m;
      for (std::size_t a = 0; a < nb; ++a) eigenvectors_(idx[a], col) = es.eigenvectors()(a, k);
    }
  }
}

Hamiltonian build_hamiltonian(const SpinSystem& system, double field_tesla) {
  if (!(field_tesla >= 0.0) || !std::isfinite(field_tesla))
    throw ValidationError("field must be finite and non-negative");
  const auto n = system.size();
  const auto dim = system.dimension();
  ComplexMatrix h = ComplexMatrix::Zero(dim, dim);

  // Zeeman and coupling terms are diagonal or flip-flop in the product basis,
  // so fill them element-wise instead of multiplying embedded operators.
  std::vector<double> omega(n);
  for (std::size_t i = 0; i < n; ++i) omega[i] = kTwoPi * system.frequency_hz(i, field_tesla);

  for (std::size_t s = 0; s < dim; ++s) {
    auto m = [&](std::size_t k) { return ((s >> (n - 1 - k)) & 1u) ? -0.5 : 0.5; };
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag += omega[i] * m(i);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double jij = system.coupling(i, j);
        if (jij == 0.0) continue;
        diag += kTwoPi * jij * m(i) * m(j);
        // (I+S- + I-S+)/2 connects states with spins i and j antiparallel.
        if (m(i) != m(j)) {
          const std::size_t t = s ^ (std::size_t{1} << (n - 1 - i)) ^ (std::size_t{1} << (n - 1 - j));
          h(t, s) += kTwoPi * jij * 0.5;
        }
      }
    }
    h(s, s) += diag;
  }
  return Hamiltonian(system, field_tesla, std::move(h));
}

}  // namespace ulfspin
