#include "ulfspin/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "ulfspin/io.hpp"

namespace ulfspin {

namespace {

constexpr double kDeg = kTwoPi / 360.0;

bool multiple_of_90(double deg) {
  const double q = deg / 90.0;
  return std::abs(q - std::round(q)) <= 1e-12;
}

// Runs body(i) for i in [0, n) over contiguous chunks on up to `threads` workers.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void check_acquisition(const AcquisitionParams& acq) {
  if (acq.n_points < 1) throw ValidationError("acquisition points must be >= 1");
  if (!(acq.dwell_s > 0.0) || !std::isfinite(acq.dwell_s)) throw ValidationError("dwell must be > 0");
  if (!(acq.broadening_hz >= 0.0) || !std::isfinite(acq.broadening_hz))
    throw ValidationError("broadening must be >= 0");
}

// Two-pulse engine in the eigenbasis of H. Each prepared first-pulse state is
// rotated into the eigenbasis once; t1 evolution is a phase per element.
struct CosyEngine {
  const Hamiltonian& h;
  Detector detector;
  ComplexMatrix v;
  std::vector<double> energies;

  explicit CosyEngine(const Hamiltonian& ham) : h(ham), detector(ham), v(ham.eigenvectors()) {
    energies.assign(ham.eigenvalues().data(), ham.eigenvalues().data() + ham.eigenvalues().size());
  }

  ComplexMatrix to_eigen(const ComplexMatrix& m) const { return v.adjoint() * m * v; }

  // Eigenbasis state after evolve(t1) and the second pulse.
  ComplexMatrix second_pulse(const ComplexMatrix& rho1_eigen, const ComplexMatrix& u2_eigen, double t1) const {
    const auto d = static_cast<Eigen::Index>(energies.size());
    Eigen::VectorXcd ph(d);
    for (Eigen::Index r = 0; r < d; ++r) ph(r) = std::polar(1.0, -energies[static_cast<std::size_t>(r)] * t1);
    ComplexMatrix x = ph.asDiagonal() * rho1_eigen * ph.conjugate().asDiagonal();
    return u2_eigen * x * u2_eigen.adjoint();
  }
};

// Pulsed traceless part of rho; the identity carries no signal.
ComplexMatrix pulsed_deviation(const DensityState& rho, const FlipMap& flips, double phase) {
  const auto d = static_cast<Eigen::Index>(rho.dimension());
  const ComplexMatrix dev = rho.matrix() - ComplexMatrix::Identity(d, d) * (rho.matrix().trace() / static_cast<double>(d));
  const ComplexMatrix u = pulse_propagator(rho.system(), flips, phase);
  return u * dev * u.adjoint();
}

void store_fid(ComplexMatrix& rows, std::size_t k, const Fid& fid) {
  for (std::size_t j = 0; j < fid.samples.size(); ++j)
    rows(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = fid.samples[j];
}

}  // namespace

Fid pulse_acquire(const DensityState& rho0, const Hamiltonian& h, double flip, const AcquisitionParams& acq) {
  check_acquisition(acq);
  if (!h.system().same_nuclei(rho0.system())) throw ValidationError("state and Hamiltonian systems differ");
  const CosyEngine engine(h);
  return engine.detector.acquire_eigen(engine.to_eigen(pulsed_deviation(rho0, uniform_flip(flip), 0.0)), acq.n_points,
                                       acq.dwell_s, 0.0);
}

std::vector<double> fafos_flip_angles(std::size_t n_angles) {
  if (n_angles < 8) throw ValidationError("FAFOS needs L >= 8 flip angles");
  std::vector<double> out(n_angles);
  for (std::size_t j = 0; j < n_angles; ++j)
    out[j] = kTwoPi * static_cast<double>(j + 1) / static_cast<double>(n_angles);
  return out;
}

FafosResult run_fafos(const DensityState& rho0, const Hamiltonian& h, std::size_t n_angles,
                      const AcquisitionParams& acq) {
  check_acquisition(acq);
  if (!h.system().same_nuclei(rho0.system())) throw ValidationError("state and Hamiltonian systems differ");
  FafosResult out;
  out.flip_angles = fafos_flip_angles(n_angles);
  const CosyEngine engine(h);
  for (std::size_t j = 0; j < n_angles; ++j) {
    const auto rho = engine.to_eigen(pulsed_deviation(rho0, uniform_flip(out.flip_angles[j]), 0.0));
    auto fid = engine.detector.acquire_eigen(rho, acq.n_points, acq.dwell_s, 0.0);
    if (j == 0) out.warnings = fid.warnings;
    auto spec = fft_1d(fid, acq.broadening_hz);
    if (j == 0) {
      out.freq_hz = spec.freq_hz;
      out.spectra = ComplexMatrix::Zero(static_cast<Eigen::Index>(n_angles),
                                        static_cast<Eigen::Index>(spec.amp.size()));
    }
    for (std::size_t c = 0; c < spec.amp.size(); ++c)
      out.spectra(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = spec.amp[c];
  }
  return out;
}

ComplexMatrix fourier_coefficients(const FafosResult& result, int k_max) {
  if (k_max < 1) throw ValidationError("k_max must be >= 1");
  if (static_cast<std::size_t>(result.spectra.rows()) != result.flip_angles.size())
    throw ValidationError("one spectrum per flip angle required");
  ComplexMatrix c = ComplexMatrix::Zero(k_max, result.spectra.cols());
  for (int k = 1; k <= k_max; ++k)
    for (std::size_t j = 0; j < result.flip_angles.size(); ++j)
      c.row(k - 1) += std::sin(k * result.flip_angles[j]) * result.spectra.row(static_cast<Eigen::Index>(j));
  return c;
}

std::vector<Complex> fourier_coefficients(const std::vector<double>& flip_angles,
                                          const std::vector<Complex>& series, int k_max) {
  if (k_max < 1) throw ValidationError("k_max must be >= 1");
  if (flip_angles.size() != series.size()) throw ValidationError("series and flip angles differ in length");
  std::vector<Complex> c(static_cast<std::size_t>(k_max));
  for (int k = 1; k <= k_max; ++k)
    for (std::size_t j = 0; j < series.size(); ++j)
      c[static_cast<std::size_t>(k - 1)] += std::sin(k * flip_angles[j]) * series[j];
  return c;
}

Complex fafos_antiphase_amplitude(const DensityState& rho0, const std::vector<std::size_t>& spins,
                                  std::size_t detected, double flip) {
  const auto& sys = rho0.system();
  if (std::find(spins.begin(), spins.end(), detected) == spins.end())
    throw ValidationError("detected spin must belong to the spin set");
  std::set<std::size_t> seen;
  for (auto s : spins) {
    if (s >= sys.size()) throw ValidationError(fmt::format("spin index {} out of range", s));
    if (!seen.insert(s).second) throw ValidationError(fmt::format("spin index {} repeated", s));
  }
  ComplexMatrix probe = embed_operator(sys, detected, local::lowering());
  for (auto s : spins)
    if (s != detected) probe = probe * (2.0 * embed_operator(sys, s, local::iz()));
  auto rho = hard_pulse(rho0, uniform_flip(flip), 0.0);
  const Complex num = (probe.adjoint() * rho.matrix()).trace();
  const Complex den = (probe.adjoint() * probe).trace();
  return Complex(0.0, 1.0) * static_cast<double>(rho0.dimension()) * num / den;
}

double analytic_fafos_response(int n, double phi) {
  if (n < 1 || n > 5) throw ValidationError(fmt::format("spin order n = {} outside 1..5", n));
  return std::sin(phi) * std::pow(std::cos(phi), n - 1);
}

PhaseCycleScheme PhaseCycleScheme::named(const std::string& name) {
  static const std::map<std::string, std::pair<std::array<double, 4>, int>> table = {
      {"A", {{0.0, 270.0, 180.0, 90.0}, 1}},
      {"B", {{0.0, 90.0, 180.0, 270.0}, 3}},
      {"C", {{0.0, 180.0, 0.0, 180.0}, 2}},
      {"D", {{0.0, 0.0, 0.0, 0.0}, 0}},
  };
  auto it = table.find(name);
  if (it == table.end()) throw ValidationError(fmt::format("unknown phase cycle scheme '{}' (expected A, B, C or D)", name));
  PhaseCycleScheme s;
  s.name = name;
  s.selected_class = it->second.second;
  for (int k = 0; k < 4; ++k) s.steps.push_back({90.0 * k, 0.0, it->second.first[static_cast<std::size_t>(k)]});
  return s;
}

std::vector<std::string> PhaseCycleScheme::names() { return {"A", "B", "C", "D"}; }

Complex PhaseCycleScheme::pathway_weight(int p1) const {
  Complex w = 0.0;
  for (const auto& s : steps)
    w += std::polar(1.0, -p1 * s.phi1_deg * kDeg + (1 + p1) * s.phi2_deg * kDeg - s.rec_deg * kDeg);
  return w;
}

void PhaseCycleScheme::validate() const {
  if (steps.empty()) throw ValidationError("phase cycle has no steps");
  for (const auto& s : steps)
    if (!std::isfinite(s.phi1_deg) || !std::isfinite(s.phi2_deg) || !std::isfinite(s.rec_deg))
      throw ValidationError("phase cycle phases must be finite");
  if (name == "A" || name == "B" || name == "C" || name == "D") {
    if (steps.size() != 4) throw ValidationError(fmt::format("scheme {} must have 4 steps", name));
    for (const auto& s : steps)
      if (!multiple_of_90(s.phi1_deg) || !multiple_of_90(s.phi2_deg) || !multiple_of_90(s.rec_deg))
        throw ValidationError(fmt::format("scheme {} phases must be multiples of 90 degrees", name));
  }
  if (selected_class && (*selected_class < 0 || *selected_class > 3))
    throw ValidationError("selected class must be in 0..3");
}

std::vector<double> CosyGrid::t1_values() const {
  validate();
  std::vector<double> out(n1);
  for (std::size_t k = 0; k < n1; ++k) out[k] = t1_start_s + static_cast<double>(k) * dt1_s;
  return out;
}

void CosyGrid::validate() const {
  if (!(dt1_s > 0.0) || !std::isfinite(dt1_s)) throw ValidationError("dt1 must be > 0");
  if (n1 < 2) throw ValidationError("n1 must be >= 2");
  if (!(t1_start_s >= 0.0) || !std::isfinite(t1_start_s)) throw ValidationError("t1_start must be >= 0");
}

CosyRaw run_cosy(const DensityState& rho0, const Hamiltonian& h, const CosyGrid& grid,
                 const std::vector<PhaseStep>& steps, const AcquisitionParams& acq, std::size_t threads) {
  check_acquisition(acq);
  if (steps.empty()) throw ValidationError("at least one phase step required");
  if (!h.system().same_nuclei(rho0.system())) throw ValidationError("state and Hamiltonian systems differ");
  CosyRaw raw;
  raw.t1_values = grid.t1_values();
  raw.phases = steps;
  raw.dwell_s = acq.dwell_s;

  const CosyEngine engine(h);
  const auto quarter = uniform_flip(kTwoPi / 4.0);
  std::vector<ComplexMatrix> rho1, u2;
  for (const auto& s : steps) {
    rho1.push_back(engine.to_eigen(pulsed_deviation(rho0, quarter, s.phi1_deg * kDeg)));
    u2.push_back(engine.to_eigen(pulse_propagator(h.system(), quarter, s.phi2_deg * kDeg)));
    raw.fids.push_back(ComplexMatrix::Zero(static_cast<Eigen::Index>(grid.n1), static_cast<Eigen::Index>(acq.n_points)));
  }
  raw.warnings = engine.detector.acquire_eigen(rho1[0], 1, acq.dwell_s, 0.0).warnings;

  parallel_for(grid.n1, threads, [&](std::size_t k) {
    for (std::size_t s = 0; s < steps.size(); ++s) {
      auto rho2 = engine.second_pulse(rho1[s], u2[s], raw.t1_values[k]);
      store_fid(raw.fids[s], k, engine.detector.acquire_eigen(rho2, acq.n_points, acq.dwell_s, steps[s].rec_deg * kDeg));
    }
  });
  return raw;
}

CosyRaw run_cosy(const DensityState& rho0, const Hamiltonian& h, const CosyGrid& grid, const PhaseStep& step,
                 const AcquisitionParams& acq, std::size_t threads) {
  return run_cosy(rho0, h, grid, std::vector<PhaseStep>{step}, acq, threads);
}

TimeData2D combine_steps(const CosyRaw& raw) {
  if (raw.fids.empty()) throw ValidationError("no records to combine");
  TimeData2D out;
  out.t1_s = raw.t1_values;
  out.dwell_s = raw.dwell_s;
  out.samples = raw.fids[0];
  for (std::size_t s = 1; s < raw.fids.size(); ++s) out.samples += raw.fids[s];
  return out;
}

TimeData2D run_cosy_cycled(const DensityState& rho0, const Hamiltonian& h, const CosyGrid& grid,
                           const PhaseCycleScheme& scheme, const AcquisitionParams& acq, std::size_t threads) {
  scheme.validate();
  return combine_steps(run_cosy(rho0, h, grid, scheme.steps, acq, threads));
}

TimeData2D run_cosy_orders(const DensityState& rho0, const Hamiltonian& h, const CosyGrid& grid,
                           const std::vector<int>& orders, const AcquisitionParams& acq, std::size_t threads) {
  check_acquisition(acq);
  if (!h.system().same_nuclei(rho0.system())) throw ValidationError("state and Hamiltonian systems differ");
  TimeData2D out;
  out.t1_s = grid.t1_values();
  out.dwell_s = acq.dwell_s;
  out.samples = ComplexMatrix::Zero(static_cast<Eigen::Index>(grid.n1), static_cast<Eigen::Index>(acq.n_points));

  const CosyEngine engine(h);
  const auto quarter = uniform_flip(kTwoPi / 4.0);
  const ComplexMatrix rho1 = pulsed_deviation(rho0, quarter, 0.0);
  ComplexMatrix selected = ComplexMatrix::Zero(rho1.rows(), rho1.cols());
  std::set<int> unique(orders.begin(), orders.end());
  for (int p : unique) selected += filter_total_order(h.system(), rho1, p);
  const ComplexMatrix rho1_eigen = engine.to_eigen(selected);
  const ComplexMatrix u2 = engine.to_eigen(pulse_propagator(h.system(), quarter, 0.0));

  parallel_for(grid.n1, threads, [&](std::size_t k) {
    auto rho2 = engine.second_pulse(rho1_eigen, u2, out.t1_s[k]);
    store_fid(out.samples, k, engine.detector.acquire_eigen(rho2, acq.n_points, acq.dwell_s, 0.0));
  });
  return out;
}

void write_cosy_raw_csv(const std::filesystem::path& path, const CosyRaw& raw) {
  std::string out = "t1_s,phase_step,t_s,re,im\n";
  for (std::size_t k = 0; k < raw.t1_values.size(); ++k)
    for (std::size_t s = 0; s < raw.fids.size(); ++s)
      for (Eigen::Index j = 0; j < raw.fids[s].cols(); ++j) {
        const Complex v = raw.fids[s](static_cast<Eigen::Index>(k), j);
        out += fmt::format("{},{},{},{},{}\n", format_real(raw.t1_values[k]), s,
                           format_real(static_cast<double>(j) * raw.dwell_s), format_real(v.real()),
                           format_real(v.imag()));
      }
  write_text_file(path, out);
}

nlohmann::json cosy_metadata(const CosyRaw& raw, const CosyGrid& grid, const AcquisitionParams& acq) {
  nlohmann::json j;
  j["t1_start_s"] = grid.t1_start_s;
  j["dt1_s"] = grid.dt1_s;
  j["n1"] = grid.n1;
  j["sw_indirect_hz"] = 1.0 / grid.dt1_s;
  j["n_points"] = acq.n_points;
  j["dwell_s"] = acq.dwell_s;
  j["t_acq_s"] = static_cast<double>(acq.n_points) * acq.dwell_s;
  j["pulse_flip_deg"] = 90.0;
  j["phases"] = nlohmann::json::array();
  for (std::size_t s = 0; s < raw.phases.size(); ++s)
    j["phases"].push_back({{"phase_step", s},
                           {"phi1_deg", raw.phases[s].phi1_deg},
                           {"phi2_deg", raw.phases[s].phi2_deg},
                           {"rec_deg", raw.phases[s].rec_deg}});
  j["warnings"] = raw.warnings;
  return j;
}

}  // namespace ulfspin
