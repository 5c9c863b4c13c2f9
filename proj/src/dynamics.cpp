#include "ulfspin/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "ulfspin/io.hpp"

namespace ulfspin {

namespace {

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double omega_per_tesla(const Nucleus& n) { return kTwoPi * n.gamma_mhz_per_t * 1e6; }

}  // namespace

DensityState::DensityState(SpinSystem system, ComplexMatrix matrix, double tol)
    : system_(std::move(system)), matrix_(std::move(matrix)) {
  const auto dim = static_cast<Eigen::Index>(system_.dimension());
  if (matrix_.rows() != dim || matrix_.cols() != dim)
    throw ValidationError(fmt::format("density matrix must be {}x{}", dim, dim));
  if (!matrix_.allFinite()) throw ValidationError("density matrix has non-finite entries");
  if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > tol)
    throw ValidationError("density matrix is not Hermitian");
  if (std::abs(matrix_.trace() - Complex(1.0)) > tol) throw ValidationError("density matrix trace is not 1");
}

DensityState DensityState::maximally_mixed(SpinSystem system) {
  const auto dim = static_cast<Eigen::Index>(system.dimension());
  ComplexMatrix m = ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim);
  return DensityState(std::move(system), std::move(m));
}

Complex DensityState::expectation(const ComplexMatrix& op) const {
  return (matrix_.transpose().cwiseProduct(op)).sum();
}

DensityState DensityState::rebind(SpinSystem system) const {
  if (!system.same_nuclei(system_)) throw ValidationError("rebind requires the same nuclei");
  return DensityState(std::move(system), matrix_);
}

ComplexMatrix singlet_pair_density() {
  ComplexMatrix m = ComplexMatrix::Zero(4, 4);
  m(1, 1) = 0.5;
  m(2, 2) = 0.5;
  m(1, 2) = -0.5;
  m(2, 1) = -0.5;
  return m;
}

SpinSystem hydrogen_pair_system(const std::string& label_a, const std::string& label_b, double shift_ppm,
                                double j_hz) {
  std::vector<Nucleus> nuc{{label_a, Species::H1, gyromagnetic_ratio(Species::H1), shift_ppm},
                           {label_b, Species::H1, gyromagnetic_ratio(Species::H1), shift_ppm}};
  RealMatrix j = RealMatrix::Zero(2, 2);
  j(0, 1) = j(1, 0) = j_hz;
  return SpinSystem(std::move(nuc), std::move(j));
}

DensityState tensor_state(const DensityState& a, const DensityState& b) {
  auto sys = SpinSystem::concat(a.system(), b.system());
  return DensityState(std::move(sys), kron(a.matrix(), b.matrix()));
}

ComplexMatrix total_operator(const SpinSystem& system, const LocalOperator& op, std::optional<Species> species) {
  const auto dim = static_cast<Eigen::Index>(system.dimension());
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  for (std::size_t i = 0; i < system.size(); ++i)
    if (!species || system.nucleus(i).species == *species) out += embed_operator(system, i, op);
  return out;
}

ComplexMatrix pulse_propagator(const SpinSystem& system, const FlipMap& flips, double phase) {
  if (!std::isfinite(phase)) throw ValidationError("pulse phase must be finite");
  for (const auto& [s, f] : flips)
    if (!std::isfinite(f)) throw ValidationError(fmt::format("non-finite flip for {}", species_name(s)));
  ComplexMatrix u = ComplexMatrix::Ones(1, 1);
  const Complex eneg = std::polar(1.0, -phase);
  const Complex epos = std::polar(1.0, phase);
  for (const auto& nuc : system.nuclei()) {
    auto it = flips.find(nuc.species);
    const double theta = it == flips.end() ? 0.0 : it->second;
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    ComplexMatrix loc(2, 2);
    loc << c, Complex(0, -s) * eneg, Complex(0, -s) * epos, c;
    u = kron(u, loc);
  }
  return u;
}

DensityState hard_pulse(const DensityState& state, const FlipMap& flips, double phase) {
  ComplexMatrix u = pulse_propagator(state.system(), flips, phase);
  return DensityState(state.system(), u * state.matrix() * u.adjoint());
}

FlipMap uniform_flip(double flip) { return {{Species::H1, flip}, {Species::F19, flip}}; }

ComplexMatrix propagator(const Hamiltonian& h, double t_s) {
  if (!(t_s >= 0.0) || !std::isfinite(t_s)) throw ValidationError("evolution time must be finite and >= 0");
  const auto& v = h.eigenvectors();
  Eigen::VectorXcd phase(v.cols());
  for (Eigen::Index k = 0; k < v.cols(); ++k) phase(k) = std::polar(1.0, -h.eigenvalues()(k) * t_s);
  return v * phase.asDiagonal() * v.adjoint();
}

DensityState evolve(const DensityState& state, const Hamiltonian& h, double t_s) {
  if (!h.system().same_nuclei(state.system())) throw ValidationError("state and Hamiltonian systems differ");
  ComplexMatrix u = propagator(h, t_s);
  return DensityState(state.system(), u * state.matrix() * u.adjoint());
}

Waveform::Waveform(std::vector<double> samples, double duration_s)
    : samples_(std::move(samples)), duration_s_(duration_s) {
  if (samples_.size() < 2) throw ValidationError("waveform needs at least two samples");
  if (!(duration_s_ > 0.0) || !std::isfinite(duration_s_)) throw ValidationError("waveform duration must be > 0");
  for (double v : samples_)
    if (!std::isfinite(v)) throw ValidationError("waveform has non-finite samples");
}

double Waveform::operator()(double t_s) const {
  if (t_s <= 0.0) return samples_.front();
  if (t_s >= duration_s_) return samples_.back();
  const double x = t_s / duration_s_ * static_cast<double>(samples_.size() - 1);
  const auto k = static_cast<std::size_t>(x);
  const double w = x - static_cast<double>(k);
  return (1.0 - w) * samples_[k] + w * samples_[std::min(k + 1, samples_.size() - 1)];
}

Waveform dual_sinc_waveform(double nu_a_hz, double nu_b_hz, double duration_s, std::size_t n_samples) {
  if (n_samples < 2) throw ValidationError("waveform needs at least two samples");
  std::vector<double> f(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double t = duration_s * static_cast<double>(k) / static_cast<double>(n_samples - 1);
    const double x = 4.0 * (t - duration_s / 2.0) / duration_s;
    const double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
    f[k] = (std::sin(kTwoPi * nu_a_hz * t) + std::sin(kTwoPi * nu_b_hz * t)) * sinc;
  }
  return Waveform(std::move(f), duration_s);
}

ComplexMatrix shaped_pulse_propagator(const Hamiltonian& h, const Waveform& envelope, double b1_tesla,
                                      std::size_t n_slices) {
  if (n_slices == 0) throw ValidationError("n_slices must be positive");
  if (!std::isfinite(b1_tesla)) throw ValidationError("B1 amplitude must be finite");
  const auto& sys = h.system();
  const auto dim = static_cast<Eigen::Index>(sys.dimension());
  ComplexMatrix coupling = ComplexMatrix::Zero(dim, dim);
  for (std::size_t i = 0; i < sys.size(); ++i)
    coupling += omega_per_tesla(sys.nucleus(i)) * embed_operator(sys, i, local::ix());

  // Fourth-order commutator-free Magnus step per slice, sampling the field at
  // the two Gauss points of the slice.
  const double dt = envelope.duration_s() / static_cast<double>(n_slices);
  const double g1 = 0.5 - std::sqrt(3.0) / 6.0;
  const double g2 = 0.5 + std::sqrt(3.0) / 6.0;
  const double a1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0;
  const double a2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
  ComplexMatrix u = ComplexMatrix::Identity(dim, dim);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es;
  Eigen::VectorXcd phase(dim);
  auto step = [&](double field_scale) {
    ComplexMatrix hk = 0.5 * h.matrix() + field_scale * coupling;
    es.compute(hk);
    for (Eigen::Index i = 0; i < dim; ++i) phase(i) = std::polar(1.0, -es.eigenvalues()(i) * dt);
    u = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint() * u;
  };
  for (std::size_t k = 0; k < n_slices; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    const double f1 = b1_tesla * envelope(t0 + g1 * dt);
    const double f2 = b1_tesla * envelope(t0 + g2 * dt);
    step(a2 * f1 + a1 * f2);
    step(a1 * f1 + a2 * f2);
  }
  // Remove accumulated rounding drift from unitarity.
  Eigen::JacobiSVD<ComplexMatrix> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

DensityState shaped_pulse(const DensityState& state, const Hamiltonian& h, const Waveform& envelope,
                          double b1_tesla, double duration_s, std::size_t n_slices) {
  if (std::abs(duration_s - envelope.duration_s()) > 1e-12 * envelope.duration_s())
    throw ValidationError("pulse duration does not match the waveform duration");
  if (!h.system().same_nuclei(state.system())) throw ValidationError("state and Hamiltonian systems differ");
  ComplexMatrix u = shaped_pulse_propagator(h, envelope, b1_tesla, n_slices);
  return DensityState(state.system(), u * state.matrix() * u.adjoint());
}

namespace {

double bare_spin_flip(Species s, double field, const Waveform& env, double b1, std::size_t n_slices) {
  SpinSystem sys({{"X", s, gyromagnetic_ratio(s), 0.0}}, RealMatrix::Zero(1, 1));
  auto h = build_hamiltonian(sys, field);
  ComplexMatrix u = shaped_pulse_propagator(h, env, b1, n_slices);
  // Start in |up>; <2 Iz> = cos(flip).
  const double pz = std::norm(u(0, 0)) - std::norm(u(1, 0));
  return std::acos(std::clamp(pz, -1.0, 1.0));
}

}  // namespace

ShapedPulseCalibration calibrate_shaped_pulse(double field_tesla, const Waveform& envelope, std::size_t n_slices,
                                              double target_rad) {
  if (!(target_rad > 0.0) || target_rad >= kTwoPi / 2.0) throw ValidationError("target flip must be in (0, pi)");
  auto flip_h = [&](double b1) { return bare_spin_flip(Species::H1, field_tesla, envelope, b1, n_slices); };
  double lo = 0.0;
  double hi = 1e-9;
  while (flip_h(hi) < target_rad) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1.0) throw ValidationError("shaped pulse cannot reach the target flip");
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (flip_h(mid) < target_rad ? lo : hi) = mid;
  }
  ShapedPulseCalibration out;
  out.b1_tesla = 0.5 * (lo + hi);
  out.flip_h_rad = flip_h(out.b1_tesla);
  out.flip_f_rad = bare_spin_flip(Species::F19, field_tesla, envelope, out.b1_tesla, n_slices);
  out.f_deviation_percent = 100.0 * (out.flip_f_rad / out.flip_h_rad - 1.0);
  return out;
}

DensityState decohere_in_eigenbasis(const DensityState& state, const Hamiltonian& h, double tol_hz) {
  if (!h.system().same_nuclei(state.system())) throw ValidationError("state and Hamiltonian systems differ");
  if (!(tol_hz >= 0.0)) throw ValidationError("decoherence tolerance must be >= 0");
  const auto& v = h.eigenvectors();
  const auto& e = h.eigenvalues();
  ComplexMatrix rho = v.adjoint() * state.matrix() * v;
  const double tol = kTwoPi * tol_hz;
  for (Eigen::Index r = 0; r < rho.rows(); ++r)
    for (Eigen::Index s = 0; s < rho.cols(); ++s)
      if (std::abs(e(r) - e(s)) > tol) rho(r, s) = 0.0;
  ComplexMatrix back = v * rho * v.adjoint();
  return DensityState(state.system(), 0.5 * (back + back.adjoint()));
}

DensityState partial_trace(const DensityState& state, const std::vector<std::size_t>& remove) {
  const auto& sys = state.system();
  const auto n = sys.size();
  std::set<std::size_t> gone(remove.begin(), remove.end());
  for (auto i : gone)
    if (i >= n) throw ValidationError(fmt::format("spin index {} out of range", i));
  if (gone.size() >= n) throw ValidationError("cannot trace out every spin");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i)
    if (!gone.count(i)) keep.push_back(i);

  const std::size_t nk = keep.size();
  const std::size_t dk = std::size_t{1} << nk;
  const std::size_t dt = std::size_t{1} << (n - nk);
  std::vector<std::size_t> gone_v(gone.begin(), gone.end());
  auto compose = [&](std::size_t a, std::size_t t) {
    std::size_t idx = 0;
    for (std::size_t q = 0; q < nk; ++q)
      if ((a >> (nk - 1 - q)) & 1u) idx |= std::size_t{1} << (n - 1 - keep[q]);
    for (std::size_t q = 0; q < gone_v.size(); ++q)
      if ((t >> (gone_v.size() - 1 - q)) & 1u) idx |= std::size_t{1} << (n - 1 - gone_v[q]);
    return idx;
  };
  const auto& m = state.matrix();
  ComplexMatrix out = ComplexMatrix::Zero(dk, dk);
  for (std::size_t a = 0; a < dk; ++a)
    for (std::size_t b = 0; b < dk; ++b) {
      Complex acc = 0.0;
      for (std::size_t t = 0; t < dt; ++t) acc += m(compose(a, t), compose(b, t));
      out(a, b) = acc;
    }
  return DensityState(sys.subsystem(keep), std::move(out));
}

ComplexMatrix detection_operator(const SpinSystem& system) {
  const auto dim = static_cast<Eigen::Index>(system.dimension());
  ComplexMatrix d = ComplexMatrix::Zero(dim, dim);
  const double gh = gyromagnetic_ratio(Species::H1);
  for (std::size_t i = 0; i < system.size(); ++i)
    d += (system.nucleus(i).gamma_mhz_per_t / gh) * embed_operator(system, i, local::raising());
  return d;
}

Detector::Detector(const Hamiltonian& h) : v_(h.eigenvectors()) {
  const auto& e = h.eigenvalues();
  const auto& m2 = h.eigen_twice_m();
  ComplexMatrix d = v_.adjoint() * detection_operator(h.system()) * v_;
  const double scale = d.cwiseAbs().maxCoeff();
  for (std::size_t r = 0; r < m2.size(); ++r)
    for (std::size_t s = 0; s < m2.size(); ++s) {
      if (m2[r] - m2[s] != -2) continue;
      const Complex dsr = d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r));
      if (std::abs(dsr) <= 1e-15 * scale) continue;
      const double w = e(static_cast<Eigen::Index>(r)) - e(static_cast<Eigen::Index>(s));
      pairs_.push_back({r, s, dsr, w});
      max_freq_hz_ = std::max(max_freq_hz_, std::abs(w) / kTwoPi);
    }
}

Fid Detector::acquire_eigen(const ComplexMatrix& rho_eigen, std::size_t n_points, double dwell_s,
                            double receiver_phase) const {
  if (n_points == 0) throw ValidationError("n_points must be >= 1");
  if (!(dwell_s > 0.0) || !std::isfinite(dwell_s)) throw ValidationError("dwell must be > 0");
  Fid fid;
  fid.dwell_s = dwell_s;
  fid.t0_s = 0.0;
  const double nyquist = 0.5 / dwell_s;
  if (max_freq_hz_ > nyquist)
    fid.warnings.push_back(fmt::format("dwell {} s violates Nyquist: detectable line at {} Hz exceeds {} Hz",
                                       format_real(dwell_s), format_real(max_freq_hz_), format_real(nyquist)));

  const Complex rx = std::polar(1.0, -receiver_phase);
  std::vector<Complex> c(pairs_.size());
  std::vector<Complex> z(pairs_.size());
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    const auto& q = pairs_[p];
    c[p] = rx * rho_eigen(static_cast<Eigen::Index>(q.r), static_cast<Eigen::Index>(q.s)) * q.d_sr;
    z[p] = std::polar(1.0, -q.omega * dwell_s);
  }
  fid.samples.assign(n_points, Complex{});
  for (std::size_t k = 0; k < n_points; ++k) {
    Complex acc = 0.0;
    for (std::size_t p = 0; p < c.size(); ++p) {
      acc += c[p];
      c[p] *= z[p];
    }
    fid.samples[k] = acc;
  }
  return fid;
}

Fid Detector::acquire(const DensityState& state, std::size_t n_points, double dwell_s,
                      double receiver_phase) const {
  if (state.matrix().rows() != v_.rows()) throw ValidationError("state and Hamiltonian dimensions differ");
  return acquire_eigen(v_.adjoint() * state.matrix() * v_, n_points, dwell_s, receiver_phase);
}

Fid acquire(const DensityState& state, const Hamiltonian& h, std::size_t n_points, double dwell_s,
            double receiver_phase) {
  if (!h.system().same_nuclei(state.system())) throw ValidationError("state and Hamiltonian systems differ");
  return Detector(h).acquire(state, n_points, dwell_s, receiver_phase);
}

void write_fid_csv(const std::filesystem::path& path, const Fid& fid) {
  std::string out = "t_s,re,im\n";
  for (std::size_t k = 0; k < fid.samples.size(); ++k) {
    const double t = fid.t0_s + static_cast<double>(k) * fid.dwell_s;
    out += fmt::format("{},{},{}\n", format_real(t), format_real(fid.samples[k].real()),
                       format_real(fid.samples[k].imag()));
  }
  write_text_file(path, out);
}

}  // namespace ulfspin
