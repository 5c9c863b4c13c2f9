#include "ulfspin/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include <fftw3.h>
#include <fmt/format.h>

#include "ulfspin/io.hpp"

namespace ulfspin {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Forward FFTs of `howmany` sequences of length n laid out with the given
// stride and distance, computed in an FFTW-aligned scratch buffer.
void fft_many(Complex* data, int n, int howmany, int stride, int dist) {
  const std::size_t total = static_cast<std::size_t>(n) * static_cast<std::size_t>(howmany);
  fftw_complex* buf = fftw_alloc_complex(total);
  if (!buf) throw std::bad_alloc();
  std::copy(data, data + total, reinterpret_cast<Complex*>(buf));
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex());
    plan = fftw_plan_many_dft(1, &n, howmany, buf, nullptr, stride, dist, buf, nullptr, stride, dist, FFTW_FORWARD,
                              FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  std::copy(reinterpret_cast<Complex*>(buf), reinterpret_cast<Complex*>(buf) + total, data);
  fftw_free(buf);
}

double round12(double v) { return std::stod(format_real(v)); }

}  // namespace

std::vector<double> Spectrum1D::magnitude() const {
  std::vector<double> m(amp.size());
  std::transform(amp.begin(), amp.end(), m.begin(), [](Complex c) { return std::abs(c); });
  return m;
}

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> centered_axis(std::size_t n, double dt_s) {
  std::vector<double> f(n);
  const double df = 1.0 / (static_cast<double>(n) * dt_s);
  for (std::size_t m = 0; m < n; ++m) f[m] = (static_cast<double>(m) - static_cast<double>(n / 2)) * df;
  return f;
}

Spectrum1D fft_1d(const Fid& fid, double broadening_hz) {
  if (!(broadening_hz >= 0.0)) throw ValidationError("broadening must be >= 0");
  if (fid.samples.empty()) throw ValidationError("empty FID");
  if (!(fid.dwell_s > 0.0)) throw ValidationError("dwell must be > 0");
  const std::size_t n = next_power_of_two(fid.samples.size());
  std::vector<Complex> buf(n, Complex{});
  for (std::size_t k = 0; k < fid.samples.size(); ++k) {
    const double t = fid.t0_s + static_cast<double>(k) * fid.dwell_s;
    buf[k] = fid.samples[k] * std::exp(-kTwoPi / 2.0 * broadening_hz * t);
  }
  fft_many(buf.data(), static_cast<int>(n), 1, 1, static_cast<int>(n));
  Spectrum1D out;
  out.freq_hz = centered_axis(n, fid.dwell_s);
  out.amp.resize(n);
  for (std::size_t m = 0; m < n; ++m) out.amp[m] = buf[(m + n / 2) % n];
  return out;
}

Spectrum2D fft_2d(const TimeData2D& data, double b_direct, double b_indirect) {
  if (!(b_direct >= 0.0) || !(b_indirect >= 0.0)) throw ValidationError("broadening must be >= 0");
  const auto n1 = static_cast<std::size_t>(data.samples.rows());
  const auto n2 = static_cast<std::size_t>(data.samples.cols());
  if (n1 < 2 || n2 < 1) throw ValidationError("2D data needs at least two t1 points");
  if (data.t1_s.size() != n1) throw ValidationError("t1 axis length does not match the data");
  if (!(data.dwell_s > 0.0)) throw ValidationError("dwell must be > 0");
  const double dt1 = data.t1_s[1] - data.t1_s[0];
  if (!(dt1 > 0.0)) throw ValidationError("t1 grid must increase");
  for (std::size_t k = 1; k < n1; ++k)
    if (std::abs((data.t1_s[k] - data.t1_s[0]) - static_cast<double>(k) * dt1) > 1e-9 * dt1 * static_cast<double>(n1))
      throw ValidationError("t1 grid is not uniform");

  const std::size_t m1 = next_power_of_two(n1);
  const std::size_t m2 = next_power_of_two(n2);
  ComplexMatrix buf = ComplexMatrix::Zero(m1, m2);
  for (std::size_t j = 0; j < n2; ++j) {
    const double wj = std::exp(-kTwoPi / 2.0 * b_direct * static_cast<double>(j) * data.dwell_s);
    for (std::size_t i = 0; i < n1; ++i) {
      const double wi = std::exp(-kTwoPi / 2.0 * b_indirect * static_cast<double>(i) * dt1);
      buf(i, j) = data.samples(i, j) * (wi * wj);
    }
  }
  // Column-major: direct transforms run along rows (stride m1).
  fft_many(buf.data(), static_cast<int>(m2), static_cast<int>(m1), static_cast<int>(m1), 1);
  fft_many(buf.data(), static_cast<int>(m1), static_cast<int>(m2), 1, static_cast<int>(m1));

  Spectrum2D out;
  out.f1_hz = centered_axis(m2, data.dwell_s);
  out.f2_hz = centered_axis(m1, dt1);
  out.amp.resize(m1, m2);
  for (std::size_t j = 0; j < m2; ++j)
    for (std::size_t i = 0; i < m1; ++i) out.amp(i, j) = buf((i + m1 / 2) % m1, (j + m2 / 2) % m2);
  return out;
}

double alias_frequency(double nu_hz, double sw_hz) {
  if (!(sw_hz > 0.0)) throw ValidationError("spectral width must be > 0");
  return nu_hz - sw_hz * std::floor(nu_hz / sw_hz + 0.5);
}

std::string coherence_family(const CoherenceLabel& c) {
  if (c.p_f == 0) return "H";
  if (c.p_h == 0 || (c.p_h > 0) == (c.p_f > 0) || c.total() == 0) return "HF";
  return "H-F";
}

std::string coherence_name(const CoherenceLabel& c) {
  const int n = c.total();
  const std::string order = n == 0 ? "0" : fmt::format("{:+d}", n);
  return fmt::format("T_{{{}}}^{{{}}}", order, coherence_family(c));
}

std::vector<QcTableEntry> predict_qc_frequencies(const SpinSystem& system, double b0_tesla, double sw_hz) {
  if (!(sw_hz > 0.0)) throw ValidationError("spectral width must be > 0");
  if (!(b0_tesla >= 0.0)) throw ValidationError("field must be >= 0");
  const int nh = static_cast<int>(system.count(Species::H1));
  const int nf = static_cast<int>(system.count(Species::F19));
  const double vh = larmor_frequency(Species::H1, b0_tesla);
  const double vf = larmor_frequency(Species::F19, b0_tesla);
  std::vector<QcTableEntry> table;
  for (int ph = -nh; ph <= nh; ++ph)
    for (int pf = -nf; pf <= nf; ++pf) {
      QcTableEntry e;
      e.label = {ph, pf};
      e.family = coherence_family(e.label);
      e.name = coherence_name(e.label);
      e.true_freq_hz = ph * vh + pf * vf;
      e.aliased_freq_hz = alias_frequency(e.true_freq_hz, sw_hz);
      table.push_back(std::move(e));
    }
  auto family_rank = [](const std::string& f) { return f == "H" ? 0 : f == "HF" ? 1 : 2; };
  std::stable_sort(table.begin(), table.end(), [&](const QcTableEntry& a, const QcTableEntry& b) {
    const int oa = std::abs(a.label.total()), ob = std::abs(b.label.total());
    if (oa != ob) return oa < ob;
    if (family_rank(a.family) != family_rank(b.family)) return family_rank(a.family) < family_rank(b.family);
    if (a.label.total() != b.label.total()) return a.label.total() > b.label.total();
    return a.label.p_h > b.label.p_h;
  });
  return table;
}

std::vector<QcTableEntry> without_opposed(const std::vector<QcTableEntry>& table) {
  std::vector<QcTableEntry> out;
  std::copy_if(table.begin(), table.end(), std::back_inserter(out),
               [](const QcTableEntry& e) { return e.family != "H-F"; });
  return out;
}

std::map<CoherenceLabel, double> coherence_decompose(const SpinSystem& system, const ComplexMatrix& rho) {
  const auto dim = static_cast<Eigen::Index>(system.dimension());
  if (rho.rows() != dim || rho.cols() != dim) throw ValidationError("matrix does not match the spin system");
  const auto mh = twice_m(system, Species::H1);
  const auto mf = twice_m(system, Species::F19);
  std::map<CoherenceLabel, double> acc;
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index s = 0; s < dim; ++s) {
      const double v = std::norm(rho(r, s));
      if (v == 0.0) continue;
      acc[{(mh[r] - mh[s]) / 2, (mf[r] - mf[s]) / 2}] += v;
    }
  for (auto& [k, v] : acc) v = std::sqrt(v);
  return acc;
}

std::map<CoherenceLabel, double> coherence_decompose(const DensityState& state) {
  return coherence_decompose(state.system(), state.matrix());
}

std::map<int, double> total_order_magnitudes(const std::map<CoherenceLabel, double>& decomposition) {
  std::map<int, double> out;
  for (const auto& [k, v] : decomposition) out[k.total()] += v * v;
  for (auto& [k, v] : out) v = std::sqrt(v);
  return out;
}

ComplexMatrix filter_total_order(const SpinSystem& system, const ComplexMatrix& rho, int p) {
  const auto m2 = twice_m(system);
  ComplexMatrix out = ComplexMatrix::Zero(rho.rows(), rho.cols());
  for (Eigen::Index r = 0; r < rho.rows(); ++r)
    for (Eigen::Index s = 0; s < rho.cols(); ++s)
      if (m2[r] - m2[s] == 2 * p) out(r, s) = rho(r, s);
  return out;
}

std::vector<Peak> find_peaks(const Spectrum2D& spec, double threshold_rel) {
  if (!(threshold_rel > 0.0) || !(threshold_rel < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  const Eigen::MatrixXd mag = spec.amp.cwiseAbs();
  std::vector<Peak> peaks;
  if (mag.size() == 0) return peaks;
  const double top = mag.maxCoeff();
  if (!(top > 0.0)) return peaks;
  const double cut = threshold_rel * top;
  const Eigen::Index rows = mag.rows(), cols = mag.cols();
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double v = mag(i, j);
      if (v < cut) continue;
      bool is_max = true;
      for (Eigen::Index di = -1; di <= 1 && is_max; ++di)
        for (Eigen::Index dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const Eigen::Index a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= rows || b >= cols) continue;
          if (mag(a, b) > v) {
            is_max = false;
            break;
          }
        }
      if (is_max) peaks.push_back({spec.f1_hz[j], spec.f2_hz[i], v, v / top});
    }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
  return peaks;
}

std::vector<std::vector<QcTableEntry>> group_table(const std::vector<QcTableEntry>& table, double tol_hz) {
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return table[a].aliased_freq_hz < table[b].aliased_freq_hz; });
  std::vector<std::vector<QcTableEntry>> groups;
  double last = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& e = table[order[k]];
    if (k == 0 || e.aliased_freq_hz - last > tol_hz) groups.emplace_back();
    groups.back().push_back(e);
    last = e.aliased_freq_hz;
  }
  return groups;
}

double multiplet_halfwidth_hz(const SpinSystem& system) {
  double sum = 0.0;
  for (std::size_t i = 0; i < system.size(); ++i)
    for (std::size_t k = i + 1; k < system.size(); ++k) sum += std::abs(system.coupling(i, k));
  return 0.5 * sum;
}

AssignmentReport assign_peaks(const Spectrum2D& spec, const std::vector<QcTableEntry>& table,
                              const AssignOptions& options) {
  AssignmentReport rep;
  rep.threshold_rel = options.threshold_rel;
  const double bin = spec.f2_hz.size() > 1 ? std::abs(spec.f2_hz[1] - spec.f2_hz[0]) : 0.0;
  rep.tolerance_hz = std::max({2.0 * bin, options.min_window_hz, options.multiplet_halfwidth_hz + bin});
  rep.groups = group_table(table, rep.tolerance_hz);
  for (std::size_t g = 0; g < rep.groups.size(); ++g)
    if (rep.groups[g].size() > 1) rep.coincident_groups.push_back(g);

  std::set<std::size_t> hit;
  for (const auto& peak : find_peaks(spec, options.threshold_rel)) {
    std::optional<std::size_t> best_group;
    double best = rep.tolerance_hz;
    for (std::size_t g = 0; g < rep.groups.size(); ++g)
      for (const auto& e : rep.groups[g]) {
        const double d = std::abs(e.aliased_freq_hz - peak.f2_hz);
        if (d <= best) {
          best = d;
          best_group = g;
        }
      }
    if (!best_group) {
      rep.unassigned.push_back(peak);
      continue;
    }
    PeakAssignment pa;
    pa.peak = peak;
    pa.group = *best_group;
    for (const auto& e : rep.groups[*best_group]) {
      const int t1 = -e.label.total();
      if (options.selected_class && (((t1 - *options.selected_class) % 4) + 4) % 4 != 0) continue;
      pa.candidates.push_back({e, t1});
    }
    if (pa.candidates.empty()) {
      rep.unassigned.push_back(peak);
      continue;
    }
    pa.ambiguous = pa.candidates.size() > 1;
    hit.insert(pa.group);
    rep.assigned.push_back(std::move(pa));
  }
  rep.groups_hit.assign(hit.begin(), hit.end());
  return rep;
}

namespace {

nlohmann::json entry_json(const QcTableEntry& e) {
  return {{"label", e.name},
          {"family", e.family},
          {"p_h", e.label.p_h},
          {"p_f", e.label.p_f},
          {"true_hz", round12(e.true_freq_hz)},
          {"aliased_hz", round12(e.aliased_freq_hz)}};
}

nlohmann::json peak_json(const Peak& p) {
  return {{"f1_hz", round12(p.f1_hz)}, {"f2_hz", round12(p.f2_hz)}, {"relative", round12(p.relative)}};
}

}  // namespace

nlohmann::json to_json(const AssignmentReport& rep) {
  nlohmann::json out;
  out["tolerance_hz"] = round12(rep.tolerance_hz);
  out["threshold_rel"] = round12(rep.threshold_rel);
  out["distinct_frequencies"] = rep.groups_hit.size();
  auto& assigned = out["assigned"] = nlohmann::json::array();
  for (const auto& a : rep.assigned) {
    auto j = peak_json(a.peak);
    j["group"] = a.group;
    j["ambiguous"] = a.ambiguous;
    auto& c = j["candidates"] = nlohmann::json::array();
    for (const auto& cand : a.candidates) {
      auto e = entry_json(cand.entry);
      e["t1_order"] = cand.t1_order;
      c.push_back(std::move(e));
    }
    assigned.push_back(std::move(j));
  }
  auto& un = out["unassigned"] = nlohmann::json::array();
  for (const auto& p : rep.unassigned) un.push_back(peak_json(p));
  auto& groups = out["groups"] = nlohmann::json::array();
  for (std::size_t g = 0; g < rep.groups.size(); ++g) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& e : rep.groups[g]) labels.push_back(entry_json(e));
    groups.push_back({{"index", g},
                      {"entries", labels},
                      {"coincident", rep.groups[g].size() > 1},
                      {"hit", std::binary_search(rep.groups_hit.begin(), rep.groups_hit.end(), g)}});
  }
  out["coincident_sets"] = nlohmann::json::array();
  for (auto g : rep.coincident_groups) {
    nlohmann::json names = nlohmann::json::array();
    for (const auto& e : rep.groups[g]) names.push_back(e.name);
    out["coincident_sets"].push_back(names);
  }
  return out;
}

Eigen::VectorXd nnls(const RealMatrix& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = a.cols();
  if (a.rows() != b.size()) throw ValidationError("nnls: shape mismatch");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(a.rows(), n));

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(j);
    RealMatrix ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    Eigen::VectorXd zp = ap.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
  };

  for (int outer = 0; outer < 3 * n + 10; ++outer) {
    Eigen::VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index jmax = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[j] && w(j) > wmax) {
        wmax = w(j);
        jmax = j;
      }
    if (jmax < 0) break;
    passive[jmax] = true;
    Eigen::VectorXd z;
    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && z(j) <= 0.0) feasible = false;
      if (feasible) break;
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && z(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - z(j)));
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && std::abs(x(j)) <= tol) {
          passive[j] = false;
          x(j) = 0.0;
        }
    }
    x = z;
  }
  return x;
}

FitResult fit_composite_weights(const std::vector<Spectrum1D>& components, const Spectrum1D& target,
                                const std::vector<std::string>& names) {
  if (components.empty()) throw ValidationError("need at least one component");
  auto name_of = [&](std::size_t k) { return k < names.size() ? names[k] : fmt::format("component {}", k); };
  const auto& axis = components.front().freq_hz;
  const std::size_t n = axis.size();
  if (n == 0) throw ValidationError("empty component spectrum");
  const double span = std::abs(axis.back() - axis.front()) + 1.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    if (c.freq_hz.size() != n || c.amp.size() != n)
      throw ValidationError(fmt::format("{} does not share the first component's axis", name_of(k)));
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(c.freq_hz[i] - axis[i]) > 1e-9 * span)
        throw ValidationError(fmt::format("{} does not share the first component's axis", name_of(k)));
  }
  if (target.freq_hz.size() != target.amp.size() || target.freq_hz.empty())
    throw ValidationError("target spectrum is empty or malformed");

  FitResult out;
  const auto tmag = target.magnitude();
  std::vector<std::size_t> rows;
  std::vector<double> rhs;
  bool same = target.freq_hz.size() == n;
  for (std::size_t i = 0; same && i < n; ++i)
    if (std::abs(target.freq_hz[i] - axis[i]) > 1e-9 * span) same = false;
  if (same) {
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(i);
      rhs.push_back(tmag[i]);
    }
  } else {
    std::vector<std::size_t> idx(target.freq_hz.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return target.freq_hz[a] < target.freq_hz[b]; });
    std::vector<double> tf, tv;
    for (auto i : idx) {
      tf.push_back(target.freq_hz[i]);
      tv.push_back(tmag[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double f = axis[i];
      if (f < tf.front() || f > tf.back()) continue;
      auto it = std::lower_bound(tf.begin(), tf.end(), f);
      const auto hi = static_cast<std::size_t>(it - tf.begin());
      double v;
      if (tf[hi] == f || hi == 0) {
        v = tv[hi];
      } else {
        const double w = (f - tf[hi - 1]) / (tf[hi] - tf[hi - 1]);
        v = (1.0 - w) * tv[hi - 1] + w * tv[hi];
      }
      rows.push_back(i);
      rhs.push_back(v);
    }
    if (rows.empty()) throw ValidationError("target axis does not overlap the component axis");
    out.warnings.push_back(fmt::format("target resampled onto the component axis by linear interpolation ({} of {} points overlap)",
                                       rows.size(), n));
  }

  RealMatrix a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(components.size()));
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto mag = components[k].magnitude();
    const double top = *std::max_element(mag.begin(), mag.end());
    if (!(top > 0.0)) throw ValidationError(fmt::format("{} is identically zero", name_of(k)));
    for (std::size_t r = 0; r < rows.size(); ++r)
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = mag[rows[r]] / top;
  }
  Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  Eigen::VectorXd x = nnls(a, b);
  out.weights.assign(x.data(), x.data() + x.size());
  const double bn = b.norm();
  out.residual_rel = bn > 0.0 ? (a * x - b).norm() / bn : (a * x).norm();
  return out;
}

void write_spectrum1d_csv(const std::filesystem::path& path, const Spectrum1D& spec) {
  std::string out = "freq_hz,re,im,mag\n";
  for (std::size_t i = 0; i < spec.freq_hz.size(); ++i) {
    const auto a = spec.amp[i];
    out += fmt::format("{},{},{},{}\n", format_real(spec.freq_hz[i]), format_real(a.real()), format_real(a.imag()),
                       format_real(std::abs(a)));
  }
  write_text_file(path, out);
}

Spectrum1D read_spectrum1d_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(fmt::format("'{}' is empty", path.string()));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "freq_hz,re,im,mag")
    throw ValidationError(fmt::format("'{}' lacks the freq_hz,re,im,mag header", path.string()));
  Spectrum1D s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<double> v;
    std::stringstream ls(line);
    std::string cell;
    try {
      while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("'{}' line {}: not a number", path.string(), lineno));
    }
    if (v.size() != 4) throw ValidationError(fmt::format("'{}' line {}: expected 4 columns", path.string(), lineno));
    s.freq_hz.push_back(v[0]);
    s.amp.emplace_back(v[1], v[2]);
  }
  if (s.freq_hz.empty()) throw ValidationError(fmt::format("'{}' has no data rows", path.string()));
  return s;
}

void write_spectrum2d_csv(const std::filesystem::path& path, const Spectrum2D& spec) {
  std::string out = "f1_hz,f2_hz,re,im,mag\n";
  out.reserve(static_cast<std::size_t>(spec.amp.size()) * 64);
  for (std::size_t i = 0; i < spec.f2_hz.size(); ++i)
    for (std::size_t j = 0; j < spec.f1_hz.size(); ++j) {
      const auto a = spec.amp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out += fmt::format("{},{},{},{},{}\n", format_real(spec.f1_hz[j]), format_real(spec.f2_hz[i]),
                         format_real(a.real()), format_real(a.imag()), format_real(std::abs(a)));
    }
  write_text_file(path, out);
}

void write_qc_csv(const std::filesystem::path& path, const std::vector<QcTableEntry>& table) {
  std::string out = "p_h,p_f,label,true_hz,aliased_hz\n";
  for (const auto& e : table)
    out += fmt::format("{},{},{},{},{}\n", e.label.p_h, e.label.p_f, e.name, format_real(e.true_freq_hz),
                       format_real(e.aliased_freq_hz));
  write_text_file(path, out);
}

std::string format_qc_table(const std::vector<QcTableEntry>& table) {
  std::string out = fmt::format("{:<14} {:>4} {:>4} {:>14} {:>12}\n", "label", "p_h", "p_f", "true_hz", "aliased_hz");
  for (const auto& e : table)
    out += fmt::format("{:<14} {:>4} {:>4} {:>14} {:>12}\n", e.name, e.label.p_h, e.label.p_f,
                       format_real(e.true_freq_hz), format_real(e.aliased_freq_hz));
  return out;
}

}  // namespace ulfspin
