#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ulfspin/presets.hpp"
#include "ulfspin/spectra.hpp"

using namespace ulfspin;

namespace {

constexpr double kB0 = 91.18e-6;

struct Row {
  int p_h, p_f;
  double true_hz, aliased_hz;
  const char* label;
};

// Positive-order rows of the 3FPy multiple-quantum frequency table.
const Row kTable[] = {
    {0, 0, 0.0, 0.0, "T_{0}^{H}"},          {1, -1, 231.0, 231.0, "T_{0}^{HF}"},
    {1, 0, 3882.0, -118.0, "T_{+1}^{H}"},    {0, 1, 3651.5, -348.5, "T_{+1}^{HF}"},
    {2, -1, 4112.9, 112.9, "T_{+1}^{H-F}"},  {2, 0, 7764.4, -235.6, "T_{+2}^{H}"},
    {1, 1, 7533.7, -466.3, "T_{+2}^{HF}"},   {3, -1, 7995.1, -4.9, "T_{+2}^{H-F}"},
    {3, 0, 11647.0, -353.0, "T_{+3}^{H}"},   {2, 1, 11416.0, -584.0, "T_{+3}^{HF}"},
    {4, -1, 11877.4, -122.6, "T_{+3}^{H-F}"}, {4, 0, 15529.0, -471.0, "T_{+4}^{H}"},
    {3, 1, 15298.0, -702.0, "T_{+4}^{HF}"},  {4, 1, 19180.0, -820.0, "T_{+5}^{HF}"},
};

const QcTableEntry* find(const std::vector<QcTableEntry>& t, int ph, int pf) {
  for (const auto& e : t)
    if (e.label.p_h == ph && e.label.p_f == pf) return &e;
  return nullptr;
}

Fid tone(double nu, double decay_hz, std::size_t n, double dwell) {
  Fid f;
  f.dwell_s = dwell;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = k * dwell;
    f.samples.push_back(std::polar(std::exp(-kTwoPi / 2 * decay_hz * t), kTwoPi * nu * t));
  }
  return f;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double fwhm(const std::vector<double>& f, const std::vector<double>& y) {
  const std::size_t m = argmax(y);
  const double half = y[m] / 2;
  std::size_t l = m, r = m;
  while (l > 0 && y[l] > half) --l;
  while (r + 1 < y.size() && y[r] > half) ++r;
  const double fl = f[l] + (half - y[l]) / (y[l + 1] - y[l]) * (f[l + 1] - f[l]);
  const double fr = f[r - 1] + (y[r - 1] - half) / (y[r - 1] - y[r]) * (f[r] - f[r - 1]);
  return fr - fl;
}

}  // namespace

TEST_CASE("multiple-quantum frequency table at 4 kHz and 2 kHz") {
  auto sys = load_preset("3fpy");
  for (double sw : {4000.0, 2000.0}) {
    auto table = predict_qc_frequencies(sys, kB0, sw);
    CHECK(table.size() == 27);
    for (const auto& row : kTable)
      for (int sign : {1, -1}) {
        const auto* e = find(table, sign * row.p_h, sign * row.p_f);
        REQUIRE(e != nullptr);
        CHECK(std::abs(e->true_freq_hz - sign * row.true_hz) <= 1.0);
        CHECK(std::abs(e->aliased_freq_hz - sign * row.aliased_hz) <= 1.0);
        if (sign == 1) CHECK(e->name == row.label);
      }
    for (const auto& e : table) {
      CHECK(e.aliased_freq_hz >= -sw / 2);
      CHECK(e.aliased_freq_hz < sw / 2);
    }
  }
  auto t = predict_qc_frequencies(sys, kB0, 4000.0);
  CHECK(without_opposed(t).size() == 21);
  CHECK(find(t, 4, 1)->name == "T_{+5}^{HF}");
  CHECK(find(t, -4, -1)->name == "T_{-5}^{HF}");
  CHECK(find(t, -2, 1)->family == "H-F");
  CHECK(find(t, -1, 1)->family == "HF");
  CHECK(find(t, 0, -1)->family == "HF");
  CHECK_THROWS_AS(predict_qc_frequencies(sys, kB0, 0.0), ValidationError);
}

TEST_CASE("wide spectral width prevents folding") {
  auto table = predict_qc_frequencies(load_preset("3fpy"), kB0, 40000.0);
  for (const auto& e : table) CHECK(e.aliased_freq_hz == e.true_freq_hz);
}

TEST_CASE("alias_frequency") {
  CHECK(alias_frequency(3882.0, 4000.0) == doctest::Approx(-118.0));
  CHECK(alias_frequency(0.0, 4000.0) == 0.0);
  CHECK(alias_frequency(0.0, 123.0) == 0.0);
  CHECK(alias_frequency(7995.1, 4000.0) == doctest::Approx(-4.9));
  CHECK(alias_frequency(2000.0, 4000.0) == -2000.0);
  CHECK(alias_frequency(-2000.0, 4000.0) == -2000.0);
  CHECK_THROWS_AS(alias_frequency(1.0, -1.0), ValidationError);

  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1e5, 1e5);
  for (int k = 0; k < 2000; ++k) {
    const double nu = u(rng);
    const double sw = 100.0 + std::abs(u(rng));
    const double a = alias_frequency(nu, sw);
    CHECK(a >= -sw / 2);
    CHECK(a < sw / 2);
    CHECK(alias_frequency(a, sw) == a);
    if (a != -sw / 2) CHECK(std::abs(alias_frequency(-nu, sw) + a) <= 1e-9 * sw);
    const double m = (nu - a) / sw;
    CHECK(std::abs(m - std::round(m)) <= 1e-9);
  }
}

TEST_CASE("fft_1d tones, zero fill and broadening") {
  const double dwell = 50e-6;
  auto s = fft_1d(tone(1234.0, 0.0, 1000, dwell), 0.0);
  CHECK(s.freq_hz.size() == 1024);
  CHECK(s.freq_hz.front() == doctest::Approx(-10000.0));
  CHECK(s.freq_hz[512] == 0.0);
  const double df = s.freq_hz[1] - s.freq_hz[0];
  CHECK(std::abs(s.freq_hz[argmax(s.magnitude())] - 1234.0) <= df / 2);

  auto neg = fft_1d(tone(-3000.0, 0.0, 1024, dwell), 0.0);
  CHECK(std::abs(neg.freq_hz[argmax(neg.magnitude())] + 3000.0) <= df / 2);

  Fid zero;
  zero.dwell_s = dwell;
  zero.samples.assign(64, Complex{});
  for (auto a : fft_1d(zero, 1.0).amp) CHECK(a == Complex{});

  // Exponential apodization of an undamped tone: magnitude FWHM sqrt(3) b,
  // absorption FWHM b. Natural width adds linearly.
  const double b = 20.0;
  const std::size_t n = 1 << 16;
  const double dw = 2e-4;
  auto lor = fft_1d(tone(100.0, 0.0, n, dw), b);
  CHECK(fwhm(lor.freq_hz, lor.magnitude()) == doctest::Approx(std::sqrt(3.0) * b).epsilon(1e-3));
  std::vector<double> re;
  for (auto a : lor.amp) re.push_back(a.real());
  CHECK(fwhm(lor.freq_hz, re) == doctest::Approx(b).epsilon(1e-2));
  // Sampled damped exponential: X(f) = 1 / (1 - exp(-(pi b + i 2 pi (f - nu)) dt)) once the tail has decayed.
  for (std::size_t k = 0; k < n; k += 97) {
    const Complex z = std::exp(-Complex(kTwoPi / 2 * b, kTwoPi * (lor.freq_hz[k] - 100.0)) * dw);
    CHECK(std::abs(lor.amp[k] - 1.0 / (1.0 - z)) <= 1e-9 * std::abs(1.0 / (1.0 - z)));
  }
  auto nat = fft_1d(tone(100.0, 6.0, n, dw), b);
  CHECK(fwhm(nat.freq_hz, nat.magnitude()) == doctest::Approx(std::sqrt(3.0) * (b + 6.0)).epsilon(1e-3));
}

TEST_CASE("fft_2d separable input and conjugation") {
  TimeData2D d;
  const std::size_t n1 = 64, n2 = 128;
  const double dt1 = 0.25e-3, dwell = 50e-6;
  const double a = -500.0, bb = 2500.0;
  d.dwell_s = dwell;
  d.samples.resize(n1, n2);
  for (std::size_t i = 0; i < n1; ++i) {
    d.t1_s.push_back(0.02 + i * dt1);
    for (std::size_t j = 0; j < n2; ++j)
      d.samples(i, j) = std::polar(1.0, kTwoPi * a * d.t1_s[i]) * std::polar(1.0, kTwoPi * bb * j * dwell);
  }
  auto s = fft_2d(d, 0.0, 0.0);
  Eigen::Index r, c;
  s.amp.cwiseAbs().maxCoeff(&r, &c);
  CHECK(std::abs(s.f1_hz[c] - bb) <= (s.f1_hz[1] - s.f1_hz[0]) / 2);
  CHECK(std::abs(s.f2_hz[r] - a) <= (s.f2_hz[1] - s.f2_hz[0]) / 2);
  CHECK(s.f2_hz.front() == doctest::Approx(-2000.0));

  TimeData2D conj = d;
  conj.samples = d.samples.conjugate();
  auto sc = fft_2d(conj, 0.0, 0.0);
  sc.amp.cwiseAbs().maxCoeff(&r, &c);
  CHECK(std::abs(sc.f1_hz[c] + bb) <= (s.f1_hz[1] - s.f1_hz[0]) / 2);
  CHECK(std::abs(sc.f2_hz[r] - (-a)) <= (s.f2_hz[1] - s.f2_hz[0]) / 2);

  TimeData2D bad = d;
  bad.t1_s[3] += 1e-5;
  CHECK_THROWS_AS(fft_2d(bad, 0.0, 0.0), ValidationError);
}

TEST_CASE("coherence decomposition") {
  auto sys = load_preset("3fpy");
  auto iz = embed_operator(sys, 0, local::iz());
  auto dz = coherence_decompose(sys, iz);
  CHECK(dz.size() == 1);
  CHECK(dz.begin()->first == CoherenceLabel{0, 0});

  auto ip = embed_operator(sys, 1, local::raising());
  auto dp = coherence_decompose(sys, ip);
  CHECK(dp.size() == 1);
  CHECK(dp.begin()->first == CoherenceLabel{1, 0});

  auto f = *sys.index_of("F");
  ComplexMatrix t = embed_operator(sys, 0, local::raising()) * embed_operator(sys, 2, local::raising()) *
                    embed_operator(sys, f, local::lowering());
  auto dt = coherence_decompose(sys, t);
  CHECK(dt.size() == 1);
  CHECK(dt.begin()->first == CoherenceLabel{2, -1});
  CHECK(coherence_family(dt.begin()->first) == "H-F");

  std::mt19937 rng(2);
  std::normal_distribution<double> g;
  ComplexMatrix m(32, 32);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) m(i, j) = Complex(g(rng), g(rng));
  auto dm = coherence_decompose(sys, m);
  double sum = 0.0;
  for (const auto& [k, v] : dm) {
    sum += v * v;
    CHECK(std::abs(k.p_h) <= 4);
    CHECK(std::abs(k.p_f) <= 1);
  }
  CHECK(std::abs(sum - m.cwiseAbs2().sum()) <= 1e-12 * sum);
  double tsum = 0.0;
  for (const auto& [k, v] : total_order_magnitudes(dm)) tsum += v * v;
  CHECK(std::abs(tsum - sum) <= 1e-12 * sum);

  ComplexMatrix recon = ComplexMatrix::Zero(32, 32);
  for (int p = -5; p <= 5; ++p) recon += filter_total_order(sys, m, p);
  CHECK((recon - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("total order magnitudes are conserved under free evolution") {
  auto sys = load_preset("3fpy");
  auto h = build_hamiltonian(sys, kB0);
  std::mt19937 rng(4);
  std::normal_distribution<double> g;
  ComplexMatrix a(32, 32);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) a(i, j) = Complex(g(rng), g(rng));
  ComplexMatrix rho = a * a.adjoint();
  DensityState s(sys, rho / rho.trace());
  auto before = total_order_magnitudes(coherence_decompose(s));
  for (double t : {1e-4, 3e-3, 0.17}) {
    auto after = total_order_magnitudes(coherence_decompose(evolve(s, h, t)));
    for (const auto& [p, v] : before) CHECK(std::abs(after[p] - v) <= 1e-10);
  }
}

TEST_CASE("peak finding and assignment") {
  auto table = without_opposed(predict_qc_frequencies(load_preset("3fpy"), kB0, 4000.0));
  Spectrum2D empty;
  empty.f1_hz = centered_axis(16, 50e-6);
  empty.f2_hz = centered_axis(64, 0.25e-3);
  empty.amp = ComplexMatrix::Zero(64, 16);
  auto none = assign_peaks(empty, table, {});
  CHECK(none.assigned.empty());
  CHECK(none.unassigned.empty());
  CHECK(none.groups_hit.empty());

  auto groups = group_table(table, 6.0);
  CHECK(groups.size() == 15);
  std::size_t pairs = 0;
  for (const auto& gr : groups)
    if (gr.size() > 1) {
      CHECK(gr.size() == 2);
      ++pairs;
    }
  CHECK(pairs == 6);

  // Synthetic spectrum with lines at chosen aliased frequencies.
  TimeData2D d;
  const std::size_t n1 = 4096, n2 = 16;
  d.dwell_s = 50e-6;
  d.samples = ComplexMatrix::Zero(n1, n2);
  const double lines[] = {-820.0, 584.0, -235.6, 57.0};
  for (std::size_t i = 0; i < n1; ++i) {
    d.t1_s.push_back(i * 0.25e-3);
    for (double f : lines)
      for (std::size_t j = 0; j < n2; ++j) d.samples(i, j) += std::polar(1.0, kTwoPi * f * d.t1_s[i]);
  }
  auto spec = fft_2d(d, 0.0, 2.0);
  auto rep = assign_peaks(spec, table, {0.05, 6.0, 0.0, std::nullopt});
  CHECK(rep.tolerance_hz == doctest::Approx(6.0));
  CHECK(rep.groups_hit.size() == 3);
  CHECK(rep.unassigned.size() >= 1);
  bool saw_820 = false, saw_amb = false;
  for (const auto& a : rep.assigned) {
    if (std::abs(a.peak.f2_hz + 820.0) < 1.0) {
      saw_820 = true;
      REQUIRE(a.candidates.size() == 1);
      CHECK(a.candidates[0].entry.name == "T_{+5}^{HF}");
      CHECK(a.candidates[0].t1_order == -5);
      CHECK(!a.ambiguous);
    }
    if (std::abs(a.peak.f2_hz + 235.6) < 1.0) {
      saw_amb = a.ambiguous;
      CHECK(a.candidates.size() == 2);
    }
  }
  CHECK(saw_820);
  CHECK(saw_amb);

  // A class filter resolves the coincident pair at -235.6 / -231.
  auto filtered = assign_peaks(spec, table, {0.05, 6.0, 0.0, 2});
  for (const auto& a : filtered.assigned)
    if (std::abs(a.peak.f2_hz + 235.6) < 1.0) {
      REQUIRE(a.candidates.size() == 1);
      CHECK(a.candidates[0].entry.name == "T_{+2}^{H}");
      CHECK(!a.ambiguous);
    }
  auto j = to_json(rep);
  CHECK(j["distinct_frequencies"] == 3);
  CHECK(j["coincident_sets"].size() == 6);
  CHECK_THROWS_AS(find_peaks(spec, 0.0), ValidationError);
}

TEST_CASE("nnls") {
  RealMatrix a(4, 2);
  a << 1, 0, 0, 1, 1, 1, 0, 0;
  Eigen::VectorXd b(4);
  b << 1, -1, 0, 0;
  auto x = nnls(a, b);
  CHECK(x(0) >= 0.0);
  CHECK(x(1) == 0.0);
  CHECK(x(0) == doctest::Approx(0.5));

  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RealMatrix m(50, 4);
  for (int i = 0; i < 50; ++i)
    for (int k = 0; k < 4; ++k) m(i, k) = u(rng);
  Eigen::VectorXd w(4);
  w << 0.3, 0.0, 1.2, 0.05;
  auto rec = nnls(m, m * w);
  CHECK((rec - w).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("composite weight fitting") {
  const std::size_t n = 512;
  auto make = [&](double center, double width) {
    Spectrum1D s;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = -1000.0 + i * 4.0;
      s.freq_hz.push_back(f);
      s.amp.emplace_back(0.0, 3.0 / (1.0 + std::pow((f - center) / width, 2)));
    }
    return s;
  };
  auto c1 = make(-300.0, 10.0);
  auto c2 = make(50.0, 20.0);
  auto c3 = make(60.0, 80.0);
  auto norm = [](const Spectrum1D& s) {
    auto m = s.magnitude();
    double top = *std::max_element(m.begin(), m.end());
    for (auto& v : m) v /= top;
    return m;
  };
  Spectrum1D target = c1;
  auto m1 = norm(c1), m2 = norm(c2);
  for (std::size_t i = 0; i < n; ++i) target.amp[i] = 0.5 * m1[i] + 0.25 * m2[i];
  auto fit = fit_composite_weights({c1, c2}, target);
  CHECK(fit.weights[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(fit.weights[1] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(fit.warnings.empty());

  auto self = fit_composite_weights({c1}, c1);
  CHECK(std::abs(self.weights[0] - std::abs(c1.amp[argmax(c1.magnitude())])) <= 1e-12);
  Spectrum1D unit = c1;
  auto um = norm(c1);
  for (std::size_t i = 0; i < n; ++i) unit.amp[i] = um[i];
  auto one = fit_composite_weights({c1}, unit);
  CHECK(one.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(one.residual_rel <= 1e-12);

  // Adding a component never increases the residual.
  Spectrum1D messy = target;
  for (std::size_t i = 0; i < n; ++i) messy.amp[i] += 0.1 * std::sin(i * 0.05);
  double r1 = fit_composite_weights({c1}, messy).residual_rel;
  double r2 = fit_composite_weights({c1, c2}, messy).residual_rel;
  double r3 = fit_composite_weights({c1, c2, c3}, messy).residual_rel;
  CHECK(r2 <= r1 + 1e-12);
  CHECK(r3 <= r2 + 1e-12);

  // Target on a shifted, finer axis is resampled.
  Spectrum1D fine;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const double f = -900.0 + i * 2.0;
    fine.freq_hz.push_back(f);
    fine.amp.emplace_back(0.5 / (1.0 + std::pow((f + 300.0) / 10.0, 2)), 0.0);
  }
  auto rs = fit_composite_weights({c1, c2}, fine);
  CHECK(!rs.warnings.empty());
  CHECK(rs.weights[0] == doctest::Approx(0.5).epsilon(1e-3));

  Spectrum1D zero = c1;
  for (auto& a : zero.amp) a = 0.0;
  try {
    fit_composite_weights({c1, zero}, target, {"substrate", "h2"});
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("h2") != std::string::npos);
  }
  Spectrum1D shorter = c1;
  shorter.freq_hz.pop_back();
  shorter.amp.pop_back();
  CHECK_THROWS_AS(fit_composite_weights({c1, shorter}, target), ValidationError);
  CHECK_THROWS_AS(fit_composite_weights({}, target), ValidationError);
}

TEST_CASE("csv round trip") {
  auto dir = std::filesystem::temp_directory_path() / "ulfspin_test_spectra";
  Spectrum1D s;
  for (int i = 0; i < 10; ++i) {
    s.freq_hz.push_back(i * 1.5 - 3.0);
    s.amp.emplace_back(std::sin(i), std::cos(i) / 3.0);
  }
  write_spectrum1d_csv(dir / "s.csv", s);
  auto back = read_spectrum1d_csv(dir / "s.csv");
  REQUIRE(back.freq_hz.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(back.freq_hz[i] == doctest::Approx(s.freq_hz[i]).epsilon(1e-11));
    CHECK(std::abs(back.amp[i] - s.amp[i]) <= 1e-11);
  }
  write_qc_csv(dir / "qc.csv", predict_qc_frequencies(load_preset("3fpy"), kB0, 4000.0));
  CHECK(std::filesystem::file_size(dir / "qc.csv") > 100);
  CHECK_THROWS_AS(read_spectrum1d_csv(dir / "qc.csv"), ValidationError);
  std::filesystem::remove_all(dir);
}
