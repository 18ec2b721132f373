#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <locale>
#include <numbers>
#include <random>
#include <sstream>

#include "dual_path.hpp"
#include "rmhd/diagnostics.hpp"
#include "test_util.hpp"

using namespace rmhd;
using namespace rmhd::testing;

namespace {

const double kPi = std::numbers::pi;

/// Trapezoid in R and Z with weight R, mean over the phi samples times 2 pi.
double integ(const Ref& r, const Arr& a) {
  const Grid& g = r.grid();
  double s = 0;
  for (int k = 0; k < a.K; ++k)
    for (int i = 0; i < a.nr; ++i)
      for (int j = 0; j < a.nz; ++j) {
        const double wi = (i == 0 || i == a.nr - 1) ? 0.5 : 1.0;
        const double wj = (j == 0 || j == a.nz - 1) ? 0.5 : 1.0;
        s += wi * wj * g.R(i) * a(k, i, j);
      }
  return s * g.hR() * g.hZ() * 2 * kPi / a.K;
}

State random_state(const Grid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  State s(g);
  s.psi() = random_smooth(g, rng, 0.3);
  s.u() = random_smooth(g, rng, 0.1);
  s.j() = random_smooth(g, rng, 1.0);
  s.w() = random_smooth(g, rng, 1.0);
  s.rho() = plus_const(random_smooth(g, rng, 0.1), 1.0);
  s.p() = plus_const(random_smooth(g, rng, 0.05), 0.5);
  s.vpar() = random_smooth(g, rng, 0.2);
  return s;
}

PhysParams params() {
  PhysParams p;
  p.F0 = 1.4;
  p.gamma = 5.0 / 3.0;
  p.eta0 = 3e-3;
  p.nu0 = 2e-3;
  return p;
}

}  // namespace

TEST(Energies, ZeroStateGivesZeros) {
  const Grid g = unit_grid(9);
  const Model m(g, params(), ModelFlags{});
  const EnergyReport r = compute_energies(m, State(g));
  for (double x : {r.e_mag_0, r.e_mag_n, r.e_kin_0, r.e_kin_n, r.e_kin_par, r.e_kin_cross,
                   r.e_internal, r.e_total(), r.mass, r.helicity, r.dissipation_expected})
    EXPECT_EQ(x, 0.0);
}

TEST(Energies, LinearFluxMagneticEnergy) {
  // psi = Z: int 1/(2R^2) R dR dZ dphi = pi ln 2
  double prev = 0;
  for (int n : {15, 31, 63}) {
    const Grid g = unit_grid(n);
    State s(g);
    s.psi() = from_fn(g, [](double, double Z) { return Z; });
    ClosedField ring(g);
    for (int i = 0; i < g.nr(); ++i)
      for (int j = 0; j < g.nz(); ++j) ring.c[0][ring.idx(i, j)] = g.Z(j);
    StateBoundary b = StateBoundary::fixed(g, ring, ClosedField(g), ClosedField(g));
    const Model m(g, params(), ModelFlags{}, b);
    const EnergyReport r = compute_energies(m, s);
    const double err = std::abs(r.e_mag_0 - kPi * std::log(2.0));
    // trapezoid bound (b-a) h^2 / 12 max|f''|, f = 2 pi / (2R)
    EXPECT_LE(err, g.hR() * g.hR() / 12 * 2 * kPi) << n;
    EXPECT_EQ(r.e_mag_n, 0.0);
    if (prev > 0) {
      EXPECT_NEAR(prev / err, 4.0, 0.3);
    }
    prev = err;
  }
}

TEST(Energies, UniformInternalEnergyAndMass) {
  const Grid g = unit_grid(11);
  ClosedField one(g);
  for (double& x : one.c[0]) x = 1.0;
  StateBoundary b = StateBoundary::fixed(g, ClosedField(g), one, one);
  State s(g);
  s.rho() = plus_const(SpectralField(g), 1.0);
  s.p() = plus_const(SpectralField(g), 1.0);
  const Model m(g, params(), ModelFlags{}, b);
  const EnergyReport r = compute_energies(m, s);
  EXPECT_NEAR(r.e_internal, 1.5 * 3 * kPi, 1e-12);
  EXPECT_NEAR(r.mass, 3 * kPi, 1e-12);
  EXPECT_EQ(r.e_kin_par, 0.0);
}

TEST(Energies, DualPathAgainstNodeLoops) {
  const Grid g = unit_grid(13);
  const State s = random_state(g, 21);
  const PhysParams P = params();
  const Model m(g, P, ModelFlags{});
  const EnergyReport r = compute_energies(m, s);

  const Ref ref(g);
  const Arr psi = ref.sample(s.psi()), u = ref.sample(s.u()), rho = ref.sample(s.rho()),
            p = ref.sample(s.p()), v = ref.sample(s.vpar()), j = ref.sample(s.j()),
            w = ref.sample(s.w());
  const Arr gu = ref.gd(u, u), gp = ref.gd(psi, psi), gup = ref.gd(u, psi);
  Arr kin = ref.zeros(), par = ref.zeros(), cross = ref.zeros(), mag = ref.zeros(), hel = ref.zeros(),
      diss = ref.zeros();
  const Arr chi = ref.rpow(ref.dphi(psi), -2);
  const Arr gchi = ref.gd(chi, chi);
  for (int k = 0; k < g.N_phi; ++k)
    for (int i = 0; i < g.nr(); ++i)
      for (int jj = 0; jj < g.nz(); ++jj) {
        const double R = g.R(i);
        kin(k, i, jj) = 0.5 * R * R * rho(k, i, jj) * gu(k, i, jj);
        const double B2 = (gp(k, i, jj) + P.F0 * P.F0) / (R * R);
        par(k, i, jj) = 0.5 * rho(k, i, jj) * B2 * v(k, i, jj) * v(k, i, jj);
        cross(k, i, jj) = -rho(k, i, jj) * v(k, i, jj) * gup(k, i, jj);
        mag(k, i, jj) = 0.5 * gp(k, i, jj) / (R * R);
        hel(k, i, jj) = P.F0 * psi(k, i, jj) / (R * R);
        diss(k, i, jj) = P.nu0 * w(k, i, jj) * w(k, i, jj) +
                         P.eta0 * (j(k, i, jj) * j(k, i, jj) / (R * R) + gchi(k, i, jj));
      }
  auto near = [](double a, double b) { EXPECT_NEAR(a, b, 1e-12 * (1 + std::abs(b))); };
  near(r.e_kin_pol(), integ(ref, kin));
  near(r.e_kin_par, integ(ref, par));
  near(r.e_kin_cross, integ(ref, cross));
  near(r.e_mag(), integ(ref, mag));
  near(r.helicity, integ(ref, hel));
  near(r.dissipation_expected, integ(ref, diss));
  near(r.mass, integ(ref, rho));
  near(r.e_internal, integ(ref, p) / (P.gamma - 1));
  EXPECT_GE(r.e_mag_0, 0);
  EXPECT_GE(r.e_mag_n, 0);
  EXPECT_GE(r.e_kin_n, 0);
  EXPECT_GE(r.e_kin_pol(), 0);
  EXPECT_GT(r.dissipation_expected, 0);
}

TEST(Energies, TotalIsSumOfComponents) {
  const Grid g = unit_grid(9);
  const EnergyReport r = compute_energies(Model(g, params(), ModelFlags{}), random_state(g, 4));
  const double sum = r.e_mag_0 + r.e_mag_n + r.e_kin_0 + r.e_kin_n + r.e_kin_par + r.e_kin_cross + r.e_internal;
  EXPECT_NEAR(r.e_total(), sum, 1e-12 * std::abs(sum));
}

TEST(Energies, ModeZeroStateHasNoHarmonicEnergy) {
  const Grid g = unit_grid(9);
  State s = random_state(g, 5);
  for (auto& f : s.f) {
    std::fill(f.cc.begin(), f.cc.end(), 0.0);
    std::fill(f.cs.begin(), f.cs.end(), 0.0);
  }
  const EnergyReport r = compute_energies(Model(g, params(), ModelFlags{}), s);
  EXPECT_EQ(r.e_mag_n, 0.0);
  EXPECT_EQ(r.e_kin_n, 0.0);
  EXPECT_GT(r.e_mag_0, 0.0);
  EXPECT_GT(r.e_kin_0, 0.0);
}

TEST(Energies, HarmonicEnergyIsQuadraticInAmplitude) {
  const Grid g = unit_grid(9);
  const Model m(g, params(), ModelFlags{});
  State s = random_state(g, 6);
  const State base = s;
  auto scaled = [&](double a) {
    State t = base;
    for (double& x : t.u().cc) x *= a;
    for (double& x : t.u().cs) x *= a;
    for (double& x : t.psi().cc) x *= a;
    for (double& x : t.psi().cs) x *= a;
    return compute_energies(m, t);
  };
  const EnergyReport a = scaled(1e-3), b = scaled(2e-3);
  EXPECT_NEAR(b.e_kin_n / a.e_kin_n, 4.0, 1e-10);
  EXPECT_NEAR(b.e_mag_n / a.e_mag_n, 4.0, 1e-10);
}

TEST(Energies, MagneticSplitHasNoCrossTerm) {
  const Grid g = unit_grid(9);
  const State s = random_state(g, 8);
  const Model m(g, params(), ModelFlags{});
  const Sampled sm = m.sample(s);
  const double full = 0.5 * integrate_dW(times_rpow(gdot(sm.psi(), sm.psi()), -2));
  const EnergyReport r = compute_energies(m, s);
  EXPECT_NEAR(r.e_mag(), full, 1e-13 * full);
}

TEST(Energies, FourFieldModelHasNoParallelEnergy) {
  const Grid g = unit_grid(9);
  ModelFlags f;
  f.with_vpar = false;
  f.neglected_terms = false;
  const EnergyReport r = compute_energies(Model(g, params(), f), random_state(g, 9));
  EXPECT_EQ(r.e_kin_par, 0.0);
  EXPECT_EQ(r.e_kin_cross, 0.0);
}

TEST(Balance, IdenticalReportsNoDissipation) {
  EnergyReport a;
  a.e_internal = 3.0;
  a.e_mag_0 = 1.5;
  EXPECT_EQ(energy_balance_residual(a, a, 0.1, 0.0), 0.0);
}

TEST(Balance, LinearDecayIsBalanced) {
  // E(t) = E0 - D t
  const double D = 0.25, dt = 0.5;
  EnergyReport a, b;
  a.e_internal = 10.0;
  b.e_internal = 10.0 - D * dt;
  EXPECT_NEAR(energy_balance_residual(b, a, dt, D), 0.0, 1e-15);
  EXPECT_NEAR(energy_balance_residual(b, a, dt, 0.0), -D, 1e-15);
}

TEST(Balance, BlendIsCoefficientwise) {
  const Grid g = unit_grid(5);
  const State a = random_state(g, 1), b = random_state(g, 2);
  const State h = blend(a, b, 0.5);
  for (int v = 0; v < kNumVars; ++v)
    for (int k = 0; k < 3; ++k)
      for (std::size_t n = 0; n < a[v].size(); ++n)
        EXPECT_DOUBLE_EQ(h[v].comp(k)[n], 0.5 * a[v].comp(k)[n] + 0.5 * b[v].comp(k)[n]);
  EXPECT_EQ(blend(a, b, 0.0), a);
  EXPECT_EQ(blend(a, b, 1.0), b);
}

namespace {

struct CommaPunct : std::numpunct<char> {
  char do_decimal_point() const override { return ','; }
  char do_thousands_sep() const override { return '.'; }
  std::string do_grouping() const override { return "\3"; }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string t;
  while (std::getline(ss, t, ',')) out.push_back(t);
  return out;
}

}  // namespace

TEST(Csv, HeaderOnceAndColumns) {
  std::ostringstream os;
  CsvWriter w(os);
  EnergyReport r;
  r.e_mag_0 = 1.0 / 3.0;
  w.write(0, 0.0, 0.1, r, 0.0, {});
  w.write(1, 0.1, 0.1, r, 0.0, {2, 14, 1});
  std::istringstream is(os.str());
  std::string l0, l1, l2, extra;
  std::getline(is, l0);
  std::getline(is, l1);
  std::getline(is, l2);
  EXPECT_FALSE(std::getline(is, extra));
  EXPECT_EQ(l0, CsvWriter::kHeader);
  EXPECT_EQ(split(l0).size(), 17u);
  EXPECT_EQ(split(l1).size(), 17u);
  const auto f = split(l2);
  ASSERT_EQ(f.size(), 17u);
  EXPECT_EQ(f[0], "1");
  EXPECT_EQ(f[14], "2");
  EXPECT_EQ(f[15], "14");
  EXPECT_EQ(f[16], "1");
  EXPECT_EQ(f[3], "3.3333333333333331e-01");
}

TEST(Csv, FloatsRoundTripBitExactly) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int k = 0; k < 2000; ++k) {
    const double x = U(rng) * std::pow(10.0, int(U(rng) * 300));
    const std::string s = format_double(x);
    const double y = std::strtod(s.c_str(), nullptr);
    EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0) << s;
  }
  EXPECT_EQ(format_double(0.0), "0.0000000000000000e+00");
  EXPECT_EQ(format_double(-2.5), "-2.5000000000000000e+00");
}

TEST(Csv, IndependentOfStreamLocale) {
  EnergyReport r;
  r.e_internal = 1234.5;
  std::ostringstream plain, odd;
  odd.imbue(std::locale(std::locale::classic(), new CommaPunct));
  CsvWriter(plain).write(12345, 1.5, 0.25, r, -1e-9, {1, 2345, 3});
  CsvWriter(odd).write(12345, 1.5, 0.25, r, -1e-9, {1, 2345, 3});
  EXPECT_EQ(plain.str(), odd.str());
  EXPECT_NE(plain.str().find("\n12345,1.5000000000000000e+00,"), std::string::npos);
}

TEST(Csv, WriteFailureThrows) {
  std::ostringstream os;
  os.setstate(std::ios::badbit);
  CsvWriter w(os);
  EXPECT_THROW(w.write(0, 0, 1, EnergyReport{}, 0, {}), IoError);
}
