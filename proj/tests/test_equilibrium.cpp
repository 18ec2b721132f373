#include <gtest/gtest.h>

#include <cmath>

#include "rmhd/diagnostics.hpp"
#include "rmhd/equilibrium.hpp"
#include "test_util.hpp"

using namespace rmhd;
using namespace rmhd::testing;

namespace {

double gs_linf_error(int n) {
  const Grid g = unit_grid(n);
  EquilibriumSpec sp;
  sp.rhs = GsRhsKind::manufactured;
  const SpectralField psi = solve_grad_shafranov(sp, g);
  double e = 0;
  for (int i = 0; i < g.NR; ++i)
    for (int j = 0; j < g.NZ; ++j) {
      const double R = g.R(i + 1), Z = g.Z(j + 1);
      // independent oracle: the closed form, not manufactured_psi
      const double ex = std::sin(std::numbers::pi * (R - 1.0)) * std::sin(std::numbers::pi * Z);
      e = std::max(e, std::abs(psi.c0[psi.idx(i, j)] - ex));
    }
  return e;
}

double max_abs_vol(const Vol& v) {
  double m = 0;
  for (double x : v.v) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_interior(const Vol& v, const Grid& g) {
  double m = 0;
  for (int k = 0; k < v.L->nphi; ++k)
    for (int i = 1; i <= g.NR; ++i)
      for (int j = 1; j <= g.NZ; ++j) m = std::max(m, std::abs(v(k, i, j)));
  return m;
}

}  // namespace

TEST(GradShafranov, MatrixMatchesDeltaStar) {
  const Grid g = unit_grid(9);
  const auto L = make_layout(g);
  const SpectralField f = from_fn(g, [](double R, double Z) { return R * R * Z + std::cos(3 * Z) * R; });
  const SpectralField ref = delta_star(f, L);
  const auto A = detail::gs_matrix(g, 0.0);
  Eigen::VectorXd x(g.NR * g.NZ);
  for (int n = 0; n < g.NR * g.NZ; ++n) x[n] = f.c0[std::size_t(n)];
  const Eigen::VectorXd y = A * x;
  for (int n = 0; n < g.NR * g.NZ; ++n) EXPECT_NEAR(y[n], ref.c0[std::size_t(n)], 1e-9 * (1 + std::abs(y[n])));
}

TEST(GradShafranov, ZeroRhsGivesZero) {
  const Grid g = unit_grid(17);
  const SpectralField psi = solve_gs(g, [](double, double) { return 0.0; });
  EXPECT_EQ(max_abs(psi.c0), 0.0);
  EXPECT_EQ(max_abs(psi.cc), 0.0);
  EXPECT_EQ(max_abs(psi.cs), 0.0);
}

TEST(GradShafranov, ManufacturedSecondOrder) {
  const double e17 = gs_linf_error(17), e33 = gs_linf_error(33), e65 = gs_linf_error(65);
  const double o1 = std::log2(e17 / e33), o2 = std::log2(e33 / e65);
  EXPECT_NEAR(o1, 2.0, 0.2);
  EXPECT_NEAR(o2, 2.0, 0.2);
  EXPECT_LT(e65, 1e-3);
}

TEST(GradShafranov, Linearity) {
  const Grid g = unit_grid(17);
  auto f = [](double R, double Z) { return -R * R + Z; };
  const SpectralField a = solve_gs(g, f);
  const SpectralField b = solve_gs(g, [&](double R, double Z) { return 2 * f(R, Z); });
  const double scale = max_abs(a.c0);
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_NEAR(b.c0[n], 2 * a.c0[n], 1e-12 * scale);
}

TEST(GradShafranov, ShiftedOperatorResidual) {
  const Grid g = unit_grid(17);
  const auto L = make_layout(g);
  EquilibriumSpec sp;
  sp.c1 = 1.5;
  sp.c2 = 2.0;
  const SpectralField psi = solve_grad_shafranov(sp, g);
  const SpectralField lap = delta_star(psi, L);
  for (int i = 0; i < g.NR; ++i)
    for (int j = 0; j < g.NZ; ++j) {
      const std::size_t n = psi.idx(i, j);
      const double R = g.R(i + 1);
      EXPECT_NEAR(lap.c0[n] + sp.c2 * psi.c0[n], -sp.c1 * R * R, 1e-9);
    }
}

TEST(Profiles, InfiniteWidthIsConstant) {
  const Grid g = unit_grid(9);
  EquilibriumSpec sp;
  sp.rho.width = std::numeric_limits<double>::infinity();
  sp.T.width = std::numeric_limits<double>::infinity();
  const SpectralField psi = from_fn(g, [](double R, double Z) { return R * Z; });
  const Profiles pr = init_profiles(psi, sp);
  const double rho = sp.rho.floor + sp.rho.amp / 2, T = sp.T.floor + sp.T.amp / 2;
  for (std::size_t n = 0; n < psi.size(); ++n) {
    EXPECT_EQ(pr.rho.c0[n], rho);
    EXPECT_EQ(pr.p.c0[n], rho * T);
  }
}

TEST(Profiles, ZeroPsiUniform) {
  const Grid g = unit_grid(9);
  EquilibriumSpec sp;
  const Profiles pr = init_profiles(SpectralField(g), sp);
  for (std::size_t n = 0; n < pr.rho.size(); ++n) {
    EXPECT_EQ(pr.rho.c0[n], pr.rho.c0[0]);
    EXPECT_EQ(pr.p.c0[n], pr.p.c0[0]);
  }
  EXPECT_EQ(max_abs(pr.rho.cc), 0.0);
  EXPECT_EQ(max_abs(pr.p.cs), 0.0);
}

TEST(Profiles, DensityMonotoneInPsi) {
  EquilibriumSpec sp;
  double prev = -1;
  for (int k = -200; k <= 200; ++k) {
    const double r = sp.rho(k * 1e-3);
    EXPECT_GE(r, prev);
    EXPECT_GT(r, 0.0);
    prev = r;
  }
  EXPECT_THROW((TanhProfile{0, 0, 1, 1}.validate("rho")), ConfigError);
}

TEST(Seed, ZeroAmplitudeBitwise) {
  const Grid g = unit_grid(9);
  State s(g);
  s.psi() = from_fn(g, [](double R, double Z) { return R + Z; });
  const State t = seed_perturbation(s, g, 0.0);
  EXPECT_TRUE(t == s);
  EXPECT_THROW(seed_perturbation(s, g, -1.0), ConfigError);
}

TEST(Seed, KineticEnergyQuadratic) {
  const Grid g = unit_grid(17);
  EquilibriumSpec sp;
  sp.perturbation = 0;
  PhysParams par;
  Model m(g, par, ModelFlags{}, equilibrium_boundary(g, sp));
  const State s0 = initial_state(m, sp);
  EXPECT_EQ(compute_energies(m, s0).e_kin_n, 0.0);
  sp.perturbation = 1e-3;
  const double e1 = compute_energies(m, initial_state(m, sp)).e_kin_n;
  sp.perturbation = 2e-3;
  const double e2 = compute_energies(m, initial_state(m, sp)).e_kin_n;
  EXPECT_GT(e1, 0.0);
  EXPECT_NEAR(e2 / e1, 4.0, 1e-9);
  // mode 0 untouched
  const State s1 = initial_state(m, sp);
  EXPECT_EQ(max_abs_diff(s1.u(), s0.u()), max_abs(s1.u().cc));
  EXPECT_EQ(max_abs(s1.u().c0), 0.0);
}

TEST(Equilibrium, LinearPressureIsSteady) {
  const Grid g = unit_grid(17);
  EquilibriumSpec sp;
  sp.pressure = PressureKind::linear;
  sp.perturbation = 0;
  PhysParams par;
  par.F0 = 3.0;
  Model m(g, par, ModelFlags{}, equilibrium_boundary(g, sp));
  const State s = initial_state(m, sp);
  const Sampled a = m.sample(s);
  const double scale = max_abs_vol(a.p()) + max_abs_vol(a.j());
  EXPECT_LT(max_abs_vol(m.rhs_psi(a)), 1e-12 * scale);
  EXPECT_LT(max_abs_vol(m.rhs_vorticity(a)), 1e-11 * scale);
  EXPECT_LT(max_abs_vol(m.rhs_density(a)), 1e-12 * scale);
  EXPECT_LT(max_abs_vol(m.rhs_pressure(a)), 1e-12 * scale);
  EXPECT_LT(max_abs_interior(m.constraint_j(a), g), 1e-10 * scale);
}

TEST(Equilibrium, CurrentRingMatchesGsRhs) {
  const Grid g = unit_grid(9);
  EquilibriumSpec sp;
  const StateBoundary b = equilibrium_boundary(g, sp);
  for (int i = 0; i < g.nr(); ++i)
    for (int k = 0; k < g.nz(); ++k) {
      if (!g.is_boundary(i, k)) continue;
      const double R = g.R(i);
      EXPECT_DOUBLE_EQ(b.ring[kJ].c[0][b.ring[kJ].idx(i, k)], -sp.c1 * R * R);
      EXPECT_EQ(b.ring[kPsi].c[0][b.ring[kPsi].idx(i, k)], 0.0);
      EXPECT_EQ(b.ring[kP].c[0][b.ring[kP].idx(i, k)], sp.p_edge());
    }
}

TEST(Pedestal, GsResidual) {
  const Grid g = unit_grid(17);
  const auto L = make_layout(g);
  EquilibriumSpec sp;
  sp.rhs = GsRhsKind::pedestal;
  sp.pressure = PressureKind::pedestal;
  sp.c1 = 20.0;
  sp.ped_center = 0.03;
  sp.ped_width = 0.01;
  const SpectralField psi = solve_grad_shafranov(sp, g);
  const SpectralField lap = delta_star(psi, L);
  double scale = 0;
  for (double x : lap.c0) scale = std::max(scale, std::abs(x));
  ASSERT_GT(scale, 1.0);
  for (int i = 0; i < g.NR; ++i)
    for (int j = 0; j < g.NZ; ++j) {
      const std::size_t n = psi.idx(i, j);
      const double R = g.R(i + 1), x = psi.c0[n];
      const double dp = 10.0 * (1.0 - std::tanh((x - 0.03) / 0.01));
      EXPECT_NEAR(lap.c0[n], -R * R * dp, 1e-10 * scale);
    }
}

TEST(Pedestal, PressureDerivativeAndEdge) {
  EquilibriumSpec sp;
  sp.pressure = PressureKind::pedestal;
  sp.rhs = GsRhsKind::pedestal;
  sp.c1 = 8.0;
  EXPECT_DOUBLE_EQ(sp.pressure_at(0.0), sp.p_edge());
  const double h = 1e-6;
  for (double x : {-0.02, 0.0, 0.03, 0.05, 0.07, 0.2}) {
    const double fd = (sp.pressure_at(x + h) - sp.pressure_at(x - h)) / (2 * h);
    const double want = 0.5 * 8.0 * (1.0 - std::tanh((x - 0.05) / 0.02));
    EXPECT_NEAR(fd, want, 1e-6) << x;
    EXPECT_NEAR(sp.ped_dp(x), want, 1e-12) << x;
  }
  // far above the pedestal the gradient vanishes
  EXPECT_NEAR(sp.pressure_at(1.0), sp.pressure_at(2.0), 1e-12);
}

TEST(Pedestal, ValidationPairsRhsAndPressure) {
  EquilibriumSpec sp;
  sp.rhs = GsRhsKind::pedestal;
  EXPECT_THROW(sp.validate(), ConfigError);
  sp.pressure = PressureKind::pedestal;
  EXPECT_NO_THROW(sp.validate());
  sp.rhs = GsRhsKind::linear_profiles;
  EXPECT_THROW(sp.validate(), ConfigError);
  sp.rhs = GsRhsKind::pedestal;
  sp.ped_width = 0;
  EXPECT_THROW(sp.validate(), ConfigError);
}

TEST(Pedestal, CurrentRingIsEdgeGradient) {
  const Grid g = unit_grid(9);
  EquilibriumSpec sp;
  sp.rhs = GsRhsKind::pedestal;
  sp.pressure = PressureKind::pedestal;
  const StateBoundary b = equilibrium_boundary(g, sp);
  const double dp0 = 0.5 * sp.c1 * (1.0 - std::tanh(-sp.ped_center / sp.ped_width));
  for (int i = 0; i < g.nr(); ++i)
    for (int k = 0; k < g.nz(); ++k) {
      if (!g.is_boundary(i, k)) continue;
      EXPECT_NEAR(b.ring[kJ].c[0][b.ring[kJ].idx(i, k)], -g.R(i) * g.R(i) * dp0, 1e-12);
    }
}
