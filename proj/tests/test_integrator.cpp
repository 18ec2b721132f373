#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rmhd/equilibrium.hpp"
#include "rmhd/time_integrator.hpp"
#include "test_util.hpp"

using namespace rmhd;
using rmhd::testing::unit_grid;

namespace {

double max_abs_diff_state(const State& a, const State& b) {
  double m = 0;
  for (int v = 0; v < kNumVars; ++v) m = std::max(m, rmhd::testing::max_abs_diff(a[v], b[v]));
  return m;
}

Vec scalar(double x) { return Vec::Constant(1, x); }

LinearSolver solver_for(Preconditioning& pc, double tol = 1e-12) {
  LinearSolver ls;
  ls.par.gmres_tol = tol;
  ls.precond = &pc;
  return ls;
}

/// Fixed-dt march of the scalar ODE to t = 1.
double ode_error(const SchemeParams& sc, double dt, double lambda = -1.0) {
  LinearOde sys(lambda);
  NoPreconditioning pc;
  LinearSolver ls = solver_for(pc);
  NewtonParams np;
  np.mode = NewtonMode::exact;
  np.eps_a = 1e-14;
  const int n = int(std::lround(1.0 / dt));
  Vec u = scalar(1.0), um1 = u;
  for (int k = 0; k < n; ++k) {
    const StepResidual sr = build_step_residual(sys, u, um1, dt, sc, k == 0);
    const NewtonResult r = newton_solve(sr.G, sr.b, u, np, ls);
    EXPECT_TRUE(r.converged);
    um1 = u;
    u = r.U;
  }
  return std::abs(u[0] - std::exp(lambda));
}

struct Desk {
  Grid g;
  EquilibriumSpec spec;
  PhysParams par;
  ModelFlags flags;
  std::unique_ptr<Model> m;
  State s;
};

Desk desk(int n, double pert, PressureKind pk = PressureKind::linear) {
  Desk d;
  d.g = unit_grid(n);
  d.spec.pressure = pk;
  d.spec.perturbation = pert;
  d.par.F0 = 3.0;
  d.m = std::make_unique<Model>(d.g, d.par, d.flags, equilibrium_boundary(d.g, d.spec));
  d.s = initial_state(*d.m, d.spec);
  return d;
}

}  // namespace

TEST(Scheme, PresetsMapExactly) {
  EXPECT_EQ(SchemeParams::euler().theta, 1.0);
  EXPECT_EQ(SchemeParams::euler().zeta, 0.0);
  EXPECT_EQ(SchemeParams::crank_nicolson().theta, 0.5);
  EXPECT_EQ(SchemeParams::crank_nicolson().zeta, 0.0);
  EXPECT_EQ(SchemeParams::gear().theta, 1.0);
  EXPECT_EQ(SchemeParams::gear().zeta, 0.5);
  EXPECT_EQ(SchemeParams::preset("gear").zeta, 0.5);
  EXPECT_THROW(SchemeParams::preset("rk4"), ConfigError);
  EXPECT_THROW((SchemeParams{0.4, 0.0}.validate()), ConfigError);
  EXPECT_THROW((SchemeParams{0.5, -0.1}.validate()), ConfigError);
}

TEST(Params, InvariantsRejected) {
  NewtonParams np;
  EXPECT_NO_THROW(np.validate());
  np.eps_a = 0;
  EXPECT_THROW(np.validate(), ConfigError);
  np = {};
  np.eps0 = 0.95;
  EXPECT_THROW(np.validate(), ConfigError);
  np = {};
  np.gamma_f = 1.5;
  EXPECT_THROW(np.validate(), ConfigError);

  AdaptiveParams a;
  EXPECT_NO_THROW(a.validate());
  a.fail_factor = 1.5;
  EXPECT_THROW(a.validate(), ConfigError);
  a = {};
  a.dt_min = 2.0;
  EXPECT_THROW(a.validate(), ConfigError);
  a = {};
  a.fast_iters = 8;
  EXPECT_THROW(a.validate(), ConfigError);
  a = {};
  a.shrink = 1.0;
  EXPECT_THROW(a.validate(), ConfigError);
}

TEST(Forcing, DirectFormula) {
  NewtonParams np;
  np.gamma_f = 0.9;
  np.alpha_f = 2.0;
  EXPECT_NEAR(np.forcing(0.1, 1.0), 0.009, 1e-15);
  EXPECT_EQ(np.forcing(1.0, 1.0), 0.9);        // ceiling
  EXPECT_EQ(np.forcing(1e-9, 1.0), 1e-10);     // floor
}

TEST(StepResidual, CrankNicolsonScalarRoot) {
  LinearOde sys(-1.0);
  const StepResidual sr = build_step_residual(sys, scalar(1.0), scalar(1.0), 0.1, SchemeParams::crank_nicolson());
  // G is linear: G(U) = 1.05 U - 1, b = -0.05
  const double g0 = sr.G(scalar(0.0))[0], g1 = sr.G(scalar(1.0))[0];
  const double root = (sr.b[0] - g0) / (g1 - g0);
  EXPECT_NEAR(root, 0.95 / 1.05, 1e-15);
  EXPECT_NEAR(root, 0.9047619047619048, 1e-15);
}

TEST(StepResidual, SteadyStateGivesBExactly) {
  LinearOde sys(0.0);
  for (const auto& sc : {SchemeParams::euler(), SchemeParams::crank_nicolson(), SchemeParams::gear()}) {
    const StepResidual sr = build_step_residual(sys, scalar(0.7), scalar(0.7), 0.3, sc);
    EXPECT_EQ(sr.G(scalar(0.7)), sr.b);
  }
  const Grid g = unit_grid(5);
  const Model m(g, PhysParams{}, ModelFlags{});
  ModelSystem ms(m);
  const Vec U = pack(State(g), ms.layout());
  const StepResidual sr = build_step_residual(ms, U, U, 0.1, SchemeParams::crank_nicolson());
  EXPECT_EQ(sr.G(U), sr.b);
}

TEST(StepResidual, GearDiffersFromEulerByZetaTerms) {
  LinearOde sys(-2.0);
  const Vec un = scalar(0.8), unm1 = scalar(0.9), U = scalar(0.6);
  const StepResidual e = build_step_residual(sys, un, unm1, 0.1, SchemeParams::euler());
  const double ge = e.G(U)[0];
  const StepResidual gr = build_step_residual(sys, un, unm1, 0.1, SchemeParams::gear());
  const double gg = gr.G(U)[0];
  EXPECT_NEAR(gg - ge, 0.5 * (0.6 - 2 * 0.8 + 0.9), 1e-15);
  EXPECT_EQ(gr.b[0], e.b[0]);
  // first step drops zeta
  const StepResidual g1 = build_step_residual(sys, un, unm1, 0.1, SchemeParams::gear(), true);
  const StepResidual e1 = build_step_residual(sys, un, unm1, 0.1, SchemeParams::euler(), true);
  EXPECT_EQ(g1.G(U)[0], e1.G(U)[0]);
}

TEST(SchemeOrder, ObservedGlobalOrders) {
  const struct {
    SchemeParams sc;
    double order;
  } cases[] = {{SchemeParams::euler(), 1.0}, {SchemeParams::crank_nicolson(), 2.0}, {SchemeParams::gear(), 2.0}};
  for (const auto& c : cases) {
    const double e1 = ode_error(c.sc, 0.02), e2 = ode_error(c.sc, 0.01), e3 = ode_error(c.sc, 0.005);
    EXPECT_NEAR(std::log2(e1 / e2), c.order, 0.2) << c.sc.theta << " " << c.sc.zeta;
    EXPECT_NEAR(std::log2(e2 / e3), c.order, 0.2) << c.sc.theta << " " << c.sc.zeta;
  }
}

TEST(Newton, LinearMapConvergesInOneIteration) {
  const Eigen::Matrix3d M = (Eigen::Matrix3d() << 4, 1, 0, 1, 3, 1, 0, 1, 2).finished();
  const ResidualFn G = [&](const Vec& u) -> Vec { return M * u; };
  const Vec b = (Vec(3) << 1, 2, 3).finished();
  NoPreconditioning pc;
  LinearSolver ls = solver_for(pc);
  NewtonParams np;
  np.mode = NewtonMode::exact;
  np.eps_a = 1e-6;
  const NewtonResult r = newton_solve(G, b, Vec::Zero(3), np, ls);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iters, 1);
  EXPECT_LT((M * r.U - b).norm(), 1e-6);
}

TEST(Newton, QuadraticScalarSequence) {
  const ResidualFn G = [](const Vec& u) -> Vec { return u.array().square().matrix(); };
  NoPreconditioning pc;
  LinearSolver ls = solver_for(pc);
  NewtonParams np;
  np.mode = NewtonMode::exact;
  np.eps_a = 1e-12;
  np.max_iter = 1;
  NewtonResult r = newton_solve(G, scalar(4.0), scalar(3.0), np, ls);
  EXPECT_FALSE(r.converged);
  EXPECT_NEAR(r.U[0], 13.0 / 6.0, 1e-7);
  np.max_iter = 20;
  r = newton_solve(G, scalar(4.0), scalar(3.0), np, ls);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.U[0], 2.0, 1e-12);
  // |R_{k+1}| ~ |R_k|^2 / (4 U): ratio |R_{k+1}| / |R_k|^2 stays bounded near 1/16
  for (std::size_t k = 1; k + 1 < r.residuals.size(); ++k) {
    if (r.residuals[k + 1] < 1e-9) break;
    const double c = r.residuals[k + 1] / (r.residuals[k] * r.residuals[k]);
    EXPECT_GT(c, 0.03);
    EXPECT_LT(c, 0.1);
  }
}

TEST(Newton, InexactForcingSequence) {
  const ResidualFn G = [](const Vec& u) -> Vec { return (u.array().cube() + u.array()).matrix(); };
  const Vec b = Vec::LinSpaced(6, 1.0, 3.0);
  NoPreconditioning pc;
  LinearSolver ls = solver_for(pc);
  NewtonParams np;
  np.mode = NewtonMode::inexact;
  np.eps_a = 1e-10;
  const NewtonResult r = newton_solve(G, b, Vec::Zero(6), np, ls);
  ASSERT_TRUE(r.converged);
  ASSERT_GE(r.forcing.size(), 2u);
  EXPECT_EQ(r.forcing[0], np.eps0);
  for (std::size_t k = 1; k < r.forcing.size(); ++k)
    EXPECT_DOUBLE_EQ(r.forcing[k], np.forcing(r.residuals[k], r.residuals[k - 1]));
}

TEST(Newton, LinearizedDoesOneSolve) {
  const ResidualFn G = [](const Vec& u) -> Vec { return u.array().square().matrix(); };
  NoPreconditioning pc;
  LinearSolver ls = solver_for(pc);
  NewtonParams np;
  np.mode = NewtonMode::linearized;
  const NewtonResult r = newton_solve(G, scalar(4.0), scalar(3.0), np, ls);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iters, 1);
  EXPECT_NEAR(r.U[0], 13.0 / 6.0, 1e-7);
}

TEST(Newton, FailureSignals) {
  NoPreconditioning pc;
  LinearSolver ls = solver_for(pc);
  NewtonParams np;
  np.mode = NewtonMode::exact;
  // Newton on atan from 2 overshoots with growing |R|
  const ResidualFn atan_g = [](const Vec& u) -> Vec { return u.array().atan().matrix(); };
  NewtonResult r = newton_solve(atan_g, scalar(0.0), scalar(2.0), np, ls);
  EXPECT_FALSE(r.converged);
  EXPECT_NE(r.failure.find("increased"), std::string::npos);
  EXPECT_EQ(r.iters, np.divergence_window);

  const ResidualFn nan_g = [](const Vec& u) -> Vec { return u.array().log().matrix(); };
  r = newton_solve(nan_g, scalar(0.0), scalar(-1.0), np, ls);
  EXPECT_FALSE(r.converged);
}

TEST(AdaptDt, RuleExamples) {
  AdaptiveParams a;
  a.dt_max = 100;
  const DtDecision f = adapt_dt(false, 0, 10.0, a);
  EXPECT_TRUE(f.retry);
  EXPECT_DOUBLE_EQ(f.dt, 8.0);
  EXPECT_DOUBLE_EQ(adapt_dt(true, 2, 10.0, a).dt, 12.5);
  EXPECT_DOUBLE_EQ(adapt_dt(true, 9, 10.0, a).dt, 8.0);
  EXPECT_DOUBLE_EQ(adapt_dt(true, 5, 10.0, a).dt, 10.0);
  EXPECT_DOUBLE_EQ(adapt_dt(true, 1, 90.0, a).dt, 100.0);
  a.grow = 2.0;
  EXPECT_DOUBLE_EQ(adapt_dt(true, 1, 10.0, a).dt, 15.0);  // max_rise_per_step
  a = {};
  a.dt_min = 0.9;
  EXPECT_THROW(adapt_dt(false, 0, 1.0, a), NumericalError);
}

TEST(Equivalence, ExactAndInexactNewtonAgree) {
  const Desk d = desk(9, 5e-2);
  ModelSystem sys(*d.m);
  const Vec U = pack(d.s, sys.layout());
  const StepResidual sr = build_step_residual(sys, U, U, 0.05, SchemeParams::crank_nicolson(), true);
  NewtonResult res[2];
  int k = 0;
  for (NewtonMode mode : {NewtonMode::exact, NewtonMode::inexact}) {
    BlockPreconditioning pc(sys.layout());
    LinearSolver ls;
    ls.precond = &pc;
    ls.refresh(sr.G, U);
    NewtonParams np;
    np.mode = mode;
    np.eps_a = 1e-9;
    res[k++] = newton_solve(sr.G, sr.b, U, np, ls);
  }
  ASSERT_TRUE(res[0].converged);
  ASSERT_TRUE(res[1].converged);
  EXPECT_LT((res[0].U - res[1].U).norm(), 10 * 1e-9 * 100);
  EXPECT_LE(res[1].gmres_iters, res[0].gmres_iters);
}

TEST(Equivalence, LinearizedDiffersFromNewtonAtSecondOrder) {
  const Desk d = desk(9, 5e-2);
  ModelSystem sys(*d.m);
  const Vec U = pack(d.s, sys.layout());
  std::vector<double> diff;
  for (double dt : {0.04, 0.02, 0.01}) {
    const StepResidual sr = build_step_residual(sys, U, U, dt, SchemeParams::crank_nicolson(), true);
    Vec x[2];
    int k = 0;
    for (NewtonMode mode : {NewtonMode::linearized, NewtonMode::exact}) {
      BlockPreconditioning pc(sys.layout());
      LinearSolver ls;
      ls.precond = &pc;
      ls.refresh(sr.G, U);
      NewtonParams np;
      np.mode = mode;
      np.eps_a = 1e-12;
      x[k++] = newton_solve(sr.G, sr.b, U, np, ls).U;
    }
    diff.push_back((x[0] - x[1]).norm());
  }
  EXPECT_GT(diff[0] / diff[1], 3.0);
  EXPECT_GT(diff[1] / diff[2], 3.0);
}

TEST(Run, ZeroPerturbationEquilibriumIsAFixedPoint) {
  const Desk d = desk(9, 0.0);
  RunParams p;
  p.max_steps = 10;
  p.adaptive.dt0 = 0.05;
  const RunResult r = run(*d.m, d.s, p);
  EXPECT_EQ(r.accepted, 10);
  for (const auto& h : r.history) EXPECT_LE(h.stats.newton_iters, 1);
  EXPECT_LT(max_abs_diff_state(r.state, d.s), 1e-10);
}

TEST(Run, ForcedFailureRetriesAtEightTenths) {
  const Desk d = desk(9, 0.05);
  RunParams p;
  p.max_steps = 2;
  p.adaptive.dt0 = 0.5;
  p.adaptive.dt_min = 1e-3;
  p.newton.max_iter = 1;
  p.newton.eps_a = 1e-5;
  const RunResult r = run(*d.m, d.s, p);
  ASSERT_GE(r.rejected, 1);
  EXPECT_EQ(r.accepted, 2);
  EXPECT_DOUBLE_EQ(r.attempted_dt[0], 0.5);
  for (std::size_t k = 1; k <= std::size_t(r.history[0].rejected); ++k)
    EXPECT_DOUBLE_EQ(r.attempted_dt[k], r.attempted_dt[k - 1] * 0.8);
  EXPECT_DOUBLE_EQ(r.history[0].dt, r.attempted_dt[std::size_t(r.history[0].rejected)]);
}

TEST(Run, EveryStepPolicyFactorizesOncePerAttempt) {
  const Desk d = desk(9, 1e-2);
  RunParams p;
  p.max_steps = 3;
  p.adaptive.dt0 = 0.05;
  const RunResult r = run(*d.m, d.s, p);
  EXPECT_EQ(r.refactorizations, r.accepted + r.rejected);
  p.linear.refactor = RefactorMode::adaptive;
  const RunResult q = run(*d.m, d.s, p);
  EXPECT_LT(q.refactorizations, r.refactorizations);
  EXPECT_GE(q.refactorizations, 1);
}

TEST(Run, DeterministicRecords) {
  const Desk d = desk(9, 1e-2);
  RunParams p;
  p.max_steps = 3;
  p.adaptive.dt0 = 0.05;
  std::ostringstream a, b;
  CsvWriter wa(a), wb(b);
  run(*d.m, d.s, p, &wa);
  run(*d.m, d.s, p, &wb);
  const std::string sa = a.str();
  EXPECT_EQ(sa, b.str());
  EXPECT_EQ(std::count(sa.begin(), sa.end(), '\n'), 4);
}
