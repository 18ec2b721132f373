#pragma once

// theta/zeta time discretization, Newton variants, adaptive steps and the run loop.

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rmhd/diagnostics.hpp"
#include "rmhd/linear_solver.hpp"
#include "rmhd/model.hpp"

namespace rmhd {

// ---------------- parameters ----------------

struct SchemeParams {
  double theta = 0.5;
  double zeta = 0.0;

  static SchemeParams euler() { return {1.0, 0.0}; }
  static SchemeParams crank_nicolson() { return {0.5, 0.0}; }
  static SchemeParams gear() { return {1.0, 0.5}; }
  static SchemeParams preset(const std::string& name) {
    if (name == "euler") return euler();
    if (name == "crank-nicolson" || name == "cn") return crank_nicolson();
    if (name == "gear") return gear();
    throw ConfigError("unknown scheme preset '" + name + "'");
  }
  void validate() const {
    if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigError("scheme: theta must lie in [1/2, 1]");
    if (!(zeta >= 0.0)) throw ConfigError("scheme: zeta must be >= 0");
  }
};

enum class NewtonMode { linearized, exact, inexact };

inline NewtonMode parse_newton_mode(const std::string& s) {
  if (s == "linearized") return NewtonMode::linearized;
  if (s == "exact") return NewtonMode::exact;
  if (s == "inexact") return NewtonMode::inexact;
  throw ConfigError("unknown newton mode '" + s + "'");
}

inline const char* to_string(NewtonMode m) {
  switch (m) {
    case NewtonMode::linearized: return "linearized";
    case NewtonMode::exact: return "exact";
    default: return "inexact";
  }
}

struct NewtonParams {
  NewtonMode mode = NewtonMode::inexact;
  double eps_a = 1e-5;
  double eps_r = 0.0;
  int max_iter = 20;
  double gamma_f = 0.9;
  double alpha_f = 2.0;
  double eps0 = 5e-4;
  double forcing_floor = 1e-10;
  double forcing_ceiling = 0.9;
  int divergence_window = 2;

  void validate() const {
    if (!(eps_a > 0)) throw ConfigError("newton: eps_a must be > 0");
    if (!(eps_r >= 0)) throw ConfigError("newton: eps_r must be >= 0");
    if (max_iter < 1) throw ConfigError("newton: max_iter must be >= 1");
    if (!(gamma_f > 0 && gamma_f <= 1)) throw ConfigError("newton: gamma_f must lie in (0, 1]");
    if (!(alpha_f > 0)) throw ConfigError("newton: alpha_f must be > 0");
    if (!(forcing_floor > 0 && forcing_floor <= eps0 && eps0 <= forcing_ceiling && forcing_ceiling <= 1))
      throw ConfigError("newton: need 0 < forcing_floor <= eps0 <= forcing_ceiling <= 1");
    if (divergence_window < 1) throw ConfigError("newton: divergence_window must be >= 1");
  }

  /// gamma_f (|R_k| / |R_{k-1}|)^alpha_f, clamped.
  double forcing(double r_now, double r_prev) const {
    const double e = gamma_f * std::pow(r_now / r_prev, alpha_f);
    return std::clamp(e, forcing_floor, forcing_ceiling);
  }
};

struct AdaptiveParams {
  double dt0 = 1.0, dt_min = 1e-6, dt_max = 1e3;
  double grow = 1.25, shrink = 0.8;
  double fail_factor = 0.8;
  int fast_iters = 3, slow_iters = 8;
  double max_rise_per_step = 1.5;
  int divergence_window = 2;

  void validate() const {
    if (!(dt_min > 0)) throw ConfigError("adaptive: dt_min must be > 0");
    if (!(dt_min <= dt0 && dt0 <= dt_max)) throw ConfigError("adaptive: need dt_min <= dt0 <= dt_max");
    if (!(shrink > 0 && shrink < 1 && grow > 1)) throw ConfigError("adaptive: need 0 < shrink < 1 < grow");
    if (!(fail_factor > 0 && fail_factor < 1)) throw ConfigError("adaptive: fail_factor must lie in (0, 1)");
    if (!(fast_iters < slow_iters)) throw ConfigError("adaptive: fast_iters must be < slow_iters");
    if (!(max_rise_per_step > 1)) throw ConfigError("adaptive: max_rise_per_step must be > 1");
    if (divergence_window < 1) throw ConfigError("adaptive: divergence_window must be >= 1");
  }
};

enum class RefactorMode { every_step, adaptive };

inline RefactorMode parse_refactor_mode(const std::string& s) {
  if (s == "every_step") return RefactorMode::every_step;
  if (s == "adaptive") return RefactorMode::adaptive;
  throw ConfigError("unknown refactor_policy '" + s + "'");
}

struct LinearSolverParams {
  double gmres_tol = 1e-8;
  int restart = 200;
  int maxit = 500;
  RefactorMode refactor = RefactorMode::every_step;
  int refactor_threshold = 50;

  void validate() const {
    if (!(gmres_tol > 0 && gmres_tol < 1)) throw ConfigError("newton: gmres_tol must lie in (0, 1)");
    if (restart < 1) throw ConfigError("newton: gmres_restart must be >= 1");
    if (maxit < 1) throw ConfigError("newton: gmres_maxit must be >= 1");
  }
};

// ---------------- preconditioning ----------------

class Preconditioning {
 public:
  virtual ~Preconditioning() = default;
  virtual void refresh(const ResidualFn& G, const Vec& U, long stamp) = 0;
  virtual bool ready() const = 0;
  virtual Vec apply(const Vec& b) const = 0;
};

class NoPreconditioning : public Preconditioning {
 public:
  void refresh(const ResidualFn&, const Vec&, long) override {}
  bool ready() const override { return true; }
  Vec apply(const Vec& b) const override { return b; }
};

/// Full finite-difference Jacobian and dense LU; small fixtures only.
class DensePreconditioning : public Preconditioning {
 public:
  void refresh(const ResidualFn& G, const Vec& U, long) override {
    const Eigen::Index n = U.size();
    const Vec g0 = G(U);
    Eigen::MatrixXd J(n, n);
    const double root = std::sqrt(std::numeric_limits<double>::epsilon());
    for (Eigen::Index k = 0; k < n; ++k) {
      Vec Up = U;
      const double e = root * std::max(1.0, std::abs(U[k]));
      Up[k] += e;
      J.col(k) = (G(Up) - g0) / e;
    }
    if (!J.allFinite()) throw NumericalError("preconditioner: residual not finite");
    lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(J);
    ready_ = true;
  }
  bool ready() const override { return ready_; }
  Vec apply(const Vec& b) const override { return lu_.solve(b); }

 private:
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  bool ready_ = false;
};

class BlockPreconditioning : public Preconditioning {
 public:
  explicit BlockPreconditioning(FlatLayout L) : L_(L) {}
  void refresh(const ResidualFn& G, const Vec& U, long stamp) override { P_.assemble(G, U, L_, stamp); }
  bool ready() const override { return P_.ready(); }
  Vec apply(const Vec& b) const override { return P_.apply(b); }
  const BlockPreconditioner& blocks() const { return P_; }

 private:
  FlatLayout L_;
  BlockPreconditioner P_;
};

/// Preconditioner plus the refactorization bookkeeping across Newton iterations.
struct LinearSolver {
  LinearSolverParams par;
  Preconditioning* precond = nullptr;
  std::vector<int> window;  // GMRES counts of the most recent linear solves
  long stamp = 0;

  /// Returns true when a factorization was computed.
  bool refresh(const ResidualFn& G, const Vec& U) {
    precond->refresh(G, U, stamp);
    window.clear();
    return true;
  }
  bool maybe_refresh(const ResidualFn& G, const Vec& U) {
    const bool have = precond->ready();
    if (par.refactor == RefactorMode::every_step && have) return false;
    if (!refactor_policy(window, have, par.refactor_threshold)) return false;
    return refresh(G, U);
  }
  void record(int iters) {
    window.push_back(iters);
    if (window.size() > 2) window.erase(window.begin());
  }
};

// ---------------- semi-discrete systems ----------------

/// A(U) and B(U) of the semi-discrete system, in increment form.
class Semidiscrete {
 public:
  virtual ~Semidiscrete() = default;
  virtual std::size_t size() const = 0;

  /// Prepares history levels; must be called before implicit_rows or explicit_rows.
  virtual void set_history(const Vec& Un, const Vec& Unm1) = 0;

  /// Time rows of c0 X(U) + c1 X^n + c2 X^{n-1}, constraint rows, minus theta dt B(U).
  virtual Vec implicit_rows(const Vec& U, const std::array<double, 3>& c, double theta_dt) const = 0;

  /// B(U^n) with zeros on constraint rows.
  virtual Vec rhs_at_history() const = 0;
};

/// A(U) = U, B(U) = lambda U; the scalar fixture for scheme orders.
class LinearOde : public Semidiscrete {
 public:
  explicit LinearOde(double lambda, std::size_t n = 1) : lambda_(lambda), n_(n) {}
  std::size_t size() const override { return n_; }
  void set_history(const Vec& Un, const Vec& Unm1) override {
    un_ = Un;
    unm1_ = Unm1;
  }
  Vec implicit_rows(const Vec& U, const std::array<double, 3>& c, double theta_dt) const override {
    // (1+z)U - (1+2z)U^n + z U^{n-1} written as differences: exact zero at rest
    const double z = c[2];
    return (U - un_) + z * ((U - un_) - (un_ - unm1_)) - theta_dt * lambda_ * U;
  }
  Vec rhs_at_history() const override { return lambda_ * un_; }

 private:
  double lambda_;
  std::size_t n_;
  Vec un_, unm1_;
};

/// The reduced MHD model on a FlatVector.
class ModelSystem : public Semidiscrete {
 public:
  explicit ModelSystem(const Model& m) : m_(m), L_(m.grid(), m.flags()) {}

  std::size_t size() const override { return L_.size(); }
  const FlatLayout& layout() const { return L_; }
  const Model& model() const { return m_; }

  void set_history(const Vec& Un, const Vec& Unm1) override {
    sn_ = m_.sample(unpack(Un, m_.grid(), L_));
    snm1_ = m_.sample(unpack(Unm1, m_.grid(), L_));
    bn_.reset();
  }

  Vec implicit_rows(const Vec& U, const std::array<double, 3>& c, double theta_dt) const override {
    const Sampled s = m_.sample(unpack(U, m_.grid(), L_));
    const Increment inc = m_.increment({&s, &sn_, &snm1_}, {c[0], c[1], c[2]});
    State r(m_.grid());
    r.psi() = project(inc.dpsi - theta_dt * m_.rhs_psi(s));
    r.u() = project(m_.time_vorticity(s, inc) - theta_dt * m_.rhs_vorticity(s));
    r.j() = project(m_.constraint_j(s));
    r.w() = project(m_.constraint_w(s));
    r.rho() = project(inc.drho - theta_dt * m_.rhs_density(s));
    r.p() = project(inc.dp - theta_dt * m_.rhs_pressure(s));
    if (m_.flags().with_vpar) r.vpar() = project(m_.time_vpar(s, inc) - theta_dt * m_.rhs_vpar(s));
    return pack(r, L_);
  }

  Vec rhs_at_history() const override {
    if (!bn_) {
      State r(m_.grid());
      r.psi() = project(m_.rhs_psi(sn_));
      r.u() = project(m_.rhs_vorticity(sn_));
      r.rho() = project(m_.rhs_density(sn_));
      r.p() = project(m_.rhs_pressure(sn_));
      if (m_.flags().with_vpar) r.vpar() = project(m_.rhs_vpar(sn_));
      bn_ = pack(r, L_);
    }
    return *bn_;
  }

 private:
  const Model& m_;
  FlatLayout L_;
  Sampled sn_, snm1_;
  mutable std::optional<Vec> bn_;
};

struct StepResidual {
  ResidualFn G;
  Vec b;
};

/// G(U) - b = 0 encodes (1+z)A(U) - th dt B(U) = (1+2z)A(U^n) - z A(U^{n-1}) + (1-th) dt B(U^n).
/// `first` drops zeta (no history yet).
inline StepResidual build_step_residual(Semidiscrete& sys, const Vec& Un, const Vec& Unm1, double dt,
                                        const SchemeParams& scheme, bool first = false) {
  const double z = first ? 0.0 : scheme.zeta;
  sys.set_history(Un, first ? Un : Unm1);
  const std::array<double, 3> c = {1.0 + z, -(1.0 + 2.0 * z), z};
  const double th_dt = scheme.theta * dt;
  StepResidual out;
  out.G = [&sys, c, th_dt](const Vec& U) { return sys.implicit_rows(U, c, th_dt); };
  out.b = scheme.theta < 1.0 ? Vec((1.0 - scheme.theta) * dt * sys.rhs_at_history()) : Vec::Zero(Un.size());
  return out;
}

// ---------------- Newton ----------------

struct NewtonResult {
  Vec U;
  bool converged = false;
  std::string failure;
  int iters = 0;
  int gmres_iters = 0;
  int refactorizations = 0;
  std::vector<double> residuals;  // |R(U_k)|, k = 0..iters
  std::vector<double> forcing;    // linear tolerance used at each iteration
};

inline NewtonResult newton_solve(const ResidualFn& G, const Vec& b, const Vec& U_init, const NewtonParams& np,
                                 LinearSolver& ls) {
  NewtonResult out;
  out.U = U_init;
  Vec GU = G(out.U);
  Vec R = b - GU;
  double rn = R.norm();
  out.residuals.push_back(rn);
  if (!std::isfinite(rn)) {
    out.failure = "residual not finite";
    return out;
  }
  const double target = np.eps_a + np.eps_r * rn;
  if (rn < target && np.mode != NewtonMode::linearized) {
    out.converged = true;
    return out;
  }
  int rising = 0;
  for (int k = 0; k < np.max_iter; ++k) {
    if (ls.maybe_refresh(G, out.U)) ++out.refactorizations;
    double tol = ls.par.gmres_tol;
    if (np.mode == NewtonMode::inexact)
      tol = k == 0 ? np.eps0 : np.forcing(out.residuals[k], out.residuals[k - 1]);
    out.forcing.push_back(tol);
    const Vec U = out.U;
    const Vec GUc = GU;
    const LinearOp J = [&](const Vec& v) { return jacobian_vector_product(G, U, v, &GUc); };
    const LinearOp M = [&](const Vec& v) { return ls.precond->apply(v); };
    GmresResult lin;
    try {
      lin = gmres(J, M, R, tol, ls.par.restart, ls.par.maxit);
    } catch (const NumericalError& e) {
      out.failure = e.what();
      return out;
    }
    out.gmres_iters += lin.iters;
    ls.record(lin.iters);
    out.U += lin.x;
    ++out.iters;
    GU = G(out.U);
    R = b - GU;
    const double rnew = R.norm();
    out.residuals.push_back(rnew);
    if (!std::isfinite(rnew)) {
      out.failure = "residual not finite";
      return out;
    }
    if (np.mode == NewtonMode::linearized) {
      out.converged = true;
      return out;
    }
    if (rnew < target) {
      out.converged = true;
      return out;
    }
    rising = rnew > rn ? rising + 1 : 0;
    if (rising >= np.divergence_window) {
      out.failure = "residual increased on consecutive iterations";
      return out;
    }
    rn = rnew;
  }
  out.failure = "max_iter reached";
  return out;
}

// ---------------- adaptive time step ----------------

struct DtDecision {
  bool retry = false;
  double dt = 0;
};

inline DtDecision adapt_dt(bool converged, int newton_iters, double dt, const AdaptiveParams& a) {
  if (!converged) {
    const double next = dt * a.fail_factor;
    if (next < a.dt_min)
      throw NumericalError("unrecoverable step: dt " + format_double(next) + " below dt_min");
    return {true, next};
  }
  if (newton_iters <= a.fast_iters) return {false, std::min({dt * a.grow, a.dt_max, dt * a.max_rise_per_step})};
  if (newton_iters >= a.slow_iters) return {false, std::max(dt * a.shrink, a.dt_min)};
  return {false, dt};
}

// ---------------- run loop ----------------

struct RunParams {
  SchemeParams scheme;
  NewtonParams newton;
  LinearSolverParams linear;
  AdaptiveParams adaptive;
  long max_steps = 10;
  double t_end = std::numeric_limits<double>::infinity();
};

struct StepRecord {
  long step = 0;
  double time = 0, dt = 0;
  int rejected = 0;
  StepStats stats;
  EnergyReport energy;
  double balance = 0;
  double dissipation = 0;  // D at the theta-blended state
};

struct RunResult {
  State state;
  double time = 0;
  double dt_next = 0;
  long step = 0;
  long accepted = 0, rejected = 0;
  long newton_iters = 0, gmres_iters = 0, refactorizations = 0;
  double wall_seconds = 0;
  std::vector<StepRecord> history;
  std::vector<double> attempted_dt;  // every attempt, including retries
  std::optional<State> previous;     // state one accepted step before `state`
};

struct RunStart {
  double time = 0;
  long step = 0;
  double dt = 0;  // 0: use adaptive.dt0
  const State* previous = nullptr;  // U^{n-1}; without it the first step has zeta = 0
};

inline void validate(const RunParams& p) {
  p.scheme.validate();
  p.newton.validate();
  p.linear.validate();
  p.adaptive.validate();
  if (p.max_steps < 0) throw ConfigError("run: max_steps must be >= 0");
}

/// Advances `initial` by up to max_steps accepted steps (or to t_end).
inline RunResult run(const Model& m, const State& initial, const RunParams& p, CsvWriter* csv = nullptr,
                     RunStart start = {}) {
  validate(p);
  const auto t0 = std::chrono::steady_clock::now();
  ModelSystem sys(m);
  const FlatLayout& L = sys.layout();
  BlockPreconditioning pc(L);
  LinearSolver ls{p.linear, &pc, {}, 0};
  NewtonParams np = p.newton;
  np.divergence_window = p.adaptive.divergence_window;

  RunResult out;
  Vec Un = pack(initial, L);
  Vec Unm1 = start.previous ? pack(*start.previous, L) : Un;
  bool first = start.previous == nullptr;
  double time = start.time;
  double dt = start.dt > 0 ? start.dt : p.adaptive.dt0;
  long step = start.step;
  EnergyReport before = compute_energies(m, unpack(Un, m.grid(), L));

  for (long n = 0; n < p.max_steps && time < p.t_end; ++n) {
    StepRecord rec;
    ls.stamp = step + 1;
    while (true) {
      const double dt_try = std::min(dt, p.t_end - time);
      out.attempted_dt.push_back(dt_try);
      const StepResidual sr = build_step_residual(sys, Un, Unm1, dt_try, p.scheme, first);
      int refac = 0;
      if (p.linear.refactor == RefactorMode::every_step || !pc.ready()) {
        ls.refresh(sr.G, Un);
        refac = 1;
      }
      NewtonResult nr = newton_solve(sr.G, sr.b, Un, np, ls);
      rec.stats.newton_iters += nr.iters;
      rec.stats.gmres_iters += nr.gmres_iters;
      rec.stats.refactorizations += refac + nr.refactorizations;
      const DtDecision d = adapt_dt(nr.converged, nr.iters, dt_try, p.adaptive);
      if (d.retry) {
        ++rec.rejected;
        ++out.rejected;
        dt = d.dt;
        // a retry changes the Jacobian through dt
        if (p.linear.refactor == RefactorMode::adaptive) ls.window.assign({p.linear.refactor_threshold + 1});
        continue;
      }
      const State next = unpack(nr.U, m.grid(), L);
      const EnergyReport now = compute_energies(m, next);
      const State mid = blend(unpack(Un, m.grid(), L), next, p.scheme.theta);
      rec.dissipation = dissipation_rate(m.sample(mid));
      rec.balance = energy_balance_residual(now, before, dt_try, rec.dissipation);
      time += dt_try;
      ++step;
      rec.step = step;
      rec.time = time;
      rec.dt = dt_try;
      rec.energy = now;
      if (csv) csv->write(step, time, dt_try, now, rec.balance, rec.stats);
      out.history.push_back(rec);
      out.newton_iters += rec.stats.newton_iters;
      out.gmres_iters += rec.stats.gmres_iters;
      out.refactorizations += rec.stats.refactorizations;
      ++out.accepted;
      before = now;
      Unm1 = std::move(Un);
      Un = nr.U;
      first = false;
      dt = d.dt;
      break;
    }
  }
  out.state = unpack(Un, m.grid(), L);
  if (!first) out.previous = unpack(Unm1, m.grid(), L);
  out.time = time;
  out.step = step;
  out.dt_next = dt;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace rmhd
