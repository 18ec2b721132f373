#pragma once

// Grad-Shafranov initialization, tanh pedestal profiles and perturbation seeding.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "rmhd/errors.hpp"
#include "rmhd/model.hpp"

namespace rmhd {

/// pedestal: delta* psi + c2 psi = -R^2 p'(psi) with the pedestal pressure below (nonlinear, Newton).
enum class GsRhsKind { manufactured, linear_profiles, pedestal };
/// tanh: p = rho T from the two tanh profiles; linear: p = p_edge + c1 psi, in force balance with the GS solve;
/// pedestal: p' = c1 (1 - tanh((psi - ped_center) / ped_width)) / 2, steep at the edge and flat inside.
enum class PressureKind { tanh, linear, pedestal };

inline PressureKind parse_pressure_kind(const std::string& s) {
  if (s == "tanh") return PressureKind::tanh;
  if (s == "linear") return PressureKind::linear;
  if (s == "pedestal") return PressureKind::pedestal;
  throw ConfigError("unknown equilibrium pressure '" + s + "'");
}

inline GsRhsKind parse_gs_rhs(const std::string& s) {
  if (s == "manufactured") return GsRhsKind::manufactured;
  if (s == "linear_profiles") return GsRhsKind::linear_profiles;
  if (s == "pedestal") return GsRhsKind::pedestal;
  throw ConfigError("unknown equilibrium rhs '" + s + "'");
}

/// floor + amp (1 + tanh((psi - center) / width)) / 2
struct TanhProfile {
  double center = 0.0;
  double width = 0.05;
  double floor = 0.1;
  double amp = 1.0;

  double operator()(double psi) const {
    if (std::isinf(width)) return floor + 0.5 * amp;
    return floor + 0.5 * amp * (1.0 + std::tanh((psi - center) / width));
  }
  void validate(const char* what) const {
    if (!(width > 0)) throw ConfigError(std::string("equilibrium: ") + what + " width must be > 0");
    if (!(floor > 0) || amp < 0) throw ConfigError(std::string("equilibrium: ") + what + " needs floor > 0, amp >= 0");
  }
};

struct EquilibriumSpec {
  GsRhsKind rhs = GsRhsKind::linear_profiles;
  double psi_amp = 1.0;  // scale of the manufactured psi_m
  // linear profiles: p'(psi) = c1, F F'(psi) = c2 psi, so delta* psi + c2 psi = -c1 R^2
  double c1 = 1.0;
  double c2 = 0.0;
  TanhProfile rho{0.03, 0.02, 0.2, 1.0};
  TanhProfile T{0.03, 0.02, 0.2, 1.0};
  PressureKind pressure = PressureKind::tanh;
  double ped_center = 0.05;
  double ped_width = 0.02;
  double perturbation = 1e-6;
  int target = kU;

  void validate() const {
    if (perturbation < 0) throw ConfigError("equilibrium: perturbation amplitude must be >= 0");
    if ((rhs == GsRhsKind::pedestal) != (pressure == PressureKind::pedestal))
      throw ConfigError("equilibrium: rhs = pedestal and pressure = pedestal go together");
    if (!(ped_width > 0)) throw ConfigError("equilibrium: ped_width must be > 0");
    if (target < 0 || target >= kNumVars) throw ConfigError("equilibrium: unknown perturbation target");
    rho.validate("rho");
    T.validate("T");
  }
  double p_edge() const { return rho(0.0) * T(0.0); }
  double pressure_at(double psi) const {
    if (pressure == PressureKind::linear) return p_edge() + c1 * psi;
    if (pressure == PressureKind::pedestal) {
      // integral of ped_dp from 0
      auto lc = [](double x) { return std::abs(x) + std::log1p(std::exp(-2.0 * std::abs(x))) - std::log(2.0); };
      const double w = ped_width;
      return p_edge() + 0.5 * c1 * (psi - w * lc((psi - ped_center) / w) + w * lc(-ped_center / w));
    }
    return rho(psi) * T(psi);
  }
  /// p'(psi) and p''(psi) of the pedestal pressure.
  double ped_dp(double psi) const { return 0.5 * c1 * (1.0 - std::tanh((psi - ped_center) / ped_width)); }
  double ped_d2p(double psi) const {
    const double c = std::cosh((psi - ped_center) / ped_width);
    return -0.5 * c1 / (ped_width * c * c);
  }
};

namespace detail {

inline double shat(const Grid& g, double R, double Z) {
  const double pi = std::numbers::pi;
  return std::sin(pi * (R - g.R_min) / (g.R_max - g.R_min)) * std::sin(pi * (Z - g.Z_min) / (g.Z_max - g.Z_min));
}

/// Discrete delta* (same stencil as lap_star) plus `shift` on the interior, psi = 0 on the ring.
inline Eigen::SparseMatrix<double> gs_matrix(const Grid& g, double shift) {
  const int NR = g.NR, NZ = g.NZ;
  const double ir = 1.0 / (g.hR() * g.hR()), iz = 1.0 / (g.hZ() * g.hZ());
  std::vector<Eigen::Triplet<double>> t;
  auto id = [NZ](int i, int j) { return i * NZ + j; };
  for (int i = 0; i < NR; ++i)
    for (int j = 0; j < NZ; ++j) {
      const double r = g.R(i + 1);
      const double rp = r + 0.5 * g.hR(), rm = r - 0.5 * g.hR();
      const double cp = ir * r / rp, cm = ir * r / rm;
      t.emplace_back(id(i, j), id(i, j), -cp - cm - 2.0 * iz + shift);
      if (i + 1 < NR) t.emplace_back(id(i, j), id(i + 1, j), cp);
      if (i > 0) t.emplace_back(id(i, j), id(i - 1, j), cm);
      if (j + 1 < NZ) t.emplace_back(id(i, j), id(i, j + 1), iz);
      if (j > 0) t.emplace_back(id(i, j), id(i, j - 1), iz);
    }
  Eigen::SparseMatrix<double> A(NR * NZ, NR * NZ);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

}  // namespace detail

/// psi_m = psi_amp sin(pi Rhat) sin(pi Zhat).
inline double manufactured_psi(const Grid& g, double R, double Z, double amp = 1.0) {
  return amp * detail::shat(g, R, Z);
}

/// delta* psi_m, analytic.
inline double manufactured_gs_rhs(const Grid& g, double R, double Z, double amp = 1.0) {
  const double pi = std::numbers::pi;
  const double a = pi / (g.R_max - g.R_min), b = pi / (g.Z_max - g.Z_min);
  const double x = a * (R - g.R_min), y = b * (Z - g.Z_min);
  const double f = std::sin(x) * std::sin(y);
  const double fR = a * std::cos(x) * std::sin(y);
  return amp * (-(a * a + b * b) * f - fR / R);
}

/// Solves (delta* + shift) psi = f(R, Z) with psi = 0 on the boundary; mode 0 only.
inline SpectralField solve_gs(const Grid& g, const std::function<double(double, double)>& f, double shift = 0.0) {
  g.validate();
  const Eigen::SparseMatrix<double> A = detail::gs_matrix(g, shift);
  Eigen::VectorXd rhs(g.NR * g.NZ);
  for (int i = 0; i < g.NR; ++i)
    for (int j = 0; j < g.NZ; ++j) rhs[i * g.NZ + j] = f(g.R(i + 1), g.Z(j + 1));
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw NumericalError("grad-shafranov: factorization failed: " + lu.lastErrorMessage());
  const Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw NumericalError("grad-shafranov: solve failed");
  SpectralField psi(g);
  for (int n = 0; n < g.NR * g.NZ; ++n) psi.c0[std::size_t(n)] = x[n];
  return psi;
}

/// Newton on (delta* + c2) psi + R^2 p'(psi) = 0 from psi = 0, with backtracking.
inline SpectralField solve_pedestal_gs(const EquilibriumSpec& spec, const Grid& g, double tol = 1e-12,
                                       int max_iter = 60) {
  g.validate();
  const Eigen::SparseMatrix<double> A = detail::gs_matrix(g, spec.c2);
  const int n = g.NR * g.NZ;
  Eigen::VectorXd R2(n), x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < g.NR; ++i)
    for (int j = 0; j < g.NZ; ++j) R2[i * g.NZ + j] = g.R(i + 1) * g.R(i + 1);
  auto F = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd f = A * y;
    for (int k = 0; k < n; ++k) f[k] += R2[k] * spec.ped_dp(y[k]);
    return f;
  };
  Eigen::VectorXd f = F(x);
  const double f0 = f.norm();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (int it = 0; it < max_iter; ++it) {
    if (f.norm() <= tol * std::max(1.0, f0)) {
      SpectralField psi(g);
      for (int k = 0; k < n; ++k) psi.c0[std::size_t(k)] = x[k];
      return psi;
    }
    Eigen::SparseMatrix<double> J = A;
    for (int k = 0; k < n; ++k) J.coeffRef(k, k) += R2[k] * spec.ped_d2p(x[k]);
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw NumericalError("pedestal grad-shafranov: singular Jacobian");
    const Eigen::VectorXd dx = lu.solve(-f);
    double lam = 1.0;
    Eigen::VectorXd xn = x + dx, fn = F(xn);
    while (!(fn.norm() < f.norm()) && lam > 1e-4) {
      lam *= 0.5;
      xn = x + lam * dx;
      fn = F(xn);
    }
    if (!(fn.norm() < f.norm())) throw NumericalError("pedestal grad-shafranov: no descent");
    x = xn;
    f = fn;
  }
  throw NumericalError("pedestal grad-shafranov: no convergence");
}

inline SpectralField solve_grad_shafranov(const EquilibriumSpec& spec, const Grid& g) {
  if (spec.rhs == GsRhsKind::pedestal) return solve_pedestal_gs(spec, g);
  if (spec.rhs == GsRhsKind::manufactured)
    return solve_gs(g, [&](double R, double Z) { return manufactured_gs_rhs(g, R, Z, spec.psi_amp); });
  return solve_gs(g, [&](double R, double) { return -spec.c1 * R * R; }, spec.c2);
}

struct Profiles {
  SpectralField rho, p;
};

inline Profiles init_profiles(const SpectralField& psi, const EquilibriumSpec& spec) {
  Profiles out{SpectralField(psi.NR, psi.NZ), SpectralField(psi.NR, psi.NZ)};
  for (std::size_t n = 0; n < psi.size(); ++n) {
    out.rho.c0[n] = spec.rho(psi.c0[n]);
    out.p.c0[n] = spec.pressure_at(psi.c0[n]);
  }
  return out;
}

/// Adds amplitude sin(pi Rhat) sin(pi Zhat) to the cos harmonic of `target`.
inline State seed_perturbation(State s, const Grid& g, double amplitude, int target = kU) {
  if (amplitude < 0) throw ConfigError("perturbation amplitude must be >= 0");
  if (amplitude == 0) return s;
  SpectralField& f = s[target];
  for (int i = 0; i < g.NR; ++i)
    for (int j = 0; j < g.NZ; ++j) f.cc[f.idx(i, j)] += amplitude * detail::shat(g, g.R(i + 1), g.Z(j + 1));
  return s;
}

/// j and w from psi and u with the model's discrete operators.
inline State with_consistent_constraints(const Model& m, State s) {
  const Sampled a = m.sample(s);
  s.j() = project(lap_star(a.psi()));
  s.w() = project(lap_pol(a.u()));
  return s;
}

/// Right-hand side of the GS solve at (R, Z) where psi = 0.
inline double gs_rhs_on_boundary(const Grid& g, const EquilibriumSpec& spec, double R, double Z) {
  if (spec.rhs == GsRhsKind::manufactured) return manufactured_gs_rhs(g, R, Z, spec.psi_amp);
  if (spec.rhs == GsRhsKind::pedestal) return -R * R * spec.ped_dp(0.0);
  return -spec.c1 * R * R;
}

/// Ring values: psi = 0, rho and p at their psi = 0 profile values, j = delta* psi.
inline StateBoundary equilibrium_boundary(const Grid& g, const EquilibriumSpec& spec) {
  ClosedField psi(g), rho(g), p(g), j(g);
  std::fill(rho.c[0].begin(), rho.c[0].end(), spec.rho(0.0));
  std::fill(p.c[0].begin(), p.c[0].end(), spec.p_edge());
  for (int i = 0; i < g.nr(); ++i)
    for (int k = 0; k < g.nz(); ++k)
      if (g.is_boundary(i, k)) j.c[0][j.idx(i, k)] = gs_rhs_on_boundary(g, spec, g.R(i), g.Z(k));
  StateBoundary b = StateBoundary::fixed(g, psi, rho, p);
  b.ring[kJ] = j;
  return b;
}

/// GS psi, tanh profiles, seeded perturbation, consistent j and w.
inline State initial_state(const Model& m, const EquilibriumSpec& spec) {
  spec.validate();
  const Grid& g = m.grid();
  State s(g);
  s.psi() = solve_grad_shafranov(spec, g);
  const Profiles pr = init_profiles(s.psi(), spec);
  s.rho() = pr.rho;
  s.p() = pr.p;
  s = seed_perturbation(std::move(s), g, spec.perturbation, spec.target);
  return with_consistent_constraints(m, std::move(s));
}

struct GsStudyRow {
  int N = 0;
  double h = 0;
  double error = 0;  // L-infinity against psi_m on the interior
  double order = std::numeric_limits<double>::quiet_NaN();
};

/// Manufactured-solution refinement: NR = NZ = base 2^l + 1, l < levels.
inline std::vector<GsStudyRow> gs_convergence_study(const Grid& tmpl, int levels = 3, int base = 16) {
  if (levels < 2) throw ConfigError("gs study needs at least 2 levels");
  std::vector<GsStudyRow> rows;
  for (int l = 0; l < levels; ++l) {
    const int N = base * (1 << l) + 1;
    const Grid g = tmpl.with_size(N, N);
    EquilibriumSpec sp;
    sp.rhs = GsRhsKind::manufactured;
    const SpectralField psi = solve_grad_shafranov(sp, g);
    GsStudyRow r{N, g.hR(), 0.0};
    for (int i = 0; i < g.NR; ++i)
      for (int j = 0; j < g.NZ; ++j)
        r.error = std::max(r.error, std::abs(psi.c0[psi.idx(i, j)] - manufactured_psi(g, g.R(i + 1), g.Z(j + 1))));
    if (!rows.empty()) r.order = std::log(rows.back().error / r.error) / std::log(rows.back().h / r.h);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace rmhd
