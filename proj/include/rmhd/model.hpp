#pragma once

// Discrete right-hand sides, time terms and constraints of the reduced model.
// Everything is evaluated on the phi collocation grid and projected once.

#include <array>
#include <cmath>
#include <utility>

#include "rmhd/errors.hpp"
#include "rmhd/operators.hpp"
#include "rmhd/sampled.hpp"
#include "rmhd/state.hpp"

namespace rmhd {

/// Sampled state plus derived pointwise coefficients.
struct Sampled {
  std::array<Vol, kNumVars> f;
  Vol rho_c;  // rho with floor
  Vol T;      // p / rho_c with floor
  Vol eta, nu;

  const Vol& psi() const { return f[kPsi]; }
  const Vol& u() const { return f[kU]; }
  const Vol& j() const { return f[kJ]; }
  const Vol& w() const { return f[kW]; }
  const Vol& rho() const { return f[kRho]; }
  const Vol& p() const { return f[kP]; }
  const Vol& vpar() const { return f[kVpar]; }
};

/// Combination of time levels entering the time rows, already divided by dt.
/// dq = increment of vpar * grad_pol psi.
struct Increment {
  Vol dpsi, du, drho, dp, dvpar, dqR, dqZ;
};

/// Componentwise in (e_R, e_phi, e_Z).
template <class T>
struct Vec3 {
  T R, phi, Z;
};

/// (1/R) d_R(R aR) + d_Z aZ with centered stencils.
inline Vol div_pol(const Vol& aR, const Vol& aZ) {
  Vol out = times_rpow(dR(times_rpow(aR, 1)), -1);
  out += dZ(aZ);
  return out;
}

class Model {
 public:
  Model(const Grid& g, PhysParams params, ModelFlags flags)
      : Model(g, params, flags, StateBoundary::homogeneous(g)) {}
  Model(const Grid& g, PhysParams params, ModelFlags flags, StateBoundary boundary)
      : L_(make_layout(g)), par_(params), flags_(flags), bnd_(std::move(boundary)) {
    par_.validate();
    flags_.validate();
  }

  const LayoutPtr& layout() const { return L_; }
  const Grid& grid() const { return L_->grid; }
  const PhysParams& params() const { return par_; }
  const ModelFlags& flags() const { return flags_; }
  const StateBoundary& boundary() const { return bnd_; }

  Sampled sample(const State& s) const {
    Sampled out;
    const Grid& g = grid();
    for (int v : {kPsi, kU, kRho, kP}) out.f[v] = rmhd::sample(s[v], L_, bnd_.rule(v));
    if (flags_.with_vpar)
      out.f[kVpar] = rmhd::sample(s[kVpar], L_, bnd_.rule(kVpar));
    else
      out.f[kVpar] = Vol(L_);
    if (flags_.bc_variant == BcVariant::bc2) {
      out.f[kJ] = rmhd::sample(s[kJ], L_, bnd_.rule(kJ));
      out.f[kW] = rmhd::sample(s[kW], L_, bnd_.rule(kW));
    } else {
      ClosedField j = apply_boundary(s[kJ], BoundaryRule::homogeneous(), g);
      ClosedField w = apply_boundary(s[kW], BoundaryRule::homogeneous(), g);
      reflected_ring(apply_boundary(s[kPsi], bnd_.rule(kPsi), g), true, j);
      reflected_ring(apply_boundary(s[kU], bnd_.rule(kU), g), false, w);
      out.f[kJ] = rmhd::sample(j, L_);
      out.f[kW] = rmhd::sample(w, L_);
    }
    coefficients(out);
    return out;
  }

  // ---- B-side ----

  /// R[psi,u] + eta (delta* psi + d_phiphi psi / R^2) - F0 d_phi u
  Vol rhs_psi(const Sampled& s) const {
    const Vol& psi = s.psi();
    Vol out = times_rpow(bracket(psi, s.u()), 1);
    Vol diss = lap_star(psi);
    if (flags_.resistive_phi_term) diss += times_rpow(dphi(dphi(psi)), -2);
    out += s.eta * diss;
    out += -par_.F0 * dphi(s.u());
    if (par_.hyper_psi > 0) out += par_.hyper_psi * lap_pol(psi);
    return out;
  }

  Vol rhs_vorticity(const Sampled& s) const {
    const Vol& psi = s.psi();
    const Vol& u = s.u();
    const Vol& w = s.w();
    const Vol& j = s.j();
    const Vol R2 = rpow(L_, 2);
    const Vol rhohat = R2 * s.rho();
    const double F0 = par_.F0;

    Vol sum = 0.5 * bracket(R2 * gdot(u, u), rhohat);
    sum += bracket(rhohat * R2 * w, u);
    sum -= bracket(R2, s.p());
    sum += bracket(psi, j);
    if (flags_.neglected_terms) sum += vorticity_cross_bracket_terms(s, rhohat);
    Vol out = times_rpow(std::move(sum), -1);
    out += -F0 * times_rpow(dphi(j), -2);
    out += div_c_grad(s.nu, w);
    if (par_.hyper_w > 0) out += par_.hyper_w * lap_pol(w);
    if (flags_.neglected_terms) out += vorticity_cross_flux_terms(s, rhohat);
    return out;
  }

  /// Conservative form of R[rho,u] + 2 rho d_Z u + (parallel transport).
  Vol rhs_density(const Sampled& s) const {
    const Vol& rho = s.rho();
    Vol br = bracket(rpow(L_, 2) * rho, s.u());
    if (flags_.with_vpar) br += bracket(s.psi(), rho * s.vpar());
    Vol out = times_rpow(std::move(br), -1);
    if (flags_.with_vpar) out += -par_.F0 * times_rpow(dphi(rho * s.vpar()), -2);
    if (par_.k_par > 0 || par_.k_perp > 0) out += anisotropic_diffusion(s, rho);
    if (par_.hyper_rho > 0) out += par_.hyper_rho * lap_pol(rho);
    return out;
  }

  /// Conservative form of R[p,u] + 2 gamma p d_Z u + (parallel terms).
  Vol rhs_pressure(const Sampled& s) const {
    const Vol& p = s.p();
    const double gm1 = par_.gamma - 1.0;
    Vol br = bracket(rpow(L_, 2) * p, s.u());
    if (flags_.with_vpar) {
      br += bracket(s.psi(), p * s.vpar());
      br -= gm1 * (p * bracket(s.vpar(), s.psi()));
    }
    Vol out = times_rpow(std::move(br), -1);
    out += 2.0 * gm1 * (p * dZ(s.u()));
    if (flags_.with_vpar) {
      Vol tor = dphi(p * s.vpar());
      tor += gm1 * (p * dphi(s.vpar()));
      out += -par_.F0 * times_rpow(std::move(tor), -2);
    }
    if (par_.k_par > 0 || par_.k_perp > 0) out += anisotropic_diffusion(s, s.T);
    if (par_.hyper_p > 0) out += par_.hyper_p * lap_pol(p);
    return out;
  }

  Vol rhs_vpar(const Sampled& s) const {
    require_vpar("rhs_vpar");
    const Vol& psi = s.psi();
    const Vol& u = s.u();
    const Vol& v = s.vpar();
    const Vol& rho = s.rho();
    const double F0 = par_.F0;

    Vol out = -times_rpow(bracket(s.p(), psi), -1);
    out += -F0 * times_rpow(dphi(s.p()), -2);
    if (par_.hyper_vpar > 0) out += par_.hyper_vpar * lap_pol(v);
    if (!flags_.neglected_terms) return out;

    const Vol R2 = rpow(L_, 2);
    const Vol gpsi2 = gdot(psi, psi);
    const Vol Bpol2 = times_rpow(gpsi2, -2);
    const Vol B2 = times_rpow(gpsi2 + F0 * F0, -2);
    const Vol ke = 0.5 * (v * v * B2);
    const Vol gpu = gdot(psi, u);

    // Terms carrying 1/R.
    Vol a = rho * bracket(psi, ke);
    a -= 0.5 * (rho * bracket(R2 * gdot(u, u), psi));
    a -= (R2 * rho) * s.w() * bracket(psi, u);
    a -= rho * v * s.j() * bracket(u, psi);
    a -= rho * v * bracket(psi, gpu);
    out += times_rpow(std::move(a), -1);

    // Terms carrying R.
    Vol b = -(rho * B2 * bracket(u, v));
    b -= rho * v * bracket(u, 0.5 * B2);
    b += rho * v * bracket(u, 0.5 * Bpol2);
    out += times_rpow(std::move(b), 1);

    // Terms carrying 1/R^2.
    Vol c = -F0 * (rho * dphi(ke));
    c += F0 * (rho * v * gdot(psi, dphi(u)));
    c += (F0 * F0) * (rho * v * dZ(u));
    out += times_rpow(std::move(c), -2);
    return out;
  }

  // ---- time terms (A-side increments) ----

  /// Increment combination sum_m c[m] X^(m) over sampled states.
  Increment increment(const std::vector<const Sampled*>& levels,
                      const std::vector<double>& c) const {
    Increment inc;
    inc.dpsi = inc.du = inc.drho = inc.dp = inc.dvpar = inc.dqR = inc.dqZ = Vol(L_);
    for (std::size_t m = 0; m < levels.size(); ++m) {
      if (c[m] == 0.0) continue;
      const Sampled& s = *levels[m];
      inc.dpsi += c[m] * s.psi();
      inc.du += c[m] * s.u();
      inc.drho += c[m] * s.rho();
      inc.dp += c[m] * s.p();
      if (flags_.with_vpar) {
        inc.dvpar += c[m] * s.vpar();
        if (flags_.neglected_terms) {
          inc.dqR += c[m] * (s.vpar() * dR(s.psi()));
          inc.dqZ += c[m] * (s.vpar() * dZ(s.psi()));
        }
      }
    }
    return inc;
  }

  /// div(rhohat grad du) - div(rho dq), coefficients from `s` (new level).
  Vol time_vorticity(const Sampled& s, const Increment& inc) const {
    Vol out = div_c_grad(rpow(L_, 2) * s.rho(), inc.du);
    if (flags_.with_vpar && flags_.neglected_terms)
      out -= div_pol(s.rho() * inc.dqR, s.rho() * inc.dqZ);
    return out;
  }

  /// rho |B|^2 dv + (rho v / R^2) grad psi . grad dpsi - rho grad psi . grad du
  Vol time_vpar(const Sampled& s, const Increment& inc) const {
    require_vpar("time_vpar");
    const Vol& psi = s.psi();
    const Vol B2 = times_rpow(gdot(psi, psi) + par_.F0 * par_.F0, -2);
    Vol out = s.rho_c * B2 * inc.dvpar;
    out += times_rpow(s.rho() * s.vpar() * gdot(psi, inc.dpsi), -2);
    if (flags_.neglected_terms) out -= s.rho() * gdot(psi, inc.du);
    return out;
  }

  // ---- constraints ----

  Vol constraint_j(const Sampled& s) const { return s.j() - lap_star(s.psi()); }
  Vol constraint_w(const Sampled& s) const { return s.w() - lap_pol(s.u()); }

  // ---- fields ----

  Vec3<Vol> magnetic_field(const Sampled& s) const {
    return {times_rpow(dZ(s.psi()), -1), par_.F0 * rpow(L_, -1), -times_rpow(dR(s.psi()), -1)};
  }

  Vec3<Vol> velocity(const Sampled& s) const {
    Vec3<Vol> B = magnetic_field(s);
    const Vol& v = s.vpar();
    return {-times_rpow(dZ(s.u()), 1) + v * B.R, v * B.phi, times_rpow(dR(s.u()), 1) + v * B.Z};
  }

  /// div((k_par - k_perp) b (b.grad T)) + k_perp lap T, b = B/|B|.
  Vol anisotropic_diffusion(const Sampled& s, const Vol& T) const {
    return anisotropic_diffusion(magnetic_field(s), T, par_.k_par, par_.k_perp);
  }

  static Vol anisotropic_diffusion(const Vec3<Vol>& B, const Vol& T, double k_par,
                                   double k_perp) {
    const Vol Rinv = rpow(T.L, -1);
    Vec3<Vol> b = B;
    for (std::size_t n = 0; n < T.v.size(); ++n) {
      const double m = std::sqrt(B.R.v[n] * B.R.v[n] + B.phi.v[n] * B.phi.v[n] +
                                 B.Z.v[n] * B.Z.v[n]);
      if (!(m > kDegenerateB))
        throw DegenerateFieldError("anisotropic diffusion: |B| vanishes at a grid node");
      b.R.v[n] /= m;
      b.phi.v[n] /= m;
      b.Z.v[n] /= m;
    }
    const Vol tphi = dphi(T);
    Vol bg = b.R * dR(T) + b.Z * dZ(T) + b.phi * Rinv * tphi;
    bg *= (k_par - k_perp);
    Vol out = div_pol(b.R * bg, b.Z * bg);
    out += Rinv * dphi(b.phi * bg);
    if (k_perp > 0) out += k_perp * (lap_pol(T) + times_rpow(dphi(tphi), -2));
    return out;
  }

  static constexpr double kDegenerateB = 1e-12;

 private:
  LayoutPtr L_;
  PhysParams par_;
  ModelFlags flags_;
  StateBoundary bnd_;

  void require_vpar(const char* what) const {
    if (!flags_.with_vpar)
      throw ModelVariantError(std::string(what) + " requires the model with parallel velocity");
  }

  void coefficients(Sampled& s) const {
    s.rho_c = s.rho();
    for (double& x : s.rho_c.v) x = std::max(x, par_.rho_floor);
    s.T = s.p() / s.rho_c;
    for (double& x : s.T.v) x = std::max(x, par_.T_floor);
    s.eta = law(s.T, par_.eta0, par_.eta_exp);
    s.nu = law(s.T, par_.nu0, par_.nu_exp);
  }

  static Vol law(const Vol& T, double c0, double e) {
    Vol out(T.L, c0);
    if (e != 0.0 && c0 != 0.0)
      for (std::size_t n = 0; n < T.v.size(); ++n) out.v[n] = c0 * std::pow(T.v[n], e);
    return out;
  }

  /// Cross terms of the vorticity row that appear inside (1/R)[.,.].
  Vol vorticity_cross_bracket_terms(const Sampled& s, const Vol& rhohat) const {
    const Vol& psi = s.psi();
    const Vol& u = s.u();
    const Vol& v = s.vpar();
    const Vol& rho = s.rho();
    const Vol Bpol2 = times_rpow(gdot(psi, psi), -2);
    Vol out = bracket(rho * v * v * s.j(), psi);
    out += bracket(rho * v * gdot(v, psi), psi);
    out += bracket(rhohat, v * gdot(psi, u));
    out -= 0.5 * bracket(rhohat, v * v * Bpol2);
    out -= bracket(rhohat * v * s.w(), psi);
    out += bracket(u, rhohat * v * s.j());
    out += bracket(u, rhohat * gdot(psi, v));
    return out;
  }

  /// Cross terms of the vorticity row in divergence form.
  Vol vorticity_cross_flux_terms(const Sampled& s, const Vol& rhohat) const {
    const Vol& psi = s.psi();
    const Vol& v = s.vpar();
    const double F0 = par_.F0;
    const Vol up = dphi(s.u());
    const Vol c = F0 * times_rpow(rhohat * v, -2);
    Vol out = -div_pol(c * dR(up), c * dZ(up));
    const Vol d = F0 * times_rpow(rhohat * v, -3);
    Vol flux = dZ(d * dphi(v * dZ(psi)));
    flux += dR(d * dphi(v * dR(psi)));
    flux -= F0 * dZ(d * v);
    out += times_rpow(std::move(flux), -1);
    return out;
  }

  /// Boundary values of delta* (star) or delta_pol from mirrored ghosts.
  void reflected_ring(const ClosedField& f, bool star, ClosedField& out) const {
    const Grid& g = grid();
    const int nr = g.nr(), nz = g.nz();
    const double ir = 1.0 / (L_->hR * L_->hR), iz = 1.0 / (L_->hZ * L_->hZ);
    auto mi = [&](int i) { return i < 0 ? 1 : (i >= nr ? nr - 2 : i); };
    auto mj = [&](int j) { return j < 0 ? 1 : (j >= nz ? nz - 2 : j); };
    for (int h = 0; h < 3; ++h)
      for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nz; ++j) {
          if (!g.is_boundary(i, j)) continue;
          auto at = [&](int a, int b) { return f.c[h][f.idx(mi(a), mj(b))]; };
          const double r = L_->R[i];
          const double rp = r + 0.5 * L_->hR, rm = r - 0.5 * L_->hR;
          const double x = at(i, j);
          const double fr = star ? r * ((at(i + 1, j) - x) / rp - (x - at(i - 1, j)) / rm)
                                 : ((at(i + 1, j) - x) * rp - (x - at(i - 1, j)) * rm) / r;
          out.c[h][out.idx(i, j)] = ir * fr + iz * (at(i, j + 1) - 2.0 * x + at(i, j - 1));
        }
  }
};

// ---- SpectralField-level entry points ----

inline SpectralField rhs_psi(const Model& m, const State& s) { return project(m.rhs_psi(m.sample(s))); }
inline SpectralField rhs_vorticity(const Model& m, const State& s) {
  return project(m.rhs_vorticity(m.sample(s)));
}
inline SpectralField rhs_density(const Model& m, const State& s) {
  return project(m.rhs_density(m.sample(s)));
}
inline SpectralField rhs_pressure(const Model& m, const State& s) {
  return project(m.rhs_pressure(m.sample(s)));
}
inline SpectralField rhs_vpar(const Model& m, const State& s) {
  return project(m.rhs_vpar(m.sample(s)));
}

inline SpectralField lhs_vorticity_increment(const Model& m, const State& s_new,
                                             const State& s_old, double dt) {
  const Sampled a = m.sample(s_new), b = m.sample(s_old);
  return project(m.time_vorticity(a, m.increment({&a, &b}, {1.0 / dt, -1.0 / dt})));
}

inline SpectralField lhs_vpar_increment(const Model& m, const State& s_new, const State& s_old,
                                        double dt) {
  if (!m.flags().with_vpar)
    throw ModelVariantError("lhs_vpar_increment requires the model with parallel velocity");
  const Sampled a = m.sample(s_new), b = m.sample(s_old);
  return project(m.time_vpar(a, m.increment({&a, &b}, {1.0 / dt, -1.0 / dt})));
}

inline std::pair<SpectralField, SpectralField> constraints(const Model& m, const State& s) {
  const Sampled a = m.sample(s);
  return {project(m.constraint_j(a)), project(m.constraint_w(a))};
}

struct PotentialFields {
  Vec3<SpectralField> B, v;
};

inline PotentialFields fields_from_potentials(const Model& m, const State& s) {
  const Sampled a = m.sample(s);
  const Vec3<Vol> B = m.magnetic_field(a), v = m.velocity(a);
  return {{project(B.R), project(B.phi), project(B.Z)},
          {project(v.R), project(v.phi), project(v.Z)}};
}

}  // namespace rmhd
