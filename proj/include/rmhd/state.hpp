#pragma once

#include <array>
#include <string>

#include "rmhd/errors.hpp"
#include "rmhd/field.hpp"
#include "rmhd/operators.hpp"

namespace rmhd {

enum Var : int { kPsi = 0, kU, kJ, kW, kRho, kP, kVpar, kNumVars };

inline const char* var_name(int v) {
  static const char* names[] = {"psi", "u", "j", "w", "rho", "p", "vpar"};
  return names[v];
}

/// U = (psi, u, j, w, rho, p, vpar).
struct State {
  std::array<SpectralField, kNumVars> f;

  State() = default;
  explicit State(const Grid& g) {
    for (auto& x : f) x = SpectralField(g);
  }
  SpectralField& operator[](int v) { return f[v]; }
  const SpectralField& operator[](int v) const { return f[v]; }
  SpectralField& psi() { return f[kPsi]; }
  SpectralField& u() { return f[kU]; }
  SpectralField& j() { return f[kJ]; }
  SpectralField& w() { return f[kW]; }
  SpectralField& rho() { return f[kRho]; }
  SpectralField& p() { return f[kP]; }
  SpectralField& vpar() { return f[kVpar]; }
  const SpectralField& psi() const { return f[kPsi]; }
  const SpectralField& u() const { return f[kU]; }
  const SpectralField& j() const { return f[kJ]; }
  const SpectralField& w() const { return f[kW]; }
  const SpectralField& rho() const { return f[kRho]; }
  const SpectralField& p() const { return f[kP]; }
  const SpectralField& vpar() const { return f[kVpar]; }

  bool operator==(const State& o) const { return f == o.f; }
};

struct PhysParams {
  double F0 = 1.0;
  double gamma = 5.0 / 3.0;
  double eta0 = 0.0;
  double eta_exp = 0.0;
  double nu0 = 0.0;
  double nu_exp = 0.0;
  double k_par = 0.0;
  double k_perp = 0.0;
  double hyper_psi = 0.0;
  double hyper_w = 0.0;
  double hyper_rho = 0.0;
  double hyper_p = 0.0;
  double hyper_vpar = 0.0;
  double rho_floor = 1e-10;
  double T_floor = 1e-8;

  void validate() const {
    if (!(gamma > 1.0)) throw ConfigError("physics: gamma must be > 1");
    if (eta0 < 0 || nu0 < 0 || k_par < 0 || k_perp < 0)
      throw ConfigError("physics: eta0, nu0, k_par, k_perp must be >= 0");
    if (k_par < k_perp) throw ConfigError("physics: k_par must be >= k_perp");
    if (hyper_psi < 0 || hyper_w < 0 || hyper_rho < 0 || hyper_p < 0 || hyper_vpar < 0)
      throw ConfigError("physics: hyperdiffusion coefficients must be >= 0");
    if (!(rho_floor > 0) || !(T_floor > 0)) throw ConfigError("physics: floors must be > 0");
  }
};

enum class BcVariant { bc, bc2 };

inline BcVariant parse_bc_variant(const std::string& s) {
  if (s == "bc") return BcVariant::bc;
  if (s == "bc2") return BcVariant::bc2;
  throw ConfigError("unknown bc_variant '" + s + "'");
}

struct ModelFlags {
  bool with_vpar = true;
  /// Cross terms between poloidal and parallel velocity, and the v.grad v
  /// projections in the parallel momentum equation.
  bool neglected_terms = true;
  BcVariant bc_variant = BcVariant::bc2;
  /// eta d_phiphi psi / R^2 in the flux equation.
  bool resistive_phi_term = true;

  void validate() const {
    if (neglected_terms && !with_vpar)
      throw ConfigError("model: neglected_terms requires with_vpar");
  }
  int num_vars() const { return with_vpar ? 7 : 6; }
};

/// Ring values for every variable. Homogeneous means all zero.
struct StateBoundary {
  BoundaryKind kind = BoundaryKind::homogeneous;
  std::array<ClosedField, kNumVars> ring;

  static StateBoundary homogeneous(const Grid& g) {
    StateBoundary b;
    for (auto& r : b.ring) r = ClosedField(g);
    return b;
  }
  /// Clamp psi, rho, p to the given closed fields' ring; u, j, w, vpar zero.
  static StateBoundary fixed(const Grid& g, const ClosedField& psi, const ClosedField& rho,
                             const ClosedField& p) {
    StateBoundary b = homogeneous(g);
    b.kind = BoundaryKind::fixed;
    b.ring[kPsi] = psi;
    b.ring[kRho] = rho;
    b.ring[kP] = p;
    return b;
  }
  BoundaryRule rule(int v) const {
    if (kind == BoundaryKind::homogeneous) return BoundaryRule::homogeneous();
    return BoundaryRule::fixed(ring[v]);
  }
};

}  // namespace rmhd
