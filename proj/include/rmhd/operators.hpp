#pragma once

#include <string>
#include <utility>

#include "rmhd/errors.hpp"
#include "rmhd/field.hpp"
#include "rmhd/sampled.hpp"

namespace rmhd {

enum class BoundaryKind { homogeneous, fixed };

/// Dirichlet closure. `stored` holds the ring values used by the fixed rule;
/// its interior entries are ignored.
struct BoundaryRule {
  BoundaryKind kind = BoundaryKind::homogeneous;
  ClosedField stored;

  static BoundaryRule homogeneous() { return {}; }
  static BoundaryRule fixed(ClosedField values) {
    return {BoundaryKind::fixed, std::move(values)};
  }
};

inline BoundaryKind parse_boundary_kind(const std::string& name) {
  if (name == "homogeneous" || name == "homogeneous-dirichlet") return BoundaryKind::homogeneous;
  if (name == "fixed" || name == "fixed-dirichlet") return BoundaryKind::fixed;
  throw ConfigError("unknown boundary rule '" + name + "'");
}

/// Interior values from f, ring values from the rule.
inline ClosedField apply_boundary(const SpectralField& f, const BoundaryRule& rule,
                                  const Grid& g) {
  ClosedField out(g);
  if (rule.kind == BoundaryKind::fixed) {
    if (rule.stored.nr != g.nr() || rule.stored.nz != g.nz())
      throw ConfigError("fixed boundary values do not match the grid");
    for (int h = 0; h < 3; ++h)
      for (int i = 0; i < g.nr(); ++i)
        for (int j = 0; j < g.nz(); ++j)
          if (g.is_boundary(i, j)) out.c[h][out.idx(i, j)] = rule.stored.c[h][out.idx(i, j)];
  }
  for (int h = 0; h < 3; ++h)
    for (int i = 0; i < g.NR; ++i)
      for (int j = 0; j < g.NZ; ++j) out.c[h][out.idx(i + 1, j + 1)] = f.comp(h)[f.idx(i, j)];
  return out;
}

inline Vol sample(const SpectralField& f, const LayoutPtr& L,
                  const BoundaryRule& rule = BoundaryRule::homogeneous()) {
  return sample(apply_boundary(f, rule, L->grid), L);
}

struct GradPol {
  SpectralField fR, fZ;
};

inline GradPol grad_pol(const SpectralField& f, const LayoutPtr& L,
                        const BoundaryRule& rule = BoundaryRule::homogeneous()) {
  const Vol v = sample(f, L, rule);
  return {project(dR(v)), project(dZ(v))};
}

/// Exact derivative in phi: (c0, cc, cs) -> (0, n_p cs, -n_p cc).
inline SpectralField d_phi(const SpectralField& f, int n_p) {
  SpectralField out(f.NR, f.NZ);
  for (std::size_t n = 0; n < f.size(); ++n) {
    out.cc[n] = n_p * f.cs[n];
    out.cs[n] = -n_p * f.cc[n];
  }
  return out;
}

inline SpectralField bracket(const SpectralField& a, const SpectralField& b, const LayoutPtr& L,
                             const BoundaryRule& ra = BoundaryRule::homogeneous(),
                             const BoundaryRule& rb = BoundaryRule::homogeneous()) {
  return project(bracket(sample(a, L, ra), sample(b, L, rb)));
}

inline SpectralField delta_star(const SpectralField& f, const LayoutPtr& L,
                                const BoundaryRule& rule = BoundaryRule::homogeneous()) {
  return project(lap_star(sample(f, L, rule)));
}

inline SpectralField delta_pol(const SpectralField& f, const LayoutPtr& L,
                               const BoundaryRule& rule = BoundaryRule::homogeneous()) {
  return project(lap_pol(sample(f, L, rule)));
}

/// Pseudo-spectral product truncated back to {1, cos, sin}.
inline SpectralField multiply(const SpectralField& f, const SpectralField& g, const LayoutPtr& L) {
  return project(sample(f, L) * sample(g, L));
}

/// Only the mode-0 coefficient survives the phi integral (weight 2*pi).
inline double integrate_dW(const SpectralField& f, const LayoutPtr& L,
                           const BoundaryRule& rule = BoundaryRule::homogeneous()) {
  const ClosedField c = apply_boundary(f, rule, L->grid);
  double sum = 0.0;
  for (int i = 0; i < L->nr; ++i) {
    const double wi = (i == 0 || i == L->nr - 1) ? 0.5 : 1.0;
    double row = 0.0;
    for (int j = 0; j < L->nz; ++j) {
      const double wj = (j == 0 || j == L->nz - 1) ? 0.5 : 1.0;
      row += wj * c.c[0][c.idx(i, j)];
    }
    sum += wi * L->R[i] * row;
  }
  return sum * L->hR * L->hZ * 2.0 * std::numbers::pi;
}

}  // namespace rmhd
