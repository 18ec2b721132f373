#pragma once

// Fields sampled at the phi collocation points on the closed grid. All
// nonlinear expressions are evaluated here and projected back onto the
// retained harmonics afterwards.

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "rmhd/field.hpp"
#include "rmhd/grid.hpp"

namespace rmhd {

struct Layout {
  Grid grid;
  int nphi = 0, nr = 0, nz = 0;
  double hR = 0, hZ = 0;
  std::vector<double> R;       // closed-grid radii, size nr
  std::vector<double> Rface;   // R_{i+1/2}, size nr-1
  std::vector<double> cosk, sink;  // cos(n_p phi_k), sin(n_p phi_k)
  std::vector<double> Dphi;    // nphi x nphi spectral derivative in phi

  explicit Layout(const Grid& g) : grid(g) {
    g.validate();
    nphi = g.N_phi;
    nr = g.nr();
    nz = g.nz();
    hR = g.hR();
    hZ = g.hZ();
    R.resize(nr);
    for (int i = 0; i < nr; ++i) R[i] = g.R(i);
    Rface.resize(nr - 1);
    for (int i = 0; i + 1 < nr; ++i) Rface[i] = g.R_min + (i + 0.5) * hR;
    cosk.resize(nphi);
    sink.resize(nphi);
    const double pi = std::numbers::pi;
    for (int k = 0; k < nphi; ++k) {
      const double a = 2.0 * pi * k / nphi;
      cosk[k] = std::cos(a);
      sink[k] = std::sin(a);
    }
    // Trigonometric-interpolant derivative on an even number of points with
    // the Nyquist mode dropped; scaled by n_p because samples span 2*pi/n_p.
    Dphi.assign(std::size_t(nphi) * nphi, 0.0);
    for (int k = 0; k < nphi; ++k)
      for (int l = 0; l < nphi; ++l) {
        if (k == l) continue;
        const int d = k - l;
        const double sgn = (d % 2 == 0) ? 1.0 : -1.0;
        if (nphi % 2 == 0)
          Dphi[std::size_t(k) * nphi + l] = 0.5 * sgn / std::tan(pi * d / nphi) * g.n_p;
        else
          Dphi[std::size_t(k) * nphi + l] = 0.5 * sgn / std::sin(pi * d / nphi) * g.n_p;
      }
  }
  std::size_t plane() const { return std::size_t(nr) * nz; }
  std::size_t size() const { return plane() * nphi; }
};

using LayoutPtr = std::shared_ptr<const Layout>;

inline LayoutPtr make_layout(const Grid& g) { return std::make_shared<const Layout>(g); }

/// Physical-space field: nphi planes of (NR+2) x (NZ+2) values.
class Vol {
 public:
  LayoutPtr L;
  std::vector<double> v;

  Vol() = default;
  explicit Vol(LayoutPtr l, double fill = 0.0) : L(std::move(l)), v(L->size(), fill) {}

  std::size_t at(int k, int i, int j) const {
    return (std::size_t(k) * L->nr + i) * L->nz + j;
  }
  double& operator()(int k, int i, int j) { return v[at(k, i, j)]; }
  double operator()(int k, int i, int j) const { return v[at(k, i, j)]; }

  Vol& operator+=(const Vol& o) {
    for (std::size_t n = 0; n < v.size(); ++n) v[n] += o.v[n];
    return *this;
  }
  Vol& operator-=(const Vol& o) {
    for (std::size_t n = 0; n < v.size(); ++n) v[n] -= o.v[n];
    return *this;
  }
  Vol& operator*=(const Vol& o) {
    for (std::size_t n = 0; n < v.size(); ++n) v[n] *= o.v[n];
    return *this;
  }
  Vol& operator/=(const Vol& o) {
    for (std::size_t n = 0; n < v.size(); ++n) v[n] /= o.v[n];
    return *this;
  }
  Vol& operator*=(double s) {
    for (double& x : v) x *= s;
    return *this;
  }
  Vol& operator+=(double s) {
    for (double& x : v) x += s;
    return *this;
  }
};

inline Vol operator+(Vol a, const Vol& b) { return a += b; }
inline Vol operator-(Vol a, const Vol& b) { return a -= b; }
inline Vol operator*(Vol a, const Vol& b) { return a *= b; }
inline Vol operator/(Vol a, const Vol& b) { return a /= b; }
inline Vol operator*(double s, Vol a) { return a *= s; }
inline Vol operator*(Vol a, double s) { return a *= s; }
inline Vol operator+(Vol a, double s) { return a += s; }
inline Vol operator-(Vol a) { return a *= -1.0; }

/// R^p broadcast over the sampled grid.
inline Vol rpow(const LayoutPtr& L, int p) {
  Vol out(L);
  for (int k = 0; k < L->nphi; ++k)
    for (int i = 0; i < L->nr; ++i) {
      const double r = std::pow(L->R[i], p);
      for (int j = 0; j < L->nz; ++j) out(k, i, j) = r;
    }
  return out;
}

/// Multiply by R^p in place without building a temporary.
inline Vol times_rpow(Vol a, int p) {
  const Layout& L = *a.L;
  for (int k = 0; k < L.nphi; ++k)
    for (int i = 0; i < L.nr; ++i) {
      const double r = std::pow(L.R[i], p);
      double* row = &a.v[a.at(k, i, 0)];
      for (int j = 0; j < L.nz; ++j) row[j] *= r;
    }
  return a;
}

inline Vol apply(Vol a, double (*f)(double)) {
  for (double& x : a.v) x = f(x);
  return a;
}

/// Centered first difference in R; second-order one-sided rows at i=0, nr-1.
inline Vol dR(const Vol& a) {
  const Layout& L = *a.L;
  Vol out(a.L);
  const double c = 0.5 / L.hR;
  const int n = L.nr - 1;
  for (int k = 0; k < L.nphi; ++k) {
    for (int j = 0; j < L.nz; ++j) {
      out(k, 0, j) = c * (-3.0 * a(k, 0, j) + 4.0 * a(k, 1, j) - a(k, 2, j));
      out(k, n, j) = c * (3.0 * a(k, n, j) - 4.0 * a(k, n - 1, j) + a(k, n - 2, j));
    }
    for (int i = 1; i < n; ++i) {
      const double* up = &a.v[a.at(k, i + 1, 0)];
      const double* dn = &a.v[a.at(k, i - 1, 0)];
      double* o = &out.v[out.at(k, i, 0)];
      for (int j = 0; j < L.nz; ++j) o[j] = c * (up[j] - dn[j]);
    }
  }
  return out;
}

/// Centered first difference in Z; second-order one-sided rows at j=0, nz-1.
inline Vol dZ(const Vol& a) {
  const Layout& L = *a.L;
  Vol out(a.L);
  const double c = 0.5 / L.hZ;
  const int n = L.nz - 1;
  for (int k = 0; k < L.nphi; ++k)
    for (int i = 0; i < L.nr; ++i) {
      const double* x = &a.v[a.at(k, i, 0)];
      double* o = &out.v[out.at(k, i, 0)];
      o[0] = c * (-3.0 * x[0] + 4.0 * x[1] - x[2]);
      o[n] = c * (3.0 * x[n] - 4.0 * x[n - 1] + x[n - 2]);
      for (int j = 1; j < n; ++j) o[j] = c * (x[j + 1] - x[j - 1]);
    }
  return out;
}

/// Spectral derivative along phi at every node.
inline Vol dphi(const Vol& a) {
  const Layout& L = *a.L;
  Vol out(a.L);
  const std::size_t P = L.plane();
  for (int k = 0; k < L.nphi; ++k) {
    double* o = &out.v[k * P];
    for (int l = 0; l < L.nphi; ++l) {
      const double d = L.Dphi[std::size_t(k) * L.nphi + l];
      if (d == 0.0) continue;
      const double* x = &a.v[l * P];
      for (std::size_t n = 0; n < P; ++n) o[n] += d * x[n];
    }
  }
  return out;
}

/// Compact conservative div(c grad a), c averaged to faces; interior rows only.
inline Vol div_c_grad(const Vol& c, const Vol& a) {
  const Layout& L = *a.L;
  Vol out(a.L);
  const double ir = 1.0 / (L.hR * L.hR), iz = 1.0 / (L.hZ * L.hZ);
  for (int k = 0; k < L.nphi; ++k)
    for (int i = 1; i < L.nr - 1; ++i) {
      const double rp = L.Rface[i], rm = L.Rface[i - 1], r = L.R[i];
      for (int j = 1; j < L.nz - 1; ++j) {
        const double cp = 0.5 * (c(k, i, j) + c(k, i + 1, j));
        const double cm = 0.5 * (c(k, i, j) + c(k, i - 1, j));
        const double zp = 0.5 * (c(k, i, j) + c(k, i, j + 1));
        const double zm = 0.5 * (c(k, i, j) + c(k, i, j - 1));
        const double x = a(k, i, j);
        out(k, i, j) = ir / r * (rp * cp * (a(k, i + 1, j) - x) - rm * cm * (x - a(k, i - 1, j))) +
                       iz * (zp * (a(k, i, j + 1) - x) - zm * (x - a(k, i, j - 1)));
      }
    }
  return out;
}

/// (1/R) d_R(R d_R a) + d_ZZ a by composed forward/backward differences.
inline Vol lap_pol(const Vol& a) {
  const Layout& L = *a.L;
  Vol out(a.L);
  const double ir = 1.0 / (L.hR * L.hR), iz = 1.0 / (L.hZ * L.hZ);
  for (int k = 0; k < L.nphi; ++k)
    for (int i = 1; i < L.nr - 1; ++i) {
      const double rp = L.Rface[i], rm = L.Rface[i - 1], r = L.R[i];
      for (int j = 1; j < L.nz - 1; ++j) {
        const double x = a(k, i, j);
        out(k, i, j) = ir / r * (rp * (a(k, i + 1, j) - x) - rm * (x - a(k, i - 1, j))) +
                       iz * (a(k, i, j + 1) - 2.0 * x + a(k, i, j - 1));
      }
    }
  return out;
}

/// R d_R((1/R) d_R a) + d_ZZ a by composed forward/backward differences.
inline Vol lap_star(const Vol& a) {
  const Layout& L = *a.L;
  Vol out(a.L);
  const double ir = 1.0 / (L.hR * L.hR), iz = 1.0 / (L.hZ * L.hZ);
  for (int k = 0; k < L.nphi; ++k)
    for (int i = 1; i < L.nr - 1; ++i) {
      const double rp = L.Rface[i], rm = L.Rface[i - 1], r = L.R[i];
      for (int j = 1; j < L.nz - 1; ++j) {
        const double x = a(k, i, j);
        out(k, i, j) = ir * r * ((a(k, i + 1, j) - x) / rp - (x - a(k, i - 1, j)) / rm) +
                       iz * (a(k, i, j + 1) - 2.0 * x + a(k, i, j - 1));
      }
    }
  return out;
}

/// [a,b] = d_R a d_Z b - d_Z a d_R b.
inline Vol bracket(const Vol& a, const Vol& b) {
  Vol ar = dR(a), az = dZ(a), br = dR(b), bz = dZ(b);
  for (std::size_t n = 0; n < ar.v.size(); ++n) ar.v[n] = ar.v[n] * bz.v[n] - az.v[n] * br.v[n];
  return ar;
}

/// grad_pol a . grad_pol b
inline Vol gdot(const Vol& a, const Vol& b) {
  Vol ar = dR(a), az = dZ(a), br = dR(b), bz = dZ(b);
  for (std::size_t n = 0; n < ar.v.size(); ++n) ar.v[n] = ar.v[n] * br.v[n] + az.v[n] * bz.v[n];
  return ar;
}

/// Samples a closed field at the collocation angles.
inline Vol sample(const ClosedField& f, const LayoutPtr& L) {
  Vol out(L);
  const std::size_t P = L->plane();
  for (int k = 0; k < L->nphi; ++k) {
    const double c = L->cosk[k], s = L->sink[k];
    double* o = &out.v[k * P];
    for (std::size_t n = 0; n < P; ++n) o[n] = f.c[0][n] + c * f.c[1][n] + s * f.c[2][n];
  }
  return out;
}

/// Discrete Fourier projection onto {1, cos, sin}, all closed-grid nodes.
inline ClosedField project_closed(const Vol& a) {
  const Layout& L = *a.L;
  ClosedField f(L.grid);
  const std::size_t P = L.plane();
  const double w0 = 1.0 / L.nphi, w1 = 2.0 / L.nphi;
  for (int k = 0; k < L.nphi; ++k) {
    const double c = L.cosk[k] * w1, s = L.sink[k] * w1;
    const double* x = &a.v[k * P];
    for (std::size_t n = 0; n < P; ++n) {
      f.c[0][n] += w0 * x[n];
      f.c[1][n] += c * x[n];
      f.c[2][n] += s * x[n];
    }
  }
  return f;
}

/// Projection restricted to interior nodes.
inline SpectralField project(const Vol& a) { return project_closed(a).interior(); }

/// Trapezoid weights in (R,Z) on the closed grid times R, exact phi average.
inline double integrate_dW(const Vol& a) {
  const Layout& L = *a.L;
  double sum = 0.0;
  for (int k = 0; k < L.nphi; ++k)
    for (int i = 0; i < L.nr; ++i) {
      const double wi = (i == 0 || i == L.nr - 1) ? 0.5 : 1.0;
      double row = 0.0;
      for (int j = 0; j < L.nz; ++j) {
        const double wj = (j == 0 || j == L.nz - 1) ? 0.5 : 1.0;
        row += wj * a(k, i, j);
      }
      sum += wi * L.R[i] * row;
    }
  return sum * L.hR * L.hZ * 2.0 * std::numbers::pi / L.nphi;
}

/// Same quadrature with measure dR dZ dphi.
inline double integrate_dV(const Vol& a) {
  const Layout& L = *a.L;
  double sum = 0.0;
  for (int k = 0; k < L.nphi; ++k)
    for (int i = 0; i < L.nr; ++i) {
      const double wi = (i == 0 || i == L.nr - 1) ? 0.5 : 1.0;
      double row = 0.0;
      for (int j = 0; j < L.nz; ++j) {
        const double wj = (j == 0 || j == L.nz - 1) ? 0.5 : 1.0;
        row += wj * a(k, i, j);
      }
      sum += wi * row;
    }
  return sum * L.hR * L.hZ * 2.0 * std::numbers::pi / L.nphi;
}

/// L2(dR dZ dphi) norm over interior nodes.
inline double l2_interior(const Vol& a) {
  const Layout& L = *a.L;
  double sum = 0.0;
  for (int k = 0; k < L.nphi; ++k)
    for (int i = 1; i < L.nr - 1; ++i)
      for (int j = 1; j < L.nz - 1; ++j) sum += a(k, i, j) * a(k, i, j);
  return std::sqrt(sum * L.hR * L.hZ * 2.0 * std::numbers::pi / L.nphi);
}

inline double max_abs_interior(const Vol& a) {
  const Layout& L = *a.L;
  double m = 0.0;
  for (int k = 0; k < L.nphi; ++k)
    for (int i = 1; i < L.nr - 1; ++i)
      for (int j = 1; j < L.nz - 1; ++j) m = std::max(m, std::abs(a(k, i, j)));
  return m;
}

/// Fills every node with f(R, Z, phi).
template <class F>
Vol tabulate(const LayoutPtr& L, F&& f) {
  Vol out(L);
  for (int k = 0; k < L->nphi; ++k) {
    const double ph = L->grid.phi(k);
    for (int i = 0; i < L->nr; ++i)
      for (int j = 0; j < L->nz; ++j) out(k, i, j) = f(L->R[i], L->grid.Z(j), ph);
  }
  return out;
}

}  // namespace rmhd
