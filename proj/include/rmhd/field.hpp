#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rmhd/grid.hpp"

namespace rmhd {

enum Harmonic : int { kMode0 = 0, kCos = 1, kSin = 2 };

/// Field f = c0 + cc cos(n_p phi) + cs sin(n_p phi) on the interior nodes.
/// Arrays are NR x NZ, row-major in (R, Z).
struct SpectralField {
  int NR = 0;
  int NZ = 0;
  std::vector<double> c0, cc, cs;

  SpectralField() = default;
  SpectralField(int nr, int nz)
      : NR(nr), NZ(nz), c0(std::size_t(nr) * nz, 0.0), cc(c0), cs(c0) {}
  explicit SpectralField(const Grid& g) : SpectralField(g.NR, g.NZ) {}

  std::size_t idx(int i, int j) const { return std::size_t(i) * NZ + j; }
  std::vector<double>& comp(int h) { return h == kMode0 ? c0 : (h == kCos ? cc : cs); }
  const std::vector<double>& comp(int h) const {
    return h == kMode0 ? c0 : (h == kCos ? cc : cs);
  }
  std::size_t size() const { return c0.size(); }

  bool all_finite() const {
    for (int h = 0; h < 3; ++h)
      for (double v : comp(h))
        if (!std::isfinite(v)) return false;
    return true;
  }

  SpectralField& operator+=(const SpectralField& o) {
    for (int h = 0; h < 3; ++h) {
      auto& a = comp(h);
      const auto& b = o.comp(h);
      for (std::size_t n = 0; n < a.size(); ++n) a[n] += b[n];
    }
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    for (int h = 0; h < 3; ++h) {
      auto& a = comp(h);
      const auto& b = o.comp(h);
      for (std::size_t n = 0; n < a.size(); ++n) a[n] -= b[n];
    }
    return *this;
  }
  SpectralField& operator*=(double s) {
    for (int h = 0; h < 3; ++h)
      for (double& v : comp(h)) v *= s;
    return *this;
  }
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
  friend SpectralField operator*(SpectralField a, double s) { return a *= s; }

  bool operator==(const SpectralField& o) const {
    return NR == o.NR && NZ == o.NZ && c0 == o.c0 && cc == o.cc && cs == o.cs;
  }

  /// Value at interior node (i,j), 0-based, and angle phi.
  double eval(int i, int j, double phi, int n_p) const {
    const std::size_t n = idx(i, j);
    return c0[n] + cc[n] * std::cos(n_p * phi) + cs[n] * std::sin(n_p * phi);
  }
};

/// Harmonic coefficients on the closed grid (interior plus boundary ring).
/// Arrays are (NR+2) x (NZ+2), row-major in (R, Z).
struct ClosedField {
  int nr = 0;
  int nz = 0;
  std::array<std::vector<double>, 3> c;

  ClosedField() = default;
  explicit ClosedField(const Grid& g) : nr(g.nr()), nz(g.nz()) {
    for (auto& v : c) v.assign(std::size_t(nr) * nz, 0.0);
  }
  std::size_t idx(int i, int j) const { return std::size_t(i) * nz + j; }

  SpectralField interior() const {
    SpectralField f(nr - 2, nz - 2);
    for (int h = 0; h < 3; ++h)
      for (int i = 0; i < nr - 2; ++i)
        for (int j = 0; j < nz - 2; ++j) f.comp(h)[f.idx(i, j)] = c[h][idx(i + 1, j + 1)];
    return f;
  }
};

}  // namespace rmhd
