#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmhd {

/// Uniform tensor grid on [R_min,R_max]x[Z_min,Z_max] plus phi collocation.
///
/// NR, NZ count interior nodes. Closed-grid index i runs 0..NR+1 with i=0 and
/// i=NR+1 on the boundary; the same holds for j.
struct Grid {
  double R_min = 1.0;
  double R_max = 2.0;
  double Z_min = 0.0;
  double Z_max = 1.0;
  int NR = 17;
  int NZ = 17;
  int n_p = 8;
  int N_phi = 8;

  void validate() const {
    if (!(R_min > 0.0)) throw std::invalid_argument("grid: R_min must be > 0");
    if (!(R_max > R_min)) throw std::invalid_argument("grid: R_max must exceed R_min");
    if (!(Z_max > Z_min)) throw std::invalid_argument("grid: Z_max must exceed Z_min");
    if (NR < 3 || NZ < 3) throw std::invalid_argument("grid: NR and NZ must be >= 3");
    if (n_p < 1) throw std::invalid_argument("grid: n_p must be a positive integer");
    if (N_phi < 8) throw std::invalid_argument("grid: N_phi must be >= 8");
  }

  double hR() const { return (R_max - R_min) / (NR + 1); }
  double hZ() const { return (Z_max - Z_min) / (NZ + 1); }
  int nr() const { return NR + 2; }
  int nz() const { return NZ + 2; }
  double R(int i) const { return R_min + i * hR(); }
  double Z(int j) const { return Z_min + j * hZ(); }
  /// Normalized coordinates in [0,1].
  double Rhat(int i) const { return (R(i) - R_min) / (R_max - R_min); }
  double Zhat(int j) const { return (Z(j) - Z_min) / (Z_max - Z_min); }
  /// Collocation angle; samples span one period 2*pi/n_p.
  double phi(int k) const {
    return 2.0 * std::numbers::pi * k / (static_cast<double>(n_p) * N_phi);
  }
  bool is_boundary(int i, int j) const {
    return i == 0 || j == 0 || i == NR + 1 || j == NZ + 1;
  }
  /// Same geometry, different resolution.
  Grid with_size(int nr_, int nz_) const {
    Grid g = *this;
    g.NR = nr_;
    g.NZ = nz_;
    return g;
  }
};

inline bool same_shape(const Grid& a, const Grid& b) {
  return a.NR == b.NR && a.NZ == b.NZ && a.n_p == b.n_p && a.N_phi == b.N_phi &&
         a.R_min == b.R_min && a.R_max == b.R_max && a.Z_min == b.Z_min &&
         a.Z_max == b.Z_max;
}

}  // namespace rmhd
