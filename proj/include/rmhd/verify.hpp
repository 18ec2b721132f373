#pragma once

// Numerical verification of the projection identities and the energy groups
// on manufactured fields.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rmhd/errors.hpp"
#include "rmhd/model.hpp"

namespace rmhd {

// ---------------- manufactured fields ----------------

/// f = e(R) e(Z) sum_{k,m=1..modes} (a + b cos + c sin) sin(k pi Rhat) sin(m pi Zhat),
/// e(x) = sin^2(pi x). The envelope makes f and its first two derivatives vanish
/// on the boundary.
class Manufactured {
 public:
  struct Jet {
    double f = 0, fR = 0, fZ = 0, fRR = 0, fZZ = 0;
  };

  Manufactured() = default;
  Manufactured(std::mt19937_64& rng, double amp, int modes = kMaxModes) : modes_(modes) {
    if (modes < 1 || modes > kMaxModes) throw ConfigError("manufactured fields: modes must be in 1..3");
    std::uniform_real_distribution<double> U(-amp, amp);
    for (int k = 0; k < modes; ++k)
      for (int m = 0; m < modes; ++m)
        for (int h = 0; h < 3; ++h) c_[h][k][m] = U(rng);
  }

  Jet eval(const Grid& g, int h, double R, double Z) const {
    const double LR = g.R_max - g.R_min, LZ = g.Z_max - g.Z_min;
    const double x = (R - g.R_min) / LR, y = (Z - g.Z_min) / LZ;
    Jet out;
    for (int k = 0; k < modes_; ++k) {
      double X[3];
      basis(k + 1, x, X);
      for (int m = 0; m < modes_; ++m) {
        double Y[3];
        basis(m + 1, y, Y);
        const double c = c_[h][k][m];
        out.f += c * X[0] * Y[0];
        out.fR += c * X[1] * Y[0] / LR;
        out.fZ += c * X[0] * Y[1] / LZ;
        out.fRR += c * X[2] * Y[0] / (LR * LR);
        out.fZZ += c * X[0] * Y[2] / (LZ * LZ);
      }
    }
    return out;
  }

 private:
  static constexpr int kMaxModes = 3;
  int modes_ = kMaxModes;
  double c_[3][kMaxModes][kMaxModes] = {};

  /// sin^2(pi x) sin(k pi x) and its first two derivatives.
  static void basis(int k, double x, double* d) {
    const double pi = std::numbers::pi;
    const double s = std::sin(pi * x), c = std::cos(pi * x);
    const double S = std::sin(k * pi * x), C = std::cos(k * pi * x);
    d[0] = s * s * S;
    d[1] = 2 * pi * s * c * S + k * pi * s * s * C;
    d[2] = 2 * pi * pi * (c * c - s * s) * S + 4 * k * pi * pi * s * c * C - k * k * pi * pi * s * s * S;
  }
};

/// Fields, time derivatives and the matching state on one grid.
struct Bundle {
  LayoutPtr L;
  PhysParams par;
  std::array<Vol, kNumVars> f;
  Vol ut, psit, vpt;
  State state;
  StateBoundary bnd;

  const Vol& psi() const { return f[kPsi]; }
  const Vol& u() const { return f[kU]; }
  const Vol& j() const { return f[kJ]; }
  const Vol& w() const { return f[kW]; }
  const Vol& rho() const { return f[kRho]; }
  const Vol& p() const { return f[kP]; }
  const Vol& vpar() const { return f[kVpar]; }
};

/// Random compact fields drawn from `seed`; the same seed gives the same
/// continuous fields on every grid. j and w are the analytic operators of psi, u.
inline Bundle manufactured_bundle(const Grid& g, std::uint64_t seed, const PhysParams& par = {},
                                  double amp = 1.0, int modes = 3) {
  std::mt19937_64 rng(seed);
  // psi, u, rho, p, vpar, ut, psit, vpt
  std::array<Manufactured, 8> m;
  for (auto& x : m) x = Manufactured(rng, amp, modes);
  Bundle b;
  b.L = make_layout(g);
  b.par = par;
  auto fill = [&](const std::function<double(int, double, double)>& fn) {
    ClosedField c(g);
    for (int h = 0; h < 3; ++h)
      for (int i = 0; i < g.nr(); ++i)
        for (int j = 0; j < g.nz(); ++j) c.c[h][c.idx(i, j)] = fn(h, g.R(i), g.Z(j));
    return c;
  };
  auto plain = [&](const Manufactured& mf) {
    return fill([&](int h, double R, double Z) { return mf.eval(g, h, R, Z).f; });
  };
  std::array<ClosedField, kNumVars> cf;
  cf[kPsi] = plain(m[0]);
  cf[kU] = plain(m[1]);
  cf[kRho] = plain(m[2]);
  cf[kP] = plain(m[3]);
  cf[kVpar] = plain(m[4]);
  cf[kJ] = fill([&](int h, double R, double Z) {
    const auto d = m[0].eval(g, h, R, Z);
    return d.fRR - d.fR / R + d.fZZ;
  });
  cf[kW] = fill([&](int h, double R, double Z) {
    const auto d = m[1].eval(g, h, R, Z);
    return d.fRR + d.fR / R + d.fZZ;
  });
  b.state = State(g);
  b.bnd = StateBoundary::homogeneous(g);
  b.bnd.kind = BoundaryKind::fixed;
  for (int v = 0; v < kNumVars; ++v) {
    b.f[v] = sample(cf[v], b.L);
    b.state[v] = cf[v].interior();
    b.bnd.ring[v] = cf[v];
  }
  b.ut = sample(plain(m[5]), b.L);
  b.psit = sample(plain(m[6]), b.L);
  b.vpt = sample(plain(m[7]), b.L);
  return b;
}

// ---------------- vector calculus on sampled fields ----------------

namespace vc {

using V = Vec3<Vol>;

inline V scale(const Vol& s, const V& a) { return {s * a.R, s * a.phi, s * a.Z}; }
inline V add(const V& a, const V& b) { return {a.R + b.R, a.phi + b.phi, a.Z + b.Z}; }
inline Vol dot(const V& a, const V& b) { return a.R * b.R + a.phi * b.phi + a.Z * b.Z; }
inline V grad(const Vol& f) { return {dR(f), times_rpow(dphi(f), -1), dZ(f)}; }
inline Vol div(const V& a) {
  return times_rpow(dR(times_rpow(a.R, 1)), -1) + dZ(a.Z) + times_rpow(dphi(a.phi), -1);
}
/// Right-handed (R, Z, phi).
inline V curl(const V& a) {
  return {dZ(a.phi) - times_rpow(dphi(a.Z), -1), dR(a.Z) - dZ(a.R),
          times_rpow(dphi(a.R) - dR(times_rpow(a.phi, 1)), -1)};
}
inline Vol curl_phi(const V& a) { return dR(a.Z) - dZ(a.R); }
inline V cross(const V& a, const V& b) {
  return {a.Z * b.phi - a.phi * b.Z, a.R * b.Z - a.Z * b.R, a.phi * b.R - a.R * b.phi};
}
/// (a . grad) b including the derivatives of e_R and e_phi.
inline V adv(const V& a, const V& b) {
  auto d = [&](const Vol& f) { return a.R * dR(f) + a.Z * dZ(f) + a.phi * times_rpow(dphi(f), -1); };
  return {d(b.R) - times_rpow(a.phi * b.phi, -1), d(b.phi) + times_rpow(a.phi * b.R, -1), d(b.Z)};
}
/// -R grad f x e_phi
inline V vpol(const Vol& f) {
  return {-times_rpow(dZ(f), 1), Vol(f.L), times_rpow(dR(f), 1)};
}
inline V bfield(const Vol& psi, double F0) {
  return {times_rpow(dZ(psi), -1), F0 * rpow(psi.L, -1), -times_rpow(dR(psi), -1)};
}
inline Vol r2curl(const V& a) {
  return curl_phi({times_rpow(a.R, 2), Vol(a.R.L), times_rpow(a.Z, 2)});
}

}  // namespace vc

// ---------------- catalog ----------------

enum class IdentityKind { pointwise, integral };

/// One catalog entry. Pointwise recipes return the two sides as fields;
/// integral recipes return integrands in the dW measure.
struct IdentityRecord {
  std::string id;
  IdentityKind kind = IdentityKind::pointwise;
  std::function<Vol(const Bundle&)> lhs, rhs;
};

namespace detail {

inline Vol inv(Vol a) { return times_rpow(std::move(a), -1); }
inline Vol inv2(Vol a) { return times_rpow(std::move(a), -2); }
inline Vol byR(Vol a) { return times_rpow(std::move(a), 1); }

inline std::vector<IdentityRecord> build_catalog() {
  using namespace vc;
  using K = IdentityKind;
  std::vector<IdentityRecord> c;
  auto pw = [&](std::string id, std::function<Vol(const Bundle&)> l, std::function<Vol(const Bundle&)> r) {
    c.push_back({std::move(id), K::pointwise, std::move(l), std::move(r)});
  };
  auto zero = [](const Bundle& b) { return Vol(b.L); };
  auto eg = [&](std::string id, std::function<Vol(const Bundle&)> l) {
    c.push_back({std::move(id), K::integral, std::move(l), zero});
  };
  auto R2 = [](const Bundle& b) { return rpow(b.L, 2); };
  auto rh = [](const Bundle& b) { return times_rpow(b.rho(), 2); };
  auto Bv = [](const Bundle& b) { return bfield(b.psi(), b.par.F0); };
  auto vparB = [](const Bundle& b) { return scale(b.vpar(), bfield(b.psi(), b.par.F0)); };
  auto B2 = [](const Bundle& b) { return inv2(gdot(b.psi(), b.psi()) + b.par.F0 * b.par.F0); };
  auto Bp2 = [](const Bundle& b) { return inv2(gdot(b.psi(), b.psi())); };

  // ---- projection identities ----
  pw("u2", [=](const Bundle& b) { return r2curl(scale(b.rho(), vpol(b.ut))); },
     [=](const Bundle& b) { return byR(div_c_grad(rh(b), b.ut)); });
  pw("u3",
     [=](const Bundle& b) {
       const Vol sR = b.vpt * dR(b.psi()) + b.vpar() * dR(b.psit);
       const Vol sZ = b.vpt * dZ(b.psi()) + b.vpar() * dZ(b.psit);
       return r2curl(scale(b.rho(), V{inv(sZ), Vol(b.L), -inv(sR)}));
     },
     [=](const Bundle& b) {
       const Vol sR = b.vpt * dR(b.psi()) + b.vpar() * dR(b.psit);
       const Vol sZ = b.vpt * dZ(b.psi()) + b.vpar() * dZ(b.psit);
       return -byR(div_pol(b.rho() * sR, b.rho() * sZ));
     });
  pw("u5",
     [=](const Bundle& b) {
       const V B = Bv(b);
       return r2curl(cross(curl(B), B));
     },
     [=](const Bundle& b) { return bracket(b.psi(), b.j()) - b.par.F0 * inv(dphi(b.j())); });
  pw("u6", [=](const Bundle& b) { return r2curl(grad(b.p())); },
     [=](const Bundle& b) { return bracket(R2(b), b.p()); });
  pw("u8",
     [=](const Bundle& b) {
       const V v = vpol(b.u());
       return r2curl(scale(b.rho(), adv(v, v)));
     },
     [=](const Bundle& b) {
       return -0.5 * bracket(R2(b) * gdot(b.u(), b.u()), rh(b)) - bracket(R2(b) * rh(b) * b.w(), b.u());
     });
  pw("u12b",
     [=](const Bundle& b) {
       const V v = vparB(b);
       return r2curl(scale(b.rho(), adv(v, v)));
     },
     [=](const Bundle& b) {
       const Vol& v = b.vpar();
       const Vol& psi = b.psi();
       const double F0 = b.par.F0;
       const Vol d = F0 * times_rpow(rh(b) * v, -3);
       Vol out = -bracket(b.rho() * v * v * b.j(), psi);
       out -= bracket(b.rho() * v * gdot(v, psi), psi);
       out += 0.5 * bracket(rh(b), v * v * Bp2(b));
       out -= dZ(d * dphi(v * dZ(psi)));
       out -= dR(d * dphi(v * dR(psi)));
       out += F0 * dZ(d * v);
       return out;
     });
  pw("u13b",
     [=](const Bundle& b) {
       const V a = vpol(b.u()), v = vparB(b);
       return r2curl(scale(b.rho(), add(adv(a, v), adv(v, a))));
     },
     [=](const Bundle& b) {
       const Vol& v = b.vpar();
       const Vol& psi = b.psi();
       const Vol& u = b.u();
       const Vol r = rh(b);
       const Vol up = dphi(u);
       const Vol cc = b.par.F0 * inv2(r * v);
       Vol out = -bracket(r, v * gdot(psi, u));
       out += bracket(r * v * b.w(), psi);
       out -= bracket(u, r * v * b.j());
       out -= bracket(u, r * gdot(psi, v));
       out += byR(div_pol(cc * dR(up), cc * dZ(up)));
       return out;
     });
  pw("rho",
     [=](const Bundle& b) {
       const V v = add(vpol(b.u()), vparB(b));
       return -div(scale(b.rho(), v));
     },
     [=](const Bundle& b) {
       const Vol& rho = b.rho();
       const Vol& v = b.vpar();
       const double F0 = b.par.F0;
       Vol out = byR(bracket(rho, b.u())) + 2.0 * (rho * dZ(b.u()));
       out -= F0 * inv2(v * dphi(rho));
       out -= inv(v * bracket(rho, b.psi()));
       out -= inv(rho * bracket(v, b.psi()));
       out -= F0 * inv2(rho * dphi(v));
       return out;
     });
  pw("T",
     [=](const Bundle& b) {
       const V v = add(vpol(b.u()), vparB(b));
       return -dot(v, grad(b.p())) - b.par.gamma * (b.p() * div(v));
     },
     [=](const Bundle& b) {
       const Vol& p = b.p();
       const Vol& v = b.vpar();
       const double F0 = b.par.F0, g = b.par.gamma;
       Vol out = byR(bracket(p, b.u())) + 2.0 * g * (p * dZ(b.u()));
       out -= F0 * inv2(v * dphi(p));
       out -= inv(v * bracket(p, b.psi()));
       out -= g * inv(p * bracket(v, b.psi()));
       out -= g * F0 * inv2(p * dphi(v));
       return out;
     });
  pw("dtvpar1",
     [=](const Bundle& b) {
       const V B = Bv(b);
       const V Bt = bfield(b.psit, 0.0);
       return dot(B, scale(b.rho(), add(scale(b.vpt, B), scale(b.vpar(), Bt))));
     },
     [=](const Bundle& b) {
       return b.rho() * B2(b) * b.vpt + inv2(b.rho() * b.vpar() * gdot(b.psi(), b.psit));
     });
  pw("dtvpar2", [=](const Bundle& b) { return dot(Bv(b), scale(b.rho(), vpol(b.ut))); },
     [=](const Bundle& b) { return -(b.rho() * gdot(b.psi(), b.ut)); });
  pw("vp1", [=](const Bundle& b) { return dot(Bv(b), grad(b.p())); },
     [=](const Bundle& b) { return b.par.F0 * inv2(dphi(b.p())) + inv(bracket(b.p(), b.psi())); });
  pw("vp3",
     [=](const Bundle& b) {
       const V v = vparB(b);
       return dot(Bv(b), scale(b.rho(), adv(v, v)));
     },
     [=](const Bundle& b) {
       const Vol ke = 0.5 * (b.vpar() * b.vpar() * B2(b));
       return -inv(b.rho() * bracket(b.psi(), ke)) + b.par.F0 * inv2(b.rho() * dphi(ke));
     });
  pw("vp4",
     [=](const Bundle& b) {
       const V v = vpol(b.u());
       return dot(Bv(b), scale(b.rho(), adv(v, v)));
     },
     [=](const Bundle& b) {
       return 0.5 * inv(b.rho() * bracket(R2(b) * gdot(b.u(), b.u()), b.psi())) +
              byR(b.rho() * b.w() * bracket(b.psi(), b.u()));
     });
  pw("vp5",
     [=](const Bundle& b) { return dot(Bv(b), scale(b.rho(), adv(vpol(b.u()), vparB(b)))); },
     [=](const Bundle& b) {
       return byR(b.rho() * B2(b) * bracket(b.u(), b.vpar())) +
              byR(b.rho() * b.vpar() * bracket(b.u(), 0.5 * B2(b)));
     });
  pw("vp6",
     [=](const Bundle& b) { return dot(Bv(b), scale(b.rho(), adv(vparB(b), vpol(b.u())))); },
     [=](const Bundle& b) {
       const Vol& v = b.vpar();
       const Vol& psi = b.psi();
       const Vol& u = b.u();
       const Vol rv = b.rho() * v;
       const double F0 = b.par.F0;
       Vol out = -byR(rv * bracket(u, 0.5 * Bp2(b)));
       out += inv(rv * b.j() * bracket(u, psi));
       out += inv(rv * bracket(psi, gdot(psi, u)));
       out -= F0 * inv2(rv * gdot(psi, dphi(u)));
       out -= F0 * F0 * inv2(rv * dZ(u));
       return out;
     });

  // ---- energy groups (integrands in dW) ----
  eg("E1", [=](const Bundle& b) {
    return -inv(bracket(b.psi(), b.u()) * b.j()) - inv(bracket(b.psi(), b.j()) * b.u());
  });
  eg("E2", [=](const Bundle& b) {
    return b.par.F0 * inv2(dphi(b.u()) * b.j() + dphi(b.j()) * b.u());
  });
  eg("E3", [=](const Bundle& b) { return -inv(bracket(rh(b) * R2(b) * b.w(), b.u()) * b.u()); });
  c.push_back({"E4", K::integral,
               [=](const Bundle& b) {
                 const double eta = b.par.eta0, nu = b.par.nu0;
                 Vol out = -nu * (lap_pol(b.w()) * b.u());
                 out -= eta * inv2(lap_star(b.psi()) * b.j());
                 out -= eta * times_rpow(dphi(dphi(b.psi())) * b.j(), -4);
                 return out;
               },
               [=](const Bundle& b) {
                 const double eta = b.par.eta0, nu = b.par.nu0;
                 const Vol chi = inv2(dphi(b.psi()));
                 return -nu * (b.w() * b.w()) - eta * inv2(b.j() * b.j()) - eta * gdot(chi, chi);
               }});
  eg("E5", [=](const Bundle& b) {
    const double g = b.par.gamma;
    return inv(bracket(R2(b), b.p()) * b.u()) + (1.0 / (g - 1)) * byR(bracket(b.p(), b.u())) +
           (2 * g / (g - 1)) * (b.p() * dZ(b.u()));
  });
  eg("E6", [=](const Bundle& b) {
    const Vol gu2 = gdot(b.u(), b.u());
    return -0.5 * inv(bracket(R2(b) * gu2, rh(b)) * b.u()) + 0.5 * byR(gu2 * bracket(rh(b), b.u()));
  });
  eg("E7", [=](const Bundle& b) {
    return inv(bracket(rh(b) * b.vpar() * b.w(), b.psi()) * b.u()) -
           inv(rh(b) * b.w() * bracket(b.psi(), b.u()) * b.vpar());
  });
  eg("E8", [=](const Bundle& b) {
    const double g = b.par.gamma, F0 = b.par.F0;
    const Vol& v = b.vpar();
    const Vol& p = b.p();
    const Vol a = F0 * inv2(v * dphi(p));
    const Vol c = inv(v * bracket(p, b.psi()));
    Vol out = -(1.0 / (g - 1)) * a - (1.0 / (g - 1)) * c;
    out -= (g / (g - 1)) * inv(p * bracket(v, b.psi()));
    out -= (g / (g - 1)) * F0 * inv2(p * dphi(v));
    out -= a;
    out -= c;
    return out;
  });
  eg("E9", [=](const Bundle& b) {
    const Vol& v = b.vpar();
    const Vol rv = b.rho() * v;
    const Vol X = 0.5 * (v * v * B2(b));
    const double F0 = b.par.F0;
    return -inv(X * bracket(rv, b.psi())) + inv(rv * bracket(b.psi(), X)) -
           F0 * inv2(X * dphi(rv)) - F0 * inv2(rv * dphi(X));
  });
  eg("E10", [=](const Bundle& b) {
    const Vol gu2 = gdot(b.u(), b.u());
    const Vol rv = b.rho() * b.vpar();
    return -0.5 * byR(gu2 * bracket(rv, b.psi())) - 0.5 * inv(rv * bracket(R2(b) * gu2, b.psi()));
  });
  eg("E11", [=](const Bundle& b) {
    const Vol r = rh(b);
    return -inv(bracket(b.u(), r * b.vpar() * b.j()) * b.u()) -
           inv(bracket(b.u(), r * gdot(b.psi(), b.vpar())) * b.u());
  });
  eg("E12", [=](const Bundle& b) {
    const double F0 = b.par.F0;
    const Vol up = dphi(b.u());
    const Vol cc = F0 * inv2(rh(b) * b.vpar());
    return div_pol(cc * dR(up), cc * dZ(up)) * b.u() -
           0.5 * F0 * (gdot(b.u(), b.u()) * dphi(b.rho() * b.vpar()));
  });
  eg("E13", [=](const Bundle& b) {
    const double F0 = b.par.F0;
    const Vol& v = b.vpar();
    const Vol& psi = b.psi();
    const Vol d = F0 * times_rpow(rh(b) * v, -3);
    Vol out = -inv(dZ(d * dphi(v * dZ(psi))) * b.u());
    out -= inv(dR(d * dphi(v * dR(psi))) * b.u());
    out += F0 * inv2(v * gdot(b.u(), psi) * dphi(b.rho() * v));
    out += F0 * inv2(b.rho() * v * v * gdot(psi, dphi(b.u())));
    return out;
  });
  eg("E14", [=](const Bundle& b) {
    const Vol q = b.vpar() * gdot(b.psi(), b.u());
    return -inv(bracket(rh(b), q) * b.u()) - inv(q * bracket(rh(b), b.u()));
  });
  eg("E15", [=](const Bundle& b) {
    const Vol a = b.rho() * b.vpar() * b.vpar() * b.j();
    return -inv(bracket(a, b.psi()) * b.u()) - inv(a * bracket(b.u(), b.psi()));
  });
  eg("E16", [=](const Bundle& b) {
    const Vol& v = b.vpar();
    const double F0 = b.par.F0;
    const Vol r = rh(b);
    Vol out = 0.5 * inv(bracket(r, v * v * Bp2(b)) * b.u());
    out += 0.5 * inv(v * v * B2(b) * bracket(r, b.u()));
    out -= byR(b.rho() * v * v * bracket(b.u(), 0.5 * B2(b)));
    out -= F0 * F0 * inv(b.rho() * v * bracket(b.u(), v));
    out += byR(b.rho() * v * v * bracket(b.u(), 0.5 * Bp2(b)));
    return out;
  });
  eg("E17", [=](const Bundle& b) {
    const Vol& v = b.vpar();
    const Vol& psi = b.psi();
    const Vol rv = b.rho() * v;
    Vol out = -inv(bracket(rv * gdot(v, psi), psi) * b.u());
    out += inv(v * gdot(b.u(), psi) * bracket(rv, psi));
    out -= inv(rv * v * bracket(psi, gdot(psi, b.u())));
    out -= byR(b.rho() * Bp2(b) * bracket(b.u(), v) * v);
    return out;
  });
  eg("E18", [=](const Bundle& b) {
    const double F0 = b.par.F0;
    const Vol& v = b.vpar();
    return inv(dZ(F0 * F0 * times_rpow(rh(b) * v * v, -3)) * b.u()) +
           F0 * F0 * inv2(b.rho() * v * v * dZ(b.u()));
  });
  return c;
}

}  // namespace detail

inline const std::vector<IdentityRecord>& identity_catalog() {
  static const std::vector<IdentityRecord> c = detail::build_catalog();
  return c;
}

inline const IdentityRecord& find_identity(const std::string& id) {
  for (const auto& r : identity_catalog())
    if (r.id == id) return r;
  throw ConfigError("unknown identity '" + id + "'");
}

/// Residual and the magnitude it should be compared against.
struct IdentityResidual {
  double residual = 0;
  double scale = 0;
};

inline IdentityResidual evaluate_identity(const IdentityRecord& rec, const Bundle& b) {
  const Vol l = rec.lhs(b), r = rec.rhs(b);
  if (rec.kind == IdentityKind::pointwise)
    return {l2_interior(l - r), std::max(l2_interior(l), l2_interior(r))};
  Vol al = l, ar = r;
  for (double& x : al.v) x = std::abs(x);
  for (double& x : ar.v) x = std::abs(x);
  return {std::abs(integrate_dW(l) - integrate_dW(r)), integrate_dW(al) + integrate_dW(ar)};
}

/// L2(dV) norm of LHS - RHS for pointwise identities, |value| for integrals.
inline double verify_identity(const std::string& id, const Bundle& b) {
  return evaluate_identity(find_identity(id), b).residual;
}

struct Dissipation {
  double lhs = 0, rhs = 0;
};

/// The viscous/resistive group from the model terms and the closed form.
inline Dissipation verify_dissipation(const Bundle& b) {
  const IdentityRecord& r = find_identity("E4");
  return {integrate_dW(r.lhs(b)), integrate_dW(r.rhs(b))};
}

/// d/dt F0 int psi/R^2 dW from the flux equation with eta = 0.
inline double helicity_rate(const Bundle& b) {
  PhysParams par = b.par;
  par.eta0 = 0;
  par.hyper_psi = 0;
  const Model m(b.L->grid, par, ModelFlags{}, b.bnd);
  return par.F0 * integrate_dW(times_rpow(m.rhs_psi(m.sample(b.state)), -2));
}

// ---------------- refinement study ----------------

struct RefinementRow {
  int N = 0;
  double h = 0;
  double residual = 0;
  double scale = 0;
  double order = std::numeric_limits<double>::quiet_NaN();
};

struct RefinementReport {
  std::string id;
  std::vector<RefinementRow> rows;
  bool exact = false;       // every residual at round-off level
  bool monotone = true;
  double min_order = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
};

struct StudyOptions {
  int levels = 3;
  int base = 32;  // NR = NZ = base * 2^l + 1
  int N_phi = 16;
  std::uint64_t seed = 20240611;
  double min_order = 1.8;
  double exact_rel = 1e-12;
  double amp = 1.0;
  int modes = 2;
  PhysParams par = default_params();

  static PhysParams default_params() {
    PhysParams p;
    p.F0 = 1.7;
    p.gamma = 5.0 / 3.0;
    p.eta0 = 1e-2;
    p.nu0 = 2e-2;
    return p;
  }
};

inline Grid study_grid(int N, int N_phi) {
  Grid g;
  g.NR = g.NZ = N;
  g.N_phi = N_phi;
  return g;
}

inline RefinementReport refinement_study(const IdentityRecord& rec, const StudyOptions& opt = {}) {
  if (opt.levels < 3) throw ConfigError("refinement study needs at least 3 levels");
  RefinementReport rep;
  rep.id = rec.id;
  for (int l = 0; l < opt.levels; ++l) {
    const int N = opt.base * (1 << l) + 1;
    const Grid g = study_grid(N, opt.N_phi);
    const Bundle b = manufactured_bundle(g, opt.seed, opt.par, opt.amp, opt.modes);
    const IdentityResidual r = evaluate_identity(rec, b);
    rep.rows.push_back({N, g.hR(), r.residual, r.scale});
  }
  rep.exact = true;
  for (const auto& r : rep.rows)
    if (r.residual > opt.exact_rel * std::max(r.scale, 1e-300) && r.residual > 0) rep.exact = false;
  for (std::size_t k = 1; k < rep.rows.size(); ++k) {
    auto& a = rep.rows[k - 1];
    auto& b = rep.rows[k];
    if (b.residual > a.residual) rep.monotone = false;
    if (a.residual > 0 && b.residual > 0) b.order = std::log(a.residual / b.residual) / std::log(a.h / b.h);
  }
  if (!rep.exact) {
    double mo = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < rep.rows.size(); ++k)
      mo = std::min(mo, std::isnan(rep.rows[k].order) ? -1.0 : rep.rows[k].order);
    rep.min_order = mo;
  }
  rep.pass = rep.exact || (rep.monotone && rep.min_order >= opt.min_order);
  return rep;
}

inline RefinementReport refinement_study(const std::string& id, const StudyOptions& opt = {}) {
  return refinement_study(find_identity(id), opt);
}

inline void write_report_text(std::ostream& os, const std::vector<RefinementReport>& reps) {
  os << std::left << std::setw(10) << "identity" << std::setw(6) << "N" << std::setw(14) << "h"
     << std::setw(14) << "residual" << std::setw(10) << "order" << "status\n";
  for (const auto& r : reps)
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
      const auto& row = r.rows[k];
      std::ostringstream ord;
      if (r.exact)
        ord << "exact";
      else if (std::isnan(row.order))
        ord << "-";
      else
        ord << std::fixed << std::setprecision(2) << row.order;
      os << std::setw(10) << r.id << std::setw(6) << row.N << std::setw(14) << std::scientific
         << std::setprecision(4) << row.h << std::setw(14) << row.residual << std::setw(10)
         << ord.str() << (k + 1 == r.rows.size() ? (r.pass ? "PASS" : "FAIL") : "") << "\n";
      os << std::defaultfloat;
    }
}

inline void write_report_csv(std::ostream& os, const std::vector<RefinementReport>& reps) {
  os << "identity,N,h,residual,order,pass\n";
  os << std::scientific << std::setprecision(16);
  for (const auto& r : reps)
    for (const auto& row : r.rows) {
      os << r.id << "," << row.N << "," << row.h << "," << row.residual << ",";
      if (r.exact)
        os << "exact";
      else if (!std::isnan(row.order))
        os << row.order;
      os << "," << (r.pass ? 1 : 0) << "\n";
    }
  os << std::defaultfloat;
}

}  // namespace rmhd
