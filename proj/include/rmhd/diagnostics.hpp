#pragma once

// Energies, mass, helicity and the per-step CSV record.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "rmhd/errors.hpp"
#include "rmhd/model.hpp"

namespace rmhd {

struct EnergyReport {
  double e_mag_0 = 0, e_mag_n = 0;  // int |grad psi|^2 / 2R^2 dW by harmonic
  double e_kin_0 = 0, e_kin_n = 0;  // int rhohat |grad u|^2 / 2 dW, n part from u_n only
  double e_kin_par = 0;             // int rho |B|^2 vpar^2 / 2 dW
  double e_kin_cross = 0;           // -int rho vpar grad u . grad psi dW
  double e_internal = 0;            // int p / (gamma - 1) dW
  double mass = 0;
  double helicity = 0;
  double dissipation_expected = 0;  // nu int w^2 + eta int j^2/R^2 + eta int |grad(d_phi psi / R^2)|^2

  double e_mag() const { return e_mag_0 + e_mag_n; }
  double e_kin_pol() const { return e_kin_0 + e_kin_n; }
  double e_total() const { return e_mag() + e_kin_pol() + e_kin_par + e_kin_cross + e_internal; }
};

namespace detail {

/// Variable v with its ring, restricted to mode 0 (keep0) or to the harmonic.
inline Vol split_part(const Model& m, const State& st, int v, bool keep0) {
  ClosedField c = apply_boundary(st[v], m.boundary().rule(v), m.grid());
  if (keep0) {
    std::fill(c.c[1].begin(), c.c[1].end(), 0.0);
    std::fill(c.c[2].begin(), c.c[2].end(), 0.0);
  } else {
    std::fill(c.c[0].begin(), c.c[0].end(), 0.0);
  }
  return sample(c, m.layout());
}

}  // namespace detail

/// Dissipation rate D >= 0 with the model's pointwise eta and nu.
inline double dissipation_rate(const Sampled& s) {
  const Vol chi = times_rpow(dphi(s.psi()), -2);
  Vol d = s.nu * s.w() * s.w();
  d += s.eta * times_rpow(s.j() * s.j(), -2);
  d += s.eta * gdot(chi, chi);
  return integrate_dW(d);
}

inline EnergyReport compute_energies(const Model& m, const State& st) {
  const Sampled s = m.sample(st);
  const PhysParams& par = m.params();
  EnergyReport r;
  const Vol& psi = s.psi();
  const Vol& u = s.u();
  const Vol psi_n = detail::split_part(m, st, kPsi, false);
  const Vol psi_0 = detail::split_part(m, st, kPsi, true);
  r.e_mag_0 = 0.5 * integrate_dW(times_rpow(gdot(psi_0, psi_0), -2));
  r.e_mag_n = 0.5 * integrate_dW(times_rpow(gdot(psi_n, psi_n), -2));

  const Vol rhohat = times_rpow(s.rho(), 2);
  const Vol u_n = detail::split_part(m, st, kU, false);
  const double kin = 0.5 * integrate_dW(rhohat * gdot(u, u));
  r.e_kin_n = 0.5 * integrate_dW(rhohat * gdot(u_n, u_n));
  r.e_kin_0 = kin - r.e_kin_n;

  if (m.flags().with_vpar) {
    const Vol& v = s.vpar();
    const Vol B2 = times_rpow(gdot(psi, psi) + par.F0 * par.F0, -2);
    r.e_kin_par = 0.5 * integrate_dW(s.rho() * B2 * v * v);
    r.e_kin_cross = -integrate_dW(s.rho() * v * gdot(u, psi));
  }
  r.e_internal = integrate_dW(s.p()) / (par.gamma - 1.0);
  r.mass = integrate_dW(s.rho());
  r.helicity = par.F0 * integrate_dW(times_rpow(psi, -2));
  r.dissipation_expected = dissipation_rate(s);
  return r;
}

/// (1 - theta) a + theta b, coefficientwise.
inline State blend(const State& a, const State& b, double theta) {
  State out = a;
  for (int v = 0; v < kNumVars; ++v)
    for (int h = 0; h < 3; ++h) {
      auto& o = out[v].comp(h);
      const auto& x = b[v].comp(h);
      for (std::size_t n = 0; n < o.size(); ++n) o[n] = (1.0 - theta) * o[n] + theta * x[n];
    }
  return out;
}

/// (E^{n+1} - E^n)/dt + D; zero when the discrete energy follows the dissipation law.
inline double energy_balance_residual(const EnergyReport& now, const EnergyReport& before, double dt,
                                      double dissipation) {
  return (now.e_total() - before.e_total()) / dt + dissipation;
}

struct StepStats {
  int newton_iters = 0;
  int gmres_iters = 0;
  int refactorizations = 0;
};

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

/// One line per accepted step; the header goes out with the first record.
class CsvWriter {
 public:
  static constexpr const char* kHeader =
      "step,time,dt,E_mag_0,E_mag_n,E_kin_0,E_kin_n,E_kin_par,E_kin_cross,E_internal,E_total,"
      "mass,helicity,balance_residual,newton_iters,gmres_iters,refactorizations";

  explicit CsvWriter(std::ostream& os, bool header_written = false)
      : os_(os), header_(header_written) {}

  void write(long step, double time, double dt, const EnergyReport& r, double balance,
             const StepStats& st) {
    if (!header_) {
      os_.write(kHeader, std::streamsize(std::char_traits<char>::length(kHeader)));
      os_.put('\n');
      header_ = true;
    }
    std::string line = std::to_string(step);
    for (double x : {time, dt, r.e_mag_0, r.e_mag_n, r.e_kin_0, r.e_kin_n, r.e_kin_par,
                     r.e_kin_cross, r.e_internal, r.e_total(), r.mass, r.helicity, balance})
      line += ',' + format_double(x);
    for (int k : {st.newton_iters, st.gmres_iters, st.refactorizations}) line += ',' + std::to_string(k);
    line += '\n';
    // bypass the stream's locale
    os_.write(line.data(), std::streamsize(line.size()));
    if (!os_) throw IoError("diagnostics: CSV write failed");
  }

 private:
  std::ostream& os_;
  bool header_;
};

}  // namespace rmhd
