#pragma once

// Text restart files: magic line, dimensions, time/step/dt, then every coefficient.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rmhd/errors.hpp"
#include "rmhd/state.hpp"

namespace rmhd {

inline constexpr const char* kRestartMagic = "RMHD-RESTART v1";

struct RestartData {
  State state;
  double time = 0;
  long step = 0;
  double dt = 0;
};

namespace detail {

inline void put_double(std::string& out, double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);  // shortest round-trip form
  out.append(buf, r.ptr);
}

}  // namespace detail

inline std::string restart_text(const State& s, const Grid& g, bool with_vpar, double time, long step, double dt) {
  std::string out = kRestartMagic;
  out += '\n';
  out += std::to_string(g.NR) + ' ' + std::to_string(g.NZ) + ' ' + std::to_string(g.n_p) + ' ' +
         (with_vpar ? "1" : "0") + '\n';
  detail::put_double(out, time);
  out += ' ' + std::to_string(step) + ' ';
  detail::put_double(out, dt);
  out += '\n';
  const int nv = with_vpar ? kNumVars : kNumVars - 1;
  for (int v = 0; v < nv; ++v)
    for (int h = 0; h < 3; ++h) {
      const auto& c = s[v].comp(h);
      for (std::size_t n = 0; n < c.size(); ++n) {
        if (n) out += ' ';
        detail::put_double(out, c[n]);
      }
      out += '\n';
    }
  return out;
}

inline void write_restart(const std::string& path, const State& s, const Grid& g, bool with_vpar, double time,
                          long step, double dt) {
  const std::string text = restart_text(s, g, with_vpar, time, step, dt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open restart file '" + path + "' for writing");
  f.write(text.data(), std::streamsize(text.size()));
  if (!f) throw IoError("restart write failed: '" + path + "'");
}

/// Parses the whole text before building the state; any error leaves nothing behind.
inline RestartData parse_restart(const std::string& text, const Grid& g, bool with_vpar) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("restart: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRestartMagic) throw FormatError("restart: bad header '" + line + "', expected '" + kRestartMagic + "'");
  int nr = 0, nz = 0, np = 0, vp = -1;
  if (!std::getline(in, line)) throw FormatError("restart: missing dimension line");
  {
    std::istringstream d(line);
    std::string extra;
    if (!(d >> nr >> nz >> np >> vp) || (d >> extra)) throw FormatError("restart: malformed dimension line");
  }
  if (nr != g.NR || nz != g.NZ || np != g.n_p || vp != (with_vpar ? 1 : 0))
    throw FormatError("restart: dimensions " + std::to_string(nr) + "x" + std::to_string(nz) + " n_p=" +
                      std::to_string(np) + " with_vpar=" + std::to_string(vp) + " do not match the configuration");

  std::vector<std::string> tok;
  {
    std::string t;
    while (in >> t) tok.push_back(t);
  }
  const int nv = with_vpar ? kNumVars : kNumVars - 1;
  const std::size_t plane = std::size_t(nr) * nz;
  const std::size_t want = 3 + std::size_t(nv) * 3 * plane;
  if (tok.size() != want)
    throw FormatError("restart: expected " + std::to_string(want) + " values, found " + std::to_string(tok.size()));
  auto num = [&](std::size_t k) {
    double x = 0;
    const std::string& s = tok[k];
    auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
      throw FormatError("restart: malformed number '" + s + "'");
    return x;
  };
  RestartData d;
  d.time = num(0);
  {
    long st = 0;
    auto r = std::from_chars(tok[1].data(), tok[1].data() + tok[1].size(), st);
    if (r.ec != std::errc() || r.ptr != tok[1].data() + tok[1].size() || st < 0)
      throw FormatError("restart: malformed step '" + tok[1] + "'");
    d.step = st;
  }
  d.dt = num(2);
  if (!(d.dt > 0)) throw FormatError("restart: dt must be > 0");
  State s(g);
  std::size_t k = 3;
  for (int v = 0; v < nv; ++v)
    for (int h = 0; h < 3; ++h)
      for (std::size_t n = 0; n < plane; ++n) s[v].comp(h)[n] = num(k++);
  d.state = std::move(s);
  return d;
}

inline RestartData read_restart(const std::string& path, const Grid& g, bool with_vpar) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open restart file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_restart(ss.str(), g, with_vpar);
}

}  // namespace rmhd
