#pragma once

// Reference fields: a radix-2 FFT and the semi-implicit Fourier scheme for
// periodic 1-D Cahn-Hilliard,
//   (u^{n+1}_k - u^n_k)/dt + eps k^4 u^{n+1}_k - k^2 f^n_k = 0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ldgm/errors.hpp"

namespace ldgm {

using Complex = std::complex<double>;

namespace detail {

inline bool power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

inline void fft_inplace(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!power_of_two(n)) {
    throw SizeError("FFT length " + std::to_string(n) + " is not a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex w = std::polar(1.0, ang * static_cast<double>(k));
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& z : a) z *= s;
}

}  // namespace detail

/// Unitary DFT, X_k = n^{-1/2} sum_j x_j exp(-2 pi i jk/n).
inline std::vector<Complex> fft(std::vector<Complex> x) {
  detail::fft_inplace(x, false);
  return x;
}

inline std::vector<Complex> fft(const std::vector<double>& x) {
  return fft(std::vector<Complex>(x.begin(), x.end()));
}

inline std::vector<Complex> ifft(std::vector<Complex> x) {
  detail::fft_inplace(x, true);
  return x;
}

struct SpectralCHConfig {
  int grid = 128;
  double dt = 0.01;
  double epsilon = 0.1;
  double horizon = 1.0;
  int save_every = 1;  // time steps between stored levels

  int steps() const {
    const double s = horizon / dt;
    const long r = std::lround(s);
    if (std::abs(s - static_cast<double>(r)) > 1e-9 * std::max(1.0, s)) {
      throw ConfigError("horizon / dt must be an integer");
    }
    return static_cast<int>(r);
  }
};

/// Solution samples u(x_j, t_n) on a periodic grid x_j = 2 pi j / N.
struct ReferenceField {
  std::vector<double> x;
  std::vector<double> t;
  std::vector<std::vector<double>> u;  // u[n][j]

  double period() const { return 2.0 * std::numbers::pi; }

  /// Bilinear in (x, t); periodic in x, clamped in t.
  double interpolate(double xq, double tq) const {
    const std::size_t n = x.size();
    const double h = period() / static_cast<double>(n);
    double s = std::fmod(xq, period());
    if (s < 0) s += period();
    const double fx = s / h;
    const auto j0 = static_cast<std::size_t>(std::floor(fx)) % n;
    const std::size_t j1 = (j0 + 1) % n;
    const double wx = fx - std::floor(fx);

    double tc = std::clamp(tq, t.front(), t.back());
    std::size_t m = 0;
    while (m + 2 < t.size() && t[m + 1] <= tc) ++m;
    const std::size_t m1 = std::min(m + 1, t.size() - 1);
    const double wt = m1 == m ? 0.0 : (tc - t[m]) / (t[m1] - t[m]);
    auto at = [&](std::size_t level) {
      return (1.0 - wx) * u[level][j0] + wx * u[level][j1];
    };
    return (1.0 - wt) * at(m) + wt * at(m1);
  }

  double mass(std::size_t level) const {
    double s = 0.0;
    for (double v : u[level]) s += v;
    return s / static_cast<double>(u[level].size());
  }

  /// CSV with header t,x,u; one row per grid sample.
  void save_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << "t,x,u\n";
    char buf[96];
    for (std::size_t n = 0; n < t.size(); ++n) {
      for (std::size_t j = 0; j < x.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t[n], x[j], u[n][j]);
        f << buf;
      }
    }
  }

  static ReferenceField load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read " + path);
    std::string line;
    std::getline(f, line);
    if (line != "t,x,u") throw ConfigError(path + ": expected header t,x,u");
    ReferenceField r;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      double tv, xv, uv;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &tv, &xv, &uv) != 3) {
        throw ConfigError(path + ": bad row '" + line + "'");
      }
      if (r.t.empty() || r.t.back() != tv) {
        r.t.push_back(tv);
        r.u.emplace_back();
      }
      if (r.t.size() == 1) r.x.push_back(xv);
      r.u.back().push_back(uv);
    }
    if (r.t.empty()) throw ConfigError(path + ": no data");
    for (const auto& level : r.u) {
      if (level.size() != r.x.size()) throw ConfigError(path + ": ragged grid");
    }
    return r;
  }
};

/// Grid points 2 pi j / N.
inline std::vector<double> periodic_grid(int n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(j)] = 2.0 * std::numbers::pi * j / n;
  return x;
}

inline ReferenceField solve_ch_spectral(const SpectralCHConfig& cfg, const std::vector<double>& u0) {
  const std::size_t n = u0.size();
  if (static_cast<int>(n) != cfg.grid) throw SizeError("initial data does not match the grid size");
  if (!detail::power_of_two(n)) throw SizeError("grid size must be a power of two");
  if (cfg.save_every < 1) throw ConfigError("save_every must be >= 1");
  const int steps = cfg.steps();
  std::vector<double> k2(n), denom(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double k = j <= n / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n);
    k2[j] = k * k;
    denom[j] = 1.0 + cfg.dt * cfg.epsilon * k2[j] * k2[j];
  }
  ReferenceField r;
  r.x = periodic_grid(cfg.grid);
  r.t.push_back(0.0);
  r.u.push_back(u0);
  std::vector<double> u = u0;
  std::vector<Complex> uh = fft(u);
  for (int s = 1; s <= steps; ++s) {
    std::vector<double> f(n);
    for (std::size_t j = 0; j < n; ++j) f[j] = u[j] - u[j] * u[j] * u[j];
    const auto fh = fft(f);
    for (std::size_t j = 0; j < n; ++j) uh[j] = (uh[j] + cfg.dt * k2[j] * fh[j]) / denom[j];
    const auto back = ifft(uh);
    for (std::size_t j = 0; j < n; ++j) {
      u[j] = back[j].real();
      if (!std::isfinite(u[j])) {
        throw InstabilityError("non-finite value at time step " + std::to_string(s));
      }
    }
    if (s % cfg.save_every == 0 || s == steps) {
      r.t.push_back(s * cfg.dt);
      r.u.push_back(u);
    }
  }
  return r;
}

/// Reference for the benchmark: u0 = cos x.
inline ReferenceField ch_reference(double epsilon, int grid = 128, double dt = 0.01) {
  SpectralCHConfig cfg;
  cfg.grid = grid;
  cfg.dt = dt;
  cfg.epsilon = epsilon;
  std::vector<double> u0;
  for (double xv : periodic_grid(grid)) u0.push_back(std::cos(xv));
  return solve_ch_spectral(cfg, u0);
}

}  // namespace ldgm
