#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "sfr/beamforming.hpp"
#include "sfr/objective.hpp"
#include "sfr/room.hpp"
#include "sfr/signal.hpp"

namespace sfr::test {

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline Fir random_fir(std::mt19937_64& rng, std::size_t n) { return Fir{random_vector(rng, n)}; }

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double rel_err(double a, double b) {
  const double s = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / s;
}

// Direct double-loop convolution.
inline std::vector<double> direct_conv(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> y(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) y[i + j] += a[i] * b[j];
  }
  return y;
}

// O(n^2) DFT.
inline std::vector<cplx> direct_dft(const std::vector<double>& x, std::size_t n) {
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
      acc += x[t] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * t % n) / static_cast<double>(n));
    }
    out[k] = acc;
  }
  return out;
}

// Three microphones on a 3 cm circle plus two loudspeakers.
inline ArrayGeometry tiny_geometry(std::size_t q = 3, std::size_t l = 2) {
  ArrayGeometry g;
  g.array_center = Position(1.0, 0.8, 0.6);
  for (std::size_t i = 0; i < q; ++i) {
    const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(q);
    g.microphones.push_back(g.array_center + 0.03 * Position(std::cos(a), std::sin(a), 0.1 * static_cast<double>(i % 2)));
  }
  for (std::size_t i = 0; i < l; ++i) {
    const double a = 0.7 + 2.1 * static_cast<double>(i);
    g.loudspeakers.push_back(g.array_center + 0.5 * Position(std::cos(a), std::sin(a), 0.0));
  }
  return g;
}

struct TinyInstance {
  ImpulseResponseSet channels;
  TargetResponse target;
  ArrayGeometry geometry;
  LossConfig config;
  std::size_t filter_len = 8;
};

// Random channels and target; windows shortened so every region is populated.
inline TinyInstance tiny_instance(std::uint64_t seed, std::size_t q = 3, std::size_t l = 2, std::size_t lc = 16,
                                  std::size_t lh = 8) {
  std::mt19937_64 rng(seed);
  TinyInstance t;
  t.filter_len = lh;
  t.channels = ImpulseResponseSet(q, l, lc);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      const auto v = random_vector(rng, lc);
      auto dst = t.channels.ir(i, j);
      std::copy(v.begin(), v.end(), dst.begin());
    }
  }
  const std::size_t lg = lc + lh - 1;
  for (std::size_t i = 0; i < q; ++i) {
    auto v = random_vector(rng, lg, 0.1);
    v[lg / 2 + i % 2] = 2.0;
    t.target.mics.push_back(Fir{v});
  }
  t.geometry = tiny_geometry(q, l);
  t.config.grid = SteeringGrid::uniform(12, 6, 400.0, 4000.0);
  t.config.windows.desired_len = 8;
  t.config.windows.guard = 4;
  t.config.band_transition_hz = 3000.0;
  return t;
}

inline Problem make_problem(const TinyInstance& t) {
  return Problem(t.channels, t.target, t.geometry, t.config, t.filter_len);
}

}  // namespace sfr::test
