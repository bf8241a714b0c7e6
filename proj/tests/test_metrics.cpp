#include <doctest.h>

#include <cmath>
#include <random>

#include "sfr/metrics.hpp"
#include "support.hpp"

using namespace sfr;
using namespace sfr::test;

namespace {

// Single-pass loop versions of the overshoot and deviation measures.
NprqResult nprq_oracle(const std::vector<double>& g, const std::vector<double>& w_u, std::size_t n_pre, std::size_t n_post) {
  NprqResult r;
  double sp = 0.0, so = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double env = 1.0 / w_u[n];
    const double a = std::abs(g[n]);
    if (!(a > env && a > std::pow(10.0, -2.5))) continue;
    const double e = 20.0 * std::log10(a / env);
    if (n <= n_pre) {
      sp += e;
      ++r.overshoot_count_pre;
    }
    if (n >= n_post) {
      so += e;
      ++r.overshoot_count_post;
    }
  }
  r.pre = r.overshoot_count_pre ? sp / static_cast<double>(r.overshoot_count_pre) : 0.0;
  r.post = r.overshoot_count_post ? so / static_cast<double>(r.overshoot_count_post) : 0.0;
  return r;
}

double sd_oracle(const std::vector<cplx>& s, std::size_t lo, std::size_t hi) {
  double mean = 0.0;
  for (std::size_t k = lo; k <= hi; ++k) mean += 10.0 * std::log10(std::abs(s[k]));
  mean /= static_cast<double>(hi - lo + 1);
  double ss = 0.0;
  for (std::size_t k = lo; k <= hi; ++k) ss += std::pow(10.0 * std::log10(std::abs(s[k])) - mean, 2);
  return std::sqrt(ss / static_cast<double>(hi - lo + 1));
}

}  // namespace

TEST_CASE("overshoot envelope") {
  const std::vector<double> wu(8, 100.0);  // tolerance 0.01
  CHECK(max_abs(overshoot_envelope(std::vector<double>(8, 0.005), wu)) == 0.0);

  std::vector<double> g(8, 0.0);
  g[3] = 0.1;  // ten times the tolerance
  const auto e = overshoot_envelope(g, wu);
  CHECK(e[3] == doctest::Approx(20.0).epsilon(1e-14));

  // Above the tolerance but below the absolute floor.
  std::vector<double> w3(8, 1000.0);
  std::vector<double> g3(8, 0.0);
  g3[2] = std::pow(10.0, -2.6);
  CHECK(max_abs(overshoot_envelope(g3, w3)) == 0.0);
  g3[2] = std::pow(10.0, -2.4);
  CHECK(overshoot_envelope(g3, w3)[2] > 0.0);
}

TEST_CASE("nprq hand cases") {
  std::vector<double> wu(40, 100.0);
  std::vector<double> g(40, 0.0);
  CHECK(nprq(g, wu, 10, 30).pre == 0.0);
  CHECK(nprq(g, wu, 10, 30).post == 0.0);

  g[2] = 0.01 * std::pow(10.0, 6.0 / 20.0);
  g[5] = -0.01 * std::pow(10.0, 12.0 / 20.0);
  g[20] = 5.0;  // between the regions, ignored
  const NprqResult r = nprq(g, wu, 10, 30);
  CHECK(r.pre == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(r.post == 0.0);
  CHECK(r.overshoot_count_pre == 2);

  std::vector<double> flipped(g);
  for (double& x : flipped) x = -x;
  CHECK(nprq(flipped, wu, 10, 30).pre == r.pre);
}

TEST_CASE("nprq and sd match loop oracles") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> uw(10.0, 1000.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_vector(rng, 64, 0.05);
    std::vector<double> wu(64);
    for (double& w : wu) w = uw(rng);
    const NprqResult a = nprq(g, wu, 20, 40);
    const NprqResult b = nprq_oracle(g, wu, 20, 40);
    CHECK(std::abs(a.pre - b.pre) <= 1e-9 * std::max(1.0, std::abs(b.pre)));
    CHECK(std::abs(a.post - b.post) <= 1e-9 * std::max(1.0, std::abs(b.post)));

    const auto x = random_vector(rng, 40);
    const auto s = direct_dft(x, 64);
    const double sa = spectral_deviation(s, 3, 29);
    CHECK(rel_err(sa, sd_oracle(s, 3, 29)) <= 1e-9);
  }
}

TEST_CASE("spectral deviation hand cases") {
  std::vector<cplx> flat(16, cplx(0.3, 0.4));
  CHECK(spectral_deviation(flat, 2, 12) == doctest::Approx(0.0).scale(1.0));

  const std::vector<cplx> two{cplx(1.0, 0.0), cplx(10.0, 0.0)};
  CHECK(spectral_deviation(two, 0, 1) == 5.0);

  std::mt19937_64 rng(52);
  const auto x = random_vector(rng, 30);
  auto s = direct_dft(x, 32);
  const double base = spectral_deviation(s, 1, 15);
  for (auto& v : s) v *= 7.5;
  CHECK(spectral_deviation(s, 1, 15) == doctest::Approx(base).epsilon(1e-12));

  std::vector<cplx> hole(4, cplx(1.0, 0.0));
  hole[1] = 0.0;
  std::size_t clamped = 0;
  const double v = spectral_deviation(hole, 0, 3, &clamped);
  CHECK(clamped == 1);
  CHECK(std::isfinite(v));
  CHECK_THROWS_AS(spectral_deviation(hole, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(spectral_deviation(hole, 0, 4), std::invalid_argument);
}

TEST_CASE("octave bands") {
  const OctaveBandSet set = octave_bands(2048);
  CHECK(set.bands[0].f_lo == 225.0);
  CHECK(set.bands[4].f_hi == doctest::Approx(5656.854).epsilon(1e-6));
  CHECK(set.bands[5].f_hi == doctest::Approx(11313.708).epsilon(1e-6));
  for (std::size_t b = 0; b + 1 < 6; ++b) CHECK(set.bands[b + 1].lo_idx == set.bands[b].hi_idx + 1);
  CHECK(set.bands[0].lo_idx == static_cast<std::size_t>(std::ceil(225.0 / set.bin_hz)));
  CHECK(set.bands[5].hi_idx == static_cast<std::size_t>(std::floor(11313.708 / set.bin_hz)));
  CHECK_THROWS_AS(octave_bands(2048, 16000.0), std::invalid_argument);
  CHECK_THROWS_AS(octave_bands(16), std::invalid_argument);
}

TEST_CASE("octave sd") {
  const OctaveSd flat = octave_sd(delta(1024, 0));
  for (double b : flat.band) CHECK(b == doctest::Approx(0.0).scale(1.0));
  CHECK(flat.avg5 == doctest::Approx(0.0).scale(1.0));
  CHECK(flat.avg6 == doctest::Approx(0.0).scale(1.0));

  std::mt19937_64 rng(53);
  const Fir g = random_fir(rng, 900);
  const OctaveSd r = octave_sd(g);
  double m5 = 0.0;
  for (std::size_t b = 0; b < 5; ++b) m5 += r.band[b];
  CHECK(std::abs(r.avg5 - m5 / 5.0) <= 1e-12);
  CHECK(std::abs(r.avg6 - (m5 + r.band[5]) / 6.0) <= 1e-12);

  // A ripple confined to band 3 changes only that band.
  const OctaveBandSet set = octave_bands(1024);
  std::vector<cplx> s(513, cplx(1.0, 0.0));
  for (std::size_t k = set.bands[2].lo_idx; k <= set.bands[2].hi_idx; k += 2) s[k] = 3.0;
  const OctaveSd rip = octave_sd(s, set);
  for (std::size_t b = 0; b < 6; ++b) {
    if (b == 2) CHECK(rip.band[b] > 1.0);
    else CHECK(rip.band[b] == 0.0);
  }
}

TEST_CASE("response evaluation") {
  const ArrayGeometry geo = default_geometry();
  TargetOptions opts;
  opts.length = 1535;
  const TargetResponse t = free_field_target(VirtualSource{60.0, 0.0, 1.0}, geo, 256.0, opts);
  const ResponseMetrics m = evaluate_response(t.mics, t, WindowParams{});
  CHECK(m.nprq.post == 0.0);
  CHECK(m.sd.avg5 < 0.1);

  // Gain changes nothing.
  std::vector<Fir> scaled = t.mics;
  for (auto& f : scaled) {
    for (double& x : f.samples) x *= -4.0;
  }
  const ResponseMetrics ms = evaluate_response(scaled, t, WindowParams{});
  CHECK(ms.nprq.pre == doctest::Approx(m.nprq.pre).epsilon(1e-9));
  CHECK(ms.sd.avg6 == doctest::Approx(m.sd.avg6).epsilon(1e-9));

  // A strong early echo counts as pre-ringing.
  std::vector<Fir> echo = t.mics;
  for (auto& f : echo) f.samples[100] += 0.3;
  CHECK(evaluate_response(echo, t, WindowParams{}).nprq.pre > m.nprq.pre + 1.0);

  std::vector<Fir> short_mics(t.mics.begin(), t.mics.begin() + 3);
  CHECK_THROWS_AS(evaluate_response(short_mics, t, WindowParams{}), std::invalid_argument);
}
