#include "sfr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfr {

std::vector<double> overshoot_envelope(std::span<const double> g, std::span<const double> w_u, double floor) {
  if (g.size() != w_u.size()) throw std::invalid_argument("overshoot_envelope: length mismatch");
  std::vector<double> e(g.size(), 0.0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double a = std::abs(g[n]);
    if (w_u[n] > 0.0 && a * w_u[n] > 1.0 && a > floor) e[n] = 20.0 * std::log10(a * w_u[n]);
  }
  return e;
}

NprqResult nprq(std::span<const double> g, std::span<const double> w_u, std::size_t n_pre, std::size_t n_post,
                double floor) {
  const std::vector<double> e = overshoot_envelope(g, w_u, floor);
  NprqResult r;
  double sum_pre = 0.0, sum_post = 0.0;
  for (std::size_t n = 0; n < e.size(); ++n) {
    if (e[n] == 0.0) continue;
    if (n <= n_pre) {
      sum_pre += e[n];
      ++r.overshoot_count_pre;
    }
    if (n >= n_post) {
      sum_post += e[n];
      ++r.overshoot_count_post;
    }
  }
  if (r.overshoot_count_pre) r.pre = sum_pre / static_cast<double>(r.overshoot_count_pre);
  if (r.overshoot_count_post) r.post = sum_post / static_cast<double>(r.overshoot_count_post);
  return r;
}

NprqResult nprq(std::span<const double> g, const TemporalWindows& windows, std::size_t q) {
  if (q >= windows.q_count || g.size() != windows.length) throw std::invalid_argument("nprq: windows do not match response");
  return nprq(g, windows.w_u_of(q), windows.n_pre[q], windows.n_post[q]);
}

double spectral_deviation(std::span<const cplx> spectrum, std::size_t f_l_idx, std::size_t f_h_idx,
                          std::size_t* clamped) {
  if (f_l_idx > f_h_idx || f_h_idx >= spectrum.size()) throw std::invalid_argument("spectral_deviation: invalid bin range");
  const std::size_t k = f_h_idx - f_l_idx + 1;
  std::vector<double> y(k);
  std::size_t nclamp = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double m = std::abs(spectrum[f_l_idx + i]);
    double v = m > 0.0 ? 10.0 * std::log10(m) : kSdFloorDb;
    if (v < kSdFloorDb) v = kSdFloorDb;
    if (m == 0.0 || v == kSdFloorDb) ++nclamp;
    y[i] = v;
  }
  if (clamped) *clamped = nclamp;
  double d = 0.0;
  for (double v : y) d += v;
  d /= static_cast<double>(k);
  double ss = 0.0;
  for (double v : y) ss += (v - d) * (v - d);
  return std::sqrt(ss / static_cast<double>(k));
}

OctaveBandSet octave_bands(std::size_t fft_size, double sample_rate) {
  OctaveBandSet set;
  set.bin_hz = sample_rate / static_cast<double>(fft_size);
  const double nyq = sample_rate / 2.0;
  for (std::size_t b = 0; b < 6; ++b) {
    OctaveBand& o = set.bands[b];
    o.f_center = 250.0 * std::pow(2.0, static_cast<double>(b));
    o.f_lo = b == 0 ? 225.0 : o.f_center / std::sqrt(2.0);
    o.f_hi = o.f_center * std::sqrt(2.0);
    if (o.f_hi > nyq) throw std::invalid_argument("octave_bands: band above Nyquist");
    o.lo_idx = static_cast<std::size_t>(std::ceil(o.f_lo / set.bin_hz));
    // Bins on a shared edge go to the upper band; the last band keeps its upper edge.
    const double hi = o.f_hi / set.bin_hz;
    o.hi_idx = b == 5 ? static_cast<std::size_t>(std::floor(hi)) : static_cast<std::size_t>(std::ceil(hi)) - 1;
    if (o.hi_idx < o.lo_idx) throw std::invalid_argument("octave_bands: DFT too short to resolve every band");
  }
  return set;
}

OctaveSd octave_sd(std::span<const cplx> half_spectrum, const OctaveBandSet& bands) {
  OctaveSd r;
  for (std::size_t b = 0; b < 6; ++b) {
    r.band[b] = spectral_deviation(half_spectrum, bands.bands[b].lo_idx, bands.bands[b].hi_idx);
  }
  for (std::size_t b = 0; b < 5; ++b) r.avg5 += r.band[b];
  r.avg6 = (r.avg5 + r.band[5]) / 6.0;
  r.avg5 /= 5.0;
  return r;
}

OctaveSd octave_sd(const Fir& g) {
  const std::size_t n = next_pow2(std::max<std::size_t>(g.size(), 4));
  RealFft fft(n);
  std::vector<cplx> spec;
  fft.forward(g.samples, spec);
  return octave_sd(spec, octave_bands(n, g.sample_rate));
}

ResponseMetrics evaluate_response(const std::vector<Fir>& g, const TargetResponse& target, const WindowParams& params) {
  if (g.size() != target.q_count()) throw std::invalid_argument("evaluate_response: microphone count mismatch");
  ResponseMetrics out;
  const std::size_t len = target.length();
  const long half = static_cast<long>(params.desired_len / 2);
  for (std::size_t q = 0; q < g.size(); ++q) {
    if (g[q].size() != len) throw std::invalid_argument("evaluate_response: response length mismatch");
    const auto& d = target.mics[q].samples;
    const long tp = static_cast<long>(std::max_element(d.begin(), d.end(), [](double a, double b) {
                                        return std::abs(a) < std::abs(b);
                                      }) - d.begin());
    const auto& x = g[q].samples;
    const std::size_t lo = static_cast<std::size_t>(std::max(0L, tp - half + 1));
    const std::size_t hi = static_cast<std::size_t>(std::min(static_cast<long>(len) - 1, tp + half - 1));
    std::size_t peak = lo;
    for (std::size_t n = lo; n <= hi; ++n) {
      if (std::abs(x[n]) > std::abs(x[peak])) peak = n;
    }
    if (x[peak] == 0.0) {
      for (std::size_t n = 0; n < len; ++n) {
        if (std::abs(x[n]) > std::abs(x[peak])) peak = n;
      }
    }
    const double a = std::abs(x[peak]);
    std::vector<double> norm(len, 0.0);
    if (a > 0.0) {
      for (std::size_t n = 0; n < len; ++n) norm[n] = x[n] / a;
    }
    const TemporalWindows w = make_windows({peak}, {1.0}, len, params, g[q].sample_rate);
    const NprqResult r = nprq(norm, w, 0);
    out.nprq.pre += r.pre;
    out.nprq.post += r.post;
    out.nprq.overshoot_count_pre += r.overshoot_count_pre;
    out.nprq.overshoot_count_post += r.overshoot_count_post;
    const OctaveSd sd = octave_sd(g[q]);
    for (std::size_t b = 0; b < 6; ++b) out.sd.band[b] += sd.band[b];
    out.sd.avg5 += sd.avg5;
    out.sd.avg6 += sd.avg6;
  }
  const double inv = 1.0 / static_cast<double>(g.size());
  out.nprq.pre *= inv;
  out.nprq.post *= inv;
  for (double& v : out.sd.band) v *= inv;
  out.sd.avg5 *= inv;
  out.sd.avg6 *= inv;
  return out;
}

}  // namespace sfr
