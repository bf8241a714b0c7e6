#include "sfr/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <string>

#include <fftw3.h>

namespace sfr {

namespace {

// The FFTW planner is not thread-safe; plan execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Unnormalized complex transform; sign = FFTW_FORWARD or FFTW_BACKWARD.
void complex_fft(const std::vector<cplx>& in, std::vector<cplx>& out, int sign) {
  const std::size_t n = in.size();
  out.resize(n);
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign, FFTW_ESTIMATE);
  }
  std::memcpy(buf, in.data(), sizeof(fftw_complex) * n);
  fftw_execute(plan);
  std::memcpy(out.data(), buf, sizeof(fftw_complex) * n);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
}

}  // namespace

Fir make_fir(std::vector<double> samples, double sample_rate) {
  if (samples.empty()) throw std::invalid_argument("Fir: length must be >= 1");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("Fir: sample rate must be positive");
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("Fir: non-finite sample");
  }
  return Fir{std::move(samples), sample_rate};
}

Fir delta(std::size_t length, std::size_t at, double sample_rate) {
  if (at >= length) throw std::invalid_argument("delta: index outside length");
  std::vector<double> s(length, 0.0);
  s[at] = 1.0;
  return Fir{std::move(s), sample_rate};
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

Fir convolve(const Fir& a, const Fir& b) {
  if (a.sample_rate != b.sample_rate) {
    throw std::invalid_argument("convolve: sample rates differ");
  }
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("convolve: empty input");
  const std::size_t out_len = a.size() + b.size() - 1;
  std::vector<double> out(out_len, 0.0);
  // Short inputs: direct sum. Long inputs: FFT.
  if (std::min(a.size(), b.size()) <= 64) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double ai = a.samples[i];
      if (ai == 0.0) continue;
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += ai * b.samples[j];
    }
    return Fir{std::move(out), a.sample_rate};
  }
  RealFft fft(next_pow2(out_len));
  std::vector<cplx> fa, fb;
  fft.forward(a.samples, fa);
  fft.forward(b.samples, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> full;
  fft.inverse(fa, full);
  std::copy_n(full.begin(), out_len, out.begin());
  return Fir{std::move(out), a.sample_rate};
}

ConvolutionMatrix build_conv_matrix(const Fir& c, std::size_t filter_len) {
  if (filter_len == 0) throw std::invalid_argument("build_conv_matrix: filter_len must be >= 1");
  const auto rows = static_cast<Eigen::Index>(c.size() + filter_len - 1);
  ConvolutionMatrix m = ConvolutionMatrix::Zero(rows, static_cast<Eigen::Index>(filter_len));
  for (std::size_t j = 0; j < filter_len; ++j) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      m(static_cast<Eigen::Index>(i + j), static_cast<Eigen::Index>(j)) = c.samples[i];
    }
  }
  return m;
}

Spectrum dft(const Fir& x, std::size_t n_bins) {
  if (n_bins < x.size()) {
    throw std::invalid_argument("dft: n_bins (" + std::to_string(n_bins) +
                                ") shorter than input (" + std::to_string(x.size()) + ")");
  }
  std::vector<cplx> in(n_bins, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = x.samples[i];
  Spectrum s;
  complex_fft(in, s.bins, FFTW_FORWARD);
  s.bin_hz = x.sample_rate / static_cast<double>(n_bins);
  return s;
}

Fir idft(const Spectrum& spectrum, std::size_t length, double sample_rate) {
  const std::size_t n = spectrum.size();
  if (length == 0 || length > n) throw std::invalid_argument("idft: invalid output length");
  std::vector<cplx> out;
  complex_fft(spectrum.bins, out, FFTW_BACKWARD);
  std::vector<double> s(length);
  for (std::size_t i = 0; i < length; ++i) s[i] = out[i].real() / static_cast<double>(n);
  return Fir{std::move(s), sample_rate};
}

namespace {

// x^p with exponentiation by squaring for small integer p.
double power(double x, double p) {
  const double r = std::round(p);
  if (r != p || r < 0.0 || r > 64.0) return std::pow(x, p);
  unsigned n = static_cast<unsigned>(r);
  double out = 1.0;
  while (n) {
    if (n & 1u) out *= x;
    x *= x;
    n >>= 1u;
  }
  return out;
}

}  // namespace

double large_p_norm(std::span<const double> v, double p) {
  if (p < 1.0) throw std::invalid_argument("large_p_norm: p must be >= 1");
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  if (m == 0.0) return 0.0;
  const double inv_m = 1.0 / m;
  double s = 0.0;
  for (double x : v) s += power(std::abs(x) * inv_m, p);
  return m * std::pow(s, 1.0 / p);
}

double large_p_norm_grad(std::span<const double> v, double p, std::span<double> grad) {
  if (grad.size() != v.size()) throw std::invalid_argument("large_p_norm_grad: size mismatch");
  const double norm = large_p_norm(v, p);
  if (norm == 0.0) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return 0.0;
  }
  const double inv = 1.0 / norm;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double mag = power(std::abs(v[i]) * inv, p - 1.0);
    grad[i] = v[i] < 0.0 ? -mag : mag;
  }
  return norm;
}

namespace {

// Per-pass attenuation; the forward-backward pass doubles it in dB.
constexpr double kPerPassAttenuationDb = 35.0;

double kaiser_beta(double atten_db) {
  if (atten_db > 50.0) return 0.1102 * (atten_db - 8.7);
  if (atten_db >= 21.0) {
    return 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0);
  }
  return 0.0;
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

}  // namespace

std::vector<double> bandpass_kernel(double f_lo, double f_hi, double sample_rate) {
  const double nyq = sample_rate / 2.0;
  if (!(f_lo > 0.0 && f_lo < f_hi && f_hi < nyq)) {
    throw std::invalid_argument("bandpass: require 0 < f_lo < f_hi < fs/2");
  }
  // Stop edges at f_lo/2 and f_hi + min(1 kHz, half the room to Nyquist).
  const double tw_lo = f_lo / 2.0;
  const double tw_hi = std::min(1000.0, (nyq - f_hi) / 2.0);
  const double tw = std::min(tw_lo, tw_hi);
  const double c_lo = f_lo - tw_lo / 2.0;
  const double c_hi = f_hi + tw_hi / 2.0;

  const double dw = 2.0 * kPi * tw / sample_rate;
  auto len = static_cast<std::size_t>(std::ceil((kPerPassAttenuationDb - 7.95) / (2.285 * dw))) + 1;
  if (len % 2 == 0) ++len;
  const double beta = kaiser_beta(kPerPassAttenuationDb);
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  const double mid = static_cast<double>(len - 1) / 2.0;

  std::vector<double> k(len);
  for (std::size_t n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) - mid;
    const double ideal = 2.0 * c_hi / sample_rate * sinc(2.0 * c_hi * t / sample_rate) -
                         2.0 * c_lo / sample_rate * sinc(2.0 * c_lo * t / sample_rate);
    const double r = t / mid;
    const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    k[n] = ideal * w;
  }
  return k;
}

Fir bandpass(const Fir& x, double f_lo, double f_hi) {
  const std::vector<double> k = bandpass_kernel(f_lo, f_hi, x.sample_rate);
  const std::size_t klen = k.size();
  // Forward then time-reversed pass of a symmetric kernel == one pass of k*k,
  // centred so the output is aligned with the input.
  const std::size_t full_len = x.size() + 2 * (klen - 1);
  RealFft fft(next_pow2(full_len));
  std::vector<cplx> fx, fk;
  fft.forward(x.samples, fx);
  fft.forward(k, fk);
  for (std::size_t i = 0; i < fx.size(); ++i) fx[i] *= fk[i] * fk[i];
  std::vector<double> full;
  fft.inverse(fx, full);
  std::vector<double> out(x.size());
  std::copy_n(full.begin() + static_cast<std::ptrdiff_t>(klen - 1), x.size(), out.begin());
  return Fir{std::move(out), x.sample_rate};
}

BandMask band_mask(std::size_t fft_size, double sample_rate, double f_lo, double f_hi,
                   double transition_hz) {
  if (fft_size < 2) throw std::invalid_argument("band_mask: fft_size too small");
  if (!(f_lo >= 0.0 && f_lo < f_hi) || transition_hz < 0.0) {
    throw std::invalid_argument("band_mask: invalid band edges");
  }
  BandMask m;
  m.bin_hz = sample_rate / static_cast<double>(fft_size);
  m.weights.resize(fft_size / 2 + 1);
  for (std::size_t k = 0; k < m.weights.size(); ++k) {
    const double f = static_cast<double>(k) * m.bin_hz;
    double w = 0.0;
    if (f >= f_lo && f <= f_hi) {
      w = 1.0;
    } else if (transition_hz > 0.0 && f < f_lo && f > f_lo - transition_hz) {
      w = 0.5 - 0.5 * std::cos(kPi * (f - (f_lo - transition_hz)) / transition_hz);
    } else if (transition_hz > 0.0 && f > f_hi && f < f_hi + transition_hz) {
      w = 0.5 + 0.5 * std::cos(kPi * (f - f_hi) / transition_hz);
    }
    m.weights[k] = w;
  }
  return m;
}

BandMask stop_mask(const BandMask& pass) {
  BandMask m = pass;
  for (double& w : m.weights) w = 1.0 - w;
  return m;
}

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* half = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit Impl(std::size_t n) {
    real = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    half = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, half, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), half, real, FFTW_ESTIMATE);
  }
  ~Impl() {
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      fftw_destroy_plan(fwd);
      fftw_destroy_plan(inv);
    }
    fftw_free(real);
    fftw_free(half);
  }
};

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 4 || (n & (n - 1)) != 0) throw std::invalid_argument("RealFft: size must be a power of two >= 4");
  impl_ = std::make_unique<Impl>(n);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> x, std::vector<cplx>& out) {
  if (x.size() > n_) throw std::invalid_argument("RealFft::forward: input longer than size");
  std::copy(x.begin(), x.end(), impl_->real);
  std::fill(impl_->real + x.size(), impl_->real + n_, 0.0);
  fftw_execute(impl_->fwd);
  out.resize(half_size());
  std::memcpy(out.data(), impl_->half, sizeof(fftw_complex) * half_size());
}

void RealFft::inverse(const std::vector<cplx>& half, std::vector<double>& out) {
  if (half.size() != half_size()) throw std::invalid_argument("RealFft::inverse: wrong bin count");
  std::memcpy(impl_->half, half.data(), sizeof(fftw_complex) * half_size());
  impl_->half[0][1] = 0.0;
  impl_->half[n_ / 2][1] = 0.0;
  fftw_execute(impl_->inv);
  out.resize(n_);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = impl_->real[i] * scale;
}

}  // namespace sfr
