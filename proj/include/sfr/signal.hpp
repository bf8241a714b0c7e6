#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sfr {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSampleRate = 48000.0;

/// Finite impulse response or any finite real sequence at a known rate.
struct Fir {
  std::vector<double> samples;
  double sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double operator[](std::size_t i) const { return samples[i]; }
};

/// Validates length and finiteness; throws std::invalid_argument.
Fir make_fir(std::vector<double> samples, double sample_rate = kSampleRate);

/// Unit impulse of `length` samples at index `at`.
Fir delta(std::size_t length, std::size_t at = 0, double sample_rate = kSampleRate);

/// Uniformly spaced DFT bins of a sequence.
struct Spectrum {
  std::vector<cplx> bins;
  double bin_hz = 0.0;

  std::size_t size() const { return bins.size(); }
};

/// Per-bin weights in [0, 1] over the non-negative half spectrum [0, N/2].
struct BandMask {
  std::vector<double> weights;
  double bin_hz = 0.0;
};

using ConvolutionMatrix = Eigen::MatrixXd;

std::size_t next_pow2(std::size_t n);

/// Linear convolution, output length len(a) + len(b) - 1.
Fir convolve(const Fir& a, const Fir& b);

/// Toeplitz matrix C with C * h == convolve(c, h) for any h of length filter_len.
ConvolutionMatrix build_conv_matrix(const Fir& c, std::size_t filter_len);

/// X[k] = sum_n x[n] exp(-i 2 pi k n / n_bins). Rejects n_bins < len(x).
Spectrum dft(const Fir& x, std::size_t n_bins);

/// Inverse of dft(); returns the real part of the first `length` samples.
Fir idft(const Spectrum& spectrum, std::size_t length, double sample_rate = kSampleRate);

/// (sum |v_i|^p)^(1/p), evaluated with the maximum factored out.
double large_p_norm(std::span<const double> v, double p);

/// Gradient of large_p_norm with respect to v, written into `grad` (same size as v).
/// Returns the norm value. The gradient is zero for the zero vector.
double large_p_norm_grad(std::span<const double> v, double p, std::span<double> grad);

/// Kaiser-window linear-phase band-pass kernel used by bandpass(). Odd length, symmetric.
std::vector<double> bandpass_kernel(double f_lo, double f_hi, double sample_rate);

/// Zero-phase band-pass: the signal is filtered forward and backward with the
/// Kaiser kernel, so peaks stay in place. Output has the same length as the input.
Fir bandpass(const Fir& x, double f_lo, double f_hi);

/// Smooth mask that is 1 on [f_lo, f_hi] and 0 below f_lo - transition_hz and
/// above f_hi + transition_hz, with raised-cosine edges.
BandMask band_mask(std::size_t fft_size, double sample_rate, double f_lo, double f_hi,
                   double transition_hz);

/// Complement of a band mask (1 - w), used to weigh out-of-band content.
BandMask stop_mask(const BandMask& pass);

/// Real-input FFT of fixed power-of-two size operating on the half spectrum
/// [0, n/2]. Owns its plans and buffers, so one instance per thread.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t half_size() const { return n_ / 2 + 1; }

  /// Zero-pads `x` (len <= n) and writes n/2+1 bins into `out`.
  void forward(std::span<const double> x, std::vector<cplx>& out);
  /// Inverse of forward() with 1/n scaling; writes n samples into `out`.
  /// The imaginary parts of the DC and Nyquist bins are ignored.
  void inverse(const std::vector<cplx>& half, std::vector<double>& out);

 private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sfr
