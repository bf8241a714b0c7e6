#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sfr/objective.hpp"
#include "sfr/signal.hpp"

namespace sfr {

inline constexpr double kOvershootFloor = 0.0031622776601683794;  // 10^-2.5
inline constexpr double kSdFloorDb = -200.0;

struct NprqResult {
  double pre = 0.0;   // dB
  double post = 0.0;  // dB
  std::size_t overshoot_count_pre = 0;
  std::size_t overshoot_count_post = 0;
};

/// g_E(n) = 20 log10(|g(n)| w_u(n)) where |g(n)| > 1/w_u(n) and |g(n)| > floor, else 0.
std::vector<double> overshoot_envelope(std::span<const double> g, std::span<const double> w_u,
                                       double floor = kOvershootFloor);

/// Mean of the nonzero g_E over [0, n_pre] and over [n_post, len-1].
NprqResult nprq(std::span<const double> g, std::span<const double> w_u, std::size_t n_pre, std::size_t n_post,
                double floor = kOvershootFloor);
/// Same, using microphone q of a window set.
NprqResult nprq(std::span<const double> g, const TemporalWindows& windows, std::size_t q);

/// RMS deviation of 10 log10|E(k)| about its mean over bins [f_l_idx, f_h_idx].
/// Zero bins are clamped to -200 dB; `clamped` (optional) counts them.
double spectral_deviation(std::span<const cplx> spectrum, std::size_t f_l_idx, std::size_t f_h_idx,
                          std::size_t* clamped = nullptr);

struct OctaveBand {
  double f_center = 0.0;
  double f_lo = 0.0;
  double f_hi = 0.0;
  std::size_t lo_idx = 0;
  std::size_t hi_idx = 0;  // inclusive
};

struct OctaveBandSet {
  std::array<OctaveBand, 6> bands;
  double bin_hz = 0.0;
};

/// Six contiguous octave bands centred at 250 Hz .. 8 kHz with edges fc * 2^(+-1/2);
/// band 1 starts at 225 Hz, band 5 ends at 5.66 kHz and band 6 at 11.3 kHz.
OctaveBandSet octave_bands(std::size_t fft_size, double sample_rate = kSampleRate);

struct OctaveSd {
  std::array<double, 6> band{};
  double avg5 = 0.0;  // bands 1-5 (225 Hz - 5.65 kHz)
  double avg6 = 0.0;  // bands 1-6 (225 Hz - 11.3 kHz)
};

/// Octave-band SD of one response, evaluated on a next-power-of-two DFT.
OctaveSd octave_sd(const Fir& g);
OctaveSd octave_sd(std::span<const cplx> half_spectrum, const OctaveBandSet& bands);

/// Mic-averaged metrics of a reproduced response set.
struct ResponseMetrics {
  NprqResult nprq;
  OctaveSd sd;
};

/// Each mic is normalized by |g| at its own peak (argmax within the target's
/// desired-window support) and the windows are re-anchored there.
ResponseMetrics evaluate_response(const std::vector<Fir>& g, const TargetResponse& target,
                                  const WindowParams& params = {});

}  // namespace sfr
