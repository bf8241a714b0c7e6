#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sfr/beamforming.hpp"
#include "sfr/room.hpp"
#include "sfr/signal.hpp"

namespace sfr {

/// Control filters h_l, one per loudspeaker channel, laid out [l][n].
struct ControlFilterBank {
  std::size_t l_count = 0;
  std::size_t filter_len = 0;
  double sample_rate = kSampleRate;
  std::vector<double> coeffs;

  ControlFilterBank() = default;
  ControlFilterBank(std::size_t l, std::size_t len, double fs = kSampleRate)
      : l_count(l), filter_len(len), sample_rate(fs), coeffs(l * len, 0.0) {}

  std::span<const double> filter(std::size_t l) const { return {coeffs.data() + l * filter_len, filter_len}; }
  std::span<double> filter(std::size_t l) { return {coeffs.data() + l * filter_len, filter_len}; }
};

/// Shape of the temporal windows. The tolerance envelope starts at
/// `envelope_start_db` relative to the peak, decays at the given slopes and
/// never drops below `envelope_floor_db`.
struct WindowParams {
  std::size_t desired_len = 64;
  std::size_t guard = 32;  // N_pre = peak - guard, N_post = peak + guard
  double envelope_start_db = -20.0;
  double envelope_floor_db = -40.0;
  double pre_decay_db_per_ms = 12.0;   // -60 dB per 5 ms
  double post_decay_db_per_ms = 1.2;   // -60 dB per 50 ms
};

/// Per-microphone windows, each laid out [q][n].
/// w_u is the reciprocal of the tolerance envelope, so |g| * w_u > 1 marks an overshoot.
struct TemporalWindows {
  std::size_t q_count = 0;
  std::size_t length = 0;
  std::vector<double> desired;
  std::vector<double> unwanted;
  std::vector<double> w_u;
  std::vector<std::size_t> peak;
  std::vector<std::size_t> n_pre;
  std::vector<std::size_t> n_post;

  std::span<const double> desired_of(std::size_t q) const { return {desired.data() + q * length, length}; }
  std::span<const double> unwanted_of(std::size_t q) const { return {unwanted.data() + q * length, length}; }
  std::span<const double> w_u_of(std::size_t q) const { return {w_u.data() + q * length, length}; }
};

/// Windows anchored at the given per-mic peaks; `peak_amplitudes` scale the envelope.
TemporalWindows make_windows(const std::vector<std::size_t>& peaks, const std::vector<double>& peak_amplitudes,
                             std::size_t length, const WindowParams& params, double sample_rate = kSampleRate);

/// Windows anchored at argmax |d_q| of each target response.
TemporalWindows make_windows(const TargetResponse& target, const WindowParams& params);

/// Which objective is assembled.
///   cvx    - convex objective: l-inf ringing, V-weighted l-inf flatness, l-inf band term.
///   nn     - same objective with every l-inf replaced by the large-p surrogate.
///   spmnet - large-p surrogates, dB standard-deviation flatness and the SPM term.
enum class Mode { cvx, nn, spmnet };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

struct LossConfig {
  std::array<double, 5> lambda{1.0, 1.0, 0.1, 0.1, 1.0};
  double p = 10.0;
  double band_lo = kBandLowHz;
  double band_hi = kBandHighHz;
  double band_transition_hz = 100.0;
  double flat_weight = 1.0;  // constant V_s inside the band
  SteeringGrid grid = SteeringGrid::standard();
  WindowParams windows;
  bool spm_normalize = true;  // compare maps scaled to unit mean power per direction
  bool std_pooled = false;
  double magnitude_floor = 1e-8;

  void validate() const;
};

struct LossBreakdown {
  std::array<double, 5> terms{};
  double total = 0.0;
};

/// Forward quantities of one filter bank through one acoustic system.
struct ForwardState {
  std::vector<std::vector<cplx>> h_spec;  // [l] half spectrum of each filter
  std::vector<std::vector<cplx>> g_spec;  // [q] half spectrum of each global response
  std::vector<double> g;                  // [q][n], length L_g per mic
  std::vector<cplx> h_grid;               // [l][f] DTFT of filters on the SPM grid
  std::vector<cplx> g_grid;               // [q][f]
};

/// Gradient seeds for the adjoint pass. Empty vectors mean "no contribution".
struct AdjointSeed {
  std::vector<double> g;                  // d/dg, [q][n]
  std::vector<std::vector<cplx>> g_spec;  // complex gradient w.r.t. each G_q(k), [q][k]
  std::vector<std::vector<cplx>> h_spec;  // complex gradient w.r.t. each H_l(k), [l][k]
  std::vector<cplx> h_grid;               // complex gradient w.r.t. H_l(f) on the SPM grid, [l][f]
};

/// One acoustic system (channels, target, windows, SPM target) with every
/// operator precomputed for repeated loss evaluation. Holds FFT scratch, so a
/// Problem must not be shared between threads.
class Problem {
 public:
  Problem(const ImpulseResponseSet& channels, const TargetResponse& target, const ArrayGeometry& geometry,
          const LossConfig& config, std::size_t filter_len);

  std::size_t q_count() const { return q_; }
  std::size_t l_count() const { return l_; }
  std::size_t filter_len() const { return lh_; }
  std::size_t response_len() const { return lg_; }
  std::size_t fft_size() const { return fft_.size(); }
  std::size_t param_count() const { return l_ * lh_; }
  const LossConfig& config() const { return config_; }
  const TemporalWindows& windows() const { return windows_; }
  const std::vector<double>& target() const { return d_; }
  const std::vector<double>& pass_mask() const { return pass_; }
  const std::vector<double>& flat_weights() const { return vs_; }
  const std::vector<double>& stop_mask() const { return stop_; }
  const std::vector<std::size_t>& band_bins() const { return band_bins_; }
  const SpatialPowerMap& target_map() const { return target_map_; }
  const BeamWeights& beam_weights() const { return weights_; }

  ForwardState forward(std::span<const double> h);
  /// Exact adjoint of forward(): returns the gradient w.r.t. h ([l][n]).
  std::vector<double> adjoint(const AdjointSeed& seed);

  double term_match(const ForwardState& s, std::vector<double>* dg = nullptr) const;
  double term_ringing(const ForwardState& s, bool inf_norm, std::vector<double>* dg = nullptr) const;
  double term_flatness_std(const ForwardState& s, std::vector<std::vector<cplx>>* dG = nullptr) const;
  double term_flatness_inf(const ForwardState& s, bool inf_norm, std::vector<std::vector<cplx>>* dG = nullptr) const;
  double term_filter_band(const ForwardState& s, bool inf_norm, std::vector<std::vector<cplx>>* dH = nullptr) const;
  double term_spm(const ForwardState& s, std::vector<cplx>* dHgrid = nullptr) const;
  /// SPM of the reproduced field on the configured grid.
  SpatialPowerMap reproduced_map(const ForwardState& s) const;

  /// Weighted objective of the selected mode; fills `grad` ([l][n]) when non-null.
  /// Gradients are only available for the differentiable modes (nn, spmnet).
  LossBreakdown loss(std::span<const double> h, Mode mode, std::vector<double>* grad = nullptr);

 private:
  std::size_t q_, l_, lh_, lc_, lg_;
  double fs_;
  LossConfig config_;
  RealFft fft_;
  std::vector<std::vector<cplx>> c_spec_;  // [q*L + l]
  std::vector<double> d_;                  // [q][n]
  TemporalWindows windows_;
  std::vector<double> pass_, vs_, stop_;
  std::vector<std::size_t> band_bins_;
  BeamWeights weights_;
  std::vector<cplx> c_grid_;  // [q][l][f]
  std::vector<cplx> e_grid_;  // [f][n], exp(-i w_f n)
  SpatialPowerMap target_map_;
  std::vector<double> target_map_norm_;
};

/// Direct term-by-term check helper: lambda_k / 2 * term_k summed.
double weighted_total(const std::array<double, 5>& lambda, const std::array<double, 5>& terms);

/// Convenience wrappers mirroring the single-call operations.
LossBreakdown loss(Problem& problem, const ControlFilterBank& h, Mode mode);
std::vector<double> loss_grad(Problem& problem, const ControlFilterBank& h, Mode mode);

}  // namespace sfr
