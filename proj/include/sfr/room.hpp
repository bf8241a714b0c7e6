#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sfr/signal.hpp"

namespace sfr {

using Position = Eigen::Vector3d;

inline constexpr double kSpeedOfSound = 343.0;
inline constexpr double kBandLowHz = 200.0;
inline constexpr double kBandHighHz = 12000.0;

/// Shoebox room spanning [0, dimensions]. Walls are ordered
/// x=0, x=Lx, y=0, y=Ly, z=0, z=Lz. +x points forward, +y to the left.
struct Room {
  Position dimensions{2.8, 1.6, 1.2};
  std::array<double, 6> absorption{0.45, 0.45, 0.45, 0.45, 0.45, 0.45};
  double speed_of_sound = kSpeedOfSound;

  bool contains(const Position& p) const;
  void validate() const;
};

struct ArrayGeometry {
  std::vector<Position> loudspeakers;
  std::vector<Position> microphones;
  Position array_center = Position::Zero();

  std::size_t q_count() const { return microphones.size(); }
  std::size_t l_count() const { return loudspeakers.size(); }
  /// Largest microphone distance from the array centre.
  double array_radius() const;
  /// Same geometry with microphones and centre moved by `shift`; loudspeakers stay put.
  ArrayGeometry translated_array(const Position& shift) const;
  void validate(const Room& room) const;
};

/// Unit vector pointing to the listener's right; lateral offsets are measured along it.
inline const Position kLateralAxis{0.0, -1.0, 0.0};

struct PositionSet {
  std::vector<std::pair<std::string, double>> offsets;

  /// LL, L, O, R, RR at -7.5, -4, 0, +4, +7.5 cm.
  static PositionSet standard();
  double offset(const std::string& label) const;
  bool has(const std::string& label) const;
};

/// Direction measured counterclockwise from the front (+x), elevation up from the horizontal.
struct VirtualSource {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double distance_m = 1.0;

  Position direction() const;
  void validate() const;
};

/// Acoustic channels c_ql for Q microphones and L loudspeaker channels.
struct ImpulseResponseSet {
  std::size_t q_count = 0;
  std::size_t l_count = 0;
  std::size_t length = 0;
  double sample_rate = kSampleRate;
  std::vector<double> data;  // [q][l][n]

  ImpulseResponseSet() = default;
  ImpulseResponseSet(std::size_t q, std::size_t l, std::size_t len, double fs = kSampleRate);

  std::span<const double> ir(std::size_t q, std::size_t l) const;
  std::span<double> ir(std::size_t q, std::size_t l);
  Fir fir(std::size_t q, std::size_t l) const;
};

/// Desired anechoic responses d_q, one per microphone, all of equal length.
struct TargetResponse {
  std::vector<Fir> mics;
  double gross_delay = 0.0;

  std::size_t q_count() const { return mics.size(); }
  std::size_t length() const { return mics.empty() ? 0 : mics.front().size(); }
};

/// Adds amp * (32-tap Hann-windowed sinc centred at `delay`) into buf; taps outside are dropped.
void add_fractional_impulse(std::span<double> buf, double delay, double amp);

Fir image_source_ir(const Room& room, const Position& src, const Position& mic, int max_order,
                    std::size_t ir_len, double sample_rate = kSampleRate);

struct SimulationOptions {
  int max_order = 30;
  std::size_t ir_len = 1024;
  double sample_rate = kSampleRate;
  double band_lo = kBandLowHz;
  double band_hi = kBandHighHz;
};

/// All Q x L channels with the microphone array displaced laterally by `position_offset` metres.
ImpulseResponseSet simulate_channels(const Room& room, const ArrayGeometry& geometry,
                                     double position_offset, const SimulationOptions& opts = {});

/// Deterministic Fibonacci lattice. Even q uses an antipodally symmetric layout
/// (centroid exactly at the centre); odd q uses the standard offset lattice.
std::vector<Position> sphere_mic_positions(const Position& center, double radius, std::size_t q);

struct TargetOptions {
  std::size_t length = 1535;
  double sample_rate = kSampleRate;
  double speed_of_sound = kSpeedOfSound;
  bool apply_bandpass = true;
  double band_lo = kBandLowHz;
  double band_hi = kBandHighHz;
};

/// Per-microphone arrival delay in samples: gross_delay + (|s - m_q| - r) / c * fs.
std::vector<double> target_delays(const VirtualSource& source, const ArrayGeometry& geometry,
                                  double gross_delay, double sample_rate = kSampleRate,
                                  double speed_of_sound = kSpeedOfSound);

/// Free-field point-source target at the array (open-sphere model).
TargetResponse free_field_target(const VirtualSource& source, const ArrayGeometry& geometry,
                                 double gross_delay, const TargetOptions& opts = {});

/// Synthetic cabin: 2.8 x 1.6 x 1.2 m with per-wall absorption drawn from U(0.3, 0.6).
Room default_cabin(std::uint64_t seed);

/// 16-mic, 3 cm sphere at the driver head and 11 irregular wall-mounted loudspeakers.
ArrayGeometry default_geometry();

/// Azimuth (deg, [0, 360)) of `p` seen from `center` in the horizontal plane.
double azimuth_of(const Position& p, const Position& center);

}  // namespace sfr
