#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sfr/objective.hpp"
#include "sfr/room.hpp"

namespace sfr {

/// Planar multichannel audio: channels[c][n].
struct WavData {
  double sample_rate = kSampleRate;
  std::vector<std::vector<double>> channels;
};

/// 32-bit IEEE float, little-endian, interleaved. All channels must share one length.
void write_wav(const std::filesystem::path& path, const WavData& wav);
WavData read_wav(const std::filesystem::path& path);

/// One file per loudspeaker channel (chNN.wav, Q audio channels of length L_c).
void save_channels(const std::filesystem::path& dir, const ImpulseResponseSet& set);
ImpulseResponseSet load_channels(const std::filesystem::path& dir, std::size_t l_count);

/// L audio channels of length L_h.
void save_bank(const std::filesystem::path& path, const ControlFilterBank& bank);
ControlFilterBank load_bank(const std::filesystem::path& path);

/// Binary 8-bit greyscale; values are mapped linearly from [lo, hi] to [0, 255].
void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& values, double lo, double hi);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string digest(const std::string& bytes);

}  // namespace sfr
