#include "sfr/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sfr {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const fs::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error(path.string() + ": truncated WAV file");
  return v;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::binary) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, mode);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  return os;
}

std::string channel_name(std::size_t l) {
  std::ostringstream os;
  os << "ch" << std::setw(2) << std::setfill('0') << l << ".wav";
  return os.str();
}

}  // namespace

void write_wav(const fs::path& path, const WavData& wav) {
  if (wav.channels.empty()) throw std::invalid_argument(path.string() + ": no channels to write");
  const std::size_t frames = wav.channels.front().size();
  for (const auto& c : wav.channels) {
    if (c.size() != frames) throw std::invalid_argument(path.string() + ": channels differ in length");
  }
  const auto nch = static_cast<std::uint16_t>(wav.channels.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(wav.sample_rate));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * nch * 4);
  auto os = open_out(path);
  os.write("RIFF", 4);
  put<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put<std::uint32_t>(os, 16);
  put<std::uint16_t>(os, 3);  // IEEE float
  put<std::uint16_t>(os, nch);
  put<std::uint32_t>(os, rate);
  put<std::uint32_t>(os, rate * nch * 4);
  put<std::uint16_t>(os, static_cast<std::uint16_t>(nch * 4));
  put<std::uint16_t>(os, 32);
  os.write("data", 4);
  put<std::uint32_t>(os, data_bytes);
  std::vector<float> frame(nch);
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < nch; ++c) frame[c] = static_cast<float>(wav.channels[c][n]);
    os.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(nch * 4));
  }
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

WavData read_wav(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path.string() + ": cannot open for reading");
  char tag[4];
  auto read_tag = [&](const char* want) {
    if (!is.read(tag, 4) || std::memcmp(tag, want, 4) != 0) {
      throw std::runtime_error(path.string() + ": not a RIFF/WAVE file");
    }
  };
  read_tag("RIFF");
  get<std::uint32_t>(is, path);
  read_tag("WAVE");
  std::uint16_t format = 0, nch = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (is.read(tag, 4)) {
    const auto size = get<std::uint32_t>(is, path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = get<std::uint16_t>(is, path);
      nch = get<std::uint16_t>(is, path);
      rate = get<std::uint32_t>(is, path);
      get<std::uint32_t>(is, path);
      get<std::uint16_t>(is, path);
      bits = get<std::uint16_t>(is, path);
      is.seekg(static_cast<std::streamoff>(size) - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error(path.string() + ": data chunk before fmt chunk");
      if (format != 3 || bits != 32 || nch == 0) {
        throw std::runtime_error(path.string() + ": only 32-bit float WAV is supported");
      }
      const std::size_t frames = size / (4u * nch);
      std::vector<float> raw(frames * nch);
      if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4))) {
        throw std::runtime_error(path.string() + ": truncated data chunk");
      }
      WavData w;
      w.sample_rate = rate;
      w.channels.assign(nch, std::vector<double>(frames));
      for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < nch; ++c) w.channels[c][n] = raw[n * nch + c];
      }
      return w;
    } else {
      is.seekg(size + (size & 1u), std::ios::cur);
    }
  }
  throw std::runtime_error(path.string() + ": no data chunk");
}

void save_channels(const fs::path& dir, const ImpulseResponseSet& set) {
  fs::create_directories(dir);
  for (std::size_t l = 0; l < set.l_count; ++l) {
    WavData w;
    w.sample_rate = set.sample_rate;
    for (std::size_t q = 0; q < set.q_count; ++q) {
      const auto ir = set.ir(q, l);
      w.channels.emplace_back(ir.begin(), ir.end());
    }
    write_wav(dir / channel_name(l), w);
  }
}

ImpulseResponseSet load_channels(const fs::path& dir, std::size_t l_count) {
  ImpulseResponseSet set;
  for (std::size_t l = 0; l < l_count; ++l) {
    const WavData w = read_wav(dir / channel_name(l));
    if (l == 0) {
      set = ImpulseResponseSet(w.channels.size(), l_count, w.channels.front().size(), w.sample_rate);
    } else if (w.channels.size() != set.q_count || w.channels.front().size() != set.length) {
      throw std::runtime_error((dir / channel_name(l)).string() + ": shape differs from ch00.wav");
    }
    for (std::size_t q = 0; q < set.q_count; ++q) {
      std::copy(w.channels[q].begin(), w.channels[q].end(), set.ir(q, l).begin());
    }
  }
  return set;
}

void save_bank(const fs::path& path, const ControlFilterBank& bank) {
  WavData w;
  w.sample_rate = bank.sample_rate;
  for (std::size_t l = 0; l < bank.l_count; ++l) {
    const auto f = bank.filter(l);
    w.channels.emplace_back(f.begin(), f.end());
  }
  write_wav(path, w);
}

ControlFilterBank load_bank(const fs::path& path) {
  const WavData w = read_wav(path);
  ControlFilterBank bank(w.channels.size(), w.channels.front().size(), w.sample_rate);
  for (std::size_t l = 0; l < bank.l_count; ++l) std::copy(w.channels[l].begin(), w.channels[l].end(), bank.filter(l).begin());
  return bank;
}

void write_pgm(const fs::path& path, const Eigen::MatrixXd& values, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("write_pgm: empty value range");
  auto os = open_out(path);
  os << "P5\n" << values.cols() << ' ' << values.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double t = std::clamp((values(r, c) - lo) / (hi - lo), 0.0, 1.0);
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
  }
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

void write_text(const fs::path& path, const std::string& text) {
  auto os = open_out(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace sfr
