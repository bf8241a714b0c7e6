#include "sfr/room.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace sfr {

bool Room::contains(const Position& p) const {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > 0.0 && p[i] < dimensions[i])) return false;
  }
  return true;
}

void Room::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!(dimensions[i] > 0.0)) throw std::invalid_argument("Room: dimensions must be positive");
  }
  for (double a : absorption) {
    if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("Room: absorption must lie in (0, 1]");
  }
  if (!(speed_of_sound > 0.0)) throw std::invalid_argument("Room: speed of sound must be positive");
}

double ArrayGeometry::array_radius() const {
  double r = 0.0;
  for (const auto& m : microphones) r = std::max(r, (m - array_center).norm());
  return r;
}

ArrayGeometry ArrayGeometry::translated_array(const Position& shift) const {
  ArrayGeometry g = *this;
  for (auto& m : g.microphones) m += shift;
  g.array_center += shift;
  return g;
}

void ArrayGeometry::validate(const Room& room) const {
  if (microphones.size() < 2) throw std::invalid_argument("ArrayGeometry: need Q >= 2 microphones");
  if (loudspeakers.size() < 2) throw std::invalid_argument("ArrayGeometry: need L >= 2 loudspeakers");
  for (const auto& p : microphones) {
    if (!room.contains(p)) throw std::invalid_argument("ArrayGeometry: microphone outside room");
  }
  for (const auto& p : loudspeakers) {
    if (!room.contains(p)) throw std::invalid_argument("ArrayGeometry: loudspeaker outside room");
  }
}

PositionSet PositionSet::standard() {
  return PositionSet{{{"LL", -0.075}, {"L", -0.04}, {"O", 0.0}, {"R", 0.04}, {"RR", 0.075}}};
}

double PositionSet::offset(const std::string& label) const {
  for (const auto& [name, off] : offsets) {
    if (name == label) return off;
  }
  throw std::invalid_argument("PositionSet: unknown position '" + label + "'");
}

bool PositionSet::has(const std::string& label) const {
  return std::any_of(offsets.begin(), offsets.end(), [&](const auto& p) { return p.first == label; });
}

Position VirtualSource::direction() const {
  const double az = azimuth_deg * kPi / 180.0;
  const double el = elevation_deg * kPi / 180.0;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

void VirtualSource::validate() const {
  if (!(azimuth_deg >= 0.0 && azimuth_deg < 360.0)) {
    throw std::invalid_argument("VirtualSource: azimuth must lie in [0, 360)");
  }
  if (!(distance_m > 0.0)) throw std::invalid_argument("VirtualSource: distance must be positive");
}

ImpulseResponseSet::ImpulseResponseSet(std::size_t q, std::size_t l, std::size_t len, double fs)
    : q_count(q), l_count(l), length(len), sample_rate(fs), data(q * l * len, 0.0) {}

std::span<const double> ImpulseResponseSet::ir(std::size_t q, std::size_t l) const {
  return {data.data() + (q * l_count + l) * length, length};
}

std::span<double> ImpulseResponseSet::ir(std::size_t q, std::size_t l) {
  return {data.data() + (q * l_count + l) * length, length};
}

Fir ImpulseResponseSet::fir(std::size_t q, std::size_t l) const {
  auto s = ir(q, l);
  return Fir{std::vector<double>(s.begin(), s.end()), sample_rate};
}

void add_fractional_impulse(std::span<double> buf, double delay, double amp) {
  constexpr int kHalf = 16;
  const auto base = static_cast<long>(std::floor(delay));
  for (long n = base - kHalf + 1; n <= base + kHalf; ++n) {
    if (n < 0 || n >= static_cast<long>(buf.size())) continue;
    const double t = static_cast<double>(n) - delay;
    if (std::abs(t) >= kHalf) continue;
    const double sinc = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
    const double win = 0.5 * (1.0 + std::cos(kPi * t / kHalf));
    buf[static_cast<std::size_t>(n)] += amp * sinc * win;
  }
}

Fir image_source_ir(const Room& room, const Position& src, const Position& mic, int max_order,
                    std::size_t ir_len, double sample_rate) {
  room.validate();
  if (max_order < 0) throw std::invalid_argument("image_source_ir: max_order must be >= 0");
  if (ir_len == 0) throw std::invalid_argument("image_source_ir: ir_len must be >= 1");
  if (!room.contains(src)) throw std::invalid_argument("image_source_ir: source outside room");
  if (!room.contains(mic)) throw std::invalid_argument("image_source_ir: microphone outside room");
  if ((src - mic).norm() == 0.0) throw std::invalid_argument("image_source_ir: source equals microphone");

  std::array<double, 6> refl{};
  for (int i = 0; i < 6; ++i) refl[i] = std::sqrt(1.0 - room.absorption[i]);

  const double c = room.speed_of_sound;
  // Arrivals later than this cannot contribute any tap.
  const double max_dist = (static_cast<double>(ir_len) + 16.0) * c / sample_rate;
  std::array<int, 3> n_max{};
  for (int a = 0; a < 3; ++a) {
    const int geo = static_cast<int>(std::ceil(max_dist / (2.0 * room.dimensions[a]))) + 1;
    n_max[a] = std::min(geo, max_order);
  }

  std::vector<double> out(ir_len, 0.0);
  for (int nx = -n_max[0]; nx <= n_max[0]; ++nx)
  for (int ny = -n_max[1]; ny <= n_max[1]; ++ny)
  for (int nz = -n_max[2]; nz <= n_max[2]; ++nz)
  for (int u = 0; u <= 1; ++u)
  for (int v = 0; v <= 1; ++v)
  for (int w = 0; w <= 1; ++w) {
    const std::array<int, 3> n{nx, ny, nz};
    const std::array<int, 3> par{u, v, w};
    int order = 0;
    double amp = 1.0;
    Position img;
    for (int a = 0; a < 3; ++a) {
      const int hits_low = std::abs(n[a] - par[a]);
      const int hits_high = std::abs(n[a]);
      order += hits_low + hits_high;
      amp *= std::pow(refl[2 * a], hits_low) * std::pow(refl[2 * a + 1], hits_high);
      img[a] = (1 - 2 * par[a]) * src[a] + 2.0 * n[a] * room.dimensions[a];
    }
    if (order > max_order || amp == 0.0) continue;
    const double dist = (img - mic).norm();
    if (dist > max_dist) continue;
    add_fractional_impulse(out, dist / c * sample_rate, amp / (4.0 * kPi * dist));
  }
  return Fir{std::move(out), sample_rate};
}

ImpulseResponseSet simulate_channels(const Room& room, const ArrayGeometry& geometry,
                                     double position_offset, const SimulationOptions& opts) {
  const ArrayGeometry g = geometry.translated_array(kLateralAxis * position_offset);
  g.validate(room);
  ImpulseResponseSet set(g.q_count(), g.l_count(), opts.ir_len, opts.sample_rate);
  for (std::size_t q = 0; q < g.q_count(); ++q) {
    for (std::size_t l = 0; l < g.l_count(); ++l) {
      Fir raw = image_source_ir(room, g.loudspeakers[l], g.microphones[q], opts.max_order,
                                opts.ir_len, opts.sample_rate);
      Fir bp = bandpass(raw, opts.band_lo, opts.band_hi);
      std::copy(bp.samples.begin(), bp.samples.end(), set.ir(q, l).begin());
    }
  }
  return set;
}

std::vector<Position> sphere_mic_positions(const Position& center, double radius, std::size_t q) {
  if (q < 2) throw std::invalid_argument("sphere_mic_positions: q must be >= 2");
  if (!(radius > 0.0)) throw std::invalid_argument("sphere_mic_positions: radius must be positive");
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Position> unit;
  unit.reserve(q);
  if (q % 2 == 0) {
    const std::size_t half = q / 2;
    for (std::size_t i = 0; i < half; ++i) {
      const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(q);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(i);
      unit.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    }
    for (std::size_t i = 0; i < half; ++i) unit.push_back(-unit[i]);
  } else {
    const double denom = static_cast<double>(q);
    for (std::size_t i = 0; i < q; ++i) {
      const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / denom;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(i);
      unit.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    }
  }
  std::vector<Position> out;
  out.reserve(q);
  for (const auto& u : unit) out.push_back(center + radius * u.normalized());
  return out;
}

std::vector<double> target_delays(const VirtualSource& source, const ArrayGeometry& geometry,
                                  double gross_delay, double sample_rate, double speed_of_sound) {
  source.validate();
  if (!(source.distance_m > geometry.array_radius())) {
    throw std::invalid_argument("free_field_target: source lies inside the array");
  }
  const Position s = geometry.array_center + source.distance_m * source.direction();
  std::vector<double> d;
  d.reserve(geometry.q_count());
  for (const auto& m : geometry.microphones) {
    d.push_back(gross_delay + ((s - m).norm() - source.distance_m) / speed_of_sound * sample_rate);
  }
  return d;
}

TargetResponse free_field_target(const VirtualSource& source, const ArrayGeometry& geometry,
                                 double gross_delay, const TargetOptions& opts) {
  const auto delays = target_delays(source, geometry, gross_delay, opts.sample_rate, opts.speed_of_sound);
  const Position s = geometry.array_center + source.distance_m * source.direction();
  TargetResponse t;
  t.gross_delay = gross_delay;
  for (std::size_t q = 0; q < geometry.q_count(); ++q) {
    if (delays[q] < 0.0 || delays[q] >= static_cast<double>(opts.length)) {
      throw std::invalid_argument("free_field_target: arrival falls outside target length");
    }
    std::vector<double> buf(opts.length, 0.0);
    const double amp = source.distance_m / (s - geometry.microphones[q]).norm();
    add_fractional_impulse(buf, delays[q], amp);
    Fir f{std::move(buf), opts.sample_rate};
    if (opts.apply_bandpass) f = bandpass(f, opts.band_lo, opts.band_hi);
    t.mics.push_back(std::move(f));
  }
  return t;
}

Room default_cabin(std::uint64_t seed) {
  Room room;
  room.dimensions = Position(2.8, 1.6, 1.2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> absorb(0.3, 0.6);
  for (double& a : room.absorption) a = absorb(rng);
  return room;
}

ArrayGeometry default_geometry() {
  ArrayGeometry g;
  g.array_center = Position(1.7, 1.15, 0.85);
  g.microphones = sphere_mic_positions(g.array_center, 0.03, 16);
  // Eleven channels on the cabin walls: doors, dash, roof, pillars and rear shelf.
  g.loudspeakers = {
      {2.10, 1.58, 0.45},  // front-left door
      {2.10, 0.02, 0.45},  // front-right door
      {2.70, 0.80, 0.75},  // centre dash
      {1.50, 1.45, 1.18},  // surround left (roof)
      {1.50, 0.15, 1.18},  // surround right (roof)
      {0.90, 1.58, 0.45},  // rear-left door
      {0.90, 0.02, 0.45},  // rear-right door
      {0.10, 1.40, 0.95},  // rear-left pillar
      {0.10, 0.20, 0.95},  // rear-right pillar
      {0.02, 0.80, 0.50},  // rear shelf
      {2.20, 0.80, 1.18},  // overhead front
  };
  return g;
}

double azimuth_of(const Position& p, const Position& center) {
  double az = std::atan2(p.y() - center.y(), p.x() - center.x()) * 180.0 / kPi;
  if (az < 0.0) az += 360.0;
  if (az >= 360.0) az -= 360.0;
  return az;
}

}  // namespace sfr
