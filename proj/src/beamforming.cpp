#include "sfr/beamforming.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sfr {

SteeringGrid SteeringGrid::uniform(std::size_t b, std::size_t f, double f_lo, double f_hi) {
  SteeringGrid g;
  for (std::size_t i = 0; i < b; ++i) g.azimuths_deg.push_back(360.0 * static_cast<double>(i) / static_cast<double>(b));
  if (f == 1) {
    g.freqs_hz.push_back(f_lo);
  } else {
    const double ratio = std::log(f_hi / f_lo);
    for (std::size_t i = 0; i < f; ++i) {
      g.freqs_hz.push_back(f_lo * std::exp(ratio * static_cast<double>(i) / static_cast<double>(f - 1)));
    }
  }
  g.validate();
  return g;
}

SteeringGrid SteeringGrid::standard() { return uniform(72, 64, 300.0, 4000.0); }

void SteeringGrid::validate() const {
  if (azimuths_deg.size() < 4) throw std::invalid_argument("SteeringGrid: need B >= 4 azimuths");
  if (freqs_hz.empty()) throw std::invalid_argument("SteeringGrid: need F >= 1 frequencies");
  for (std::size_t i = 0; i < azimuths_deg.size(); ++i) {
    if (azimuths_deg[i] < 0.0 || azimuths_deg[i] >= 360.0) {
      throw std::invalid_argument("SteeringGrid: azimuth outside [0, 360)");
    }
    if (i > 0 && !(azimuths_deg[i] > azimuths_deg[i - 1])) {
      throw std::invalid_argument("SteeringGrid: azimuths must be sorted and unique");
    }
  }
  for (double f : freqs_hz) {
    if (f < kBandLowHz || f > kBandHighHz) {
      throw std::invalid_argument("SteeringGrid: frequency outside the working band");
    }
  }
}

BeamWeights dsb_weights(const ArrayGeometry& geometry, const SteeringGrid& grid, double speed_of_sound) {
  grid.validate();
  BeamWeights bw;
  bw.q_count = geometry.q_count();
  bw.b_count = grid.b_count();
  bw.f_count = grid.f_count();
  bw.freqs_hz = grid.freqs_hz;
  bw.w.resize(bw.q_count * bw.b_count * bw.f_count);
  const double inv_q = 1.0 / static_cast<double>(bw.q_count);
  for (std::size_t b = 0; b < bw.b_count; ++b) {
    const Position u = VirtualSource{grid.azimuths_deg[b], 0.0, 1.0}.direction();
    for (std::size_t f = 0; f < bw.f_count; ++f) {
      for (std::size_t q = 0; q < bw.q_count; ++q) {
        // A plane wave from u reaches mic q earlier by (p_q . u) / c.
        const double tau = -(geometry.microphones[q] - geometry.array_center).dot(u) / speed_of_sound;
        bw.w[(b * bw.f_count + f) * bw.q_count + q] = std::polar(inv_q, 2.0 * kPi * grid.freqs_hz[f] * tau);
      }
    }
  }
  return bw;
}

GridSpectra grid_spectra(std::span<const Fir> responses, const std::vector<double>& freqs_hz) {
  GridSpectra gs;
  gs.q_count = responses.size();
  gs.freqs_hz = freqs_hz;
  gs.bins.assign(gs.q_count * freqs_hz.size(), cplx(0.0, 0.0));
  for (std::size_t q = 0; q < responses.size(); ++q) {
    const Fir& x = responses[q];
    for (std::size_t f = 0; f < freqs_hz.size(); ++f) {
      const double w = -2.0 * kPi * freqs_hz[f] / x.sample_rate;
      cplx acc(0.0, 0.0);
      for (std::size_t n = 0; n < x.size(); ++n) {
        if (x.samples[n] == 0.0) continue;
        acc += x.samples[n] * std::polar(1.0, w * static_cast<double>(n));
      }
      gs.bins[q * freqs_hz.size() + f] = acc;
    }
  }
  return gs;
}

SpatialPowerMap spm(const GridSpectra& spectra, const BeamWeights& weights) {
  if (spectra.q_count != weights.q_count) throw std::invalid_argument("spm: microphone count mismatch");
  if (spectra.freqs_hz.size() != weights.f_count) throw std::invalid_argument("spm: frequency bin mismatch");
  for (std::size_t f = 0; f < weights.f_count; ++f) {
    if (std::abs(spectra.freqs_hz[f] - weights.freqs_hz[f]) > 1e-9 * weights.freqs_hz[f]) {
      throw std::invalid_argument("spm: frequency bin mismatch");
    }
  }
  const auto Q = static_cast<Eigen::Index>(weights.q_count);
  const auto B = static_cast<Eigen::Index>(weights.b_count);
  const std::size_t F = weights.f_count;
  Eigen::VectorXd power = Eigen::VectorXd::Zero(B);
  Eigen::MatrixXcd omega(B, Q);
  Eigen::VectorXcd g(Q);
  for (std::size_t f = 0; f < F; ++f) {
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index q = 0; q < Q; ++q) {
        omega(b, q) = weights.at(static_cast<std::size_t>(q), static_cast<std::size_t>(b), f);
      }
    }
    for (Eigen::Index q = 0; q < Q; ++q) g(q) = spectra.at(static_cast<std::size_t>(q), f);
    power += (omega * g).cwiseAbs2();
  }
  return SpatialPowerMap{std::vector<double>(power.data(), power.data() + B)};
}

SpatialPowerMap spm_of_response(std::span<const Fir> responses, const BeamWeights& weights) {
  if (responses.empty()) throw std::invalid_argument("spm_of_response: no responses");
  const std::size_t len = responses.front().size();
  for (const auto& r : responses) {
    if (r.size() != len) throw std::invalid_argument("spm_of_response: responses differ in length");
  }
  return spm(grid_spectra(responses, weights.freqs_hz), weights);
}

SpatialPowerMap spm_of_response(std::span<const Fir> responses, const ArrayGeometry& geometry,
                                const SteeringGrid& grid) {
  return spm_of_response(responses, dsb_weights(geometry, grid));
}

StackedSpm sspm(const std::vector<std::vector<Fir>>& responses,
                const std::vector<double>& source_azimuths_deg, const ArrayGeometry& geometry,
                const SteeringGrid& grid) {
  if (responses.size() != source_azimuths_deg.size()) {
    throw std::invalid_argument("sspm: one response set per source azimuth required");
  }
  const BeamWeights weights = dsb_weights(geometry, grid);
  StackedSpm out;
  out.source_azimuths_deg = source_azimuths_deg;
  out.steering_azimuths_deg = grid.azimuths_deg;
  out.db.resize(static_cast<Eigen::Index>(responses.size()), static_cast<Eigen::Index>(grid.b_count()));
  for (std::size_t s = 0; s < responses.size(); ++s) {
    const SpatialPowerMap m = spm_of_response(responses[s], weights);
    const double peak = *std::max_element(m.power.begin(), m.power.end());
    if (!(peak > 0.0)) {
      throw std::invalid_argument("sspm: zero-power row " + std::to_string(s) + " (source azimuth " +
                                  std::to_string(source_azimuths_deg[s]) + " deg)");
    }
    for (std::size_t b = 0; b < m.power.size(); ++b) {
      const double rel = std::max(m.power[b] / peak, 1e-30);
      out.db(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b)) = 10.0 * std::log10(rel);
    }
  }
  return out;
}

double circular_distance_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

double diag_dominance(const StackedSpm& map, double tolerance_deg) {
  const auto rows = map.db.rows();
  if (rows == 0) return 0.0;
  std::size_t hits = 0;
  for (Eigen::Index s = 0; s < rows; ++s) {
    Eigen::Index best = 0;
    map.db.row(s).maxCoeff(&best);
    const double steer = map.steering_azimuths_deg[static_cast<std::size_t>(best)];
    if (circular_distance_deg(steer, map.source_azimuths_deg[static_cast<std::size_t>(s)]) <= tolerance_deg + 1e-9) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(rows);
}

}  // namespace sfr
