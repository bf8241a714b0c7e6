#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sfr/room.hpp"
#include "sfr/signal.hpp"

namespace sfr {

/// Horizontal steering azimuths and the analysis frequencies of the map.
struct SteeringGrid {
  std::vector<double> azimuths_deg;
  std::vector<double> freqs_hz;

  std::size_t b_count() const { return azimuths_deg.size(); }
  std::size_t f_count() const { return freqs_hz.size(); }

  /// B azimuths uniform on [0, 360) and F log-spaced frequencies over [f_lo, f_hi].
  static SteeringGrid uniform(std::size_t b, std::size_t f, double f_lo, double f_hi);
  /// B = 72 (5 degree steps), F = 64 over [300, 4000] Hz.
  static SteeringGrid standard();
  void validate() const;
};

/// Complex DSB weights, laid out [b][f][q].
struct BeamWeights {
  std::size_t q_count = 0;
  std::size_t b_count = 0;
  std::size_t f_count = 0;
  std::vector<double> freqs_hz;
  std::vector<cplx> w;

  cplx at(std::size_t q, std::size_t b, std::size_t f) const {
    return w[(b * f_count + f) * q_count + q];
  }
};

/// Microphone spectra evaluated at arbitrary analysis frequencies, laid out [q][f].
struct GridSpectra {
  std::size_t q_count = 0;
  std::vector<double> freqs_hz;
  std::vector<cplx> bins;

  cplx at(std::size_t q, std::size_t f) const { return bins[q * freqs_hz.size() + f]; }
};

struct SpatialPowerMap {
  std::vector<double> power;  // linear, one per steering azimuth
};

/// dB rows (max 0 dB), rows ordered by source azimuth, columns by steering azimuth.
struct StackedSpm {
  std::vector<double> source_azimuths_deg;
  std::vector<double> steering_azimuths_deg;
  Eigen::MatrixXd db;
};

/// w_qb(f) = exp(+i 2 pi f tau_qb) / Q with tau_qb the plane-wave delay of
/// direction b at microphone q relative to the array centre.
BeamWeights dsb_weights(const ArrayGeometry& geometry, const SteeringGrid& grid,
                        double speed_of_sound = kSpeedOfSound);

/// DTFT of each response at the given frequencies.
GridSpectra grid_spectra(std::span<const Fir> responses, const std::vector<double>& freqs_hz);

/// Gamma_b = sum_f |sum_q g_q(f) w_qb(f)|^2, evaluated as one matrix product per frequency.
SpatialPowerMap spm(const GridSpectra& spectra, const BeamWeights& weights);

SpatialPowerMap spm_of_response(std::span<const Fir> responses, const BeamWeights& weights);
SpatialPowerMap spm_of_response(std::span<const Fir> responses, const ArrayGeometry& geometry,
                                const SteeringGrid& grid);

/// One row per source; throws std::invalid_argument naming the row on zero power.
StackedSpm sspm(const std::vector<std::vector<Fir>>& responses,
                const std::vector<double>& source_azimuths_deg, const ArrayGeometry& geometry,
                const SteeringGrid& grid);

/// Smallest angle between two azimuths, in [0, 180].
double circular_distance_deg(double a, double b);

/// Fraction of rows whose argmax lies within tolerance_deg of the row's source azimuth.
double diag_dominance(const StackedSpm& map, double tolerance_deg);

}  // namespace sfr
