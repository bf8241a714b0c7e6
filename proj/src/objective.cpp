#include "sfr/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sfr {

namespace {

constexpr double kDbPerNeper = 20.0 / 2.302585092994045684;  // 20 / ln(10)

std::size_t argmax_abs(std::span<const double> x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (std::abs(x[i]) > std::abs(x[best])) best = i;
  }
  return best;
}

// Frequency image of Re(sum_k z_k e^{+i 2 pi k n / N}) on the half spectrum.
void add_real_part_image(const std::vector<cplx>& z, std::size_t n, std::vector<cplx>& acc) {
  const double half = static_cast<double>(n) / 2.0;
  const std::size_t nyq = n / 2;
  acc[0] += cplx(static_cast<double>(n) * z[0].real(), 0.0);
  for (std::size_t k = 1; k < nyq; ++k) acc[k] += half * z[k];
  acc[nyq] += cplx(static_cast<double>(n) * z[nyq].real(), 0.0);
}

}  // namespace

TemporalWindows make_windows(const std::vector<std::size_t>& peaks, const std::vector<double>& peak_amplitudes,
                             std::size_t length, const WindowParams& params, double sample_rate) {
  if (peaks.size() != peak_amplitudes.size()) throw std::invalid_argument("make_windows: size mismatch");
  if (params.desired_len < 2) throw std::invalid_argument("make_windows: desired window too short");
  TemporalWindows w;
  w.q_count = peaks.size();
  w.length = length;
  w.desired.assign(w.q_count * length, 0.0);
  w.unwanted.assign(w.q_count * length, 0.0);
  w.w_u.assign(w.q_count * length, 0.0);
  const double floor_db = params.envelope_floor_db;
  const double ms_per_sample = 1000.0 / sample_rate;
  for (std::size_t q = 0; q < w.q_count; ++q) {
    const std::size_t peak = peaks[q];
    const double amp = peak_amplitudes[q];
    if (peak >= length) throw std::invalid_argument("make_windows: peak outside response");
    if (!(amp > 0.0)) throw std::invalid_argument("make_windows: peak amplitude must be positive");
    const long start = static_cast<long>(peak) - static_cast<long>(params.desired_len / 2);
    for (std::size_t n = 0; n < length; ++n) {
      const long rel = static_cast<long>(n) - start;
      double wd = 0.0;
      if (rel > 0 && rel < static_cast<long>(params.desired_len)) {
        wd = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(rel) / static_cast<double>(params.desired_len));
      }
      const double dt_ms = (static_cast<double>(n) - static_cast<double>(peak)) * ms_per_sample;
      const double slope = dt_ms < 0.0 ? params.pre_decay_db_per_ms : params.post_decay_db_per_ms;
      const double env_db = std::max(floor_db, params.envelope_start_db - slope * std::abs(dt_ms));
      const double wu = 1.0 / (amp * std::pow(10.0, env_db / 20.0));
      w.desired[q * length + n] = wd;
      w.w_u[q * length + n] = wu;
      w.unwanted[q * length + n] = wd > 0.0 ? 0.0 : wu;
    }
    w.peak.push_back(peak);
    w.n_pre.push_back(peak >= params.guard ? peak - params.guard : 0);
    w.n_post.push_back(std::min(peak + params.guard, length - 1));
  }
  return w;
}

TemporalWindows make_windows(const TargetResponse& target, const WindowParams& params) {
  std::vector<std::size_t> peaks;
  std::vector<double> amps;
  for (const auto& m : target.mics) {
    const std::size_t p = argmax_abs(m.samples);
    peaks.push_back(p);
    // A silent target keeps a unit-referenced envelope.
    amps.push_back(m.samples[p] != 0.0 ? std::abs(m.samples[p]) : 1.0);
  }
  const double fs = target.mics.empty() ? kSampleRate : target.mics.front().sample_rate;
  return make_windows(peaks, amps, target.length(), params, fs);
}

Mode parse_mode(const std::string& s) {
  if (s == "cvx") return Mode::cvx;
  if (s == "nn") return Mode::nn;
  if (s == "spmnet") return Mode::spmnet;
  throw std::invalid_argument("unknown objective mode '" + s + "'");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::cvx: return "cvx";
    case Mode::nn: return "nn";
    case Mode::spmnet: return "spmnet";
  }
  return "?";
}

void LossConfig::validate() const {
  bool any = false;
  for (double l : lambda) {
    if (l < 0.0) throw std::invalid_argument("LossConfig: lambda must be non-negative");
    any = any || l > 0.0;
  }
  if (!any) throw std::invalid_argument("LossConfig: at least one lambda must be positive");
  if (p < 2.0) throw std::invalid_argument("LossConfig: p must be >= 2");
  if (!(band_lo > 0.0 && band_lo < band_hi)) throw std::invalid_argument("LossConfig: invalid band");
  grid.validate();
}

double weighted_total(const std::array<double, 5>& lambda, const std::array<double, 5>& terms) {
  double t = 0.0;
  for (std::size_t k = 0; k < 5; ++k) t += lambda[k] / 2.0 * terms[k];
  return t;
}

Problem::Problem(const ImpulseResponseSet& channels, const TargetResponse& target, const ArrayGeometry& geometry,
                 const LossConfig& config, std::size_t filter_len)
    : q_(channels.q_count),
      l_(channels.l_count),
      lh_(filter_len),
      lc_(channels.length),
      lg_(channels.length + filter_len - 1),
      fs_(channels.sample_rate),
      config_(config),
      fft_(next_pow2(std::max<std::size_t>(channels.length + filter_len - 1, 4))) {
  config_.validate();
  if (filter_len == 0) throw std::invalid_argument("Problem: filter_len must be >= 1");
  if (target.q_count() != q_) throw std::invalid_argument("Problem: target microphone count mismatch");
  if (target.length() != lg_) {
    throw std::invalid_argument("Problem: target length must equal L_c + L_h - 1");
  }
  if (geometry.q_count() != q_) throw std::invalid_argument("Problem: geometry microphone count mismatch");

  const std::size_t n = fft_.size();
  c_spec_.resize(q_ * l_);
  for (std::size_t q = 0; q < q_; ++q) {
    for (std::size_t l = 0; l < l_; ++l) fft_.forward(channels.ir(q, l), c_spec_[q * l_ + l]);
  }
  d_.resize(q_ * lg_);
  for (std::size_t q = 0; q < q_; ++q) std::copy(target.mics[q].samples.begin(), target.mics[q].samples.end(), d_.begin() + static_cast<std::ptrdiff_t>(q * lg_));
  windows_ = make_windows(target, config_.windows);

  const BandMask pass = band_mask(n, fs_, config_.band_lo, config_.band_hi, config_.band_transition_hz);
  pass_ = pass.weights;
  stop_ = sfr::stop_mask(pass).weights;
  vs_.resize(pass_.size());
  for (std::size_t k = 0; k < pass_.size(); ++k) {
    vs_[k] = config_.flat_weight * pass_[k];
    const double f = static_cast<double>(k) * pass.bin_hz;
    if (f >= config_.band_lo && f <= config_.band_hi) band_bins_.push_back(k);
  }

  // SPM operators on the analysis grid.
  ArrayGeometry rel = geometry;
  weights_ = dsb_weights(rel, config_.grid);
  const std::size_t nf = config_.grid.f_count();
  e_grid_.resize(nf * lh_);
  for (std::size_t f = 0; f < nf; ++f) {
    const double w = -2.0 * kPi * config_.grid.freqs_hz[f] / fs_;
    for (std::size_t t = 0; t < lh_; ++t) e_grid_[f * lh_ + t] = std::polar(1.0, w * static_cast<double>(t));
  }
  c_grid_.resize(q_ * l_ * nf);
  std::vector<Fir> irs;
  irs.reserve(q_ * l_);
  for (std::size_t q = 0; q < q_; ++q) {
    for (std::size_t l = 0; l < l_; ++l) irs.push_back(channels.fir(q, l));
  }
  const GridSpectra cg = grid_spectra(irs, config_.grid.freqs_hz);
  std::copy(cg.bins.begin(), cg.bins.end(), c_grid_.begin());
  target_map_ = spm(grid_spectra(target.mics, config_.grid.freqs_hz), weights_);
  const double tsum = std::accumulate(target_map_.power.begin(), target_map_.power.end(), 0.0);
  // Unit mean power per steering direction.
  target_map_norm_ = target_map_.power;
  if (tsum > 0.0) {
    const double scale = static_cast<double>(target_map_norm_.size()) / tsum;
    for (double& v : target_map_norm_) v *= scale;
  }
}

ForwardState Problem::forward(std::span<const double> h) {
  if (h.size() != l_ * lh_) throw std::invalid_argument("Problem::forward: filter bank size mismatch");
  ForwardState s;
  const std::size_t nh = fft_.half_size();
  s.h_spec.resize(l_);
  for (std::size_t l = 0; l < l_; ++l) fft_.forward(h.subspan(l * lh_, lh_), s.h_spec[l]);
  s.g_spec.assign(q_, std::vector<cplx>(nh, cplx(0.0, 0.0)));
  s.g.resize(q_ * lg_);
  std::vector<double> buf;
  for (std::size_t q = 0; q < q_; ++q) {
    auto& G = s.g_spec[q];
    for (std::size_t l = 0; l < l_; ++l) {
      const auto& C = c_spec_[q * l_ + l];
      const auto& H = s.h_spec[l];
      for (std::size_t k = 0; k < nh; ++k) G[k] += C[k] * H[k];
    }
    fft_.inverse(G, buf);
    std::copy_n(buf.begin(), lg_, s.g.begin() + static_cast<std::ptrdiff_t>(q * lg_));
  }
  if (config_.lambda[4] > 0.0) {
    const std::size_t nf = config_.grid.f_count();
    s.h_grid.assign(l_ * nf, cplx(0.0, 0.0));
    for (std::size_t l = 0; l < l_; ++l) {
      const double* hl = h.data() + l * lh_;
      for (std::size_t f = 0; f < nf; ++f) {
        const cplx* e = e_grid_.data() + f * lh_;
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < lh_; ++t) {
          re += hl[t] * e[t].real();
          im += hl[t] * e[t].imag();
        }
        s.h_grid[l * nf + f] = cplx(re, im);
      }
    }
    s.g_grid.assign(q_ * nf, cplx(0.0, 0.0));
    for (std::size_t q = 0; q < q_; ++q) {
      for (std::size_t l = 0; l < l_; ++l) {
        const cplx* c = c_grid_.data() + (q * l_ + l) * nf;
        for (std::size_t f = 0; f < nf; ++f) s.g_grid[q * nf + f] += c[f] * s.h_grid[l * nf + f];
      }
    }
  }
  return s;
}

std::vector<double> Problem::adjoint(const AdjointSeed& seed) {
  const std::size_t n = fft_.size();
  const std::size_t nh = fft_.half_size();
  std::vector<double> dh(l_ * lh_, 0.0);
  std::vector<std::vector<cplx>> acc(l_, std::vector<cplx>(nh, cplx(0.0, 0.0)));
  bool any_freq = false;

  if (!seed.g.empty() || !seed.g_spec.empty()) {
    std::vector<cplx> dg_spec;
    for (std::size_t q = 0; q < q_; ++q) {
      if (!seed.g.empty()) {
        fft_.forward(std::span<const double>(seed.g).subspan(q * lg_, lg_), dg_spec);
      } else {
        dg_spec.assign(nh, cplx(0.0, 0.0));
      }
      if (!seed.g_spec.empty()) add_real_part_image(seed.g_spec[q], n, dg_spec);
      for (std::size_t l = 0; l < l_; ++l) {
        const auto& C = c_spec_[q * l_ + l];
        auto& A = acc[l];
        for (std::size_t k = 0; k < nh; ++k) A[k] += std::conj(C[k]) * dg_spec[k];
      }
    }
    any_freq = true;
  }
  if (!seed.h_spec.empty()) {
    for (std::size_t l = 0; l < l_; ++l) add_real_part_image(seed.h_spec[l], n, acc[l]);
    any_freq = true;
  }
  if (any_freq) {
    std::vector<double> buf;
    for (std::size_t l = 0; l < l_; ++l) {
      fft_.inverse(acc[l], buf);
      std::copy_n(buf.begin(), lh_, dh.begin() + static_cast<std::ptrdiff_t>(l * lh_));
    }
  }
  if (!seed.h_grid.empty()) {
    const std::size_t nf = config_.grid.f_count();
    for (std::size_t l = 0; l < l_; ++l) {
      double* out = dh.data() + l * lh_;
      for (std::size_t f = 0; f < nf; ++f) {
        const cplx z = seed.h_grid[l * nf + f];
        if (z == cplx(0.0, 0.0)) continue;
        const cplx* e = e_grid_.data() + f * lh_;
        // Re(conj(z) * e)
        for (std::size_t t = 0; t < lh_; ++t) out[t] += z.real() * e[t].real() + z.imag() * e[t].imag();
      }
    }
  }
  return dh;
}

double Problem::term_match(const ForwardState& s, std::vector<double>* dg) const {
  double v = 0.0;
  if (dg) dg->assign(q_ * lg_, 0.0);
  for (std::size_t i = 0; i < q_ * lg_; ++i) {
    const double w = windows_.desired[i];
    if (w == 0.0) continue;
    const double r = w * (s.g[i] - d_[i]);
    v += r * r;
    if (dg) (*dg)[i] = 2.0 * w * r;
  }
  return v;
}

double Problem::term_ringing(const ForwardState& s, bool inf_norm, std::vector<double>* dg) const {
  std::vector<double> v(q_ * lg_);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = windows_.unwanted[i] * s.g[i];
  if (inf_norm) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  if (!dg) return large_p_norm(v, config_.p);
  dg->assign(v.size(), 0.0);
  const double val = large_p_norm_grad(v, config_.p, *dg);
  for (std::size_t i = 0; i < v.size(); ++i) (*dg)[i] *= windows_.unwanted[i];
  return val;
}

double Problem::term_flatness_std(const ForwardState& s, std::vector<std::vector<cplx>>* dG) const {
  const std::size_t nh = fft_.half_size();
  const std::size_t kb = band_bins_.size();
  if (kb == 0) return 0.0;
  const double floor = config_.magnitude_floor;
  if (dG) dG->assign(q_, std::vector<cplx>(nh, cplx(0.0, 0.0)));

  std::vector<double> y(q_ * kb);
  std::vector<char> clamped(q_ * kb, 0);
  for (std::size_t q = 0; q < q_; ++q) {
    for (std::size_t i = 0; i < kb; ++i) {
      double m = std::abs(s.g_spec[q][band_bins_[i]]);
      if (m < floor) {
        m = floor;
        clamped[q * kb + i] = 1;
      }
      y[q * kb + i] = 20.0 * std::log10(m);
    }
  }

  auto seg_std = [&](std::size_t begin, std::size_t count, double scale) {
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += y[begin + i];
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < count; ++i) var += (y[begin + i] - mean) * (y[begin + i] - mean);
    var /= static_cast<double>(count);
    const double sd = std::sqrt(var);
    if (dG && sd > 0.0) {
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t idx = begin + i;
        if (clamped[idx]) continue;
        const std::size_t q = idx / kb;
        const std::size_t k = band_bins_[idx % kb];
        const cplx G = s.g_spec[q][k];
        const double dy = scale * (y[idx] - mean) / (static_cast<double>(count) * sd);
        (*dG)[q][k] += dy * kDbPerNeper * G / std::norm(G);
      }
    }
    return sd;
  };

  if (config_.std_pooled) return seg_std(0, q_ * kb, 1.0);
  double total = 0.0;
  const double inv_q = 1.0 / static_cast<double>(q_);
  for (std::size_t q = 0; q < q_; ++q) total += seg_std(q * kb, kb, inv_q);
  return total * inv_q;
}

double Problem::term_flatness_inf(const ForwardState& s, bool inf_norm, std::vector<std::vector<cplx>>* dG) const {
  const std::size_t nh = fft_.half_size();
  std::vector<double> v(q_ * nh);
  for (std::size_t q = 0; q < q_; ++q) {
    for (std::size_t k = 0; k < nh; ++k) v[q * nh + k] = vs_[k] * std::abs(s.g_spec[q][k]);
  }
  if (inf_norm) return *std::max_element(v.begin(), v.end());
  if (!dG) return large_p_norm(v, config_.p);
  std::vector<double> dv(v.size());
  const double val = large_p_norm_grad(v, config_.p, dv);
  dG->assign(q_, std::vector<cplx>(nh, cplx(0.0, 0.0)));
  for (std::size_t q = 0; q < q_; ++q) {
    for (std::size_t k = 0; k < nh; ++k) {
      const cplx G = s.g_spec[q][k];
      const double mag = std::abs(G);
      if (mag == 0.0 || vs_[k] == 0.0) continue;
      (*dG)[q][k] = dv[q * nh + k] * vs_[k] * G / mag;
    }
  }
  return val;
}

double Problem::term_filter_band(const ForwardState& s, bool inf_norm, std::vector<std::vector<cplx>>* dH) const {
  const std::size_t nh = fft_.half_size();
  if (dH) dH->assign(l_, std::vector<cplx>(nh, cplx(0.0, 0.0)));
  double total = 0.0;
  std::vector<double> v(nh), dv(nh);
  for (std::size_t l = 0; l < l_; ++l) {
    for (std::size_t k = 0; k < nh; ++k) v[k] = stop_[k] * std::abs(s.h_spec[l][k]);
    if (inf_norm) {
      total += *std::max_element(v.begin(), v.end());
      continue;
    }
    if (!dH) {
      total += large_p_norm(v, config_.p);
      continue;
    }
    total += large_p_norm_grad(v, config_.p, dv);
    for (std::size_t k = 0; k < nh; ++k) {
      const cplx H = s.h_spec[l][k];
      const double mag = std::abs(H);
      if (mag == 0.0 || stop_[k] == 0.0) continue;
      (*dH)[l][k] = dv[k] * stop_[k] * H / mag;
    }
  }
  return total;
}

SpatialPowerMap Problem::reproduced_map(const ForwardState& s) const {
  if (s.g_grid.empty()) {
    GridSpectra gs;
    gs.q_count = q_;
    gs.freqs_hz = config_.grid.freqs_hz;
    std::vector<Fir> mics;
    for (std::size_t q = 0; q < q_; ++q) {
      mics.push_back(Fir{std::vector<double>(s.g.begin() + static_cast<std::ptrdiff_t>(q * lg_),
                                             s.g.begin() + static_cast<std::ptrdiff_t>((q + 1) * lg_)),
                         fs_});
    }
    return spm(grid_spectra(mics, config_.grid.freqs_hz), weights_);
  }
  GridSpectra gs;
  gs.q_count = q_;
  gs.freqs_hz = config_.grid.freqs_hz;
  gs.bins = s.g_grid;
  return spm(gs, weights_);
}

double Problem::term_spm(const ForwardState& s, std::vector<cplx>* dHgrid) const {
  if (s.g_grid.empty()) throw std::logic_error("term_spm: forward state lacks grid spectra (lambda5 == 0)");
  const std::size_t nf = config_.grid.f_count();
  const std::size_t nb = config_.grid.b_count();
  std::vector<cplx> y(nb * nf);
  std::vector<double> gamma(nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t f = 0; f < nf; ++f) {
      cplx acc(0.0, 0.0);
      for (std::size_t q = 0; q < q_; ++q) acc += s.g_grid[q * nf + f] * weights_.at(q, b, f);
      y[b * nf + f] = acc;
      gamma[b] += std::norm(acc);
    }
  }
  const double total = std::accumulate(gamma.begin(), gamma.end(), 0.0);
  std::vector<double> dgamma(nb, 0.0);
  double value = 0.0;
  if (config_.spm_normalize) {
    if (total == 0.0) {
      for (double t : target_map_norm_) value += t * t;
      if (dHgrid) dHgrid->assign(l_ * nf, cplx(0.0, 0.0));
      return value;
    }
    const double bn = static_cast<double>(nb);
    std::vector<double> a(nb);
    double dot = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      const double gn = bn * gamma[b] / total;
      const double r = gn - target_map_norm_[b];
      value += r * r;
      a[b] = 2.0 * r;
      dot += a[b] * gn;
    }
    for (std::size_t b = 0; b < nb; ++b) dgamma[b] = (bn * a[b] - dot) / total;
  } else {
    for (std::size_t b = 0; b < nb; ++b) {
      const double r = gamma[b] - target_map_.power[b];
      value += r * r;
      dgamma[b] = 2.0 * r;
    }
  }
  if (!dHgrid) return value;

  std::vector<cplx> dg(q_ * nf, cplx(0.0, 0.0));
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t f = 0; f < nf; ++f) {
      const cplx dy = 2.0 * dgamma[b] * y[b * nf + f];
      for (std::size_t q = 0; q < q_; ++q) dg[q * nf + f] += std::conj(weights_.at(q, b, f)) * dy;
    }
  }
  dHgrid->assign(l_ * nf, cplx(0.0, 0.0));
  for (std::size_t q = 0; q < q_; ++q) {
    for (std::size_t l = 0; l < l_; ++l) {
      const cplx* c = c_grid_.data() + (q * l_ + l) * nf;
      for (std::size_t f = 0; f < nf; ++f) (*dHgrid)[l * nf + f] += std::conj(c[f]) * dg[q * nf + f];
    }
  }
  return value;
}

LossBreakdown Problem::loss(std::span<const double> h, Mode mode, std::vector<double>* grad) {
  if (grad && mode == Mode::cvx) {
    throw std::invalid_argument("loss_grad: cvx mode is non-smooth; use the proximal solver");
  }
  const ForwardState s = forward(h);
  const auto& lam = config_.lambda;
  const bool inf = mode == Mode::cvx;
  LossBreakdown out;
  AdjointSeed seed;
  std::vector<double> dg1, dg2;
  std::vector<std::vector<cplx>> dG3, dH4;
  std::vector<cplx> dH5;
  const bool want = grad != nullptr;

  if (lam[0] > 0.0 || !want) out.terms[0] = term_match(s, want && lam[0] > 0.0 ? &dg1 : nullptr);
  if (lam[1] > 0.0 || !want) out.terms[1] = term_ringing(s, inf, want && lam[1] > 0.0 ? &dg2 : nullptr);
  if (lam[2] > 0.0 || !want) {
    if (mode == Mode::spmnet) {
      out.terms[2] = term_flatness_std(s, want && lam[2] > 0.0 ? &dG3 : nullptr);
    } else {
      out.terms[2] = term_flatness_inf(s, inf, want && lam[2] > 0.0 ? &dG3 : nullptr);
    }
  }
  if (lam[3] > 0.0 || !want) out.terms[3] = term_filter_band(s, inf, want && lam[3] > 0.0 ? &dH4 : nullptr);
  if (mode == Mode::spmnet && lam[4] > 0.0) out.terms[4] = term_spm(s, want ? &dH5 : nullptr);

  std::array<double, 5> eff = lam;
  if (mode != Mode::spmnet) eff[4] = 0.0;
  out.total = weighted_total(eff, out.terms);

  if (!grad) return out;
  if (!dg1.empty() || !dg2.empty()) {
    seed.g.assign(q_ * lg_, 0.0);
    for (std::size_t i = 0; i < seed.g.size(); ++i) {
      if (!dg1.empty()) seed.g[i] += lam[0] / 2.0 * dg1[i];
      if (!dg2.empty()) seed.g[i] += lam[1] / 2.0 * dg2[i];
    }
  }
  if (!dG3.empty()) {
    for (auto& row : dG3) {
      for (auto& z : row) z *= lam[2] / 2.0;
    }
    seed.g_spec = std::move(dG3);
  }
  if (!dH4.empty()) {
    for (auto& row : dH4) {
      for (auto& z : row) z *= lam[3] / 2.0;
    }
    seed.h_spec = std::move(dH4);
  }
  if (!dH5.empty()) {
    for (auto& z : dH5) z *= lam[4] / 2.0;
    seed.h_grid = std::move(dH5);
  }
  *grad = adjoint(seed);
  return out;
}

LossBreakdown loss(Problem& problem, const ControlFilterBank& h, Mode mode) {
  return problem.loss(h.coeffs, mode, nullptr);
}

std::vector<double> loss_grad(Problem& problem, const ControlFilterBank& h, Mode mode) {
  std::vector<double> g;
  problem.loss(h.coeffs, mode, &g);
  return g;
}

}  // namespace sfr
