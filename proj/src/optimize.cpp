#include "sfr/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace sfr {

Solver parse_solver(const std::string& s) {
  if (s == "fd") return Solver::fd;
  if (s == "cvx") return Solver::cvx;
  if (s == "nn") return Solver::nn;
  if (s == "spmnet") return Solver::spmnet;
  throw std::invalid_argument("unknown solver '" + s + "'");
}

std::string to_string(Solver s) {
  switch (s) {
    case Solver::fd: return "fd";
    case Solver::cvx: return "cvx";
    case Solver::nn: return "nn";
    case Solver::spmnet: return "spmnet";
  }
  return "?";
}

namespace {

void check_job(const DesignJob& job) {
  if (job.positions.empty()) throw std::invalid_argument("design: job has no training position");
  if (job.filter_len == 0) throw std::invalid_argument("design: filter_len must be >= 1");
  for (const auto& p : job.positions) {
    if (p.channels.l_count != job.positions.front().channels.l_count) {
      throw std::invalid_argument("design: positions disagree on loudspeaker count");
    }
  }
}

LossConfig config_for(const DesignJob& job, Mode mode) {
  LossConfig c = job.config;
  if (mode != Mode::spmnet) c.lambda[4] = 0.0;
  return c;
}

double sum_sq(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

void project_l1_ball(std::span<double> y, double radius) {
  if (radius <= 0.0) {
    std::fill(y.begin(), y.end(), 0.0);
    return;
  }
  double l1 = 0.0;
  for (double v : y) l1 += std::abs(v);
  if (l1 <= radius) return;
  std::vector<double> u(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) u[i] = std::abs(y[i]);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - radius) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  for (double& v : y) {
    const double m = std::max(std::abs(v) - theta, 0.0);
    v = v < 0.0 ? -m : m;
  }
}

void project_l1_ball(std::span<cplx> y, double radius) {
  std::vector<double> mag(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) mag[i] = std::abs(y[i]);
  std::vector<double> proj = mag;
  project_l1_ball(std::span<double>(proj), radius);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (mag[i] > 0.0) y[i] *= proj[i] / mag[i];
  }
}

std::vector<Fir> reproduce(const ControlFilterBank& h, const ImpulseResponseSet& channels) {
  if (h.l_count != channels.l_count) throw std::invalid_argument("reproduce: loudspeaker count mismatch");
  if (h.filter_len == 0 || channels.length == 0) throw std::invalid_argument("reproduce: empty filters or channels");
  if (h.sample_rate != channels.sample_rate) throw std::invalid_argument("reproduce: sample rate mismatch");
  const std::size_t lg = channels.length + h.filter_len - 1;
  RealFft fft(next_pow2(std::max<std::size_t>(lg, 4)));
  std::vector<std::vector<cplx>> hs(h.l_count);
  for (std::size_t l = 0; l < h.l_count; ++l) fft.forward(h.filter(l), hs[l]);
  std::vector<Fir> out;
  std::vector<cplx> c, acc;
  std::vector<double> buf;
  for (std::size_t q = 0; q < channels.q_count; ++q) {
    acc.assign(fft.half_size(), cplx(0.0, 0.0));
    for (std::size_t l = 0; l < channels.l_count; ++l) {
      fft.forward(channels.ir(q, l), c);
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += c[k] * hs[l][k];
    }
    fft.inverse(acc, buf);
    out.push_back(Fir{std::vector<double>(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(lg)), channels.sample_rate});
  }
  return out;
}

ControlFilterBank ori_bank(const VirtualSource& source, const ArrayGeometry& geometry, std::size_t filter_len) {
  if (geometry.l_count() == 0 || filter_len == 0) throw std::invalid_argument("ori_bank: empty geometry or filter");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < geometry.l_count(); ++l) {
    const double d = circular_distance_deg(azimuth_of(geometry.loudspeakers[l], geometry.array_center), source.azimuth_deg);
    if (d < best_d) {
      best_d = d;
      best = l;
    }
  }
  ControlFilterBank bank(geometry.l_count(), filter_len);
  bank.filter(best)[0] = 1.0;
  return bank;
}

DesignResult design_fd(const DesignJob& job) {
  check_job(job);
  if (job.positions.size() != 1) throw std::invalid_argument("design_fd: exactly one position required");
  if (job.fd.beta_rel < 0.0 || !std::isfinite(job.fd.beta_rel)) {
    throw std::invalid_argument("design_fd: regularization must be finite and non-negative");
  }
  const auto& pos = job.positions.front();
  const ImpulseResponseSet& ch = pos.channels;
  const std::size_t q_n = ch.q_count, l_n = ch.l_count, lh = job.filter_len;
  const std::size_t lg = ch.length + lh - 1;
  if (pos.target.q_count() != q_n) throw std::invalid_argument("design_fd: target microphone count mismatch");
  const std::size_t n = next_pow2(std::max<std::size_t>({lg, pos.target.length(), 4}));
  RealFft fft(n);
  const std::size_t nh = fft.half_size();

  std::vector<std::vector<cplx>> c(q_n * l_n), d(q_n);
  for (std::size_t q = 0; q < q_n; ++q) {
    for (std::size_t l = 0; l < l_n; ++l) fft.forward(ch.ir(q, l), c[q * l_n + l]);
    fft.forward(pos.target.mics[q].samples, d[q]);
  }
  auto bin_matrix = [&](std::size_t k) {
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(q_n), static_cast<Eigen::Index>(l_n));
    for (std::size_t q = 0; q < q_n; ++q) {
      for (std::size_t l = 0; l < l_n; ++l) m(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(l)) = c[q * l_n + l][k];
    }
    return m;
  };

  double smax2 = 0.0;
  for (std::size_t k = 0; k < nh; ++k) {
    const Eigen::MatrixXcd m = bin_matrix(k);
    const Eigen::MatrixXcd g = m.adjoint() * m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
    smax2 = std::max(smax2, es.eigenvalues().maxCoeff());
  }
  const double beta = job.fd.beta_rel * smax2;

  std::vector<std::vector<cplx>> hs(l_n, std::vector<cplx>(nh));
  for (std::size_t k = 0; k < nh; ++k) {
    const Eigen::MatrixXcd m = bin_matrix(k);
    Eigen::VectorXcd dk(static_cast<Eigen::Index>(q_n));
    for (std::size_t q = 0; q < q_n; ++q) dk(static_cast<Eigen::Index>(q)) = d[q][k];
    Eigen::VectorXcd x;
    if (beta > 0.0) {
      Eigen::MatrixXcd a = m.adjoint() * m;
      a.diagonal().array() += beta;
      x = a.ldlt().solve(m.adjoint() * dk);
    } else {
      x = m.completeOrthogonalDecomposition().solve(dk);
    }
    for (std::size_t l = 0; l < l_n; ++l) hs[l][k] = x(static_cast<Eigen::Index>(l));
  }

  DesignResult r;
  r.bank = ControlFilterBank(l_n, lh, ch.sample_rate);
  std::vector<double> buf;
  // The target already carries the modelling delay, so the first L_h taps hold
  // the centred filter.
  for (std::size_t l = 0; l < l_n; ++l) {
    fft.inverse(hs[l], buf);
    const std::size_t take = std::min(lh, n);
    std::copy_n(buf.begin(), take, r.bank.filter(l).begin());
  }
  r.iterations = 0;
  std::ostringstream os;
  os << "beta=" << beta;
  r.diagnostic = os.str();
  return r;
}

DesignResult design_cvx(const DesignJob& job) {
  check_job(job);
  if (job.positions.size() != 1) throw std::invalid_argument("design_cvx: exactly one position required");
  const auto& pos = job.positions.front();
  const LossConfig cfg = config_for(job, Mode::cvx);
  Problem prob(pos.channels, pos.target, job.geometry, cfg, job.filter_len);
  const auto& lam = cfg.lambda;
  const std::size_t q_n = prob.q_count(), l_n = prob.l_count(), lg = prob.response_len();
  const std::size_t np = prob.param_count();
  const std::size_t nh = prob.fft_size() / 2 + 1;
  const auto& wu = prob.windows().unwanted;
  const auto& vs = prob.flat_weights();
  const auto& stop = prob.stop_mask();
  const auto& wd = prob.windows().desired;
  const bool use2 = lam[1] > 0.0, use3 = lam[2] > 0.0, use4 = lam[3] > 0.0;

  // Linear maps A2, A3, A4 and their adjoints, expressed through the problem's seeds.
  auto dual_seed = [&](const std::vector<double>& y2, const std::vector<std::vector<cplx>>& y3,
                       const std::vector<std::vector<cplx>>& y4, AdjointSeed& seed) {
    if (use2) {
      seed.g.resize(q_n * lg, 0.0);
      for (std::size_t i = 0; i < q_n * lg; ++i) seed.g[i] += wu[i] * y2[i];
    }
    if (use3) {
      seed.g_spec.assign(q_n, std::vector<cplx>(nh));
      for (std::size_t q = 0; q < q_n; ++q) {
        for (std::size_t k = 0; k < nh; ++k) seed.g_spec[q][k] = vs[k] * y3[q][k];
      }
    }
    if (use4) {
      seed.h_spec.assign(l_n, std::vector<cplx>(nh));
      for (std::size_t l = 0; l < l_n; ++l) {
        for (std::size_t k = 0; k < nh; ++k) seed.h_spec[l][k] = stop[k] * y4[l][k];
      }
    }
  };
  auto apply_a = [&](const ForwardState& s, std::vector<double>& a2, std::vector<std::vector<cplx>>& a3,
                     std::vector<std::vector<cplx>>& a4) {
    if (use2) {
      a2.resize(q_n * lg);
      for (std::size_t i = 0; i < q_n * lg; ++i) a2[i] = wu[i] * s.g[i];
    }
    if (use3) {
      a3.assign(q_n, std::vector<cplx>(nh));
      for (std::size_t q = 0; q < q_n; ++q) {
        for (std::size_t k = 0; k < nh; ++k) a3[q][k] = vs[k] * s.g_spec[q][k];
      }
    }
    if (use4) {
      a4.assign(l_n, std::vector<cplx>(nh));
      for (std::size_t l = 0; l < l_n; ++l) {
        for (std::size_t k = 0; k < nh; ++k) a4[l][k] = stop[k] * s.h_spec[l][k];
      }
    }
  };
  auto eval = [&](const ForwardState& s, std::vector<double>* dg1) {
    LossBreakdown b;
    b.terms[0] = prob.term_match(s, dg1);
    b.terms[1] = prob.term_ringing(s, true);
    b.terms[2] = prob.term_flatness_inf(s, true);
    b.terms[3] = prob.term_filter_band(s, true);
    b.total = weighted_total(lam, b.terms);
    return b;
  };

  // Operator norms by power iteration from a fixed start vector.
  auto power = [&](auto&& apply) {
    std::vector<double> v(np);
    for (std::size_t i = 0; i < np; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
    double est = 0.0;
    for (std::size_t it = 0; it < job.cvx.power_iter; ++it) {
      const double nv = std::sqrt(sum_sq(v));
      if (nv == 0.0) return 0.0;
      for (double& x : v) x /= nv;
      v = apply(v);
      est = std::sqrt(sum_sq(v));
    }
    return est;
  };
  const double lf = lam[0] > 0.0 ? power([&](const std::vector<double>& v) {
    const ForwardState s = prob.forward(v);
    AdjointSeed seed;
    seed.g.resize(q_n * lg);
    for (std::size_t i = 0; i < q_n * lg; ++i) seed.g[i] = lam[0] * wd[i] * wd[i] * s.g[i];
    return prob.adjoint(seed);
  }) : 0.0;
  const double anorm2 = (use2 || use3 || use4) ? power([&](const std::vector<double>& v) {
    const ForwardState s = prob.forward(v);
    std::vector<double> a2;
    std::vector<std::vector<cplx>> a3, a4;
    apply_a(s, a2, a3, a4);
    AdjointSeed seed;
    dual_seed(a2, a3, a4, seed);
    return prob.adjoint(seed);
  }) : 0.0;

  DesignResult r;
  r.bank = ControlFilterBank(l_n, job.filter_len, pos.channels.sample_rate);
  std::vector<double> h(np, 0.0);
  ForwardState s = prob.forward(h);
  std::vector<double> dg1;
  const LossBreakdown cur = eval(s, &dg1);
  LossBreakdown best = cur;
  std::vector<double> best_h = h;
  r.log.push_back({0, pos.label, cur});
  if (lf == 0.0 && anorm2 == 0.0) {
    r.final_loss = cur;
    r.diagnostic = "trivial objective";
    return r;
  }
  double tau, sigma;
  if (lf > 0.0) {
    tau = 0.99 / lf;
    sigma = anorm2 > 0.0 ? job.cvx.dual_scale * lf / (2.0 * anorm2) : 0.0;
    tau = 0.99 / (lf / 2.0 + sigma * anorm2);
  } else {
    tau = 0.99 / std::sqrt(anorm2);
    sigma = 1.0 / std::sqrt(anorm2);
  }

  std::vector<double> y2(use2 ? q_n * lg : 0, 0.0);
  std::vector<std::vector<cplx>> y3(use3 ? q_n : 0, std::vector<cplx>(nh)), y4(use4 ? l_n : 0, std::vector<cplx>(nh));
  std::vector<double> a2, a2n;
  std::vector<std::vector<cplx>> a3, a4, a3n, a4n;
  apply_a(s, a2, a3, a4);

  bool converged = false;
  std::vector<double> best_hist{best.total};
  std::size_t it = 1;
  for (; it <= job.cvx.max_iter; ++it) {
    AdjointSeed seed;
    dual_seed(y2, y3, y4, seed);
    if (lam[0] > 0.0) {
      seed.g.resize(q_n * lg, 0.0);
      for (std::size_t i = 0; i < q_n * lg; ++i) seed.g[i] += lam[0] / 2.0 * dg1[i];
    }
    const std::vector<double> grad = prob.adjoint(seed);
    for (std::size_t i = 0; i < np; ++i) h[i] -= tau * grad[i];
    s = prob.forward(h);
    apply_a(s, a2n, a3n, a4n);
    if (use2) {
      for (std::size_t i = 0; i < y2.size(); ++i) y2[i] += sigma * (2.0 * a2n[i] - a2[i]);
      project_l1_ball(std::span<double>(y2), lam[1] / 2.0);
    }
    if (use3) {
      // One l-inf over all microphones and bins: project the stacked dual jointly.
      std::vector<cplx> flat;
      flat.reserve(q_n * nh);
      for (std::size_t q = 0; q < q_n; ++q) {
        for (std::size_t k = 0; k < nh; ++k) flat.push_back(y3[q][k] + sigma * (2.0 * a3n[q][k] - a3[q][k]));
      }
      project_l1_ball(std::span<cplx>(flat), lam[2] / 2.0);
      for (std::size_t q = 0; q < q_n; ++q) std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(q * nh), nh, y3[q].begin());
    }
    if (use4) {
      for (std::size_t l = 0; l < l_n; ++l) {
        for (std::size_t k = 0; k < nh; ++k) y4[l][k] += sigma * (2.0 * a4n[l][k] - a4[l][k]);
        project_l1_ball(std::span<cplx>(y4[l]), lam[3] / 2.0);
      }
    }
    std::swap(a2, a2n);
    std::swap(a3, a3n);
    std::swap(a4, a4n);

    const LossBreakdown next = eval(s, &dg1);
    if (job.cvx.log_every > 0 && it % job.cvx.log_every == 0) r.log.push_back({it, pos.label, next});
    if (!std::isfinite(next.total)) {
      r.aborted = true;
      r.diagnostic = "non-finite loss at iteration " + std::to_string(it);
      break;
    }
    if (next.total < best.total) {
      best = next;
      best_h = h;
    }
    best_hist.push_back(best.total);
    // The primal-dual loss oscillates, so progress is measured on the running best.
    const std::size_t win = std::max<std::size_t>(job.cvx.stall_window, 1);
    if (it >= std::max(job.cvx.min_iter, win)) {
      const double change = best_hist[it - win] - best.total;
      if (change <= job.cvx.rel_tol * best.total || best.total == 0.0) {
        converged = true;
        break;
      }
    }
  }
  r.iterations = std::min(it, job.cvx.max_iter);
  r.converged = converged;
  if (!converged && !r.aborted) r.diagnostic = "warning: iteration budget exhausted before convergence";
  std::copy(best_h.begin(), best_h.end(), r.bank.coeffs.begin());
  r.final_loss = best;
  return r;
}

DesignResult design_deep(const DesignJob& job) {
  check_job(job);
  if (job.solver != Solver::nn && job.solver != Solver::spmnet) {
    throw std::invalid_argument("design_deep: solver must be nn or spmnet");
  }
  const Mode mode = job.solver == Solver::spmnet ? Mode::spmnet : Mode::nn;
  const LossConfig cfg = config_for(job, mode);
  std::vector<std::unique_ptr<Problem>> probs;
  for (const auto& p : job.positions) {
    probs.push_back(std::make_unique<Problem>(p.channels, p.target, job.geometry, cfg, job.filter_len));
  }
  const std::size_t np = probs.front()->param_count();
  const double inv_pos = 1.0 / static_cast<double>(probs.size());
  const bool tag = probs.size() > 1;

  ReparamNet net(np, job.deep.net, job.seed);
  Adam adam(net.param_count(), job.deep.learning_rate);

  DesignResult r;
  r.bank = ControlFilterBank(probs.front()->l_count(), job.filter_len, job.positions.front().channels.sample_rate);
  std::vector<double> best_h(np, 0.0);
  LossBreakdown best;
  best.total = std::numeric_limits<double>::infinity();
  double initial = 0.0;
  std::size_t since_best = 0;
  bool stopped = false;
  std::vector<double> g;
  Eigen::VectorXd dout(static_cast<Eigen::Index>(np));
  std::size_t it = 0;
  for (; it < job.deep.max_iter; ++it) {
    const Eigen::VectorXd& out = net.forward();
    const std::span<const double> h(out.data(), np);
    LossBreakdown mean;
    dout.setZero();
    for (std::size_t p = 0; p < probs.size(); ++p) {
      const LossBreakdown b = probs[p]->loss(h, mode, &g);
      for (std::size_t k = 0; k < 5; ++k) mean.terms[k] += b.terms[k] * inv_pos;
      mean.total += b.total * inv_pos;
      for (std::size_t i = 0; i < np; ++i) dout(static_cast<Eigen::Index>(i)) += g[i] * inv_pos;
      if (tag && job.deep.log_every > 0 && it % job.deep.log_every == 0) r.log.push_back({it, job.positions[p].label, b});
    }
    if (!tag && job.deep.log_every > 0 && it % job.deep.log_every == 0) r.log.push_back({it, job.positions.front().label, mean});
    if (it == 0) initial = mean.total;
    if (!std::isfinite(mean.total) || mean.total > job.deep.divergence_factor * std::max(initial, 1e-300)) {
      r.aborted = true;
      std::ostringstream os;
      os << "diverged at iteration " << it << " (loss " << mean.total << ", initial " << initial << ")";
      r.diagnostic = os.str();
      break;
    }
    if (mean.total < best.total) {
      best = mean;
      std::copy(h.begin(), h.end(), best_h.begin());
      since_best = 0;
    } else if (++since_best >= job.deep.patience) {
      stopped = true;
      ++it;
      break;
    }
    adam.step(net.params(), net.backward(dout));
  }
  r.iterations = it;
  r.converged = stopped;
  if (!stopped && !r.aborted) r.diagnostic = "iteration budget exhausted";
  std::copy(best_h.begin(), best_h.end(), r.bank.coeffs.begin());
  r.final_loss = best;
  return r;
}

DesignResult design_multi_position(const DesignJob& job) {
  if (job.solver != Solver::spmnet) throw std::invalid_argument("design_multi_position: spmnet solver required");
  std::vector<std::string> labels;
  for (const auto& p : job.positions) labels.push_back(p.label);
  std::sort(labels.begin(), labels.end());
  if (labels != std::vector<std::string>{"LL", "O", "RR"}) {
    throw std::invalid_argument("design_multi_position: positions must be exactly {LL, O, RR}");
  }
  return design_deep(job);
}

DesignResult design(const DesignJob& job) {
  switch (job.solver) {
    case Solver::fd: return design_fd(job);
    case Solver::cvx: return design_cvx(job);
    case Solver::nn: return design_deep(job);
    case Solver::spmnet: return job.positions.size() > 1 ? design_multi_position(job) : design_deep(job);
  }
  throw std::invalid_argument("design: unknown solver");
}

}  // namespace sfr
