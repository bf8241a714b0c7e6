// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "sfr/campaign.hpp"
#include "sfr/io.hpp"
#include "support.hpp"

using namespace sfr;
using namespace sfr::test;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---- criterion 1 -----------------------------------------------------------

double spm_loop(const std::vector<Fir>& g, const BeamWeights& w, std::size_t b) {
  double total = 0.0;
  for (std::size_t f = 0; f < w.f_count; ++f) {
    cplx y(0.0, 0.0);
    for (std::size_t q = 0; q < w.q_count; ++q) {
      cplx X(0.0, 0.0);
      for (std::size_t n = 0; n < g[q].size(); ++n) {
        X += g[q][n] * std::polar(1.0, -2.0 * kPi * w.freqs_hz[f] * static_cast<double>(n) / kSampleRate);
      }
      y += X * w.at(q, b, f);
    }
    total += std::norm(y);
  }
  return total;
}

void criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> len(1, 24);
  std::uniform_real_distribution<double> uw(10.0, 1000.0);
  double worst = 0.0;
  const SteeringGrid grid = SteeringGrid::uniform(8, 4, 300.0, 4000.0);
  for (int trial = 0; trial < 100; ++trial) {
    // Convolution matrix against the double loop.
    const Fir c = random_fir(rng, len(rng));
    const std::size_t lh = len(rng);
    const auto h = random_vector(rng, lh);
    const Eigen::VectorXd y = build_conv_matrix(c, lh) * Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<long>(lh));
    const auto ref = direct_conv(c.samples, h);
    const double scale = std::max(max_abs(ref), 1e-300);
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(y(static_cast<long>(i)) - ref[i]) / scale);

    // Matrix-form map against the per-direction loop.
    const ArrayGeometry geo = tiny_geometry(2 + trial % 4, 2);
    const BeamWeights w = dsb_weights(geo, grid);
    std::vector<Fir> g;
    for (std::size_t q = 0; q < geo.q_count(); ++q) g.push_back(random_fir(rng, 16));
    const SpatialPowerMap m = spm_of_response(g, w);
    for (std::size_t b = 0; b < w.b_count; ++b) worst = std::max(worst, rel_err(m.power[b], spm_loop(g, w, b)));

    // Overshoot measure against an explicit loop.
    const auto x = random_vector(rng, 48, 0.05);
    std::vector<double> wu(48);
    for (double& v : wu) v = uw(rng);
    const NprqResult a = nprq(x, wu, 15, 30);
    double sp = 0.0, so = 0.0;
    int cp = 0, co = 0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double env = 1.0 / wu[n];
      if (!(std::abs(x[n]) > env && std::abs(x[n]) > std::pow(10.0, -2.5))) continue;
      const double e = 20.0 * std::log10(std::abs(x[n]) / env);
      if (n <= 15) sp += e, ++cp;
      if (n >= 30) so += e, ++co;
    }
    const double pre = cp ? sp / cp : 0.0, post = co ? so / co : 0.0;
    worst = std::max(worst, std::abs(a.pre - pre) / std::max(1.0, std::abs(pre)));
    worst = std::max(worst, std::abs(a.post - post) / std::max(1.0, std::abs(post)));

    // Spectral deviation against an explicit loop.
    const auto s = direct_dft(random_vector(rng, 20), 32);
    double mean = 0.0, ss = 0.0;
    for (std::size_t k = 2; k <= 14; ++k) mean += 10.0 * std::log10(std::abs(s[k]));
    mean /= 13.0;
    for (std::size_t k = 2; k <= 14; ++k) ss += std::pow(10.0 * std::log10(std::abs(s[k])) - mean, 2);
    worst = std::max(worst, rel_err(spectral_deviation(s, 2, 14), std::sqrt(ss / 13.0)));
  }
  const double t = seconds_since(t0);
  report(1, worst <= 1e-9 && t < 10.0, fmt("max relative deviation %.3g over 100 instances, %.2f s", worst, t));
}

// ---- criterion 2 -----------------------------------------------------------

void criterion2() {
  const auto t0 = Clock::now();
  const TinyInstance base = tiny_instance(202);
  std::mt19937_64 rng(203);
  const auto h = random_vector(rng, base.channels.l_count * base.filter_len, 0.3);
  double worst = 0.0;
  for (Mode mode : {Mode::nn, Mode::spmnet}) {
    for (int k = -1; k < 5; ++k) {
      if (k == 4 && mode != Mode::spmnet) continue;
      TinyInstance t = base;
      if (k >= 0) {
        t.config.lambda = {0.0, 0.0, 0.0, 0.0, 0.0};
        t.config.lambda[static_cast<std::size_t>(k)] = 1.0;
      }
      Problem p = make_problem(t);
      std::vector<double> g;
      p.loss(h, mode, &g);
      double err = 0.0, mx = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) {
        auto a = h, b = h;
        a[i] += 1e-6;
        b[i] -= 1e-6;
        const double fd = (p.loss(a, mode).total - p.loss(b, mode).total) / 2e-6;
        err = std::max(err, std::abs(fd - g[i]));
        mx = std::max(mx, std::abs(fd));
      }
      worst = std::max(worst, err / mx);
    }
  }
  const double t = seconds_since(t0);
  report(2, worst <= 1e-5 && t < 30.0, fmt("max relative gradient error %.3g (Q=3, L=2, L_h=8), %.2f s", worst, t));
}

// ---- criterion 3 -----------------------------------------------------------

double ls_optimum(const TinyInstance& t) {
  Problem p = make_problem(t);
  const std::size_t q_n = t.channels.q_count, l_n = t.channels.l_count, lh = t.filter_len, lg = p.response_len();
  Eigen::MatrixXd C(q_n * lg, l_n * lh);
  for (std::size_t q = 0; q < q_n; ++q) {
    for (std::size_t l = 0; l < l_n; ++l) {
      C.block(static_cast<long>(q * lg), static_cast<long>(l * lh), static_cast<long>(lg), static_cast<long>(lh)) =
          build_conv_matrix(t.channels.fir(q, l), lh);
    }
  }
  const Eigen::VectorXd wd = Eigen::Map<const Eigen::VectorXd>(p.windows().desired.data(), static_cast<long>(q_n * lg));
  const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(p.target().data(), static_cast<long>(q_n * lg));
  const Eigen::MatrixXd A = wd.asDiagonal() * C;
  const Eigen::VectorXd b = wd.asDiagonal() * d;
  const Eigen::VectorXd h = A.completeOrthogonalDecomposition().solve(b);
  return t.config.lambda[0] / 2.0 * (A * h - b).squaredNorm();
}

void criterion3() {
  const auto t0 = Clock::now();
  double worst_deep = 0.0, worst_cvx = 0.0;
  for (std::uint64_t seed : {301, 302, 303}) {
    TinyInstance t = tiny_instance(seed);
    t.config.lambda = {1.0, 0.0, 0.0, 0.0, 0.0};
    const double opt = ls_optimum(t);
    DesignJob job;
    job.positions.push_back({"O", t.channels, t.target});
    job.geometry = t.geometry;
    job.config = t.config;
    job.filter_len = t.filter_len;
    job.seed = seed;
    job.deep.max_iter = 6000;
    job.cvx.max_iter = 20000;
    job.cvx.rel_tol = 1e-12;
    Problem p = make_problem(t);
    job.solver = Solver::nn;
    const double deep = p.loss(design_deep(job).bank.coeffs, Mode::nn).total;
    job.solver = Solver::cvx;
    const double cvx = p.loss(design_cvx(job).bank.coeffs, Mode::cvx).total;
    worst_deep = std::max(worst_deep, (deep - opt) / opt);
    worst_cvx = std::max(worst_cvx, (cvx - opt) / opt);
  }
  const double t = seconds_since(t0);
  report(3, worst_deep <= 0.01 && worst_cvx <= 0.01 && t < 120.0,
         fmt("excess over least-squares optimum: deep %.3g%%, cvx %.3g%%, %.1f s", 100.0 * worst_deep, 100.0 * worst_cvx, t));
}

// ---- campaign ----------------------------------------------------------------

struct Campaign {
  RunReport report;
  DesignReport design;
  double seconds = 0.0;
  bool ok = false;
  std::string error;
};

Campaign run_campaign(const fs::path& dir) {
  Campaign c;
  const auto t0 = Clock::now();
  try {
    ExperimentConfig cfg;
    cfg.out_dir = dir;
    fs::remove_all(dir);
    cmd_simulate(cfg);
    c.design = cmd_design(cfg);
    c.report = cmd_evaluate(cfg);
    cmd_report(cfg);
    c.ok = true;
  } catch (const std::exception& e) {
    c.error = e.what();
  }
  c.seconds = seconds_since(t0);
  return c;
}

double mean_dominance(const RunReport& r, const std::string& method, const std::vector<std::string>& positions) {
  double s = 0.0;
  int n = 0;
  for (const auto& d : r.dominance) {
    if (d.method != method) continue;
    for (const auto& p : positions) {
      if (d.position == p) {
        s += d.dominance_15;
        ++n;
      }
    }
  }
  return n ? s / n : std::nan("");
}

struct MetricMean {
  double pre = 0.0, post = 0.0, sd5 = 0.0;
};

MetricMean mean_metrics(const RunReport& r, const std::string& method, const std::string& position) {
  MetricMean m;
  int n = 0;
  for (const auto& row : r.metrics) {
    if (row.method != method || row.position != position) continue;
    m.pre += row.metrics.nprq.pre;
    m.post += row.metrics.nprq.post;
    m.sd5 += row.metrics.sd.avg5;
    ++n;
  }
  if (n == 0) return {std::nan(""), std::nan(""), std::nan("")};
  m.pre /= n;
  m.post /= n;
  m.sd5 /= n;
  return m;
}

void criterion4(const Campaign& c) {
  double cvx = 0.0, nn = 0.0;
  int ncvx = 0, nnn = 0;
  for (const auto& l : c.report.losses) {
    if (l.method == "cvx") cvx += l.eq4.total, ++ncvx;
    if (l.method == "nn") nn += l.eq4.total, ++nnn;
  }
  if (!c.ok || ncvx == 0 || nnn == 0) {
    report(4, false, "campaign did not produce cvx and nn losses " + c.error);
    return;
  }
  cvx /= ncvx;
  nn /= nnn;
  const double gap = std::abs(nn - cvx) / cvx;
  report(4, gap <= 0.05, fmt("mean convex-objective loss at O: cvx %.4f, nn %.4f, gap %.2f%% (limit 5%%)", cvx, nn, 100.0 * gap));
}

void criterion5(const Campaign& c) {
  auto dom = [&](const std::string& m) { return mean_dominance(c.report, m, {"O"}); };
  const double spm = dom("spmnet"), nn = dom("nn"), cvx = dom("cvx"), fd = dom("fd"), ori = dom("ori"), spm3 = dom("spmnet3");
  bool ok = c.ok && spm >= nn && spm >= cvx && spm >= 0.75 && c.seconds < 1800.0;
  for (double v : {cvx, nn, spm, spm3}) ok = ok && v > fd && v > ori;
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "diag dominance (15 deg) at O: spmnet %.3f, spmnet3 %.3f, nn %.3f, cvx %.3f, fd %.3f, ori %.3f; campaign %.0f s",
                spm, spm3, nn, cvx, fd, ori, c.seconds);
  report(5, ok, buf);
}

void criterion6(const Campaign& c) {
  const double s3 = mean_dominance(c.report, "spmnet3", {"LL", "RR"});
  const double s1 = mean_dominance(c.report, "spmnet", {"LL", "RR"});
  report(6, c.ok && s3 >= s1, fmt("mean diag dominance over LL, RR: spmnet3 %.3f, spmnet %.3f", s3, s1));
}

void criterion7(const Campaign& c) {
  std::map<std::string, MetricMean> m;
  for (const char* k : {"ori", "fd", "cvx", "nn", "spmnet"}) m[k] = mean_metrics(c.report, k, "O");
  bool ok = c.ok;
  for (const char* k : {"spmnet", "cvx", "nn"}) {
    for (const char* b : {"ori", "fd"}) ok = ok && m[k].pre < m[b].pre && m[k].post < m[b].post;
  }
  ok = ok && m["cvx"].sd5 < m["ori"].sd5;
  std::string detail = "at O (pre/post/SD5.65k):";
  for (const char* k : {"ori", "fd", "cvx", "nn", "spmnet"}) {
    detail += std::string(" ") + k + fmt(" %.2f/%.2f/%.2f;", m[k].pre, m[k].post, m[k].sd5);
  }
  report(7, ok, detail);
}

void criterion8() {
  bool ok = true;
  std::vector<double> wu(40, 100.0), g(40, 0.0);
  g[2] = 0.01 * std::pow(10.0, 6.0 / 20.0);
  g[5] = 0.01 * std::pow(10.0, 12.0 / 20.0);
  const double pre = nprq(g, wu, 10, 30).pre;
  ok = ok && std::abs(pre - 9.0) <= 1e-12;

  const std::vector<cplx> two{cplx(1.0, 0.0), cplx(10.0, 0.0)};
  const double sd = spectral_deviation(two, 0, 1);
  ok = ok && sd == 5.0;

  std::vector<double> w3(4, 1000.0), g3(4, 0.0);
  g3[1] = std::pow(10.0, -2.6);
  const double excluded = overshoot_envelope(g3, w3)[1];
  ok = ok && excluded == 0.0;
  report(8, ok, fmt("pre = %.12g (expect 9), SD = %.12g (expect 5), sub-floor overshoot = %g (expect 0)", pre, sd, excluded));
}

void criterion9(const fs::path& a, const fs::path& b, bool ran) {
  bool ok = ran;
  std::string detail;
  for (const char* f : {"metrics.csv", "losses.csv", "dominance.csv"}) {
    const fs::path pa = a / "eval" / f, pb = b / "eval" / f;
    const bool same = fs::exists(pa) && fs::exists(pb) && read_text(pa) == read_text(pb);
    ok = ok && same;
    detail += std::string(f) + (same ? " identical; " : " differ; ");
  }
  report(9, ok, detail + "two runs with seed 1");
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "sfr_acceptance";
  fs::create_directories(work);

  criterion1();
  criterion2();
  criterion3();

  const Campaign first = run_campaign(work / "run1");
  if (!first.ok) std::printf("campaign error: %s\n", first.error.c_str());
  for (const auto& j : first.design.jobs) {
    if (j.failed) std::printf("job failure: %s az %.0f: %s\n", j.method.c_str(), j.source_azimuth_deg, j.message.c_str());
  }
  for (const auto& f : first.report.failures) std::printf("evaluation failure: %s\n", f.c_str());
  criterion4(first);
  criterion5(first);
  criterion6(first);
  criterion7(first);
  criterion8();

  const Campaign second = run_campaign(work / "run2");
  criterion9(work / "run1", work / "run2", first.ok && second.ok);

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
