#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfr/objective.hpp"
#include "sfr/reparam_net.hpp"
#include "sfr/room.hpp"

namespace sfr {

enum class Solver { fd, cvx, nn, spmnet };

Solver parse_solver(const std::string& s);
std::string to_string(Solver s);

/// Channels and target at one training position.
struct TrainingPosition {
  std::string label = "O";
  ImpulseResponseSet channels;
  TargetResponse target;
};

struct DeepOptions {
  ReparamNetConfig net;
  double learning_rate = 1e-3;
  std::size_t max_iter = 20000;
  std::size_t patience = 500;
  double divergence_factor = 1e6;
  std::size_t log_every = 1;
};

struct CvxOptions {
  std::size_t max_iter = 5000;
  std::size_t min_iter = 10;
  double rel_tol = 1e-6;
  std::size_t stall_window = 50;  // the best loss is compared across this many iterations
  std::size_t power_iter = 40;
  double dual_scale = 1.0;  // sigma relative to the balanced choice
  std::size_t log_every = 1;
};

struct FdOptions {
  double beta_rel = 0.01;  // beta = beta_rel * max_f ||C(f)||_2^2
};

struct DesignJob {
  VirtualSource source;
  std::vector<TrainingPosition> positions;
  ArrayGeometry geometry;
  LossConfig config;
  Solver solver = Solver::spmnet;
  std::size_t filter_len = 512;
  std::uint64_t seed = 0;
  DeepOptions deep;
  CvxOptions cvx;
  FdOptions fd;
};

struct LogRow {
  std::size_t iteration = 0;
  std::string position;
  LossBreakdown loss;
};

struct DesignResult {
  ControlFilterBank bank;
  std::vector<LogRow> log;
  LossBreakdown final_loss;  // in the solver's own mode, averaged over positions
  std::size_t iterations = 0;
  bool converged = true;
  bool aborted = false;
  std::string diagnostic;
};

/// Regularized per-bin least squares, h(f) = (C^H C + beta I)^-1 C^H d.
/// beta_rel = 0 gives the minimum-norm least-squares solution; negative values are rejected.
DesignResult design_fd(const DesignJob& job);

/// Primal-dual proximal splitting of the convex objective. The smooth match term
/// takes a gradient step; each l-inf term is handled through its dual, projected
/// onto the l1 ball of radius lambda/2.
DesignResult design_cvx(const DesignJob& job);

/// Deep optimization of the nn or spmnet objective through a ReparamNet.
DesignResult design_deep(const DesignJob& job);

/// Deep optimization with the loss averaged over positions LL, O and RR.
DesignResult design_multi_position(const DesignJob& job);

/// Dispatch on job.solver (multi-position when spmnet has more than one position).
DesignResult design(const DesignJob& job);

/// g_q = sum_l c_ql * h_l.
std::vector<Fir> reproduce(const ControlFilterBank& h, const ImpulseResponseSet& channels);

/// Unit impulse at tap 0 on the loudspeaker whose azimuth is nearest the source.
ControlFilterBank ori_bank(const VirtualSource& source, const ArrayGeometry& geometry, std::size_t filter_len);

/// Projection onto { y : ||y||_1 <= radius } (sorting variant of Duchi et al.).
void project_l1_ball(std::span<double> y, double radius);
/// Same for complex entries: magnitudes are projected, phases kept.
void project_l1_ball(std::span<cplx> y, double radius);

}  // namespace sfr
