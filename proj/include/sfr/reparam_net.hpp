#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace sfr {

struct ReparamNetConfig {
  std::size_t input_dim = 64;
  std::vector<std::size_t> hidden{256, 256};
  double output_scale = 1e-2;  // applied to the last layer at init so h starts near 0
};

/// MLP with frozen random input whose output is the decision variable.
/// Parameters live in one flat vector so the optimizer and snapshots stay simple.
class ReparamNet {
 public:
  ReparamNet(std::size_t output_dim, const ReparamNetConfig& config, std::uint64_t seed);

  std::size_t output_dim() const { return out_dim_; }
  std::size_t param_count() const { return static_cast<std::size_t>(theta_.size()); }
  const Eigen::VectorXd& input() const { return input_; }
  Eigen::VectorXd& params() { return theta_; }
  const Eigen::VectorXd& params() const { return theta_; }

  /// Output for the frozen input; caches activations for backward().
  const Eigen::VectorXd& forward();
  /// Gradient w.r.t. the flat parameters given d(loss)/d(output). Requires a prior forward().
  const Eigen::VectorXd& backward(const Eigen::VectorXd& d_out);

 private:
  struct Layer {
    Eigen::Index rows, cols, w_off, b_off;
  };
  std::size_t out_dim_;
  Eigen::VectorXd input_;
  Eigen::VectorXd theta_;
  Eigen::VectorXd grad_;
  std::vector<Layer> layers_;
  std::vector<Eigen::VectorXd> act_;  // act_[0] = input, act_[i+1] = output of layer i
};

/// Adaptive-moment optimizer over a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad);
  std::size_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace sfr
