#include "sfr/reparam_net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sfr {

ReparamNet::ReparamNet(std::size_t output_dim, const ReparamNetConfig& config, std::uint64_t seed)
    : out_dim_(output_dim) {
  if (output_dim == 0 || config.input_dim == 0) throw std::invalid_argument("ReparamNet: empty dimension");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  input_.resize(static_cast<Eigen::Index>(config.input_dim));
  for (Eigen::Index i = 0; i < input_.size(); ++i) input_(i) = unit(rng);

  std::vector<std::size_t> dims{config.input_dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(output_dim);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer l{static_cast<Eigen::Index>(dims[i + 1]), static_cast<Eigen::Index>(dims[i]), 0, 0};
    l.w_off = off;
    off += l.rows * l.cols;
    l.b_off = off;
    off += l.rows;
    layers_.push_back(l);
  }
  theta_ = Eigen::VectorXd::Zero(off);
  grad_ = Eigen::VectorXd::Zero(off);

  // Glorot-uniform weights, zero biases.
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const double limit = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
    const double scale = (i + 1 == layers_.size()) ? config.output_scale : 1.0;
    for (Eigen::Index k = 0; k < l.rows * l.cols; ++k) theta_(l.w_off + k) = scale * limit * unit(rng);
  }
  act_.resize(layers_.size() + 1);
}

const Eigen::VectorXd& ReparamNet::forward() {
  act_[0] = input_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    Eigen::Map<const Eigen::MatrixXd> w(theta_.data() + l.w_off, l.rows, l.cols);
    Eigen::Map<const Eigen::VectorXd> b(theta_.data() + l.b_off, l.rows);
    act_[i + 1].noalias() = w * act_[i];
    act_[i + 1] += b;
    if (i + 1 < layers_.size()) act_[i + 1] = act_[i + 1].array().tanh();
  }
  return act_.back();
}

const Eigen::VectorXd& ReparamNet::backward(const Eigen::VectorXd& d_out) {
  if (d_out.size() != static_cast<Eigen::Index>(out_dim_)) throw std::invalid_argument("ReparamNet: gradient size mismatch");
  Eigen::VectorXd delta = d_out;
  for (std::size_t j = layers_.size(); j-- > 0;) {
    const Layer& l = layers_[j];
    Eigen::Map<const Eigen::MatrixXd> w(theta_.data() + l.w_off, l.rows, l.cols);
    Eigen::Map<Eigen::MatrixXd> gw(grad_.data() + l.w_off, l.rows, l.cols);
    Eigen::Map<Eigen::VectorXd> gb(grad_.data() + l.b_off, l.rows);
    gw.noalias() = delta * act_[j].transpose();
    gb = delta;
    if (j == 0) break;
    Eigen::VectorXd back = w.transpose() * delta;
    // act_[j] holds tanh output of the previous layer
    delta = back.array() * (1.0 - act_[j].array().square());
  }
  return grad_;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {
  if (!(lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be positive");
}

void Adam::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  const double eps = eps_ * std::sqrt(c2);
  double* th = theta.data();
  double* m = m_.data();
  double* v = v_.data();
  const double* g = grad.data();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
    v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
    th[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
  }
}

}  // namespace sfr
