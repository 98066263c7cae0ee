#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "amg/random.hpp"

namespace amg::agents {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense network with rectifier hidden layers and a linear output layer. All
/// weights live in one flat vector; layer matrices are column-major views.
template <typename Scalar>
class Mlp {
 public:
  using Vec = VectorX<Scalar>;
  using ConstMatMap = Eigen::Map<const MatrixX<Scalar>>;
  using MatMap = Eigen::Map<MatrixX<Scalar>>;

  /// Intermediate values of one forward pass, kept for backprop.
  struct Tape {
    std::vector<Vec> inputs;  // input of each layer
    std::vector<Vec> pre;     // pre-activation of each layer
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs input and output sizes");
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw std::invalid_argument("layer sizes must be positive");
      n += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_ = Vec::Zero(n);
  }

  /// He-uniform weights, zero biases.
  void init(Rng& rng) {
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      auto w = weights(l);
      const double limit = std::sqrt(6.0 / sizes_[l]);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(uniform_real(rng, -limit, limit));
      bias(l).setZero();
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t layers() const { return sizes_.size() - 1; }
  Eigen::Index parameter_count() const { return params_.size(); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  ConstMatMap weights(std::size_t l) const { return {params_.data() + offset(l), sizes_[l + 1], sizes_[l]}; }
  MatMap weights(std::size_t l) { return {params_.data() + offset(l), sizes_[l + 1], sizes_[l]}; }
  auto bias(std::size_t l) const { return params_.segment(offset(l) + sizes_[l + 1] * sizes_[l], sizes_[l + 1]); }
  auto bias(std::size_t l) { return params_.segment(offset(l) + sizes_[l + 1] * sizes_[l], sizes_[l + 1]); }

  Vec forward(const Vec& x) const {
    Vec a = x;
    for (std::size_t l = 0; l < layers(); ++l) {
      Vec z = weights(l) * a + bias(l);
      a = l + 1 < layers() ? Vec(z.cwiseMax(Scalar(0))) : z;
    }
    return a;
  }

  Vec forward(const Vec& x, Tape& tape) const {
    tape.inputs.clear();
    tape.pre.clear();
    Vec a = x;
    for (std::size_t l = 0; l < layers(); ++l) {
      tape.inputs.push_back(a);
      Vec z = weights(l) * a + bias(l);
      tape.pre.push_back(z);
      a = l + 1 < layers() ? Vec(z.cwiseMax(Scalar(0))) : z;
    }
    return a;
  }

  /// Adds d(loss)/d(params) to `grad` given d(loss)/d(output).
  void backward(const Tape& tape, const Vec& d_out, Vec& grad) const {
    Vec delta = d_out;
    for (std::size_t l = layers(); l-- > 0;) {
      if (l + 1 < layers()) {
        delta = delta.cwiseProduct(tape.pre[l].unaryExpr([](Scalar z) { return z > Scalar(0) ? Scalar(1) : Scalar(0); }));
      }
      MatMap gw(grad.data() + offset(l), sizes_[l + 1], sizes_[l]);
      gw.noalias() += delta * tape.inputs[l].transpose();
      grad.segment(offset(l) + sizes_[l + 1] * sizes_[l], sizes_[l + 1]) += delta;
      if (l > 0) delta = weights(l).transpose() * delta;
    }
  }

 private:
  Eigen::Index offset(std::size_t l) const {
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < l; ++k) at += static_cast<Eigen::Index>(sizes_[k + 1]) * (sizes_[k] + 1);
    return at;
  }

  std::vector<int> sizes_;
  Vec params_;
};

/// Adam over a flat parameter vector.
template <typename Scalar>
class Adam {
 public:
  using Vec = VectorX<Scalar>;

  Adam() = default;
  Adam(Eigen::Index n, Scalar lr) : lr_(lr), m_(Vec::Zero(n)), v_(Vec::Zero(n)) {}

  void step(Vec& params, const Vec& grad) {
    ++t_;
    m_ = b1_ * m_ + (Scalar(1) - b1_) * grad;
    v_ = b2_ * v_ + (Scalar(1) - b2_) * grad.cwiseProduct(grad);
    const Scalar c1 = Scalar(1) - std::pow(b1_, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2_, Scalar(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  Scalar learning_rate() const { return lr_; }

 private:
  Scalar lr_ = Scalar(1e-3);
  Scalar b1_ = Scalar(0.9), b2_ = Scalar(0.999), eps_ = Scalar(1e-8);
  long t_ = 0;
  Vec m_, v_;
};

}  // namespace amg::agents
