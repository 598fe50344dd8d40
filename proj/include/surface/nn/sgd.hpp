#pragma once

#include <vector>

#include "surface/nn/tensor.hpp"

namespace surface::nn {

struct SgdConfig {
  double learning_rate = 3e-5;
  double momentum = 0.0;
};

inline void validate(const SgdConfig& c) {
  if (!(c.learning_rate >= 0.0)) throw ShapeError("learning rate must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ShapeError("momentum must lie in [0, 1)");
}

/// velocity <- momentum * velocity + grad; param <- param - lr * velocity.
/// With momentum 0 this is plain gradient descent and `velocity` is unused.
template <class T>
void sgd_step(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& velocity, const SgdConfig& config) {
  require(param.shape() == grad.shape(), "sgd: parameter " + shape_string(param.shape()) + " vs gradient " +
                                             shape_string(grad.shape()));
  const T lr = static_cast<T>(config.learning_rate);
  if (config.momentum == 0.0) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
    return;
  }
  if (velocity.shape() != param.shape()) velocity = Tensor<T>(param.shape());
  const T mu = static_cast<T>(config.momentum);
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = mu * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

/// Holds one velocity buffer per parameter, in registration order.
template <class T>
class Sgd {
 public:
  explicit Sgd(SgdConfig config) : config_(config) { validate(config_); }

  const SgdConfig& config() const { return config_; }

  template <class ParamRange>
  void step(ParamRange& params) {
    if (velocity_.size() != params.size()) velocity_.assign(params.size(), Tensor<T>());
    std::size_t i = 0;
    for (auto& p : params) sgd_step(*p.value, *p.grad, velocity_[i++], config_);
  }

 private:
  SgdConfig config_;
  std::vector<Tensor<T>> velocity_;
};

}  // namespace surface::nn
