#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "surface/nn/tensor.hpp"

namespace surface::nn {

/// Label smoothing: target = (1 - epsilon) * onehot + epsilon / K.
struct SmoothedLossSpec {
  double epsilon = 0.1;
  std::size_t num_classes = 6;
};

inline std::vector<double> smoothed_targets(std::size_t label, const SmoothedLossSpec& spec) {
  require(label < spec.num_classes, "label " + std::to_string(label) + " out of range");
  require(spec.epsilon >= 0.0 && spec.epsilon < 1.0, "smoothing epsilon must lie in [0, 1)");
  std::vector<double> t(spec.num_classes, spec.epsilon / static_cast<double>(spec.num_classes));
  t[label] += 1.0 - spec.epsilon;
  return t;
}

/// Row-wise softmax of (B, K) logits.
template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require(logits.rank() == 2, "softmax expects (B, K) logits");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const T* row = logits.data() + b * K;
    const double mx = *std::max_element(row, row + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
    for (std::size_t k = 0; k < K; ++k) p[b * K + k] = static_cast<T>(std::exp(row[k] - mx) / z);
  }
  return p;
}

template <class T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // dLoss/dLogits
};

/// Mean over the batch of -sum_k t_k log softmax(logits)_k with smoothed
/// targets. Gradient is (softmax - t) / B.
template <class T>
LossResult<T> smoothed_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels,
                                     const SmoothedLossSpec& spec) {
  require(logits.rank() == 2, "cross entropy expects (B, K) logits");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  require(K == spec.num_classes, "logit width " + std::to_string(K) + " does not match " +
                                     std::to_string(spec.num_classes) + " classes");
  require(labels.size() == B, "label count does not match batch size");
  LossResult<T> r{0.0, Tensor<T>(logits.shape())};
  for (std::size_t b = 0; b < B; ++b) {
    const std::vector<double> t = smoothed_targets(labels[b], spec);
    const T* row = logits.data() + b * K;
    const double mx = *std::max_element(row, row + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t k = 0; k < K; ++k) {
      const double log_p = row[k] - log_z;
      r.loss -= t[k] * log_p;
      r.grad[b * K + k] = static_cast<T>((std::exp(log_p) - t[k]) / static_cast<double>(B));
    }
  }
  r.loss /= static_cast<double>(B);
  return r;
}

}  // namespace surface::nn
