#pragma once

// Test-only oracles: central finite differences and naive reference kernels.
// Nothing here shares code with the implementation under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "surface/nn/tensor.hpp"

namespace surface::testing {

using nn::Tensor;

inline Tensor<double> random_tensor(const nn::Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

/// d f / d x by central differences, perturbing `x` in place and restoring it.
inline Tensor<double> numerical_gradient(const std::function<double()>& f, Tensor<double>& x, double h = 1e-5) {
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f();
    x[i] = saved - h;
    const double fm = f();
    x[i] = saved;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Largest elementwise |a - n| / max(|a|, |n|, floor). The floor keeps
/// near-zero gradients from turning rounding noise into huge ratios.
inline double max_relative_error(const Tensor<double>& analytic, const Tensor<double>& numeric, double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

/// Scalar probe L = sum(y * r) so that dL/dy = r.
inline double dot(const Tensor<double>& y, const Tensor<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

/// Direct six-loop convolution with zero padding.
template <class T>
Tensor<T> naive_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                       std::size_t pad) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const std::size_t Ho = (H + 2 * pad - KH) / stride + 1, Wo = (W + 2 * pad - KW) / stride + 1;
  Tensor<T> y({N, O, Ho, Wo});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = b[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < KH; ++i)
              for (std::size_t j = 0; j < KW; ++j) {
                const long iy = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                acc += static_cast<double>(w.at(o, c, i, j)) * x.at(n, c, static_cast<std::size_t>(iy),
                                                                   static_cast<std::size_t>(ix));
              }
          y.at(n, o, oy, ox) = static_cast<T>(acc);
        }
  return y;
}

}  // namespace surface::testing
