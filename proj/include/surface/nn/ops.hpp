#pragma once

// Forward and backward kernels for the fixed layer set. Every backward
// function returns exact gradients of its forward definition.

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "surface/nn/tensor.hpp"

namespace surface::nn {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// ---------------------------------------------------------------- convolution

struct ConvGeometry {
  std::size_t in_channels, in_h, in_w;
  std::size_t kh, kw;
  std::size_t stride, padding;
  std::size_t out_h, out_w;

  std::size_t col_rows() const { return in_channels * kh * kw; }
  std::size_t col_cols() const { return out_h * out_w; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && padding == 0; }
};

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <class T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, std::size_t pad) {
  require(x.rank() == 4, "conv2d input must be NCHW, got " + shape_string(x.shape()));
  require(w.rank() == 4, "conv2d weight must be OIHW, got " + shape_string(w.shape()));
  require(x.dim(1) == w.dim(1), "conv2d channel mismatch: input " + shape_string(x.shape()) + " vs weight " +
                                    shape_string(w.shape()));
  require(stride >= 1, "conv2d stride must be >= 1");
  require(x.dim(2) + 2 * pad >= w.dim(2) && x.dim(3) + 2 * pad >= w.dim(3),
          "conv2d padded input " + shape_string(x.shape()) + " smaller than kernel " + shape_string(w.shape()));
  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), w.dim(2), w.dim(3), stride, pad, 0, 0};
  g.out_h = conv_out_dim(g.in_h, g.kh, stride, pad);
  g.out_w = conv_out_dim(g.in_w, g.kw, stride, pad);
  return g;
}

/// Unfolds one CHW image into a (C*kh*kw) x (out_h*out_w) patch matrix.
template <class T>
void im2col(const T* src, const ConvGeometry& g, T* col) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.in_h), W = static_cast<std::ptrdiff_t>(g.in_w);
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride), p = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* plane = src + c * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.col_cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          T* out = row + oy * g.out_w;
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(ki);
          if (iy < 0 || iy >= H) {
            std::fill(out, out + g.out_w, T{});
            continue;
          }
          const T* in = plane + iy * W;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(kj);
            out[ox] = (ix >= 0 && ix < W) ? in[ix] : T{};
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters patch-matrix gradients back onto the image.
template <class T>
void col2im_add(const T* col, const ConvGeometry& g, T* dst) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.in_h), W = static_cast<std::ptrdiff_t>(g.in_w);
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride), p = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    T* plane = dst + c * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.col_cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(ki);
          if (iy < 0 || iy >= H) continue;
          const T* in = row + oy * g.out_w;
          T* out = plane + iy * W;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(kj);
            if (ix >= 0 && ix < W) out[ix] += in[ox];
          }
        }
      }
    }
  }
}

/// y[n,o] = sum_{c,i,j} w[o,c,i,j] * x_padded[n,c,oy*s+i,ox*s+j] + b[o]
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                         std::size_t padding) {
  const ConvGeometry g = conv_geometry(x, w, stride, padding);
  const std::size_t N = x.dim(0), O = w.dim(0);
  require(b.size() == O, "conv2d bias length must equal output channels");
  Tensor<T> y({N, O, g.out_h, g.out_w});
  std::vector<T> col(g.pointwise() ? 0 : g.col_rows() * g.col_cols());
  const ConstMatrixMap<T> Wm(w.data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(g.col_rows()));
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(b.data(), static_cast<Eigen::Index>(O));
  for (std::size_t n = 0; n < N; ++n) {
    const T* xn = x.data() + n * g.in_channels * g.in_h * g.in_w;
    if (!g.pointwise()) im2col(xn, g, col.data());
    const ConstMatrixMap<T> C(g.pointwise() ? xn : col.data(), static_cast<Eigen::Index>(g.col_rows()),
                              static_cast<Eigen::Index>(g.col_cols()));
    MatrixMap<T> Y(y.data() + n * O * g.col_cols(), static_cast<Eigen::Index>(O),
                   static_cast<Eigen::Index>(g.col_cols()));
    Y.noalias() = Wm * C;
    Y.colwise() += bias;
  }
  return y;
}

template <class T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, std::size_t stride,
                             std::size_t padding) {
  const ConvGeometry g = conv_geometry(x, w, stride, padding);
  const std::size_t N = x.dim(0), O = w.dim(0);
  require(dy.shape() == Shape({N, O, g.out_h, g.out_w}), "conv2d output gradient has wrong shape " +
                                                             shape_string(dy.shape()));
  ConvGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>({O})};
  const auto rows = static_cast<Eigen::Index>(g.col_rows());
  const auto cols = static_cast<Eigen::Index>(g.col_cols());
  std::vector<T> col(g.pointwise() ? 0 : g.col_rows() * g.col_cols());
  std::vector<T> dcol(g.col_rows() * g.col_cols());
  const ConstMatrixMap<T> Wm(w.data(), static_cast<Eigen::Index>(O), rows);
  MatrixMap<T> dW(grads.weight.data(), static_cast<Eigen::Index>(O), rows);
  const std::size_t in_stride = g.in_channels * g.in_h * g.in_w;
  for (std::size_t n = 0; n < N; ++n) {
    const T* xn = x.data() + n * in_stride;
    if (!g.pointwise()) im2col(xn, g, col.data());
    const ConstMatrixMap<T> C(g.pointwise() ? xn : col.data(), rows, cols);
    const ConstMatrixMap<T> dY(dy.data() + n * O * g.col_cols(), static_cast<Eigen::Index>(O), cols);
    dW.noalias() += dY * C.transpose();
    // Plain loops: Eigen's vectorized reductions peel by buffer address, so
    // their rounding would depend on where the allocator put the tensor.
    const T* dyn = dy.data() + n * O * g.col_cols();
    for (std::size_t o = 0; o < O; ++o) {
      T acc = 0;
      for (std::size_t i = 0; i < g.col_cols(); ++i) acc += dyn[o * g.col_cols() + i];
      grads.bias[o] += acc;
    }
    T* dxn = grads.input.data() + n * in_stride;
    if (g.pointwise()) {
      MatrixMap<T> dX(dxn, rows, cols);
      dX.noalias() = Wm.transpose() * dY;
    } else {
      MatrixMap<T> dC(dcol.data(), rows, cols);
      dC.noalias() = Wm.transpose() * dY;
      col2im_add(dcol.data(), g, dxn);
    }
  }
  return grads;
}

// ----------------------------------------------------------- batch norm

/// Per-channel statistics over every axis except 1. Accepts (N,C) or (N,C,H,W).
struct ChannelLayout {
  std::size_t batch, channels, spatial;
  std::size_t count() const { return batch * spatial; }
};

template <class T>
ChannelLayout channel_layout(const Tensor<T>& x) {
  require(x.rank() == 2 || x.rank() == 4, "batch norm expects (N,C) or (N,C,H,W), got " + shape_string(x.shape()));
  return {x.dim(0), x.dim(1), x.rank() == 4 ? x.dim(2) * x.dim(3) : 1};
}

template <class T>
struct BatchNormCache {
  Tensor<T> normalized;        // x_hat
  std::vector<double> inv_std;  // per channel
  bool train = true;
};

/// Training-mode batch norm: normalizes with batch statistics (biased
/// variance) and folds them into the running averages as
/// running = momentum * running + (1 - momentum) * batch, using the unbiased
/// variance for running_var.
template <class T>
Tensor<T> batchnorm_forward_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                  Tensor<T>& running_mean, Tensor<T>& running_var, double momentum,
                                  double epsilon, BatchNormCache<T>& cache) {
  const ChannelLayout L = channel_layout(x);
  require(gamma.size() == L.channels && beta.size() == L.channels, "batch norm parameter length mismatch");
  if (L.batch < 2) throw ShapeError("batch norm in train mode needs a batch of at least 2");
  const double m = static_cast<double>(L.count());
  Tensor<T> y(x.shape());
  cache.normalized = Tensor<T>(x.shape());
  cache.inv_std.assign(L.channels, 0.0);
  cache.train = true;
  for (std::size_t c = 0; c < L.channels; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < L.batch; ++n) {
      const T* p = x.data() + (n * L.channels + c) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) sum += p[i];
    }
    const double mean = sum / m;
    double sq = 0.0;
    for (std::size_t n = 0; n < L.batch; ++n) {
      const T* p = x.data() + (n * L.channels + c) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const double inv_std = 1.0 / std::sqrt(var + epsilon);
    cache.inv_std[c] = inv_std;
    const double g = gamma[c], b = beta[c];
    for (std::size_t n = 0; n < L.batch; ++n) {
      const std::size_t off = (n * L.channels + c) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) {
        const double xh = (x[off + i] - mean) * inv_std;
        cache.normalized[off + i] = static_cast<T>(xh);
        y[off + i] = static_cast<T>(g * xh + b);
      }
    }
    running_mean[c] = static_cast<T>(momentum * running_mean[c] + (1.0 - momentum) * mean);
    running_var[c] = static_cast<T>(momentum * running_var[c] + (1.0 - momentum) * sq / (m - 1.0));
  }
  return y;
}

template <class T>
Tensor<T> batchnorm_forward_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                  const Tensor<T>& running_mean, const Tensor<T>& running_var, double epsilon,
                                  BatchNormCache<T>* cache = nullptr) {
  const ChannelLayout L = channel_layout(x);
  require(gamma.size() == L.channels && running_mean.size() == L.channels, "batch norm parameter length mismatch");
  Tensor<T> y(x.shape());
  if (cache) {
    cache->train = false;
    cache->inv_std.assign(L.channels, 0.0);
  }
  for (std::size_t c = 0; c < L.channels; ++c) {
    const double inv_std = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + epsilon);
    if (cache) cache->inv_std[c] = inv_std;
    const double scale = gamma[c] * inv_std;
    const double shift = beta[c] - running_mean[c] * scale;
    for (std::size_t n = 0; n < L.batch; ++n) {
      const std::size_t off = (n * L.channels + c) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) y[off + i] = static_cast<T>(x[off + i] * scale + shift);
    }
  }
  return y;
}

template <class T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

/// Backward for either mode; `x` is only needed for infer-mode gamma grads.
template <class T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>& gamma,
                                     const Tensor<T>& running_mean, const BatchNormCache<T>& cache) {
  const ChannelLayout L = channel_layout(dy);
  BatchNormGrads<T> grads{Tensor<T>(dy.shape()), Tensor<T>({L.channels}), Tensor<T>({L.channels})};
  const double m = static_cast<double>(L.count());
  for (std::size_t c = 0; c < L.channels; ++c) {
    const double inv_std = cache.inv_std[c];
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t n = 0; n < L.batch; ++n) {
      const std::size_t off = (n * L.channels + c) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) {
        const double xh = cache.train ? static_cast<double>(cache.normalized[off + i])
                                      : (x[off + i] - static_cast<double>(running_mean[c])) * inv_std;
        sum_dy += dy[off + i];
        sum_dy_xh += dy[off + i] * xh;
      }
    }
    grads.beta[c] = static_cast<T>(sum_dy);
    grads.gamma[c] = static_cast<T>(sum_dy_xh);
    const double g = gamma[c];
    for (std::size_t n = 0; n < L.batch; ++n) {
      const std::size_t off = (n * L.channels + c) * L.spatial;
      for (std::size_t i = 0; i < L.spatial; ++i) {
        if (cache.train) {
          const double xh = cache.normalized[off + i];
          grads.input[off + i] =
              static_cast<T>(g * inv_std / m * (m * dy[off + i] - sum_dy - xh * sum_dy_xh));
        } else {
          grads.input[off + i] = static_cast<T>(dy[off + i] * g * inv_std);
        }
      }
    }
  }
  return grads;
}

// ------------------------------------------------------------------ pooling

template <class T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Max pooling; padded cells never win. Ties resolve to the first position
/// in row-major window order.
template <class T>
MaxPoolResult<T> maxpool2d_forward(const Tensor<T>& x, std::size_t kernel, std::size_t stride,
                                   std::size_t padding) {
  require(x.rank() == 4, "maxpool2d input must be NCHW");
  require(kernel >= 1 && stride >= 1 && padding < kernel, "maxpool2d invalid geometry");
  require(x.dim(2) + 2 * padding >= kernel && x.dim(3) + 2 * padding >= kernel, "maxpool2d input smaller than window");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = conv_out_dim(H, kernel, stride, padding), Wo = conv_out_dim(W, kernel, stride, padding);
  MaxPoolResult<T> r{Tensor<T>({N, C, Ho, Wo}), std::vector<std::size_t>(N * C * Ho * Wo)};
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox, ++o) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t arg = base;
        bool found = false;
        for (std::size_t ki = 0; ki < kernel; ++ki) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kj = 0; kj < kernel; ++kj) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            const std::size_t idx = base + static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix);
            if (!found || x[idx] > best) {
              best = x[idx];
              arg = idx;
              found = true;
            }
          }
        }
        r.output[o] = best;
        r.argmax[o] = arg;
      }
    }
  }
  return r;
}

template <class T>
Tensor<T> maxpool2d_backward(const Tensor<T>& dy, const std::vector<std::size_t>& argmax, const Shape& input_shape) {
  require(dy.size() == argmax.size(), "maxpool2d gradient/argmax size mismatch");
  Tensor<T> dx(input_shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

template <class T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
  require(x.rank() == 4, "global_avg_pool input must be NCHW");
  const std::size_t N = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
  Tensor<T> y({N, C});
  for (std::size_t i = 0; i < N * C; ++i) {
    double sum = 0.0;
    const T* p = x.data() + i * S;
    for (std::size_t s = 0; s < S; ++s) sum += p[s];
    y[i] = static_cast<T>(sum / static_cast<double>(S));
  }
  return y;
}

template <class T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& dy, const Shape& input_shape) {
  const std::size_t S = input_shape[2] * input_shape[3];
  require(dy.size() * S == shape_size(input_shape), "global_avg_pool gradient shape mismatch");
  Tensor<T> dx(input_shape);
  const T scale = static_cast<T>(1.0 / static_cast<double>(S));
  for (std::size_t i = 0; i < dy.size(); ++i) std::fill_n(dx.data() + i * S, S, dy[i] * scale);
  return dx;
}

// -------------------------------------------------------------------- dense

/// y = x * W^T + b with x (N, in), W (out, in).
template <class T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(1), "dense shape mismatch: input " +
                                                                      shape_string(x.shape()) + " weight " +
                                                                      shape_string(w.shape()));
  require(b.size() == w.dim(0), "dense bias length mismatch");
  const auto N = static_cast<Eigen::Index>(x.dim(0)), I = static_cast<Eigen::Index>(x.dim(1)),
             O = static_cast<Eigen::Index>(w.dim(0));
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  Tensor<T> y({x.dim(0), w.dim(0)});
  const ConstMatrixMap<T> W(w.data(), O, I);
  const Eigen::Map<const Vector> bias(b.data(), O);
  // One matrix-vector product per sample: a row's result never depends on
  // its position in the batch.
  for (Eigen::Index n = 0; n < N; ++n) {
    Eigen::Map<Vector> yn(y.data() + n * O, O);
    yn.noalias() = W * Eigen::Map<const Vector>(x.data() + n * I, I);
    yn += bias;
  }
  return y;
}

template <class T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <class T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy) {
  require(dy.rank() == 2 && dy.dim(0) == x.dim(0) && dy.dim(1) == w.dim(0), "dense gradient shape mismatch");
  const auto N = static_cast<Eigen::Index>(x.dim(0)), I = static_cast<Eigen::Index>(x.dim(1)),
             O = static_cast<Eigen::Index>(w.dim(0));
  DenseGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>({w.dim(0)})};
  const ConstMatrixMap<T> dY(dy.data(), N, O);
  MatrixMap<T>(g.weight.data(), O, I).noalias() = dY.transpose() * ConstMatrixMap<T>(x.data(), N, I);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index o = 0; o < O; ++o) g.bias[static_cast<std::size_t>(o)] += dY(n, o);
  MatrixMap<T>(g.input.data(), N, I).noalias() = dY * ConstMatrixMap<T>(w.data(), O, I);
  return g;
}

// ------------------------------------------------------- elementwise / plumbing

template <class T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{} ? x[i] : T{};
  return y;
}

/// Uses the forward output; the subgradient at 0 is 0.
template <class T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& y) {
  require(dy.shape() == y.shape(), "relu gradient shape mismatch");
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = y[i] > T{} ? dy[i] : T{};
  return dx;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

/// Stacks NCHW (or NC) tensors along the channel axis.
template <class T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  require(!parts.empty(), "concat_channels needs at least one input");
  const Tensor<T>& first = *parts.front();
  require(first.rank() >= 2, "concat_channels needs rank >= 2");
  std::size_t channels = 0;
  for (const Tensor<T>* p : parts) {
    require(p->rank() == first.rank() && p->dim(0) == first.dim(0), "concat_channels batch/rank mismatch");
    for (std::size_t d = 2; d < first.rank(); ++d) require(p->dim(d) == first.dim(d), "concat_channels spatial mismatch");
    channels += p->dim(1);
  }
  Shape shape = first.shape();
  shape[1] = channels;
  Tensor<T> y(shape);
  const std::size_t N = first.dim(0);
  const std::size_t inner = shape_size(shape) / (N * channels);
  for (std::size_t n = 0; n < N; ++n) {
    T* dst = y.data() + n * channels * inner;
    for (const Tensor<T>* p : parts) {
      const std::size_t block = p->dim(1) * inner;
      std::copy_n(p->data() + n * block, block, dst);
      dst += block;
    }
  }
  return y;
}

/// Inverse of concat_channels for gradients.
template <class T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& y, const std::vector<std::size_t>& widths) {
  std::size_t total = 0;
  for (std::size_t w : widths) total += w;
  require(y.rank() >= 2 && y.dim(1) == total, "split_channels width mismatch");
  const std::size_t N = y.dim(0), inner = y.size() / (N * total);
  std::vector<Tensor<T>> parts;
  std::size_t offset = 0;
  for (std::size_t w : widths) {
    Shape shape = y.shape();
    shape[1] = w;
    Tensor<T> part(shape);
    for (std::size_t n = 0; n < N; ++n) {
      std::copy_n(y.data() + (n * total + offset) * inner, w * inner, part.data() + n * w * inner);
    }
    offset += w;
    parts.push_back(std::move(part));
  }
  return parts;
}

}  // namespace surface::nn
