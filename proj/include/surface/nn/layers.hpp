#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "surface/nn/ops.hpp"

namespace surface::nn {

enum class Mode { train, infer };

/// Non-owning handle on a named model tensor. Trainable parameters carry a
/// gradient slot; buffers such as batch-norm running statistics do not.
template <class T>
struct TensorRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;

  bool trainable() const { return grad != nullptr; }
};

template <class T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;

  explicit Parameter(Shape shape = {1}) : value(shape), grad(shape) {}
};

/// A differentiable stage. backward() must follow the forward() whose
/// activations it consumes; it overwrites the gradients of owned parameters.
template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual void collect(const std::string& /*prefix*/, std::vector<TensorRef<T>>& /*out*/) {}
};

template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
         std::size_t padding)
      : weight_({out_channels, in_channels, kernel, kernel}), bias_({out_channels}), stride_(stride), padding_(padding) {
    require(kernel % 2 == 1, "conv kernels must be odd");
    require(stride >= 1, "conv stride must be >= 1");
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    input_ = x;
    return conv2d_forward(x, weight_.value, bias_.value, stride_, padding_);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    ConvGrads<T> g = conv2d_backward(input_, weight_.value, dy, stride_, padding_);
    weight_.grad = std::move(g.weight);
    bias_.grad = std::move(g.bias);
    return std::move(g.input);
  }

  void collect(const std::string& prefix, std::vector<TensorRef<T>>& out) override {
    out.push_back({prefix + "weight", &weight_.value, &weight_.grad});
    out.push_back({prefix + "bias", &bias_.value, &bias_.grad});
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  Parameter<T> weight_, bias_;
  std::size_t stride_, padding_;
  Tensor<T> input_;
};

template <class T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(std::size_t channels, double momentum, double epsilon)
      : gamma_({channels}), beta_({channels}), running_mean_({channels}, T{0}), running_var_({channels}, T{1}),
        momentum_(momentum), epsilon_(epsilon) {
    require(epsilon > 0.0, "batch norm epsilon must be positive");
    require(momentum >= 0.0 && momentum <= 1.0, "batch norm momentum must lie in [0, 1]");
    gamma_.value.fill(T{1});
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (mode == Mode::train) {
      return batchnorm_forward_train(x, gamma_.value, beta_.value, running_mean_, running_var_, momentum_, epsilon_,
                                     cache_);
    }
    input_ = x;
    return batchnorm_forward_infer(x, gamma_.value, beta_.value, running_mean_, running_var_, epsilon_, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    BatchNormGrads<T> g = batchnorm_backward(dy, input_, gamma_.value, running_mean_, cache_);
    gamma_.grad = std::move(g.gamma);
    beta_.grad = std::move(g.beta);
    return std::move(g.input);
  }

  void collect(const std::string& prefix, std::vector<TensorRef<T>>& out) override {
    out.push_back({prefix + "gamma", &gamma_.value, &gamma_.grad});
    out.push_back({prefix + "beta", &beta_.value, &beta_.grad});
    out.push_back({prefix + "running_mean", &running_mean_, nullptr});
    out.push_back({prefix + "running_var", &running_var_, nullptr});
  }

 private:
  Parameter<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  double momentum_, epsilon_;
  BatchNormCache<T> cache_;
  Tensor<T> input_;
};

template <class T>
class ReLU final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    output_ = relu_forward(x);
    return output_;
  }
  Tensor<T> backward(const Tensor<T>& dy) override { return relu_backward(dy, output_); }

 private:
  Tensor<T> output_;
};

template <class T>
class MaxPool2d final : public Layer<T> {
 public:
  MaxPool2d(std::size_t kernel, std::size_t stride, std::size_t padding)
      : kernel_(kernel), stride_(stride), padding_(padding) {}

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    input_shape_ = x.shape();
    MaxPoolResult<T> r = maxpool2d_forward(x, kernel_, stride_, padding_);
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
  }
  Tensor<T> backward(const Tensor<T>& dy) override { return maxpool2d_backward(dy, argmax_, input_shape_); }

 private:
  std::size_t kernel_, stride_, padding_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <class T>
class GlobalAvgPool final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    input_shape_ = x.shape();
    return global_avg_pool_forward(x);
  }
  Tensor<T> backward(const Tensor<T>& dy) override { return global_avg_pool_backward(dy, input_shape_); }

 private:
  Shape input_shape_;
};

template <class T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in_features, std::size_t out_features)
      : weight_({out_features, in_features}), bias_({out_features}) {}

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    input_ = x;
    return dense_forward(x, weight_.value, bias_.value);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    DenseGrads<T> g = dense_backward(input_, weight_.value, dy);
    weight_.grad = std::move(g.weight);
    bias_.grad = std::move(g.bias);
    return std::move(g.input);
  }

  void collect(const std::string& prefix, std::vector<TensorRef<T>>& out) override {
    out.push_back({prefix + "weight", &weight_.value, &weight_.grad});
    out.push_back({prefix + "bias", &bias_.value, &bias_.grad});
  }

 private:
  Parameter<T> weight_, bias_;
  Tensor<T> input_;
};

/// Ordered chain of named layers. Tensor names are "<layer>.<tensor>".
template <class T>
class Sequential final : public Layer<T> {
 public:
  Sequential& add(std::string name, std::unique_ptr<Layer<T>> layer) {
    names_.push_back(std::move(name));
    layers_.push_back(std::move(layer));
    return *this;
  }

  template <class L, class... Args>
  L& emplace(std::string name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    add(std::move(name), std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (layers_.empty()) return x;
    Tensor<T> h = layers_.front()->forward(x, mode);
    for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->forward(h, mode);
    return h;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    if (layers_.empty()) return dy;
    Tensor<T> g = layers_.back()->backward(dy);
    for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g);
    return g;
  }

  void collect(const std::string& prefix, std::vector<TensorRef<T>>& out) override {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(prefix + names_[i] + ".", out);
  }

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Appends conv -> batch norm -> relu under `<name>_conv`, `<name>_bn`.
template <class T>
void add_conv_bn_relu(Sequential<T>& seq, const std::string& name, std::size_t in, std::size_t out,
                      std::size_t kernel, std::size_t stride, double bn_momentum, double bn_epsilon) {
  seq.template emplace<Conv2d<T>>(name + "_conv", in, out, kernel, stride, kernel / 2);
  seq.template emplace<BatchNorm<T>>(name + "_bn", out, bn_momentum, bn_epsilon);
  seq.template emplace<ReLU<T>>(name + "_relu");
}

}  // namespace surface::nn
