#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "surface/nn/layers.hpp"
#include "surface/rng.hpp"

namespace surface::nn {

enum class Family { mini_resnet, mini_inception };

inline std::string_view to_string(Family f) { return f == Family::mini_resnet ? "mini_resnet" : "mini_inception"; }

inline std::optional<Family> parse_family(std::string_view s) {
  if (s == "mini_resnet") return Family::mini_resnet;
  if (s == "mini_inception") return Family::mini_inception;
  return std::nullopt;
}

/// Two 3x3 conv-bn stages added to a skip path, then ReLU. The skip path is a
/// 1x1 conv-bn projection exactly when the shape changes.
struct ResidualBlockSpec {
  std::size_t in_channels = 16;
  std::size_t out_channels = 16;
  std::size_t stride = 1;
  bool projection = false;

  bool needs_projection() const { return in_channels != out_channels || stride != 1; }

  friend bool operator==(const ResidualBlockSpec&, const ResidualBlockSpec&) = default;
};

/// Four parallel branches concatenated along channels:
/// 1x1 | 1x1 reduce -> 3x3 | 1x1 reduce -> 3x3 -> 3x3 | 3x3 max pool -> 1x1.
struct InceptionBlockSpec {
  std::size_t in_channels = 16;
  std::size_t branch1x1 = 16;
  std::size_t reduce3x3 = 16;
  std::size_t branch3x3 = 24;
  std::size_t reduce_double = 8;
  std::size_t branch_double = 12;
  std::size_t pool_projection = 12;
  /// Follow the block with a 3x3 stride-2 max pool.
  bool downsample = false;

  std::size_t out_channels() const { return branch1x1 + branch3x3 + branch_double + pool_projection; }

  friend bool operator==(const InceptionBlockSpec&, const InceptionBlockSpec&) = default;
};

struct ModelSpec {
  Family family = Family::mini_resnet;
  std::size_t input_channels = 3;
  std::size_t stem_width = 16;
  std::size_t stem_kernel = 7;
  std::size_t stem_stride = 2;
  std::vector<ResidualBlockSpec> residual_blocks;
  std::vector<InceptionBlockSpec> inception_blocks;
  std::size_t num_classes = 6;
  std::uint64_t init_seed = 0;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Residual stages of `blocks_per_stage` blocks; every stage after the
/// first halves the resolution in its first block.
inline std::vector<ResidualBlockSpec> residual_stages(std::size_t stem_width, const std::vector<std::size_t>& widths,
                                                      const std::vector<std::size_t>& blocks_per_stage) {
  std::vector<ResidualBlockSpec> blocks;
  std::size_t in = stem_width;
  for (std::size_t s = 0; s < widths.size(); ++s) {
    for (std::size_t b = 0; b < blocks_per_stage[s]; ++b) {
      ResidualBlockSpec blk{in, widths[s], (s > 0 && b == 0) ? std::size_t{2} : std::size_t{1}, false};
      blk.projection = blk.needs_projection();
      blocks.push_back(blk);
      in = widths[s];
    }
  }
  return blocks;
}

/// Desk-scale residual network: 7x7/2 stem (16) -> stages 16/32/64 with two
/// blocks each -> global average pool -> dense.
inline ModelSpec mini_resnet_spec(std::uint64_t seed = 0, std::size_t num_classes = 6) {
  ModelSpec spec;
  spec.family = Family::mini_resnet;
  spec.stem_width = 16;
  spec.residual_blocks = residual_stages(16, {16, 32, 64}, {2, 2, 2});
  spec.num_classes = num_classes;
  spec.init_seed = seed;
  return spec;
}

/// Desk-scale inception network: 7x7/2 stem (16) -> three 64-channel
/// inception blocks, the first two followed by stride-2 pooling.
inline ModelSpec mini_inception_spec(std::uint64_t seed = 0, std::size_t num_classes = 6) {
  ModelSpec spec;
  spec.family = Family::mini_inception;
  spec.stem_width = 16;
  std::size_t in = spec.stem_width;
  for (int i = 0; i < 3; ++i) {
    InceptionBlockSpec blk;
    blk.in_channels = in;
    blk.downsample = i < 2;
    spec.inception_blocks.push_back(blk);
    in = blk.out_channels();
  }
  spec.num_classes = num_classes;
  spec.init_seed = seed;
  return spec;
}

/// Full-depth residual layout (3-4-6-3 stages, widths 64..512) expressed with
/// the same basic blocks. Not a layer-exact ResNet50.
inline ModelSpec deep_resnet_spec(std::uint64_t seed = 0) {
  ModelSpec spec;
  spec.family = Family::mini_resnet;
  spec.stem_width = 64;
  spec.residual_blocks = residual_stages(64, {64, 128, 256, 512}, {3, 4, 6, 3});
  spec.init_seed = seed;
  return spec;
}

/// Deeper inception layout: nine blocks widening from 256 to 768 channels.
inline ModelSpec deep_inception_spec(std::uint64_t seed = 0) {
  ModelSpec spec;
  spec.family = Family::mini_inception;
  spec.stem_width = 64;
  std::size_t in = spec.stem_width;
  for (int i = 0; i < 9; ++i) {
    const std::size_t scale = i < 3 ? 1 : (i < 6 ? 2 : 3);
    InceptionBlockSpec blk{in, 64 * scale, 48 * scale, 64 * scale, 64 * scale, 96 * scale, 32 * scale, i == 2 || i == 5};
    spec.inception_blocks.push_back(blk);
    in = blk.out_channels();
  }
  spec.init_seed = seed;
  return spec;
}

/// Looks up the named configurations above.
inline std::optional<ModelSpec> named_model_spec(std::string_view name, std::uint64_t seed = 0) {
  if (name == "mini_resnet") return mini_resnet_spec(seed);
  if (name == "mini_inception") return mini_inception_spec(seed);
  if (name == "deep_resnet") return deep_resnet_spec(seed);
  if (name == "deep_inception") return deep_inception_spec(seed);
  return std::nullopt;
}

/// Throws ShapeError on inconsistent channel plumbing.
inline void validate(const ModelSpec& spec) {
  require(spec.num_classes >= 1, "model needs at least one class");
  require(spec.input_channels >= 1 && spec.stem_width >= 1, "model widths must be positive");
  require(spec.stem_kernel % 2 == 1 && spec.stem_stride >= 1, "stem kernel must be odd, stride >= 1");
  std::size_t channels = spec.stem_width;
  if (spec.family == Family::mini_resnet) {
    require(spec.inception_blocks.empty(), "mini_resnet spec must not list inception blocks");
    for (std::size_t i = 0; i < spec.residual_blocks.size(); ++i) {
      const ResidualBlockSpec& b = spec.residual_blocks[i];
      const std::string where = "residual block " + std::to_string(i);
      require(b.in_channels == channels, where + ": expects " + std::to_string(b.in_channels) +
                                             " input channels, previous stage produces " + std::to_string(channels));
      require(b.out_channels >= 1 && b.stride >= 1, where + ": invalid width or stride");
      require(b.projection == b.needs_projection(),
              where + ": projection must be used exactly when channels or stride change");
      channels = b.out_channels;
    }
  } else {
    require(spec.residual_blocks.empty(), "mini_inception spec must not list residual blocks");
    for (std::size_t i = 0; i < spec.inception_blocks.size(); ++i) {
      const InceptionBlockSpec& b = spec.inception_blocks[i];
      const std::string where = "inception block " + std::to_string(i);
      require(b.in_channels == channels, where + ": expects " + std::to_string(b.in_channels) +
                                             " input channels, previous stage produces " + std::to_string(channels));
      require(b.branch1x1 >= 1 && b.reduce3x3 >= 1 && b.branch3x3 >= 1 && b.reduce_double >= 1 &&
                  b.branch_double >= 1 && b.pool_projection >= 1,
              where + ": all branch widths must be >= 1");
      channels = b.out_channels();
    }
  }
}

/// Channels entering the classifier head.
inline std::size_t feature_channels(const ModelSpec& spec) {
  if (spec.family == Family::mini_resnet) {
    return spec.residual_blocks.empty() ? spec.stem_width : spec.residual_blocks.back().out_channels;
  }
  return spec.inception_blocks.empty() ? spec.stem_width : spec.inception_blocks.back().out_channels();
}

// ----------------------------------------------------------------- JSON

inline nlohmann::ordered_json to_json(const ModelSpec& spec) {
  nlohmann::ordered_json j;
  j["family"] = std::string(to_string(spec.family));
  j["input_channels"] = spec.input_channels;
  j["stem_width"] = spec.stem_width;
  j["stem_kernel"] = spec.stem_kernel;
  j["stem_stride"] = spec.stem_stride;
  j["num_classes"] = spec.num_classes;
  j["init_seed"] = spec.init_seed;
  j["bn_momentum"] = spec.bn_momentum;
  j["bn_epsilon"] = spec.bn_epsilon;
  auto blocks = nlohmann::ordered_json::array();
  for (const auto& b : spec.residual_blocks) {
    blocks.push_back({{"in_channels", b.in_channels},
                      {"out_channels", b.out_channels},
                      {"stride", b.stride},
                      {"projection", b.projection}});
  }
  for (const auto& b : spec.inception_blocks) {
    blocks.push_back({{"in_channels", b.in_channels},
                      {"branch1x1", b.branch1x1},
                      {"reduce3x3", b.reduce3x3},
                      {"branch3x3", b.branch3x3},
                      {"reduce_double", b.reduce_double},
                      {"branch_double", b.branch_double},
                      {"pool_projection", b.pool_projection},
                      {"downsample", b.downsample}});
  }
  j["blocks"] = std::move(blocks);
  return j;
}

/// Missing keys fall back to the defaults of the named family.
inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  const auto family = parse_family(j.at("family").get<std::string>());
  require(family.has_value(), "unknown model family " + j.at("family").dump());
  ModelSpec spec = *family == Family::mini_resnet ? mini_resnet_spec() : mini_inception_spec();
  spec.input_channels = j.value("input_channels", spec.input_channels);
  spec.stem_width = j.value("stem_width", spec.stem_width);
  spec.stem_kernel = j.value("stem_kernel", spec.stem_kernel);
  spec.stem_stride = j.value("stem_stride", spec.stem_stride);
  spec.num_classes = j.value("num_classes", spec.num_classes);
  spec.init_seed = j.value("init_seed", spec.init_seed);
  spec.bn_momentum = j.value("bn_momentum", spec.bn_momentum);
  spec.bn_epsilon = j.value("bn_epsilon", spec.bn_epsilon);
  if (j.contains("blocks")) {
    spec.residual_blocks.clear();
    spec.inception_blocks.clear();
    for (const auto& b : j.at("blocks")) {
      if (*family == Family::mini_resnet) {
        ResidualBlockSpec r;
        r.in_channels = b.at("in_channels");
        r.out_channels = b.at("out_channels");
        r.stride = b.value("stride", std::size_t{1});
        r.projection = b.value("projection", r.needs_projection());
        spec.residual_blocks.push_back(r);
      } else {
        InceptionBlockSpec r;
        r.in_channels = b.at("in_channels");
        r.branch1x1 = b.at("branch1x1");
        r.reduce3x3 = b.at("reduce3x3");
        r.branch3x3 = b.at("branch3x3");
        r.reduce_double = b.at("reduce_double");
        r.branch_double = b.at("branch_double");
        r.pool_projection = b.at("pool_projection");
        r.downsample = b.value("downsample", false);
        spec.inception_blocks.push_back(r);
      }
    }
  }
  validate(spec);
  return spec;
}

// ----------------------------------------------------------------- blocks

template <class T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(const ResidualBlockSpec& spec, double bn_momentum, double bn_epsilon) {
    main_.template emplace<Conv2d<T>>("conv1", spec.in_channels, spec.out_channels, 3, spec.stride, 1);
    main_.template emplace<BatchNorm<T>>("bn1", spec.out_channels, bn_momentum, bn_epsilon);
    main_.template emplace<ReLU<T>>("relu1");
    main_.template emplace<Conv2d<T>>("conv2", spec.out_channels, spec.out_channels, 3, 1, 1);
    main_.template emplace<BatchNorm<T>>("bn2", spec.out_channels, bn_momentum, bn_epsilon);
    if (spec.projection) {
      skip_ = std::make_unique<Sequential<T>>();
      skip_->template emplace<Conv2d<T>>("proj_conv", spec.in_channels, spec.out_channels, 1, spec.stride, 0);
      skip_->template emplace<BatchNorm<T>>("proj_bn", spec.out_channels, bn_momentum, bn_epsilon);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> main = main_.forward(x, mode);
    Tensor<T> sum = skip_ ? add(main, skip_->forward(x, mode)) : add(main, x);
    return out_relu_.forward(sum, mode);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dsum = out_relu_.backward(dy);
    Tensor<T> dx = main_.backward(dsum);
    const Tensor<T> dskip = skip_ ? skip_->backward(dsum) : dsum;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dskip[i];
    return dx;
  }

  void collect(const std::string& prefix, std::vector<TensorRef<T>>& out) override {
    main_.collect(prefix, out);
    if (skip_) skip_->collect(prefix, out);
  }

 private:
  Sequential<T> main_;
  std::unique_ptr<Sequential<T>> skip_;
  ReLU<T> out_relu_;
};

template <class T>
class InceptionBlock final : public Layer<T> {
 public:
  InceptionBlock(const InceptionBlockSpec& spec, double m, double eps) {
    const std::size_t in = spec.in_channels;
    add_conv_bn_relu(branches_[0], "b1x1", in, spec.branch1x1, 1, 1, m, eps);
    add_conv_bn_relu(branches_[1], "b3x3_reduce", in, spec.reduce3x3, 1, 1, m, eps);
    add_conv_bn_relu(branches_[1], "b3x3", spec.reduce3x3, spec.branch3x3, 3, 1, m, eps);
    add_conv_bn_relu(branches_[2], "bdbl_reduce", in, spec.reduce_double, 1, 1, m, eps);
    add_conv_bn_relu(branches_[2], "bdbl_a", spec.reduce_double, spec.branch_double, 3, 1, m, eps);
    add_conv_bn_relu(branches_[2], "bdbl_b", spec.branch_double, spec.branch_double, 3, 1, m, eps);
    branches_[3].template emplace<MaxPool2d<T>>("bpool_pool", 3, 1, 1);
    add_conv_bn_relu(branches_[3], "bpool", in, spec.pool_projection, 1, 1, m, eps);
    widths_ = {spec.branch1x1, spec.branch3x3, spec.branch_double, spec.pool_projection};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    std::array<Tensor<T>, 4> outs;
    for (std::size_t b = 0; b < 4; ++b) outs[b] = branches_[b].forward(x, mode);
    return concat_channels<T>({&outs[0], &outs[1], &outs[2], &outs[3]});
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    std::vector<Tensor<T>> parts = split_channels(dy, widths_);
    Tensor<T> dx = branches_[0].backward(parts[0]);
    for (std::size_t b = 1; b < 4; ++b) {
      const Tensor<T> g = branches_[b].backward(parts[b]);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<TensorRef<T>>& out) override {
    for (auto& b : branches_) b.collect(prefix, out);
  }

 private:
  std::array<Sequential<T>, 4> branches_;
  std::vector<std::size_t> widths_;
};

// ----------------------------------------------------------------- model

/// A built network: the spec plus its layer graph and named tensors.
/// Non-copyable; snapshot with state() and restore with load_state().
template <class T>
class Model {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    net_.template emplace<Conv2d<T>>("stem_conv", spec_.input_channels, spec_.stem_width, spec_.stem_kernel,
                                     spec_.stem_stride, spec_.stem_kernel / 2);
    net_.template emplace<BatchNorm<T>>("stem_bn", spec_.stem_width, spec_.bn_momentum, spec_.bn_epsilon);
    net_.template emplace<ReLU<T>>("stem_relu");
    if (spec_.family == Family::mini_resnet) {
      for (std::size_t i = 0; i < spec_.residual_blocks.size(); ++i) {
        net_.template emplace<ResidualBlock<T>>("res" + std::to_string(i), spec_.residual_blocks[i],
                                                spec_.bn_momentum, spec_.bn_epsilon);
      }
    } else {
      for (std::size_t i = 0; i < spec_.inception_blocks.size(); ++i) {
        const auto& blk = spec_.inception_blocks[i];
        net_.template emplace<InceptionBlock<T>>("inc" + std::to_string(i), blk, spec_.bn_momentum, spec_.bn_epsilon);
        if (blk.downsample) net_.template emplace<MaxPool2d<T>>("inc" + std::to_string(i) + "_pool", 3, 2, 1);
      }
    }
    net_.template emplace<GlobalAvgPool<T>>("gap");
    net_.template emplace<Dense<T>>("fc", feature_channels(spec_), spec_.num_classes);
    net_.collect("", tensors_);
    std::unordered_set<std::string> seen;
    for (const auto& t : tensors_) require(seen.insert(t.name).second, "duplicate tensor name " + t.name);
    initialize();
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelSpec& spec() const { return spec_; }

  /// (B, C, H, W) -> (B, num_classes) logits.
  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    require(x.rank() == 4 && x.dim(1) == spec_.input_channels,
            "model input must be (B, " + std::to_string(spec_.input_channels) + ", H, W), got " +
                shape_string(x.shape()));
    return net_.forward(x, mode);
  }

  /// Backpropagates logit gradients, filling every parameter's grad slot.
  Tensor<T> backward(const Tensor<T>& dlogits) { return net_.backward(dlogits); }

  /// Every parameter and buffer, in deterministic registration order.
  std::vector<TensorRef<T>>& tensors() { return tensors_; }

  std::vector<TensorRef<T>> parameters() {
    std::vector<TensorRef<T>> out;
    for (const auto& t : tensors_) {
      if (t.trainable()) out.push_back(t);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) {
      if (t.trainable()) n += t.value->size();
    }
    return n;
  }

  std::vector<Tensor<T>> state() const {
    std::vector<Tensor<T>> s;
    s.reserve(tensors_.size());
    for (const auto& t : tensors_) s.push_back(*t.value);
    return s;
  }

  void load_state(const std::vector<Tensor<T>>& s) {
    require(s.size() == tensors_.size(), "state has wrong tensor count");
    for (std::size_t i = 0; i < s.size(); ++i) {
      require(s[i].shape() == tensors_[i].value->shape(), "state shape mismatch for " + tensors_[i].name);
    }
    for (std::size_t i = 0; i < s.size(); ++i) *tensors_[i].value = s[i];
  }

  /// He-normal convolution weights, LeCun-normal dense weights, zero biases,
  /// unit gamma. Each tensor draws from a stream keyed by (init_seed, name).
  void initialize() {
    for (auto& t : tensors_) {
      Tensor<T>& v = *t.value;
      const bool is_weight = t.name.ends_with(".weight");
      if (!is_weight) continue;
      const std::size_t fan_in = v.size() / v.dim(0);
      const double gain = v.rank() == 4 ? 2.0 : 1.0;
      const double stddev = std::sqrt(gain / static_cast<double>(fan_in));
      SplitMix64 rng(hash_key({spec_.init_seed, name_hash(t.name)}));
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(stddev * rng.normal());
    }
  }

 private:
  static std::uint64_t name_hash(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
  }

  ModelSpec spec_;
  Sequential<T> net_;
  std::vector<TensorRef<T>> tensors_;
};

}  // namespace surface::nn
