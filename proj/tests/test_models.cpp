#include <gtest/gtest.h>

#include <random>

#include "support/gradcheck.hpp"
#include "support/tempdir.hpp"
#include "surface/error.hpp"
#include "surface/nn/checkpoint.hpp"
#include "surface/nn/model.hpp"

using namespace surface;
using namespace surface::nn;
using surface::testing::read_file;
using surface::testing::TempDir;
using surface::testing::write_file;

namespace {

template <class T = double>
Tensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng) {
  return tensor_cast<T>(surface::testing::random_tensor(shape, rng));
}

// Independent parameter tally for the default residual network.
std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) { return in * out * k * k + out; }
std::size_t bn_params(std::size_t c) { return 2 * c; }

std::size_t expected_mini_resnet_params() {
  std::size_t n = conv_params(3, 16, 7) + bn_params(16);
  const std::size_t widths[] = {16, 32, 64};
  std::size_t in = 16;
  for (std::size_t stage = 0; stage < 3; ++stage) {
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t out = widths[stage];
      n += conv_params(in, out, 3) + bn_params(out) + conv_params(out, out, 3) + bn_params(out);
      const bool downsample = stage > 0 && b == 0;
      if (in != out || downsample) n += conv_params(in, out, 1) + bn_params(out);
      in = out;
    }
  }
  return n + 64 * 6 + 6;
}

std::size_t branch_sum(const InceptionBlockSpec& s) {
  return s.branch1x1 + s.branch3x3 + s.branch_double + s.pool_projection;
}

/// Runs a few train-mode passes so batch-norm running statistics are not at
/// their initial values.
template <class T>
void warm_statistics(Model<T>& m, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int i = 0; i < 3; ++i) m.forward(random_tensor<T>({4, 3, size, size}, rng), Mode::train);
}

}  // namespace

TEST(Architecture, MiniResnetLogitShapeAt224) {
  Model<float> m(mini_resnet_spec(1));
  std::mt19937_64 rng(1);
  const auto logits = m.forward(random_tensor<float>({48, 3, 224, 224}, rng), Mode::infer);
  EXPECT_EQ(logits.shape(), (Shape{48, 6}));
  EXPECT_TRUE(logits.all_finite());
}

TEST(Architecture, MiniInceptionLogitShape) {
  Model<float> m(mini_inception_spec(1));
  std::mt19937_64 rng(2);
  EXPECT_EQ(m.forward(random_tensor<float>({3, 3, 224, 224}, rng), Mode::infer).shape(), (Shape{3, 6}));
  EXPECT_EQ(m.forward(random_tensor<float>({2, 3, 64, 64}, rng), Mode::train).shape(), (Shape{2, 6}));
}

TEST(Architecture, ParameterCountMatchesLayerTable) {
  Model<float> m(mini_resnet_spec());
  EXPECT_EQ(m.parameter_count(), expected_mini_resnet_params());
}

TEST(Architecture, ZeroWeightResidualBlockIsIdentity) {
  ResidualBlock<double> block({8, 8, 1, false}, 0.9, 1e-5);
  std::vector<TensorRef<double>> tensors;
  block.collect("", tensors);
  for (auto& t : tensors) {
    if (t.name.ends_with("weight") || t.name.ends_with("bias")) *t.value = Tensor<double>(t.value->shape(), 0.0);
  }
  std::mt19937_64 rng(3);
  Tensor<double> x = random_tensor<double>({2, 8, 5, 5}, rng);
  for (auto& v : x.storage()) v = std::abs(v);  // post-ReLU activations
  EXPECT_EQ(block.forward(x, Mode::infer), x);
}

TEST(Architecture, InceptionOutputChannelsAreBranchSum) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    InceptionBlockSpec s;
    s.in_channels = 1 + rng() % 6;
    s.branch1x1 = 1 + rng() % 5;
    s.reduce3x3 = 1 + rng() % 5;
    s.branch3x3 = 1 + rng() % 5;
    s.reduce_double = 1 + rng() % 5;
    s.branch_double = 1 + rng() % 5;
    s.pool_projection = 1 + rng() % 5;
    InceptionBlock<float> block(s, 0.9, 1e-5);
    const auto y = block.forward(random_tensor<float>({2, s.in_channels, 6, 7}, rng), Mode::train);
    EXPECT_EQ(y.shape(), (Shape{2, branch_sum(s), 6, 7}));
    EXPECT_EQ(s.out_channels(), branch_sum(s));
  }
}

TEST(Architecture, InferIsDeterministicAndPerSample) {
  Model<float> m(mini_resnet_spec(5));
  warm_statistics(m, 32, 5);
  std::mt19937_64 rng(6);
  const auto x = random_tensor<float>({5, 3, 32, 32}, rng);
  const auto a = m.forward(x, Mode::infer);
  EXPECT_EQ(m.forward(x, Mode::infer), a);

  const std::size_t perm[] = {3, 0, 4, 1, 2};
  Tensor<float> xp(x.shape());
  const std::size_t per = x.size() / 5;
  for (std::size_t i = 0; i < 5; ++i) std::copy_n(x.data() + perm[i] * per, per, xp.data() + i * per);
  const auto b = m.forward(xp, Mode::infer);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(b[i * 6 + k], a[perm[i] * 6 + k]);
}

TEST(Architecture, TensorNamesUniqueAndStable) {
  Model<float> a(mini_inception_spec()), b(mini_inception_spec());
  ASSERT_EQ(a.tensors().size(), b.tensors().size());
  for (std::size_t i = 0; i < a.tensors().size(); ++i) EXPECT_EQ(a.tensors()[i].name, b.tensors()[i].name);
  EXPECT_EQ(a.tensors().front().name, "stem_conv.weight");
  EXPECT_EQ(a.tensors().back().name, "fc.bias");
}

TEST(Architecture, InvalidSpecsRejected) {
  ModelSpec s = mini_resnet_spec();
  s.residual_blocks[2].in_channels = 7;
  EXPECT_THROW(validate(s), ShapeError);
  s = mini_resnet_spec();
  s.residual_blocks[2].projection = false;  // stride 2 needs the projection
  EXPECT_THROW(validate(s), ShapeError);
  s = mini_inception_spec();
  s.inception_blocks[1].in_channels = 3;
  EXPECT_THROW(Model<float>{s}, ShapeError);
}

TEST(Architecture, SpecJsonRoundTrip) {
  for (const ModelSpec& s : {mini_resnet_spec(3), mini_inception_spec(4), deep_resnet_spec(5), deep_inception_spec(6)}) {
    EXPECT_EQ(model_spec_from_json(to_json(s)), s);
  }
}

TEST(Architecture, TinyModelsPassGradientCheck) {
  // Covered in depth by the gradient suite; here a single residual and
  // inception case through the public Model interface.
  for (Family f : {Family::mini_resnet, Family::mini_inception}) {
    ModelSpec s = f == Family::mini_resnet ? mini_resnet_spec(8, 3) : mini_inception_spec(8, 3);
    s.stem_width = 4;
    s.stem_kernel = 3;
    if (f == Family::mini_resnet) {
      s.residual_blocks = residual_stages(4, {4, 6}, {1, 1});
    } else {
      s.inception_blocks.resize(2);
      std::size_t in = 4;
      for (auto& b : s.inception_blocks) {
        b = InceptionBlockSpec{in, 2, 2, 3, 2, 2, 2, false};
        in = b.out_channels();
      }
    }
    Model<double> m(s);
    std::mt19937_64 rng(9);
    const auto x = random_tensor<double>({3, 3, 8, 8}, rng);
    const auto w = random_tensor<double>({3, 3}, rng);
    m.forward(x, Mode::train);
    m.backward(w);
    auto params = m.parameters();
    auto& p = *params.front().value;
    const auto analytic = *params.front().grad;
    const auto numeric = surface::testing::numerical_gradient(
        [&] { return surface::testing::dot(m.forward(x, Mode::train), w); }, p);
    EXPECT_LT(surface::testing::max_relative_error(analytic, numeric), 1e-4) << to_string(f);
  }
}

TEST(Checkpoint, RoundTripReproducesLogitsBitwise) {
  TempDir dir;
  Model<float> m(mini_inception_spec(11));
  warm_statistics(m, 32, 11);
  save_checkpoint(m, dir / "m.ckpt", {{"note", "x"}});
  nlohmann::json meta;
  auto back = load_checkpoint<float>(dir / "m.ckpt", &meta);
  EXPECT_EQ(meta.at("note"), "x");
  EXPECT_EQ(back->spec(), m.spec());
  EXPECT_EQ(back->state(), m.state());
  std::mt19937_64 rng(12);
  const auto x = random_tensor<float>({4, 3, 32, 32}, rng);
  EXPECT_EQ(back->forward(x, Mode::infer), m.forward(x, Mode::infer));
  // Saving the loaded model reproduces the file byte for byte.
  save_checkpoint(*back, dir / "again.ckpt", {{"note", "x"}});
  EXPECT_EQ(read_file(dir / "again.ckpt"), read_file(dir / "m.ckpt"));
}

TEST(Checkpoint, FileLayout) {
  TempDir dir;
  Model<float> m(mini_resnet_spec(2));
  save_checkpoint(m, dir / "m.ckpt");
  const std::string bytes = read_file(dir / "m.ckpt");
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 8), "SBCKPT01");
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(bytes[8 + i]);
  const auto header = nlohmann::json::parse(bytes.substr(16, len));
  std::uint64_t offset = 0;
  for (const auto& e : header.at("tensors")) {
    EXPECT_EQ(e.at("offset").get<std::uint64_t>(), offset);
    EXPECT_EQ(e.at("dtype"), "f32");
    offset += e.at("nbytes").get<std::uint64_t>();
  }
  EXPECT_EQ(16 + len + offset, bytes.size());
  std::uint64_t state_bytes = 0;
  for (const auto& t : m.state()) state_bytes += t.size() * sizeof(float);
  EXPECT_EQ(offset, state_bytes);
}

TEST(Checkpoint, TruncatedOrCorruptFilesRejected) {
  TempDir dir;
  Model<float> m(mini_resnet_spec(3));
  save_checkpoint(m, dir / "m.ckpt");
  const std::string bytes = read_file(dir / "m.ckpt");
  for (std::size_t cut : {std::size_t{4}, std::size_t{12}, std::size_t{40}, bytes.size() - 1}) {
    write_file(dir / "cut.ckpt", bytes.substr(0, cut));
    EXPECT_THROW(load_checkpoint<float>(dir / "cut.ckpt"), DataError) << cut;
  }
  std::string bad = bytes;
  bad[0] = 'X';
  write_file(dir / "bad.ckpt", bad);
  EXPECT_THROW(load_checkpoint<float>(dir / "bad.ckpt"), DataError);

  // Loading into a model of a different spec fails and leaves it untouched.
  Model<float> other(mini_inception_spec(3));
  const auto before = other.state();
  EXPECT_THROW(load_checkpoint_into(other, dir / "m.ckpt"), DataError);
  EXPECT_EQ(other.state(), before);
}

TEST(Checkpoint, FreshModelEqualsSeededRebuild) {
  TempDir dir;
  Model<float> a(mini_resnet_spec(21));
  save_checkpoint(a, dir / "a.ckpt");
  Model<float> b(mini_resnet_spec(21));
  save_checkpoint(b, dir / "b.ckpt");
  EXPECT_EQ(read_file(dir / "a.ckpt"), read_file(dir / "b.ckpt"));
  EXPECT_EQ(load_checkpoint<float>(dir / "a.ckpt")->state(), b.state());
  Model<float> c(mini_resnet_spec(22));
  EXPECT_NE(c.state(), b.state());
}
