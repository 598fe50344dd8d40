#include <gtest/gtest.h>

#include "support/tempdir.hpp"
#include "surface/error.hpp"
#include "surface/evaluation.hpp"
#include "surface/nn/checkpoint.hpp"
#include "surface/synth.hpp"
#include "surface/train.hpp"

using namespace surface;
using surface::testing::read_file;
using surface::testing::TempDir;

namespace {

LabeledImages synth_set(std::uint64_t seed, std::size_t sequences, std::size_t frames, std::size_t size = 16) {
  const SynthSpec spec{.seed = seed, .sequences_per_class = sequences, .frames_per_sequence = frames,
                       .image_size = size};
  LabeledImages out;
  for (SurfaceClass c : kAllClasses)
    for (std::size_t q = 0; q < sequences; ++q)
      for (std::size_t f = 0; f < frames; ++f) {
        out.images.push_back(render_frame(spec, c, q, f));
        out.labels.push_back(class_index(c));
      }
  return out;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.learning_rate = 0.05;
  c.momentum = 0.9;
  c.batch_size = 12;
  c.max_epochs = 3;
  c.seed = 4;
  return c;
}

/// Runs EarlyStopping over a curve; returns (epochs consumed, best epoch).
std::pair<std::size_t, std::size_t> run_curve(const std::vector<double>& curve, std::size_t patience = 5,
                                              double min_delta = 0.001) {
  EarlyStopping es(patience, min_delta);
  for (double v : curve) {
    if (es.update(v)) break;
  }
  return {es.epochs_seen(), es.best_epoch()};
}

}  // namespace

TEST(EarlyStopping, ScriptedPlateau) {
  EXPECT_EQ(run_curve({0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.9}), (std::pair<std::size_t, std::size_t>{7, 2}));
}

TEST(EarlyStopping, TiesKeepEarliestBest) {
  EXPECT_EQ(run_curve({0.5, 0.7, 0.6, 0.7, 0.7, 0.65, 0.7, 0.7}), (std::pair<std::size_t, std::size_t>{7, 2}));
}

TEST(EarlyStopping, SubThresholdGainsDoNotResetPatience) {
  // Each step beats the best by less than min_delta: best moves, patience does not reset.
  EXPECT_EQ(run_curve({0.5, 0.5004, 0.5008, 0.5009, 0.50095, 0.50099, 0.7}),
            (std::pair<std::size_t, std::size_t>{6, 6}));
  // Cumulative drift past min_delta counts as progress.
  EXPECT_EQ(run_curve({0.5, 0.5006, 0.5012, 0.5, 0.5, 0.5, 0.5, 0.5}, 5, 0.001),
            (std::pair<std::size_t, std::size_t>{8, 3}));
}

TEST(EarlyStopping, NeverStopsBeforePatiencePlusOne) {
  for (std::size_t patience = 1; patience <= 6; ++patience) {
    EXPECT_EQ(run_curve(std::vector<double>(20, 0.3), patience).first, patience + 1);
  }
  EXPECT_THROW(EarlyStopping(0, 0.001), DataError);
}

TEST(Train, ScriptedCurveRestoresBestEpoch) {
  const LabeledImages data = synth_set(1, 2, 6);
  const ChannelStats stats = compute_channel_stats(data.images);
  Model model(nn::mini_resnet_spec(2));
  TrainConfig config = quick_config();
  config.max_epochs = 20;
  const std::vector<double> curve = {0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6};
  std::vector<std::vector<nn::Tensor<float>>> snapshots;
  TrainHooks hooks;
  hooks.validation_override = [&](std::size_t epoch, double) { return curve.at(epoch - 1); };
  hooks.on_epoch_end = [&](std::size_t, Model& m) { snapshots.push_back(m.state()); };
  const TrainHistory h = train(model, data, data, stats, config, hooks);
  EXPECT_EQ(h.stopped_epoch, 7u);
  EXPECT_EQ(h.best_epoch, 2u);
  EXPECT_TRUE(h.early_stopped);
  ASSERT_EQ(h.epochs.size(), 7u);
  ASSERT_EQ(snapshots.size(), 7u);
  EXPECT_EQ(model.state(), snapshots[1]);
  EXPECT_NE(model.state(), snapshots[6]);
}

TEST(Train, MaxEpochsOne) {
  const LabeledImages data = synth_set(1, 2, 6);
  Model model(nn::mini_inception_spec(2));
  TrainConfig config = quick_config();
  config.max_epochs = 1;
  const TrainHistory h = train(model, data, data, compute_channel_stats(data.images), config);
  EXPECT_EQ(h.epochs.size(), 1u);
  EXPECT_EQ(h.stopped_epoch, 1u);
  EXPECT_EQ(h.best_epoch, 1u);
  EXPECT_FALSE(h.early_stopped);
}

TEST(Train, IdenticalRunsAreBitwiseIdentical) {
  TempDir dir;
  const LabeledImages train_set = synth_set(3, 2, 6), val_set = synth_set(4, 1, 4);
  const ChannelStats stats = compute_channel_stats(train_set.images);
  std::string csv[2], ckpt[2];
  for (int run = 0; run < 2; ++run) {
    Model model(nn::mini_resnet_spec(7));
    const TrainHistory h = train(model, train_set, val_set, stats, quick_config());
    csv[run] = history_csv(h);
    nn::save_checkpoint(model, dir / ("m" + std::to_string(run) + ".ckpt"));
    ckpt[run] = read_file(dir / ("m" + std::to_string(run) + ".ckpt"));
  }
  EXPECT_EQ(csv[0], csv[1]);
  EXPECT_TRUE(ckpt[0] == ckpt[1]) << "checkpoint bytes differ";

  TrainConfig other = quick_config();
  other.seed = 5;
  Model model(nn::mini_resnet_spec(7));
  EXPECT_NE(history_csv(train(model, train_set, val_set, stats, other)), csv[0]);
}

TEST(Train, ValidationIsNeverAugmented) {
  // A frozen model (no learning, no running-statistic updates) must see the
  // same validation inputs every epoch.
  const LabeledImages data = synth_set(5, 2, 6);
  nn::ModelSpec spec = nn::mini_resnet_spec(3);
  spec.bn_momentum = 1.0;
  Model model(spec);
  const auto before = model.state();
  TrainConfig config = quick_config();
  config.learning_rate = 0.0;
  config.max_epochs = 3;
  const ChannelStats stats = compute_channel_stats(data.images);
  std::vector<Predictions> seen;
  TrainHooks hooks;
  hooks.on_epoch_end = [&](std::size_t, Model& m) { seen.push_back(predict(m, data.images, stats)); };
  train(model, data, data, stats, config, hooks);
  EXPECT_EQ(model.state(), before);
  ASSERT_EQ(seen.size(), 3u);
  for (const Predictions& p : seen) {
    EXPECT_EQ(p.labels, seen[0].labels);
    EXPECT_EQ(p.confidences, seen[0].confidences);
  }
}

TEST(Train, Errors) {
  const LabeledImages data = synth_set(1, 1, 2);
  const ChannelStats stats = compute_channel_stats(data.images);
  Model model(nn::mini_resnet_spec());
  TrainConfig config = quick_config();
  EXPECT_THROW(train(model, LabeledImages{}, data, stats, config), DataError);
  EXPECT_THROW(train(model, data, LabeledImages{}, stats, config), DataError);
  config.batch_size = data.size() + 1;
  EXPECT_THROW(train(model, data, data, stats, config), DataError);
  EXPECT_THROW(evaluate_split(model, LabeledImages{}, stats), DataError);
}

TEST(Evaluate, ConstantPredictorScoresOneSixth) {
  const LabeledImages data = synth_set(2, 1, 5);
  Model model(nn::mini_resnet_spec());
  for (auto& t : model.tensors()) {
    if (t.name == "fc.weight") *t.value = nn::Tensor<float>(t.value->shape(), 0.0f);
    if (t.name == "fc.bias") (*t.value)[class_index(SurfaceClass::asphalt)] = 1.0f;
  }
  const ChannelStats stats = compute_channel_stats(data.images);
  EXPECT_DOUBLE_EQ(evaluate_split(model, data, stats, 7), 1.0 / 6.0);
  const Predictions p = predict(model, data.images, stats, 4);
  for (std::size_t label : p.labels) EXPECT_EQ(label, 0u);
}

TEST(Evaluate, AccuracyAgreesWithConfusionTrace) {
  const LabeledImages data = synth_set(6, 2, 5);
  const ChannelStats stats = compute_channel_stats(data.images);
  Model model(nn::mini_inception_spec(9));
  train(model, data, data, stats, quick_config());
  const Predictions p = predict(model, data.images, stats, 5);
  const ConfusionMatrix cm = confusion_matrix(p.labels, data.labels);
  EXPECT_NEAR(cm.accuracy(), evaluate_split(model, data, stats, 5), 1e-12);
  // Batch size does not change infer-mode predictions.
  EXPECT_EQ(predict(model, data.images, stats, 1).labels, p.labels);
}

TEST(TrainConfigJson, RoundTrip) {
  TrainConfig c = quick_config();
  c.augmentation.rotation_bound = 12.0;
  c.augment = false;
  EXPECT_EQ(train_config_from_json(to_json(c)), c);
  EXPECT_THROW(train_config_from_json(nlohmann::json{{"batch_size", 1}}), DataError);
  EXPECT_THROW(train_config_from_json(nlohmann::json{{"smoothing", 1.0}}), DataError);
}

TEST(History, CsvFormat) {
  TrainHistory h;
  h.epochs = {{1, 0.5, 1.25, 0.25}, {2, 0.75, 0.5, 1.0 / 3.0}};
  EXPECT_EQ(history_csv(h),
            "epoch,train_acc,train_loss,val_acc\n"
            "1,0.5,1.25,0.25\n"
            "2,0.75,0.5,0.33333333333333331\n");
}
