#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "surface/augment.hpp"
#include "surface/image.hpp"
#include "surface/manifest.hpp"
#include "surface/nn/model.hpp"
#include "surface/recipes.hpp"
#include "surface/roi.hpp"

namespace surface {

using Model = nn::Model<float>;

/// Decoded, ROI-cropped images with their class codes.
struct LabeledImages {
  std::vector<ImagePatch> images;
  std::vector<std::size_t> labels;

  std::size_t size() const { return images.size(); }
};

/// Reads every record of `manifest` (paths relative to `image_root`), crops
/// the source's ROI and resizes to input_size. Runs on worker_threads().
LabeledImages load_images(const Manifest& manifest, const std::filesystem::path& image_root, const RoiTable& roi,
                          std::size_t input_size);

struct TrainConfig {
  double learning_rate = 3e-5;
  double momentum = 0.0;
  std::size_t batch_size = 48;
  double smoothing = 0.1;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  double min_delta = 0.001;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentSpec augmentation;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& config);
nlohmann::ordered_json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Patience-based stopping on validation accuracy.
///
/// An epoch counts as progress when it beats the last progress value by at
/// least min_delta; training stops once `patience` consecutive epochs make no
/// progress. The best epoch is the earliest one with the highest accuracy,
/// whether or not it counted as progress.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double min_delta);

  /// Feeds the next epoch's accuracy; returns true when training should stop.
  bool update(double val_accuracy);

  std::size_t epochs_seen() const { return epochs_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
  double best_value() const { return best_; }
  bool last_was_best() const { return last_was_best_; }

 private:
  std::size_t patience_;
  double min_delta_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_ = 0.0;
  double reference_ = 0.0;
  bool last_was_best_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_accuracy = 0.0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  bool early_stopped = false;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

/// CSV with header epoch,train_acc,train_loss,val_acc (17 significant digits).
std::string history_csv(const TrainHistory& history);
void save_history(const TrainHistory& history, const std::filesystem::path& path);

/// Test and instrumentation hooks.
struct TrainHooks {
  /// Replaces the measured validation accuracy of an epoch (1-based).
  std::function<double(std::size_t epoch, double measured)> validation_override;
  /// Called after each epoch with the model in its end-of-epoch state.
  std::function<void(std::size_t epoch, Model& model)> on_epoch_end;
};

/// Mini-batch SGD with smoothed cross entropy, per-sample augmentation of
/// training batches, validation each epoch and early stopping. The model is
/// left holding the best epoch's parameters and statistics.
///
/// Batches are a seeded permutation of the training set per epoch; the last
/// incomplete batch is dropped.
TrainHistory train(Model& model, const LabeledImages& train_set, const LabeledImages& val_set,
                   const ChannelStats& stats, const TrainConfig& config, const TrainHooks& hooks = {});

struct Predictions {
  std::vector<std::size_t> labels;
  std::vector<double> confidences;  // max softmax probability
};

/// Infer-mode predictions, `batch_size` samples per forward pass.
Predictions predict(Model& model, std::span<const ImagePatch> images, const ChannelStats& stats,
                    std::size_t batch_size = 48);

/// Fraction of correct argmax predictions. Throws DataError on an empty set.
double evaluate_split(Model& model, const LabeledImages& split, const ChannelStats& stats,
                      std::size_t batch_size = 48);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

/// Stacks normalized patches into an (N, 3, H, W) tensor.
nn::Tensor<float> make_batch(std::span<const ImagePatch> images, const ChannelStats& stats);

}  // namespace surface
