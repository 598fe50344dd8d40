#include "surface/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "surface/error.hpp"
#include "surface/nn/loss.hpp"
#include "surface/nn/sgd.hpp"
#include "surface/parallel.hpp"
#include "surface/rng.hpp"

namespace surface {

LabeledImages load_images(const Manifest& manifest, const std::filesystem::path& image_root, const RoiTable& roi,
                          std::size_t input_size) {
  LabeledImages out;
  out.images.resize(manifest.size());
  out.labels.resize(manifest.size());
  parallel_for(manifest.size(), worker_threads(), [&](std::size_t i) {
    const SampleRecord& r = manifest.records[i];
    out.images[i] = crop_and_resize(read_image(image_root / r.image_path), roi.at(r.source), input_size);
    out.labels[i] = class_index(r.label);
  });
  return out;
}

void validate(const TrainConfig& c) {
  if (c.batch_size < 2) throw DataError("batch size must be >= 2 (batch normalization)");
  if (c.patience < 1) throw DataError("patience must be >= 1");
  if (c.max_epochs < 1) throw DataError("max_epochs must be >= 1");
  if (!(c.smoothing >= 0.0 && c.smoothing < 1.0)) throw DataError("label smoothing must lie in [0, 1)");
  if (!(c.learning_rate >= 0.0)) throw DataError("learning rate must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw DataError("momentum must lie in [0, 1)");
  if (!(c.min_delta >= 0.0)) throw DataError("min_delta must be >= 0");
  validate(c.augmentation);
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"momentum", c.momentum},   {"batch_size", c.batch_size},
          {"smoothing", c.smoothing},         {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"min_delta", c.min_delta},         {"seed", c.seed},           {"augment", c.augment},
          {"augmentation", to_json(c.augmentation)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.smoothing = j.value("smoothing", c.smoothing);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.min_delta = j.value("min_delta", c.min_delta);
  c.seed = j.value("seed", c.seed);
  c.augment = j.value("augment", c.augment);
  if (j.contains("augmentation")) c.augmentation = augment_spec_from_json(j.at("augmentation"), c.augmentation);
  validate(c);
  return c;
}

EarlyStopping::EarlyStopping(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {
  if (patience < 1) throw DataError("patience must be >= 1");
}

bool EarlyStopping::update(double acc) {
  ++epochs_;
  last_was_best_ = false;
  if (epochs_ == 1) {
    best_ = reference_ = acc;
    best_epoch_ = 1;
    last_was_best_ = true;
    return false;
  }
  if (acc > best_) {
    best_ = acc;
    best_epoch_ = epochs_;
    last_was_best_ = true;
  }
  if (acc >= reference_ + min_delta_) {
    reference_ = acc;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

std::string history_csv(const TrainHistory& h) {
  std::ostringstream out;
  out << "epoch,train_acc,train_loss,val_acc\n";
  char buf[128];
  for (const EpochRecord& e : h.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_accuracy, e.train_loss, e.val_accuracy);
    out << buf;
  }
  return out.str();
}

void save_history(const TrainHistory& h, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write history " + path.string());
  out << history_csv(h);
}

nn::Tensor<float> make_batch(std::span<const ImagePatch> images, const ChannelStats& stats) {
  if (images.empty()) throw DataError("cannot build an empty batch");
  const std::size_t H = images.front().height, W = images.front().width;
  nn::Tensor<float> batch({images.size(), 3, H, W});
  parallel_for(images.size(), worker_threads(), [&](std::size_t i) {
    if (images[i].height != H || images[i].width != W) throw DataError("batch images differ in size");
    normalize_into(images[i], stats, batch.data() + i * 3 * H * W);
  });
  return batch;
}

namespace {

std::size_t argmax_row(const nn::Tensor<float>& logits, std::size_t row) {
  const std::size_t K = logits.dim(1);
  const float* p = logits.data() + row * K;
  return static_cast<std::size_t>(std::max_element(p, p + K) - p);
}

}  // namespace

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) throw DataError("prediction and label counts differ");
  if (truth.empty()) throw DataError("accuracy of an empty split is undefined");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

Predictions predict(Model& model, std::span<const ImagePatch> images, const ChannelStats& stats,
                    std::size_t batch_size) {
  if (batch_size == 0) throw DataError("batch size must be >= 1");
  Predictions out;
  out.labels.reserve(images.size());
  out.confidences.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, images.size() - start);
    const nn::Tensor<float> logits = model.forward(make_batch(images.subspan(start, n), stats), nn::Mode::infer);
    const nn::Tensor<float> probs = nn::softmax(logits);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = argmax_row(logits, i);
      out.labels.push_back(k);
      out.confidences.push_back(probs[i * probs.dim(1) + k]);
    }
  }
  return out;
}

double evaluate_split(Model& model, const LabeledImages& split, const ChannelStats& stats, std::size_t batch_size) {
  if (split.size() == 0) throw DataError("cannot evaluate an empty split");
  const Predictions p = predict(model, split.images, stats, batch_size);
  return accuracy(p.labels, split.labels);
}

TrainHistory train(Model& model, const LabeledImages& train_set, const LabeledImages& val_set,
                   const ChannelStats& stats, const TrainConfig& config, const TrainHooks& hooks) {
  validate(config);
  if (train_set.size() == 0) throw DataError("training split is empty");
  if (val_set.size() == 0) throw DataError("validation split is empty");
  if (config.batch_size > train_set.size()) {
    throw DataError("batch size " + std::to_string(config.batch_size) + " exceeds training set size " +
                    std::to_string(train_set.size()));
  }
  for (std::size_t label : train_set.labels) {
    if (label >= model.spec().num_classes) throw DataError("training label outside the model's classes");
  }

  const nn::SmoothedLossSpec loss_spec{config.smoothing, model.spec().num_classes};
  nn::Sgd<float> optimizer(nn::SgdConfig{config.learning_rate, config.momentum});
  auto params = model.parameters();
  EarlyStopping stopper(config.patience, config.min_delta);
  TrainHistory history;
  std::vector<nn::Tensor<float>> best_state = model.state();

  const std::size_t batches = train_set.size() / config.batch_size;
  std::vector<ImagePatch> batch_images(config.batch_size);
  std::vector<std::size_t> batch_labels(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    seeded_shuffle(order, hash_key({config.seed, epoch, 0xba7c4}));

    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      parallel_for(config.batch_size, worker_threads(), [&](std::size_t k) {
        const std::size_t idx = order[b * config.batch_size + k];
        batch_labels[k] = train_set.labels[idx];
        batch_images[k] = config.augment
                              ? apply(train_set.images[idx], draw_params(config.augmentation, AugmentKey{epoch, idx}))
                              : train_set.images[idx];
      });
      const nn::Tensor<float> logits = model.forward(make_batch(batch_images, stats), nn::Mode::train);
      const auto result = nn::smoothed_cross_entropy(logits, batch_labels, loss_spec);
      model.backward(result.grad);
      optimizer.step(params);
      loss_sum += result.loss;
      for (std::size_t k = 0; k < config.batch_size; ++k) correct += argmax_row(logits, k) == batch_labels[k];
      seen += config.batch_size;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    rec.val_accuracy = evaluate_split(model, val_set, stats, config.batch_size);
    if (hooks.validation_override) rec.val_accuracy = hooks.validation_override(epoch, rec.val_accuracy);
    history.epochs.push_back(rec);
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, model);

    const bool stop = stopper.update(rec.val_accuracy);
    if (stopper.last_was_best()) best_state = model.state();
    history.stopped_epoch = epoch;
    if (stop) {
      history.early_stopped = true;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  model.load_state(best_state);
  return history;
}

}  // namespace surface
