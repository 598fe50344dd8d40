#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "surface/image.hpp"
#include "surface/roi.hpp"
#include "surface/train.hpp"

namespace surface {

/// K x K counts; rows are ground truth, columns are predictions, both in
/// class-code order.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted);

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t column_sum(std::size_t predicted) const;
  /// trace / total; throws DataError when empty.
  double accuracy() const;

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

/// Throws DataError on length mismatch or a code outside [0, num_classes).
ConfusionMatrix confusion_matrix(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                 std::size_t num_classes = kNumClasses);

/// Per-class scores; 0/0 is nullopt ("undefined"), never 0.
struct PrecisionRecall {
  std::vector<std::optional<double>> precision;
  std::vector<std::optional<double>> recall;
  double accuracy = 0.0;
};

PrecisionRecall precision_recall(const ConfusionMatrix& cm);

/// Frame-by-frame classification of one sequence. No temporal coupling.
struct SequenceReport {
  std::string sequence_id;
  std::size_t truth = 0;
  std::vector<std::size_t> predicted;
  std::vector<double> confidences;
  std::size_t switch_count = 0;                   // adjacent prediction changes
  std::map<std::size_t, std::size_t> error_runs;  // run length -> number of runs

  std::size_t misclassified() const;
};

/// Builds the statistics from per-frame predictions. Throws DataError on an
/// empty sequence or mismatched confidence count (an empty confidence list is
/// allowed).
SequenceReport sequence_report_from_predictions(std::string sequence_id, std::size_t truth,
                                                std::vector<std::size_t> predicted,
                                                std::vector<double> confidences = {});

/// Classifies every frame separately (batch of one, infer mode).
SequenceReport sequence_report(Model& model, std::string sequence_id, std::size_t truth,
                               std::span<const ImagePatch> frames, const ChannelStats& stats);

/// Groups `manifest` by sequence (frame order) and reports each one. Images
/// are read from image_root and cropped with `roi`.
std::vector<SequenceReport> sequence_reports(Model& model, const Manifest& manifest,
                                             const std::filesystem::path& image_root, const RoiTable& roi,
                                             std::size_t input_size, const ChannelStats& stats);

struct LatencyReport {
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::size_t frames = 0;
  std::string hardware;
  std::vector<std::size_t> predicted;
};

inline constexpr std::size_t kLatencyWarmup = 5;
inline constexpr std::size_t kLatencyMinPatches = 35;

/// Times single-frame infer-mode forwards; the first kLatencyWarmup frames are
/// excluded. Throws DataError with fewer than kLatencyMinPatches patches.
LatencyReport latency_report(Model& model, std::span<const ImagePatch> patches, const ChannelStats& stats);

/// CPU model string from /proc/cpuinfo plus the hardware thread count.
std::string hardware_descriptor();

nlohmann::ordered_json to_json(const ConfusionMatrix& cm);
nlohmann::ordered_json to_json(const PrecisionRecall& pr);
nlohmann::ordered_json to_json(const SequenceReport& report);
nlohmann::ordered_json to_json(const LatencyReport& report);

std::string confusion_csv(const ConfusionMatrix& cm);
std::string confusion_table(const ConfusionMatrix& cm);
std::string precision_recall_table(const PrecisionRecall& pr);
std::string sequence_table(std::span<const SequenceReport> reports);

}  // namespace surface
