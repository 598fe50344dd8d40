#include "surface/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "surface/error.hpp"
#include "surface/nn/loss.hpp"

namespace surface {

namespace {

std::string class_name(std::size_t k) {
  if (auto c = class_from_index(k)) return std::string(to_string(*c));
  return "class" + std::to_string(k);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json("undefined");
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw DataError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= k_ || predicted >= k_) {
    throw DataError("class code out of range: truth " + std::to_string(truth) + ", predicted " +
                    std::to_string(predicted));
  }
  ++counts_[truth * k_ + predicted];
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += at(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += at(i, predicted);
  return s;
}

double ConfusionMatrix::accuracy() const {
  const std::uint64_t n = total();
  if (n == 0) throw DataError("accuracy of an empty confusion matrix is undefined");
  return static_cast<double>(trace()) / static_cast<double>(n);
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix cm(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw DataError("confusion matrix rows must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) cm.counts_[i * cm.k_ + j] = rows[i][j];
  }
  return cm;
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                 std::size_t num_classes) {
  if (predicted.size() != truth.size()) {
    throw DataError("prediction count " + std::to_string(predicted.size()) + " differs from label count " +
                    std::to_string(truth.size()));
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

PrecisionRecall precision_recall(const ConfusionMatrix& cm) {
  PrecisionRecall pr;
  const std::size_t K = cm.num_classes();
  pr.precision.resize(K);
  pr.recall.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double tp = static_cast<double>(cm.at(k, k));
    if (const auto col = cm.column_sum(k)) pr.precision[k] = tp / static_cast<double>(col);
    if (const auto row = cm.row_sum(k)) pr.recall[k] = tp / static_cast<double>(row);
  }
  pr.accuracy = cm.total() ? cm.accuracy() : 0.0;
  return pr;
}

std::size_t SequenceReport::misclassified() const {
  std::size_t n = 0;
  for (std::size_t p : predicted) n += p != truth;
  return n;
}

SequenceReport sequence_report_from_predictions(std::string sequence_id, std::size_t truth,
                                                std::vector<std::size_t> predicted, std::vector<double> confidences) {
  if (predicted.empty()) throw DataError("sequence '" + sequence_id + "' has no frames");
  if (!confidences.empty() && confidences.size() != predicted.size()) {
    throw DataError("sequence '" + sequence_id + "': confidence count differs from frame count");
  }
  SequenceReport r;
  r.sequence_id = std::move(sequence_id);
  r.truth = truth;
  r.predicted = std::move(predicted);
  r.confidences = std::move(confidences);
  std::size_t run = 0;
  for (std::size_t i = 0; i < r.predicted.size(); ++i) {
    if (i > 0 && r.predicted[i] != r.predicted[i - 1]) ++r.switch_count;
    if (r.predicted[i] != truth) {
      ++run;
    } else if (run > 0) {
      ++r.error_runs[run];
      run = 0;
    }
  }
  if (run > 0) ++r.error_runs[run];
  return r;
}

SequenceReport sequence_report(Model& model, std::string sequence_id, std::size_t truth,
                               std::span<const ImagePatch> frames, const ChannelStats& stats) {
  if (frames.empty()) throw DataError("sequence '" + sequence_id + "' has no frames");
  const Predictions p = predict(model, frames, stats, 1);
  return sequence_report_from_predictions(std::move(sequence_id), truth, p.labels, p.confidences);
}

std::vector<SequenceReport> sequence_reports(Model& model, const Manifest& manifest,
                                             const std::filesystem::path& image_root, const RoiTable& roi,
                                             std::size_t input_size, const ChannelStats& stats) {
  std::map<std::string, std::vector<const SampleRecord*>> groups;
  for (const SampleRecord& r : manifest.records) groups[r.sequence_id].push_back(&r);
  std::vector<SequenceReport> out;
  out.reserve(groups.size());
  for (auto& [id, recs] : groups) {
    std::sort(recs.begin(), recs.end(),
              [](const SampleRecord* a, const SampleRecord* b) { return a->frame_index < b->frame_index; });
    Manifest seq{manifest.name, {}};
    for (const SampleRecord* r : recs) {
      if (r->label != recs.front()->label) throw DataError("sequence '" + id + "' mixes ground-truth classes");
      seq.records.push_back(*r);
    }
    const LabeledImages images = load_images(seq, image_root, roi, input_size);
    out.push_back(sequence_report(model, id, class_index(recs.front()->label), images.images, stats));
  }
  return out;
}

std::string hardware_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(line.find_first_not_of(' ', colon + 1));
      break;
    }
  }
  return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads";
}

LatencyReport latency_report(Model& model, std::span<const ImagePatch> patches, const ChannelStats& stats) {
  if (patches.size() < kLatencyMinPatches) {
    throw DataError("latency report needs at least " + std::to_string(kLatencyMinPatches) + " patches, got " +
                    std::to_string(patches.size()));
  }
  using clock = std::chrono::steady_clock;
  LatencyReport r;
  std::vector<double> ms;
  ms.reserve(patches.size() - kLatencyWarmup);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto t0 = clock::now();
    const Predictions p = predict(model, patches.subspan(i, 1), stats, 1);
    const auto t1 = clock::now();
    r.predicted.push_back(p.labels.front());
    if (i >= kLatencyWarmup) ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  r.frames = ms.size();
  r.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  r.min_ms = ms.front();
  r.max_ms = ms.back();
  const std::size_t n = ms.size();
  r.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  // Nearest-rank percentile.
  r.p95_ms = ms[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1];
  r.hardware = hardware_descriptor();
  return r;
}

nlohmann::ordered_json to_json(const ConfusionMatrix& cm) {
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    classes.push_back(class_name(i));
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < cm.num_classes(); ++j) row.push_back(cm.at(i, j));
    rows.push_back(std::move(row));
  }
  return {{"orientation", "rows=truth,columns=prediction"}, {"classes", classes}, {"counts", rows},
          {"total", cm.total()}};
}

nlohmann::ordered_json to_json(const PrecisionRecall& pr) {
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < pr.precision.size(); ++k) {
    per_class[class_name(k)] = {{"precision", optional_json(pr.precision[k])},
                                {"recall", optional_json(pr.recall[k])}};
  }
  return {{"accuracy", pr.accuracy}, {"per_class", per_class}};
}

nlohmann::ordered_json to_json(const SequenceReport& r) {
  nlohmann::ordered_json runs = nlohmann::ordered_json::object();
  for (const auto& [len, count] : r.error_runs) runs[std::to_string(len)] = count;
  return {{"sequence_id", r.sequence_id},
          {"truth", class_name(r.truth)},
          {"frames", r.predicted.size()},
          {"misclassified", r.misclassified()},
          {"switch_count", r.switch_count},
          {"error_runs", runs},
          {"predicted", r.predicted},
          {"confidences", r.confidences}};
}

nlohmann::ordered_json to_json(const LatencyReport& r) {
  return {{"frames", r.frames},   {"mean_ms", r.mean_ms}, {"median_ms", r.median_ms}, {"p95_ms", r.p95_ms},
          {"min_ms", r.min_ms},   {"max_ms", r.max_ms},   {"hardware", r.hardware}};
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "truth\\predicted";
  for (std::size_t j = 0; j < cm.num_classes(); ++j) out << ',' << class_name(j);
  out << '\n';
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    out << class_name(i);
    for (std::size_t j = 0; j < cm.num_classes(); ++j) out << ',' << cm.at(i, j);
    out << '\n';
  }
  return out.str();
}

std::string confusion_table(const ConfusionMatrix& cm) {
  std::ostringstream out;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%-12s", "truth\\pred");
  out << buf;
  for (std::size_t j = 0; j < cm.num_classes(); ++j) {
    std::snprintf(buf, sizeof buf, " %12s", class_name(j).c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    std::snprintf(buf, sizeof buf, "%-12s", class_name(i).c_str());
    out << buf;
    for (std::size_t j = 0; j < cm.num_classes(); ++j) {
      std::snprintf(buf, sizeof buf, " %12llu", static_cast<unsigned long long>(cm.at(i, j)));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string precision_recall_table(const PrecisionRecall& pr) {
  std::ostringstream out;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-12s %10s %10s\n", "class", "precision", "recall");
  out << buf;
  auto cell = [](const std::optional<double>& v) { return v ? fmt("%.4f", *v) : std::string("undefined"); };
  for (std::size_t k = 0; k < pr.precision.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%-12s %10s %10s\n", class_name(k).c_str(), cell(pr.precision[k]).c_str(),
                  cell(pr.recall[k]).c_str());
    out << buf;
  }
  out << "accuracy " << fmt("%.4f", pr.accuracy) << '\n';
  return out.str();
}

std::string sequence_table(std::span<const SequenceReport> reports) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %-12s %7s %7s %8s  %s\n", "sequence", "truth", "frames", "errors", "switches",
                "error runs (length:count)");
  out << buf;
  for (const SequenceReport& r : reports) {
    std::string runs;
    for (const auto& [len, count] : r.error_runs) {
      runs += (runs.empty() ? "" : " ") + std::to_string(len) + ":" + std::to_string(count);
    }
    std::snprintf(buf, sizeof buf, "%-24s %-12s %7zu %7zu %8zu  %s\n", r.sequence_id.c_str(),
                  class_name(r.truth).c_str(), r.predicted.size(), r.misclassified(), r.switch_count,
                  runs.empty() ? "-" : runs.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace surface
