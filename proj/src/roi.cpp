#include "surface/roi.hpp"

#include <cmath>
#include <fstream>

#include "surface/error.hpp"

namespace surface {

void validate_roi(const RoiRect& r) {
  constexpr double slack = 1e-9;
  if (!(r.width > 0.0) || !(r.height > 0.0)) throw DataError("region of interest has zero area");
  if (r.x < 0.0 || r.y < 0.0 || r.x + r.width > 1.0 + slack || r.y + r.height > 1.0 + slack) {
    throw DataError("region of interest (" + std::to_string(r.x) + ", " + std::to_string(r.y) + ", " +
                    std::to_string(r.width) + ", " + std::to_string(r.height) + ") lies outside the image");
  }
}

RoiTable RoiTable::defaults() {
  RoiTable t;
  for (SourceId s : kAllSources) t.rects_[s] = s == SourceId::synthetic ? kFullFrame : kLowerCentral;
  return t;
}

void RoiTable::set(SourceId source, const RoiRect& roi) {
  validate_roi(roi);
  rects_[source] = roi;
}

const RoiRect& RoiTable::at(SourceId source) const {
  const auto it = rects_.find(source);
  if (it == rects_.end()) throw DataError("no region of interest configured for source " + std::string(to_string(source)));
  return it->second;
}

nlohmann::ordered_json RoiTable::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [source, r] : rects_) {
    j[std::string(to_string(source))] = {{"x", r.x}, {"y", r.y}, {"w", r.width}, {"h", r.height}};
  }
  return j;
}

RoiTable RoiTable::from_json(const nlohmann::json& j, RoiTable base) {
  if (!j.is_object()) throw DataError("ROI config must be a JSON object keyed by source");
  for (const auto& [key, value] : j.items()) {
    const auto source = parse_source(key);
    if (!source) throw DataError("ROI config: unknown source '" + key + "'");
    try {
      base.set(*source, RoiRect{value.at("x").get<double>(), value.at("y").get<double>(), value.at("w").get<double>(),
                                value.at("h").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("ROI config for " + key + ": " + e.what());
    }
  }
  return base;
}

RoiTable RoiTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ROI config " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed ROI config " + path.string() + ": " + e.what());
  }
}

double sample_bilinear(const ImagePatch& image, double sy, double sx, std::size_t c) {
  const double max_y = static_cast<double>(image.height - 1), max_x = static_cast<double>(image.width - 1);
  sy = std::clamp(sy, 0.0, max_y);
  sx = std::clamp(sx, 0.0, max_x);
  const auto y0 = static_cast<std::size_t>(std::floor(sy));
  const auto x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, image.height - 1), x1 = std::min(x0 + 1, image.width - 1);
  const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
  const double top = image.at(y0, x0, c) * (1.0 - fx) + image.at(y0, x1, c) * fx;
  const double bottom = image.at(y1, x0, c) * (1.0 - fx) + image.at(y1, x1, c) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

ImagePatch crop_and_resize(const ImagePatch& image, const RoiRect& roi, std::size_t out_size) {
  validate_roi(roi);
  if (image.height == 0 || image.width == 0) throw DataError("cannot crop an empty image");
  if (out_size == 0) throw DataError("output size must be positive");
  const double x0 = roi.x * static_cast<double>(image.width), y0 = roi.y * static_cast<double>(image.height);
  const double sx_step = roi.width * static_cast<double>(image.width) / static_cast<double>(out_size);
  const double sy_step = roi.height * static_cast<double>(image.height) / static_cast<double>(out_size);
  ImagePatch out(out_size, out_size);
  for (std::size_t i = 0; i < out_size; ++i) {
    const double sy = y0 + (static_cast<double>(i) + 0.5) * sy_step - 0.5;
    for (std::size_t j = 0; j < out_size; ++j) {
      const double sx = x0 + (static_cast<double>(j) + 0.5) * sx_step - 0.5;
      for (std::size_t c = 0; c < 3; ++c) out.at(i, j, c) = to_u8(sample_bilinear(image, sy, sx, c));
    }
  }
  return out;
}

ChannelStats compute_channel_stats(std::span<const ImagePatch> patches) {
  std::array<double, 3> sum{}, sq{};
  double count = 0.0;
  for (const ImagePatch& p : patches) {
    for (std::size_t i = 0; i < p.height * p.width; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = p.data[i * 3 + c] / 255.0;
        sum[c] += v;
        sq[c] += v * v;
      }
    }
    count += static_cast<double>(p.height * p.width);
  }
  ChannelStats s;
  if (count == 0.0) return s;
  for (std::size_t c = 0; c < 3; ++c) {
    s.mean[c] = sum[c] / count;
    const double var = std::max(0.0, sq[c] / count - s.mean[c] * s.mean[c]);
    s.stddev[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return s;
}

void normalize_into(const ImagePatch& patch, const ChannelStats& stats, float* dst) {
  const std::size_t plane = patch.height * patch.width;
  for (std::size_t c = 0; c < 3; ++c) {
    const double scale = 1.0 / (255.0 * stats.stddev[c]);
    const double shift = stats.mean[c] / stats.stddev[c];
    float* out = dst + c * plane;
    for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<float>(patch.data[i * 3 + c] * scale - shift);
  }
}

nn::Tensor<float> normalize(const ImagePatch& patch, const ChannelStats& stats) {
  nn::Tensor<float> t({3, patch.height, patch.width});
  normalize_into(patch, stats, t.data());
  return t;
}

}  // namespace surface
