#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>

#include <json.hpp>

#include "surface/image.hpp"
#include "surface/nn/tensor.hpp"
#include "surface/taxonomy.hpp"

namespace surface {

inline constexpr std::size_t kNetworkInputSize = 224;

/// Rectangle in normalized image coordinates; (x, y) is the top-left corner.
struct RoiRect {
  double x = 0.0;
  double y = 0.0;
  double width = 1.0;
  double height = 1.0;

  friend bool operator==(const RoiRect&, const RoiRect&) = default;
};

inline constexpr RoiRect kFullFrame{0.0, 0.0, 1.0, 1.0};
/// Lower 40% of the frame, central 60% of its width.
inline constexpr RoiRect kLowerCentral{0.2, 0.6, 0.6, 0.4};

/// Throws DataError for zero-area or out-of-bounds rectangles.
void validate_roi(const RoiRect& roi);

/// Per-source ROI table.
class RoiTable {
 public:
  /// Lower-central crops for recorded datasets and web images, full frame
  /// for synthetic textures (which are already surface patches).
  static RoiTable defaults();

  void set(SourceId source, const RoiRect& roi);
  /// Throws DataError when the source has no entry.
  const RoiRect& at(SourceId source) const;
  bool contains(SourceId source) const { return rects_.contains(source); }

  /// JSON object {source: {x, y, w, h}}.
  nlohmann::ordered_json to_json() const;
  /// Entries in `j` override (or extend) `base`.
  static RoiTable from_json(const nlohmann::json& j, RoiTable base = defaults());
  static RoiTable load(const std::filesystem::path& path);

 private:
  std::map<SourceId, RoiRect> rects_;
};

/// Crops `roi` out of `image` and resamples it to out_size x out_size with
/// bilinear interpolation (half-pixel centers, edge clamping, round to
/// nearest).
ImagePatch crop_and_resize(const ImagePatch& image, const RoiRect& roi, std::size_t out_size = kNetworkInputSize);

/// Per-channel standardization constants on the [0, 1] scale.
struct ChannelStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

/// Mean and (population) standard deviation of every channel over all
/// pixels of `patches`, on the [0, 1] scale.
ChannelStats compute_channel_stats(std::span<const ImagePatch> patches);

/// Writes the CHW tensor ((v / 255) - mean_c) / std_c for one patch into
/// `dst` (3 * H * W floats).
void normalize_into(const ImagePatch& patch, const ChannelStats& stats, float* dst);

/// (3, H, W) tensor of the normalized patch.
nn::Tensor<float> normalize(const ImagePatch& patch, const ChannelStats& stats);

/// Bilinear sample of channel c at continuous pixel coordinates (sy, sx);
/// integer coordinates hit pixel centers, outside samples clamp to the edge.
double sample_bilinear(const ImagePatch& image, double sy, double sx, std::size_t c);

inline std::uint8_t to_u8(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(v + 0.5);
}

}  // namespace surface
