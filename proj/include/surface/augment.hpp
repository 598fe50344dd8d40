#pragma once

#include <cstdint>

#include <json.hpp>

#include "surface/image.hpp"

namespace surface {

/// Per-sample geometric augmentation: random horizontal mirror, rotation
/// within +-rotation_bound degrees, isotropic scale in [scale_min, scale_max].
struct AugmentSpec {
  double mirror_probability = 0.5;
  double rotation_bound = 40.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  std::uint64_t master_seed = 0;

  friend bool operator==(const AugmentSpec&, const AugmentSpec&) = default;
};

void validate(const AugmentSpec& spec);
nlohmann::ordered_json to_json(const AugmentSpec& spec);
AugmentSpec augment_spec_from_json(const nlohmann::json& j, AugmentSpec base = {});

struct AugmentKey {
  std::uint64_t epoch = 0;
  std::uint64_t sample_index = 0;
};

struct AugmentParams {
  bool mirror = false;
  double angle_degrees = 0.0;
  double scale = 1.0;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

/// Counter-based draw: a pure function of (master_seed, epoch, sample_index).
AugmentParams draw_params(const AugmentSpec& spec, const AugmentKey& key);

/// Scale, then rotate about the patch center (positive angles turn the
/// content counter-clockwise on screen), then mirror. Bilinear sampling with
/// edge replication outside the source. Identity parameters return the
/// input unchanged.
ImagePatch apply(const ImagePatch& patch, const AugmentParams& params);

}  // namespace surface
