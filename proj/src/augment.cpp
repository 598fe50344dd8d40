#include "surface/augment.hpp"

#include <cmath>
#include <numbers>

#include "surface/error.hpp"
#include "surface/rng.hpp"
#include "surface/roi.hpp"

namespace surface {

void validate(const AugmentSpec& s) {
  if (!(s.mirror_probability >= 0.0 && s.mirror_probability <= 1.0)) {
    throw DataError("mirror probability must lie in [0, 1]");
  }
  if (!(s.rotation_bound >= 0.0)) throw DataError("rotation bound must be >= 0");
  if (!(s.scale_min > 0.0 && s.scale_min <= s.scale_max)) throw DataError("scale range must satisfy 0 < min <= max");
}

nlohmann::ordered_json to_json(const AugmentSpec& s) {
  return {{"mirror_probability", s.mirror_probability},
          {"rotation_bound", s.rotation_bound},
          {"scale_min", s.scale_min},
          {"scale_max", s.scale_max},
          {"master_seed", s.master_seed}};
}

AugmentSpec augment_spec_from_json(const nlohmann::json& j, AugmentSpec base) {
  base.mirror_probability = j.value("mirror_probability", base.mirror_probability);
  base.rotation_bound = j.value("rotation_bound", base.rotation_bound);
  base.scale_min = j.value("scale_min", base.scale_min);
  base.scale_max = j.value("scale_max", base.scale_max);
  base.master_seed = j.value("master_seed", base.master_seed);
  validate(base);
  return base;
}

AugmentParams draw_params(const AugmentSpec& spec, const AugmentKey& key) {
  SplitMix64 rng(hash_key({spec.master_seed, key.epoch, key.sample_index}));
  AugmentParams p;
  p.mirror = rng.uniform() < spec.mirror_probability;
  p.angle_degrees = rng.uniform(-spec.rotation_bound, spec.rotation_bound);
  p.scale = rng.uniform(spec.scale_min, spec.scale_max);
  return p;
}

ImagePatch apply(const ImagePatch& patch, const AugmentParams& params) {
  if (!params.mirror && params.angle_degrees == 0.0 && params.scale == 1.0) return patch;

  ImagePatch out(patch.height, patch.width);
  const double cy = static_cast<double>(patch.height) / 2.0, cx = static_cast<double>(patch.width) / 2.0;
  const double theta = params.angle_degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double inv_scale = 1.0 / params.scale;
  const bool pure_mirror = params.mirror && params.angle_degrees == 0.0 && params.scale == 1.0;

  for (std::size_t i = 0; i < patch.height; ++i) {
    for (std::size_t j = 0; j < patch.width; ++j) {
      if (pure_mirror) {
        for (std::size_t c = 0; c < 3; ++c) out.at(i, j, c) = patch.at(i, patch.width - 1 - j, c);
        continue;
      }
      // Centered output coordinates (y down), then invert mirror, rotation
      // and scale in turn.
      double u = static_cast<double>(j) + 0.5 - cx;
      const double v = static_cast<double>(i) + 0.5 - cy;
      if (params.mirror) u = -u;
      // Counter-clockwise on screen is clockwise in (x right, y down), so the
      // inverse rotation is by +theta in these coordinates.
      const double ru = cos_t * u - sin_t * v;
      const double rv = sin_t * u + cos_t * v;
      const double sx = ru * inv_scale + cx - 0.5;
      const double sy = rv * inv_scale + cy - 0.5;
      for (std::size_t c = 0; c < 3; ++c) out.at(i, j, c) = to_u8(sample_bilinear(patch, sy, sx, c));
    }
  }
  return out;
}

}  // namespace surface
