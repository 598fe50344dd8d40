#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "surface/image.hpp"
#include "surface/manifest.hpp"

namespace surface {

struct SynthSpec {
  std::uint64_t seed = 0;
  std::vector<SurfaceClass> classes{kAllClasses.begin(), kAllClasses.end()};
  std::size_t sequences_per_class = 8;
  std::size_t frames_per_sequence = 100;
  std::size_t image_size = 64;

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

void validate(const SynthSpec& spec);
nlohmann::ordered_json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec base = {});

/// Renders one frame. Pure function of its arguments.
///
/// Asphalt, wet asphalt, dirt and cobblestone share a per-sequence road tone
/// and differ only in texture: fine grain, a smooth film with streaks, coarse
/// blotches, a staggered stone tiling with dark mortar. Grass (green
/// band-limited noise) and snow (white with bluish shadow blobs) are also
/// separable by color. A sequence shares one texture that drifts by a
/// sub-pixel offset per frame, with independent sensor noise on every frame.
ImagePatch render_frame(const SynthSpec& spec, SurfaceClass label, std::size_t sequence, std::size_t frame);

/// Relative path of a generated frame, e.g. "grass/grass_s003_f0042.png".
std::string synth_frame_path(SurfaceClass label, std::size_t sequence, std::size_t frame);

/// Writes every frame as PNG under `out_dir`, plus manifest.csv and
/// synth_spec.json, and returns the manifest.
Manifest generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// The manifest `generate` would produce, without rendering anything.
Manifest synth_manifest(const SynthSpec& spec);

/// Per-class totals of the composed source dataset:
/// asphalt 10273, dirt 8547, grass 2887, wet_asphalt 3668, cobblestone 1082, snow 3075.
ClassCounts table1_counts();

/// Image-free manifest whose class totals equal `counts`, with records spread
/// over the recording sources that provide each class in fixed-length
/// sequences (the last sequence of a source may be shorter).
Manifest table_shaped_manifest(const ClassCounts& counts, std::size_t frames_per_sequence = 100);

/// Image-free web-search manifest with `per_class[c]` singleton records.
Manifest websearch_manifest(const ClassCounts& per_class);

}  // namespace surface
