#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "surface/taxonomy.hpp"

namespace surface {

/// One labeled image and where it came from.
struct SampleRecord {
  std::string image_path;  ///< relative to the manifest's directory
  SurfaceClass label = SurfaceClass::asphalt;
  SourceId source = SourceId::synthetic;
  std::string sequence_id;
  std::uint64_t frame_index = 0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Manifest {
  std::string name;
  std::vector<SampleRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

using ClassCounts = std::array<std::size_t, kNumClasses>;

inline constexpr const char* kManifestHeader = "path,class,source,sequence_id,frame_index";

/// Checks every manifest invariant and throws DataError on the first
/// violation: empty or comma-bearing paths, duplicate paths, repeated or
/// non-increasing frame indices within a sequence, web-search records that
/// are not singleton sequences.
void validate_manifest(const Manifest& manifest);

/// Reads a manifest CSV. The manifest name is the file stem.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes a manifest CSV (LF endings, header first). Validates first.
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

ClassCounts class_counts(const Manifest& manifest);

/// Majority count over minority count. Throws DataError naming the first
/// class with no samples.
double imbalance_ratio(const Manifest& manifest);

}  // namespace surface
