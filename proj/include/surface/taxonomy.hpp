#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace surface {

/// Six road-surface classes. Integer codes are stable and index every
/// per-class table in the project (confusion matrices, logits, counts).
enum class SurfaceClass : std::uint8_t {
  asphalt = 0,
  dirt = 1,
  grass = 2,
  wet_asphalt = 3,
  cobblestone = 4,
  snow = 5,
};

inline constexpr std::size_t kNumClasses = 6;

inline constexpr std::array<SurfaceClass, kNumClasses> kAllClasses = {
    SurfaceClass::asphalt,     SurfaceClass::dirt,        SurfaceClass::grass,
    SurfaceClass::wet_asphalt, SurfaceClass::cobblestone, SurfaceClass::snow,
};

/// Where a sample was recorded.
enum class SourceId : std::uint8_t {
  robocar,
  stadtpilot,
  nrec,
  new_college,
  giusti,
  kitti,
  websearch,
  synthetic,
};

inline constexpr std::array<SourceId, 8> kAllSources = {
    SourceId::robocar, SourceId::stadtpilot, SourceId::nrec,      SourceId::new_college,
    SourceId::giusti,  SourceId::kitti,      SourceId::websearch, SourceId::synthetic,
};

constexpr std::size_t class_index(SurfaceClass c) { return static_cast<std::size_t>(c); }

std::string_view to_string(SurfaceClass c);
std::string_view to_string(SourceId s);
std::optional<SurfaceClass> parse_class(std::string_view name);
std::optional<SourceId> parse_source(std::string_view name);
std::optional<SurfaceClass> class_from_index(std::size_t index);

/// Sources whose images are independent stills rather than frame sequences.
/// Synthetic samples are generated as sequences, so only web search qualifies.
constexpr bool is_singleton_source(SourceId s) { return s == SourceId::websearch; }

}  // namespace surface
