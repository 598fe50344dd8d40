#include "surface/taxonomy.hpp"

namespace surface {
namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "asphalt", "dirt", "grass", "wet_asphalt", "cobblestone", "snow",
};

constexpr std::array<std::string_view, 8> kSourceNames = {
    "robocar", "stadtpilot", "nrec", "new_college", "giusti", "kitti", "websearch", "synthetic",
};

}  // namespace

std::string_view to_string(SurfaceClass c) { return kClassNames[class_index(c)]; }

std::string_view to_string(SourceId s) { return kSourceNames[static_cast<std::size_t>(s)]; }

std::optional<SurfaceClass> parse_class(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return static_cast<SurfaceClass>(i);
  }
  return std::nullopt;
}

std::optional<SourceId> parse_source(std::string_view name) {
  for (std::size_t i = 0; i < kSourceNames.size(); ++i) {
    if (kSourceNames[i] == name) return static_cast<SourceId>(i);
  }
  return std::nullopt;
}

std::optional<SurfaceClass> class_from_index(std::size_t index) {
  if (index >= kNumClasses) return std::nullopt;
  return static_cast<SurfaceClass>(index);
}

}  // namespace surface
