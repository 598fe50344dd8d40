#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace surface {

/// 8-bit RGB image, interleaved HWC, row-major.
struct ImagePatch {
  std::size_t height = 0;
  std::size_t width = 0;
  static constexpr std::size_t channels = 3;
  std::vector<std::uint8_t> data;

  ImagePatch() = default;
  ImagePatch(std::size_t h, std::size_t w) : height(h), width(w), data(h * w * channels, 0) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * channels + c];
  }

  friend bool operator==(const ImagePatch&, const ImagePatch&) = default;
};

/// Decodes PNG (8/16-bit, gray/RGB/alpha/palette) or JPEG into RGB8.
/// Format is detected from the file signature.
ImagePatch read_image(const std::filesystem::path& path);

/// Writes an RGB8 PNG. Output bytes depend only on the pixels.
void write_png(const ImagePatch& image, const std::filesystem::path& path);

}  // namespace surface
