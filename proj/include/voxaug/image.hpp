#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "voxaug/geometry.hpp"

namespace voxaug {

/// 8-bit interleaved RGB, row-major.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Rgb at(int u, int v) const;
};

/// Depth in millimeters along the pixel ray; 0 marks an invalid pixel.
struct DepthMap16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> millimeters;

  bool valid(int u, int v) const { return millimeters[std::size_t(v) * width + u] != 0; }
  double meters(int u, int v) const { return millimeters[std::size_t(v) * width + u] * 1e-3; }
};

Image8 to_image8(std::span<const Rgb> colors, int width, int height);
std::vector<Rgb> to_colors(const Image8& image);

/// Millimeter quantization; depths outside (0, 65.535] m become invalid.
DepthMap16 to_depth16(std::span<const double> depth, std::span<const std::uint8_t> valid, int width, int height);

void write_ppm(const std::filesystem::path& path, const Image8& image);
Image8 read_ppm(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const DepthMap16& depth);
DepthMap16 read_pgm16(const std::filesystem::path& path);

}  // namespace voxaug
