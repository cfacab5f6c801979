#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxaug/geometry.hpp"

namespace voxaug {

/// Row-major binary image; pixel (u, v) covers [u, u+1) x [v, v+1).
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), data(std::size_t(w) * h, 0) {}

  bool at(int u, int v) const { return data[std::size_t(v) * width + u] != 0; }
  void set(int u, int v, bool on = true) { data[std::size_t(v) * width + u] = on ? 1 : 0; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool touches_border() const;
  bool same_shape(const BinaryMask& other) const { return width == other.width && height == other.height; }
};

std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b);
double mask_iou(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b);

/// Morphology with a (2r+1)^2 square structuring element; r = 0 is the identity.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);

/// Run-length code over the row-major pixel order, alternating runs of 0 and 1 and always
/// starting with a (possibly empty) run of 0.
std::vector<std::uint32_t> rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(std::span<const std::uint32_t> counts, int width, int height);

/// Convex hull (counter-clockwise, collinear points dropped) of a planar point set.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

/// Pixels whose centers lie inside (or on) a convex counter-clockwise polygon.
BinaryMask rasterize_convex(std::span<const Vec2> polygon, int width, int height);

}  // namespace voxaug
