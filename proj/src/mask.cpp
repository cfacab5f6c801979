#include "voxaug/mask.hpp"

#include <algorithm>
#include <cmath>

#include "voxaug/error.hpp"

namespace voxaug {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t p) { return p != 0; }));
}

bool BinaryMask::touches_border() const {
  for (int u = 0; u < width; ++u) {
    if (at(u, 0) || at(u, height - 1)) return true;
  }
  for (int v = 0; v < height; ++v) {
    if (at(0, v) || at(width - 1, v)) return true;
  }
  return false;
}

namespace {
void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw InvalidArgument("mask sizes differ");
}
}  // namespace

std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b);
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) n += (a.data[i] && b.data[i]) ? 1 : 0;
  return n;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    inter += (a.data[i] && b.data[i]) ? 1 : 0;
    uni += (a.data[i] || b.data[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b);
  BinaryMask out(a.width, a.height);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = (a.data[i] || b.data[i]) ? 1 : 0;
  return out;
}

BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b);
  BinaryMask out(a.width, a.height);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = (a.data[i] && !b.data[i]) ? 1 : 0;
  return out;
}

namespace {

// Separable square morphology: a 1D max (or min) filter along rows, then along columns.
BinaryMask morph(const BinaryMask& mask, int radius, bool grow) {
  if (radius < 0) throw InvalidArgument("morphology radius must be non-negative");
  if (radius == 0) return mask;
  const std::uint8_t hit = grow ? 1 : 0;
  BinaryMask rows(mask.width, mask.height);
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      std::uint8_t out = grow ? 0 : 1;
      for (int k = std::max(0, u - radius); k <= std::min(mask.width - 1, u + radius); ++k) {
        if (mask.at(k, v) == static_cast<bool>(hit)) {
          out = hit;
          break;
        }
      }
      // Pixels beyond the image count as background for erosion.
      if (!grow && (u - radius < 0 || u + radius >= mask.width)) out = 0;
      rows.data[std::size_t(v) * mask.width + u] = out;
    }
  }
  BinaryMask out(mask.width, mask.height);
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      std::uint8_t value = grow ? 0 : 1;
      for (int k = std::max(0, v - radius); k <= std::min(mask.height - 1, v + radius); ++k) {
        if (rows.at(u, k) == static_cast<bool>(hit)) {
          value = hit;
          break;
        }
      }
      if (!grow && (v - radius < 0 || v + radius >= mask.height)) value = 0;
      out.data[std::size_t(v) * mask.width + u] = value;
    }
  }
  return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) { return morph(mask, radius, true); }
BinaryMask erode(const BinaryMask& mask, int radius) { return morph(mask, radius, false); }

std::vector<std::uint32_t> rle_encode(const BinaryMask& mask) {
  std::vector<std::uint32_t> counts;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint8_t p : mask.data) {
    const std::uint8_t bit = p ? 1 : 0;
    if (bit != current) {
      counts.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  counts.push_back(run);
  return counts;
}

BinaryMask rle_decode(std::span<const std::uint32_t> counts, int width, int height) {
  if (width < 1 || height < 1) throw InvalidArgument("mask dimensions must be positive");
  BinaryMask mask(width, height);
  std::size_t pos = 0;
  std::uint8_t bit = 0;
  for (std::uint32_t run : counts) {
    if (run > mask.data.size() - pos) throw FormatError("RLE runs exceed the mask size");
    std::fill_n(mask.data.begin() + static_cast<std::ptrdiff_t>(pos), run, bit);
    pos += run;
    bit ^= 1;
  }
  if (pos != mask.data.size()) throw FormatError("RLE runs do not cover the mask");
  return mask;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
  std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * points.size());
  std::size_t k = 0;
  for (const Vec2& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

BinaryMask rasterize_convex(std::span<const Vec2> polygon, int width, int height) {
  BinaryMask mask(width, height);
  if (polygon.size() < 3) return mask;
  double min_x = polygon[0].x(), max_x = min_x, min_y = polygon[0].y(), max_y = min_y;
  for (const Vec2& p : polygon) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  const int u0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
  const int u1 = std::min(width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
  const int v0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
  const int v1 = std::min(height - 1, static_cast<int>(std::ceil(max_y - 0.5)));
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const Vec2 c(u + 0.5, v + 0.5);
      bool inside = true;
      for (std::size_t i = 0; i < polygon.size() && inside; ++i) {
        const Vec2& a = polygon[i];
        const Vec2& b = polygon[(i + 1) % polygon.size()];
        inside = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()) >= 0.0;
      }
      if (inside) mask.set(u, v);
    }
  }
  return mask;
}

}  // namespace voxaug
