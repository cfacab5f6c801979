#pragma once

#include <cstdint>
#include <span>

#include "voxaug/geometry.hpp"

namespace voxaug {

enum class MaskLabel : std::uint8_t { None = 0, Foreground = 1, Background = 2 };

/// Object probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbabilityEpsilon = 1e-6;

/// Mean over rays of the squared L2 color distance.
double color_loss(std::span<const Rgb> predicted, std::span<const Rgb> target);

/// Mean absolute depth error over valid rays; 0 when none is valid.
double depth_loss(std::span<const double> predicted, std::span<const double> target,
                  std::span<const std::uint8_t> valid);

/// Mean binary cross-entropy of the rendered object probability against mask labels:
/// foreground rays pay -log P, background rays -log(1 - P). Unlabeled rays are skipped.
double gc_loss(std::span<const double> object_prob, std::span<const MaskLabel> labels);

/// Per-ray BCE term and its derivative with respect to P (zero inside the clamp).
struct BceTerm {
  double loss = 0.0;
  double dloss_dp = 0.0;
};
BceTerm binary_cross_entropy(double p, MaskLabel label);

/// Reflects an object-local ray across the y = 0 symmetry plane.
/// Throws InvalidArgument for world-frame rays.
Ray mirror_ray(const Ray& ray_local);

}  // namespace voxaug
