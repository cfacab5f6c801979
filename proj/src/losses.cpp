#include "voxaug/losses.hpp"

#include <algorithm>
#include <cmath>

#include "voxaug/error.hpp"

namespace voxaug {

double color_loss(std::span<const Rgb> predicted, std::span<const Rgb> target) {
  if (predicted.size() != target.size()) throw InvalidArgument("color_loss: length mismatch");
  if (predicted.empty()) throw InvalidArgument("color_loss: no rays");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += (predicted[i] - target[i]).squaredNorm();
  return sum / static_cast<double>(predicted.size());
}

double depth_loss(std::span<const double> predicted, std::span<const double> target,
                  std::span<const std::uint8_t> valid) {
  if (predicted.size() != target.size() || predicted.size() != valid.size()) {
    throw InvalidArgument("depth_loss: length mismatch");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!valid[i]) continue;
    sum += std::abs(predicted[i] - target[i]);
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

BceTerm binary_cross_entropy(double p, MaskLabel label) {
  if (label == MaskLabel::None) return {};
  const bool clamped = p < kProbabilityEpsilon || p > 1.0 - kProbabilityEpsilon;
  const double q = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  if (label == MaskLabel::Foreground) return {-std::log(q), clamped ? 0.0 : -1.0 / q};
  return {-std::log1p(-q), clamped ? 0.0 : 1.0 / (1.0 - q)};
}

double gc_loss(std::span<const double> object_prob, std::span<const MaskLabel> labels) {
  if (object_prob.size() != labels.size()) throw InvalidArgument("gc_loss: length mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == MaskLabel::None) continue;
    sum += binary_cross_entropy(object_prob[i], labels[i]).loss;
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

Ray mirror_ray(const Ray& ray_local) {
  if (ray_local.frame != Frame::ObjectLocal) throw InvalidArgument("mirror_ray needs an object-local ray");
  Ray mirrored = ray_local;
  mirrored.origin.y() = -ray_local.origin.y();
  mirrored.direction.y() = -ray_local.direction.y();
  return mirrored;
}

}  // namespace voxaug
