#pragma once

#include <cmath>
#include <concepts>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "voxaug/error.hpp"
#include "voxaug/geometry.hpp"
#include "voxaug/parallel.hpp"
#include "voxaug/voxel_field.hpp"

namespace voxaug {

/// Anything with bounded density and color that the quadrature can integrate.
template <class T>
concept RadianceSource = requires(const T& s, const Vec3& x, const Vec3& d) {
  { s.bounds() } -> std::convertible_to<Aabb>;
  { s.density(x) } -> std::convertible_to<double>;
  { s.color(x, d) } -> std::convertible_to<Rgb>;
  { s.voxel_size() } -> std::convertible_to<double>;
};

/// Opacity below which rendered depth is reported invalid.
inline constexpr double kDepthOpacityEpsilon = 1e-4;
/// Transmittance at which early termination stops marching.
inline constexpr double kTerminationThreshold = 1e-4;

struct SamplePoint {
  double t = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  Rgb color = Rgb::Zero();
  int source = 0;  // 0 = background, 1 + i = object i

  double alpha() const { return 1.0 - std::exp(-sigma * delta); }
};

struct RenderResult {
  Rgb color = Rgb::Zero();
  double depth = 0.0;
  double opacity = 0.0;
  bool depth_valid = false;
};

struct CompositeOptions {
  Rgb background = Rgb::Zero();
  bool early_termination = true;
};

/// Number of quadrature samples on a segment: fixed `count` when > 0, else one per
/// `step_ratio * voxel_size`, capped at `max_samples`.
struct SampleSpec {
  int count = 0;
  double step_ratio = 0.5;
  int max_samples = 4096;

  int samples_for(double length, double voxel_size) const;
};

/// n stratified points over [t_near, t_far]: stratum midpoints, or uniform within
/// each stratum when `jitter` is set. delta is the stratum width.
template <std::uniform_random_bit_generator Rng = std::mt19937_64>
std::vector<SamplePoint> sample_along_ray(const Ray& ray, int n, bool jitter, Rng* rng) {
  if (n < 1) throw InvalidArgument("sample count must be at least 1");
  if (!std::isfinite(ray.t_near) || !std::isfinite(ray.t_far) || !(ray.t_near < ray.t_far)) {
    throw InvalidArgument("sampling requires finite ray bounds with t_near < t_far");
  }
  if (jitter && rng == nullptr) throw InvalidArgument("jittered sampling needs an RNG");
  const double width = (ray.t_far - ray.t_near) / n;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SamplePoint> samples(n);
  for (int i = 0; i < n; ++i) {
    const double offset = jitter ? unit(*rng) : 0.5;
    samples[i].t = ray.t_near + (i + offset) * width;
    samples[i].delta = width;
  }
  return samples;
}

/// Front-to-back alpha compositing of samples already sorted by t.
RenderResult composite(std::span<const SamplePoint> samples, const CompositeOptions& options);

namespace detail {
inline void require_nondegenerate(const Ray& ray) {
  if (!(ray.t_near < ray.t_far)) throw InvalidArgument("degenerate ray: t_near >= t_far");
}
}  // namespace detail

/// Clips the ray to the source bounds and integrates it with n samples.
template <RadianceSource Source>
RenderResult render(const Source& source, const Ray& ray, int n, const CompositeOptions& options,
                    bool jitter = false, std::mt19937_64* rng = nullptr) {
  detail::require_nondegenerate(ray);
  RenderResult result;
  result.color = options.background;
  const auto hit = ray_aabb_intersect(ray, source.bounds());
  if (!hit) return result;
  Ray clipped = ray;
  clipped.t_near = hit->first;
  clipped.t_far = hit->second;
  std::vector<SamplePoint> samples = sample_along_ray(clipped, n, jitter, rng);
  for (SamplePoint& s : samples) {
    const Vec3 x = ray.at(s.t);
    s.sigma = source.density(x);
    s.color = s.sigma > 0.0 ? source.color(x, ray.direction) : Rgb::Zero();
  }
  return composite(samples, options);
}

template <RadianceSource Source>
RenderResult render(const Source& source, const Ray& ray, const SampleSpec& spec,
                    const CompositeOptions& options) {
  detail::require_nondegenerate(ray);
  const auto hit = ray_aabb_intersect(ray, source.bounds());
  if (!hit) {
    RenderResult miss;
    miss.color = options.background;
    return miss;
  }
  return render(source, ray, spec.samples_for(hit->second - hit->first, source.voxel_size()), options);
}

/// Object probability 1 - exp(-sum sigma * delta) over n samples in [t_a, t_b];
/// 0 when there is no intersection.
template <RadianceSource Source>
double render_object_probability(const Source& source, const Ray& ray,
                                  std::optional<std::pair<double, double>> bounds, int n) {
  if (!bounds || !(bounds->first < bounds->second)) return 0.0;
  Ray segment = ray;
  segment.t_near = bounds->first;
  segment.t_far = bounds->second;
  double optical_depth = 0.0;
  for (const SamplePoint& s : sample_along_ray<std::mt19937_64>(segment, n, false, nullptr)) {
    optical_depth += source.density(ray.at(s.t)) * s.delta;
  }
  return -std::expm1(-optical_depth);
}

/// One field of a composed scene. Objects carry their world placement.
struct FieldInstance {
  const VoxelField* field = nullptr;
  std::optional<RigidPlacement> placement;  // nullopt for the background (world frame)
};

/// Samples every field the ray crosses at that field's own spacing, merges by
/// (t, source index) and composites once. `fields[0]` is the background.
RenderResult render_composed(std::span<const FieldInstance> fields, const Ray& ray, const SampleSpec& spec,
                             const CompositeOptions& options);

struct RenderedImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> color;
  std::vector<double> depth;
  std::vector<double> opacity;
  std::vector<std::uint8_t> depth_valid;

  void resize(int w, int h);
  std::size_t pixel(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
};

/// Renders every pixel center of the camera. Pixels are independent, so the serial and
/// parallel kernels are bitwise identical.
template <RadianceSource Source>
RenderedImage render_image(const Source& source, const CameraModel& camera, const SampleSpec& spec,
                           const CompositeOptions& options, Exec exec = Exec::Parallel) {
  RenderedImage image;
  image.resize(camera.width, camera.height);
  auto shade_row = [&](int v) {
    for (int u = 0; u < camera.width; ++u) {
      const RenderResult r = render(source, generate_ray(camera, u + 0.5, v + 0.5), spec, options);
      const std::size_t p = image.pixel(u, v);
      image.color[p] = r.color;
      image.depth[p] = r.depth;
      image.opacity[p] = r.opacity;
      image.depth_valid[p] = r.depth_valid;
    }
  };
  if (exec == Exec::Serial) {
    for (int v = 0; v < camera.height; ++v) shade_row(v);
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (int v = 0; v < camera.height; ++v) shade_row(v);
  }
  return image;
}

RenderedImage render_composed_image(std::span<const FieldInstance> fields, const CameraModel& camera,
                                    const SampleSpec& spec, const CompositeOptions& options,
                                    Exec exec = Exec::Parallel);

/// Peak signal-to-noise ratio (peak 1) over the pixels where `mask` is set (all when empty).
double psnr(std::span<const Rgb> a, std::span<const Rgb> b, std::span<const std::uint8_t> mask = {});

}  // namespace voxaug
