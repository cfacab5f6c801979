#include "voxaug/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

namespace voxaug {

void set_worker_count(int workers) {
  if (workers > 0) omp_set_num_threads(workers);
}

int worker_count() { return omp_get_max_threads(); }

int SampleSpec::samples_for(double length, double voxel_size) const {
  if (count > 0) return count;
  const double step = step_ratio * voxel_size;
  const int n = static_cast<int>(std::ceil(length / step));
  return std::clamp(n, 1, max_samples);
}

RenderResult composite(std::span<const SamplePoint> samples, const CompositeOptions& options) {
  RenderResult result;
  double transmittance = 1.0;
  double depth_sum = 0.0;
  Rgb color = Rgb::Zero();
  for (const SamplePoint& s : samples) {
    if (options.early_termination && transmittance < kTerminationThreshold) break;
    const double alpha = -std::expm1(-s.sigma * s.delta);
    const double weight = transmittance * alpha;
    color += weight * s.color;
    depth_sum += weight * s.t;
    transmittance *= 1.0 - alpha;
  }
  result.opacity = 1.0 - transmittance;
  result.color = color + transmittance * options.background;
  result.depth_valid = result.opacity >= kDepthOpacityEpsilon;
  result.depth = depth_sum / std::max(result.opacity, kDepthOpacityEpsilon);
  return result;
}

namespace {

void append_field_samples(const VoxelField& field, const Ray& ray, int source, const SampleSpec& spec,
                          std::vector<SamplePoint>& out) {
  const auto hit = ray_aabb_intersect(ray, field.bounds());
  if (!hit) return;
  Ray clipped = ray;
  clipped.t_near = hit->first;
  clipped.t_far = hit->second;
  const int n = spec.samples_for(hit->second - hit->first, field.voxel_size());
  for (SamplePoint s : sample_along_ray<std::mt19937_64>(clipped, n, false, nullptr)) {
    const Vec3 x = ray.at(s.t);
    s.sigma = query_density(field, x);
    s.color = s.sigma > 0.0 ? query_color(field, x, ray.direction) : Rgb::Zero();
    s.source = source;
    out.push_back(s);
  }
}

// Object order is canonicalized so that listing order never changes the result.
std::vector<std::size_t> canonical_object_order(std::span<const FieldInstance> fields) {
  std::vector<std::size_t> order(fields.size() > 0 ? fields.size() - 1 : 0);
  std::iota(order.begin(), order.end(), std::size_t{1});
  auto key = [&](std::size_t i) {
    const RigidPlacement& p = *fields[i].placement;
    return std::make_tuple(p.translation.x(), p.translation.y(), p.translation.z(), p.yaw,
                           reinterpret_cast<std::uintptr_t>(fields[i].field));
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return order;
}

}  // namespace

RenderResult render_composed(std::span<const FieldInstance> fields, const Ray& ray, const SampleSpec& spec,
                             const CompositeOptions& options) {
  detail::require_nondegenerate(ray);
  if (fields.empty() || fields[0].field == nullptr || fields[0].placement) {
    throw InvalidArgument("composed scene needs a background field first");
  }
  std::vector<SamplePoint> samples;
  append_field_samples(*fields[0].field, ray, 0, spec, samples);
  int source = 1;
  for (std::size_t i : canonical_object_order(fields)) {
    const FieldInstance& inst = fields[i];
    if (inst.field == nullptr || !inst.placement) throw InvalidArgument("object instance needs a field and placement");
    const Ray local = transform_ray(ray, *inst.placement, TransformDirection::WorldToLocal);
    append_field_samples(*inst.field, local, source++, spec, samples);
  }
  std::stable_sort(samples.begin(), samples.end(), [](const SamplePoint& a, const SamplePoint& b) {
    return a.t < b.t || (a.t == b.t && a.source < b.source);
  });
  return composite(samples, options);
}

void RenderedImage::resize(int w, int h) {
  width = w;
  height = h;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  color.assign(n, Rgb::Zero());
  depth.assign(n, 0.0);
  opacity.assign(n, 0.0);
  depth_valid.assign(n, 0);
}

RenderedImage render_composed_image(std::span<const FieldInstance> fields, const CameraModel& camera,
                                    const SampleSpec& spec, const CompositeOptions& options, Exec exec) {
  RenderedImage image;
  image.resize(camera.width, camera.height);
  auto shade_row = [&](int v) {
    for (int u = 0; u < camera.width; ++u) {
      const RenderResult r = render_composed(fields, generate_ray(camera, u + 0.5, v + 0.5), spec, options);
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

double psnr(std::span<const Rgb> a, std::span<const Rgb> b, std::span<const std::uint8_t> mask) {
  if (a.size() != b.size()) throw InvalidArgument("psnr: image sizes differ");
  if (!mask.empty() && mask.size() != a.size()) throw InvalidArgument("psnr: mask size differs");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    sum += (a[i] - b[i]).squaredNorm();
    count += 3;
  }
  if (count == 0) throw InvalidArgument("psnr: no pixels selected");
  const double mse = sum / static_cast<double>(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

}  // namespace voxaug
