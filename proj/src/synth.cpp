#include "voxaug/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include "voxaug/error.hpp"
#include "voxaug/parallel.hpp"

namespace voxaug {

namespace {

Vec3 reflect_y(const Vec3& x) { return Vec3(x.x(), -x.y(), x.z()); }

double smooth_cover(double signed_distance, double softness) {
  if (softness <= 0.0) return signed_distance <= 0.0 ? 1.0 : 0.0;
  const double h = std::clamp(0.5 - signed_distance / softness, 0.0, 1.0);
  return h * h * (3.0 - 2.0 * h);
}

}  // namespace

double Primitive::signed_distance(const Vec3& x) const {
  switch (shape) {
    case ShapeKind::Sphere:
      return (x - center).norm() - size.x();
    case ShapeKind::Box: {
      const Vec3 local = yaw_rotation(yaw).transpose() * (x - center);
      const Vec3 q = local.cwiseAbs() - 0.5 * size;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case ShapeKind::Slab:
      return std::abs(x.z() - center.z()) - 0.5 * size.z();
  }
  return 0.0;
}

double Primitive::density(const Vec3& x) const {
  const double sd = signed_distance(x);
  if (sd > 0.5 * softness) return 0.0;
  return sigma * smooth_cover(sd, softness);
}

Rgb Primitive::color_at(const Vec3& x) const {
  return negative_y_color && x.y() < 0.0 ? *negative_y_color : color;
}

Primitive Primitive::reflected() const {
  Primitive p = *this;
  p.center = reflect_y(center);
  p.yaw = wrap_angle(-yaw);
  p.mirror = false;
  return p;
}

void Primitive::validate() const {
  if (!(sigma >= 0.0)) throw InvalidArgument("primitive density must be non-negative");
  if (!(softness >= 0.0)) throw InvalidArgument("primitive softness must be non-negative");
  if (!((size.array() > 0.0).all())) throw InvalidArgument("primitive size must be positive");
  auto in_unit = [](const Rgb& c) { return (c.array() >= 0.0).all() && (c.array() <= 1.0).all(); };
  if (!in_unit(color) || (negative_y_color && !in_unit(*negative_y_color))) {
    throw InvalidArgument("primitive colors must lie in [0, 1]");
  }
}

Box3D AnalyticObject::box_at(int frame) const {
  Box3D b = box;
  b.center += velocity * frame;
  b.yaw = wrap_angle(box.yaw + yaw_rate * frame);
  return b;
}

namespace {

// Accumulates density and density-weighted color of primitives living in one frame.
struct Accumulator {
  double sigma = 0.0;
  Rgb weighted = Rgb::Zero();

  void add(const Primitive& p, const Vec3& x) {
    const double s = p.density(x);
    if (s > 0.0) {
      sigma += s;
      weighted += s * p.color_at(x);
    }
    if (p.mirror) {
      const double sm = p.density(reflect_y(x));
      if (sm > 0.0) {
        sigma += sm;
        weighted += sm * p.color_at(x);
      }
    }
  }
};

Vec3 to_object_local(const AnalyticObject& object, const Vec3& x) {
  return yaw_rotation(object.box.yaw).transpose() * (x - object.box.center);
}

double object_sigma(const AnalyticObject& object, const Vec3& x, Accumulator* acc) {
  const Vec3 local = to_object_local(object, x);
  Accumulator own;
  for (const Primitive& p : object.parts) own.add(p, local);
  if (acc) {
    acc->sigma += own.sigma;
    acc->weighted += own.weighted;
  }
  return own.sigma;
}

// Evaluation with the per-object share of density, used for masks.
AnalyticSample eval_detailed(const AnalyticScene& scene, const Vec3& x, std::vector<double>* per_object) {
  if (per_object) per_object->assign(scene.objects.size(), 0.0);
  if (!scene.scene_bounds.contains(x)) return {};
  Accumulator acc;
  for (const Primitive& p : scene.primitives) acc.add(p, x);
  for (std::size_t o = 0; o < scene.objects.size(); ++o) {
    const double s = object_sigma(scene.objects[o], x, &acc);
    if (per_object) (*per_object)[o] = s;
  }
  AnalyticSample out;
  out.sigma = acc.sigma;
  if (acc.sigma > 0.0) out.color = acc.weighted / acc.sigma;
  return out;
}

}  // namespace

AnalyticSample eval_analytic(const AnalyticScene& scene, const Vec3& x) { return eval_detailed(scene, x, nullptr); }

double eval_object_density(const AnalyticScene& scene, std::size_t object, const Vec3& x) {
  if (!scene.scene_bounds.contains(x)) return 0.0;
  return object_sigma(scene.objects.at(object), x, nullptr);
}

double AnalyticScene::density(const Vec3& x) const { return eval_analytic(*this, x).sigma; }

Rgb AnalyticScene::color(const Vec3& x, const Vec3&) const { return eval_analytic(*this, x).color; }

AnalyticScene AnalyticScene::at_frame(int frame) const {
  AnalyticScene out = *this;
  for (AnalyticObject& o : out.objects) {
    o.box = o.box_at(frame);
    o.velocity = Vec3::Zero();
    o.yaw_rate = 0.0;
  }
  return out;
}

void AnalyticScene::validate() const {
  if (!((scene_bounds.max.array() > scene_bounds.min.array()).all())) {
    throw InvalidArgument("scene bounds must have positive extent");
  }
  if (!(nominal_step > 0.0)) throw InvalidArgument("nominal step must be positive");
  for (const Primitive& p : primitives) p.validate();
  for (const AnalyticObject& o : objects) {
    o.box.validate();
    for (const Primitive& p : o.parts) p.validate();
  }
}

OracleResult oracle_render(const AnalyticScene& scene, const Ray& ray, const OracleOptions& options) {
  if (!(options.step > 0.0)) throw InvalidArgument("oracle step must be positive");
  OracleResult out;
  out.instance_weight.assign(scene.objects.size(), 0.0);
  out.render.color = options.background;
  const auto hit = ray_aabb_intersect(ray, scene.scene_bounds);
  if (!hit) return out;
  const double length = hit->second - hit->first;
  const long steps = std::max(1L, static_cast<long>(std::ceil(length / options.step)));
  const double delta = length / static_cast<double>(steps);
  const bool want_instances = !scene.objects.empty();
  std::vector<double> per_object;
  double transmittance = 1.0;
  double depth_sum = 0.0;
  Rgb color = Rgb::Zero();
  for (long i = 0; i < steps; ++i) {
    if (options.early_termination && transmittance < kTerminationThreshold) break;
    const double t = hit->first + (static_cast<double>(i) + 0.5) * delta;
    const AnalyticSample s = eval_detailed(scene, ray.at(t), want_instances ? &per_object : nullptr);
    if (s.sigma <= 0.0) continue;
    const double survive = std::exp(-s.sigma * delta);
    const double weight = transmittance * (1.0 - survive);
    color += weight * s.color;
    depth_sum += weight * t;
    if (want_instances) {
      for (std::size_t o = 0; o < per_object.size(); ++o) out.instance_weight[o] += weight * per_object[o] / s.sigma;
    }
    transmittance *= survive;
  }
  out.render.opacity = 1.0 - transmittance;
  out.render.color = color + transmittance * options.background;
  out.render.depth_valid = out.render.opacity >= kDepthOpacityEpsilon;
  out.render.depth = depth_sum / std::max(out.render.opacity, kDepthOpacityEpsilon);
  return out;
}

namespace {

// Color of the primitive whose surface is closest to x (for empty grid nodes).
Rgb nearest_color(const AnalyticScene& scene, const Vec3& x) {
  double best = std::numeric_limits<double>::infinity();
  Rgb color = Rgb::Constant(0.5);
  auto consider = [&](const Primitive& p, const Vec3& local) {
    double d = p.signed_distance(local);
    if (d < best) {
      best = d;
      color = p.color_at(local);
    }
    if (p.mirror) {
      d = p.signed_distance(reflect_y(local));
      if (d < best) {
        best = d;
        color = p.color_at(local);
      }
    }
  };
  for (const Primitive& p : scene.primitives) consider(p, x);
  for (const AnalyticObject& o : scene.objects) {
    const Vec3 local = to_object_local(o, x);
    for (const Primitive& p : o.parts) consider(p, local);
  }
  return color;
}

double logit(double p) {
  p = std::clamp(p, 1e-4, 1.0 - 1e-4);
  return std::log(p / (1.0 - p));
}

}  // namespace

VoxelField bake(const AnalyticScene& scene, const GridSpec& grid, BakeReport* report) {
  VoxelField field = VoxelField::create(grid, ColorMode::Direct);
  const int nz = grid.resolution[2];
  std::vector<std::size_t> low(nz, 0), high(nz, 0);
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < grid.resolution[1]; ++j) {
      for (int i = 0; i < grid.resolution[0]; ++i) {
        const Vec3 x = grid.node_position(i, j, k);
        const AnalyticSample s = eval_analytic(scene, x);
        double sigma = s.sigma;
        if (sigma < kBakeDensityFloor) {
          sigma = kBakeDensityFloor;
          ++low[k];
        } else if (sigma > kBakeDensityCeiling) {
          sigma = kBakeDensityCeiling;
          ++high[k];
        }
        const std::size_t node = grid.index(i, j, k);
        field.density_grid[node] = static_cast<float>(softplus_inverse(sigma) - field.density_bias);
        const Rgb c = s.sigma > 0.0 ? s.color : nearest_color(scene, x);
        for (int ch = 0; ch < 3; ++ch) field.color_grid[node * 3 + ch] = static_cast<float>(logit(c[ch]));
      }
    }
  }
  BakeReport r;
  for (int k = 0; k < nz; ++k) {
    r.clamped_low += low[k];
    r.clamped_high += high[k];
  }
  if (r.clamped_high > 0) {
    std::cerr << "warning: " << r.clamped_high << " grid nodes exceed the representable density and were clamped\n";
  }
  if (report) *report = r;
  return field;
}

VoxelField bake_object(const AnalyticObject& object, const GridSpec& grid, BakeReport* report) {
  AnalyticScene local;
  local.scene_bounds = grid.bounds;
  local.primitives = object.parts;
  return bake(local, grid, report);
}

RenderedImage oracle_image(const AnalyticScene& scene, const CameraModel& camera, double step, Exec exec) {
  RenderedImage image;
  image.resize(camera.width, camera.height);
  OracleOptions options;
  options.step = step;
  options.background = scene.background;
  options.early_termination = true;
  auto shade_row = [&](int v) {
    for (int u = 0; u < camera.width; ++u) {
      const OracleResult r = oracle_render(scene, generate_ray(camera, u + 0.5, v + 0.5), options);
      const std::size_t p = image.pixel(u, v);
      image.color[p] = r.render.color;
      image.depth[p] = r.render.depth;
      image.opacity[p] = r.render.opacity;
      image.depth_valid[p] = r.render.depth_valid;
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

SceneManifest generate_dataset(const AnalyticScene& scene, const std::vector<CameraModel>& cameras,
                               const DatasetOptions& options) {
  scene.validate();
  if (options.mask_dilation_max < 0) throw InvalidArgument("mask dilation must be non-negative");
  SceneManifest manifest;
  manifest.name = scene.name;
  manifest.background_color = scene.background;
  manifest.bounds = scene.scene_bounds;
  OracleOptions oracle;
  oracle.step = options.step;
  oracle.background = scene.background;
  oracle.early_termination = true;

  for (std::size_t f = 0; f < cameras.size(); ++f) {
    const CameraModel& camera = cameras[f];
    camera.validate();
    const AnalyticScene posed = scene.at_frame(static_cast<int>(f));
    const std::size_t pixels = static_cast<std::size_t>(camera.width) * camera.height;
    std::vector<Rgb> colors(pixels);
    std::vector<double> depth(pixels);
    std::vector<std::uint8_t> valid(pixels);
    std::vector<BinaryMask> masks(scene.objects.size(), BinaryMask(camera.width, camera.height));
#pragma omp parallel for schedule(dynamic, 1)
    for (int v = 0; v < camera.height; ++v) {
      for (int u = 0; u < camera.width; ++u) {
        const OracleResult r = oracle_render(posed, generate_ray(camera, u + 0.5, v + 0.5), oracle);
        const std::size_t p = std::size_t(v) * camera.width + u;
        colors[p] = r.render.color;
        depth[p] = r.render.depth;
        valid[p] = r.render.depth_valid;
        for (std::size_t o = 0; o < masks.size(); ++o) {
          if (r.instance_weight[o] >= options.mask_threshold) masks[o].set(u, v);
        }
      }
    }

    FrameRecord frame;
    frame.timestamp = static_cast<double>(f);
    char name[64];
    std::snprintf(name, sizeof(name), "%s/%04zu.ppm", options.image_prefix.c_str(), f);
    frame.image_path = name;
    std::snprintf(name, sizeof(name), "%s/%04zu_depth.pgm", options.image_prefix.c_str(), f);
    frame.depth_path = name;
    frame.camera = camera;
    frame.image = to_image8(colors, camera.width, camera.height);
    frame.depth = to_depth16(depth, valid, camera.width, camera.height);
    SplitMix64 rng(mix_seed(options.seed, f));
    const int radius =
        options.mask_dilation_max > 0 ? static_cast<int>(rng() % (options.mask_dilation_max + 1)) : 0;
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
      const AnalyticObject& object = posed.objects[o];
      frame.boxes.push_back({object.track_id, object.box});
      if (masks[o].empty()) continue;
      frame.masks.push_back({object.instance_id, dilate(masks[o], radius)});
    }
    manifest.frames.push_back(std::move(frame));
  }
  return manifest;
}

std::vector<CameraModel> orbit_cameras(const Vec3& target, double radius, double height, int count, double start,
                                       double end, int width, int height_px, double horizontal_fov) {
  if (count < 1) throw InvalidArgument("camera count must be positive");
  std::vector<CameraModel> cameras;
  for (int i = 0; i < count; ++i) {
    const double a = start + (end - start) * static_cast<double>(i) / static_cast<double>(count);
    const Vec3 eye(target.x() + radius * std::cos(a), target.y() + radius * std::sin(a), height);
    cameras.push_back(CameraModel::from_fov(width, height_px, horizontal_fov, look_at(eye, target)));
  }
  return cameras;
}

}  // namespace voxaug
