#include "voxaug/reconstruction.hpp"

#include <algorithm>

#include "voxaug/error.hpp"

namespace voxaug {

Aabb scene_region(const SceneManifest& manifest) {
  if (manifest.bounds) return *manifest.bounds;
  if (manifest.frames.empty()) throw InvalidArgument("manifest has no frames");
  Aabb box{manifest.frames[0].camera.center(), manifest.frames[0].camera.center()};
  auto grow = [&](const Vec3& p) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  };
  for (const FrameRecord& frame : manifest.frames) {
    grow(frame.camera.center());
    DepthMap16 storage;
    const DepthMap16* depth = frame_depth(frame, manifest.root, storage);
    if (!depth) continue;
    for (int v = 0; v < frame.camera.height; ++v) {
      for (int u = 0; u < frame.camera.width; ++u) {
        if (depth->valid(u, v)) grow(generate_ray(frame.camera, u + 0.5, v + 0.5).at(depth->meters(u, v)));
      }
    }
  }
  return box.expanded(0.5);
}

GridSpec capped_grid(const Aabb& region, double voxel_size, int max_resolution) {
  if (max_resolution < 2) throw InvalidArgument("resolution cap must be at least 2");
  const double longest = region.extent().maxCoeff();
  const double voxel = std::max(voxel_size, longest / (max_resolution - 1));
  GridSpec grid = GridSpec::covering(region, voxel);
  // Snapping max upward can add one node; coarsen slightly if the cap is still exceeded.
  while (*std::max_element(grid.resolution.begin(), grid.resolution.end()) > max_resolution) {
    grid = GridSpec::covering(region, grid.voxel_size * (1.0 + 1e-6));
  }
  return grid;
}

TrainedBackground train_background(const SceneManifest& manifest, TrainConfig config,
                                   const BackgroundOptions& options) {
  if (manifest.frames.size() < 2) throw InvalidArgument("background training needs at least two frames");
  const GridSpec grid = capped_grid(scene_region(manifest), options.voxel_size, options.max_resolution);
  TrainedBackground out;
  out.field = VoxelField::create(grid, options.color_mode, config.seed);
  const TrainingBatch pool = background_rays(manifest, options.decomposition);
  config.background = manifest.background_color;
  config.symmetric = false;
  if (config.iterations > 0) {
    out.report = fit_field(out.field, pool, config);
  } else {
    out.report.ray_pool = pool.size();
  }
  return out;
}

Aabb object_field_region(const Vec3& box_size, double margin) {
  const Vec3 half = 0.5 * box_size + Vec3::Constant(margin);
  return {-half, half};
}

TrainedObject train_object(const SceneManifest& manifest, const ObjectTrack& track, TrainConfig config,
                           const ObjectOptions& options) {
  if (track.observations.empty()) throw InvalidArgument("object track has no observations");
  if (options.require_intact && !select_intact(track, manifest, options.decomposition)) {
    throw NotIntact("track " + std::to_string(track.track_id) + " is not intact");
  }
  const TrackObservation& first = track.observations.front();
  const Box3D& box = manifest.frames.at(first.frame).boxes.at(first.box).box;
  const GridSpec grid = GridSpec::covering(object_field_region(box.size, options.margin), options.voxel_size);

  TrainedObject out;
  out.asset.field = VoxelField::create(grid, options.color_mode, config.seed);
  out.asset.canonical_box = Box3D{Vec3::Zero(), box.size, 0.0, Frame::ObjectLocal};
  out.asset.symmetric = config.symmetric;
  const TrainingBatch pool = object_rays(track, manifest, grid.bounds, options.decomposition);
  if (pool.empty()) throw InvalidArgument("object track yields no training rays");
  config.background = Rgb::Zero();
  if (config.iterations > 0) {
    out.report = fit_field(out.asset.field, pool, config);
  } else {
    out.report.ray_pool = pool.size();
  }
  return out;
}

}  // namespace voxaug
