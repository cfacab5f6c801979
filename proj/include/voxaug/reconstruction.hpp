#pragma once

#include "voxaug/decomposition.hpp"
#include "voxaug/error.hpp"
#include "voxaug/manifest.hpp"
#include "voxaug/trainer.hpp"
#include "voxaug/voxel_field.hpp"

namespace voxaug {

/// Raised when an object track fails the intactness test.
class NotIntact : public Error {
 public:
  using Error::Error;
};

struct BackgroundOptions {
  double voxel_size = 0.25;
  int max_resolution = 330;  // per axis; the voxel grows to respect it
  ColorMode color_mode = ColorMode::Direct;
  DecompositionConfig decomposition;
};

struct TrainedBackground {
  VoxelField field;
  TrainReport report;
};

/// The manifest's bounds when present, else the box around camera centers and valid depth
/// points, padded by half a meter.
Aabb scene_region(const SceneManifest& manifest);

/// Grid over `region` with spacing `voxel_size`, coarsened until no axis exceeds `max_resolution`.
GridSpec capped_grid(const Aabb& region, double voxel_size, int max_resolution);

/// Trains on every static pixel; renders against the manifest's background color.
TrainedBackground train_background(const SceneManifest& manifest, TrainConfig config,
                                   const BackgroundOptions& options = {});

struct ObjectOptions {
  double voxel_size = 0.25;
  double margin = 0.3;  // meters of empty space kept around the canonical box
  ColorMode color_mode = ColorMode::Direct;
  bool require_intact = true;
  DecompositionConfig decomposition;
};

struct TrainedObject {
  ObjectAsset asset;
  TrainReport report;
};

/// Local field bounds for an object whose box has the given size.
Aabb object_field_region(const Vec3& box_size, double margin);

/// Trains an object field in its box frame. config.symmetric is recorded on the asset.
/// Throws NotIntact when `require_intact` is set and the track is not intact.
TrainedObject train_object(const SceneManifest& manifest, const ObjectTrack& track, TrainConfig config,
                           const ObjectOptions& options = {});

}  // namespace voxaug
