#pragma once

#include <optional>
#include <set>
#include <span>
#include <vector>

#include "voxaug/manifest.hpp"
#include "voxaug/trainer.hpp"

namespace voxaug {

struct DecompositionConfig {
  double match_iou = 0.3;         // mask <-> projected box
  double track_iou = 0.5;         // mask <-> mask across consecutive frames (untracked boxes)
  double fill_ratio = 0.6;        // intact masks cover this much of their box hull
  double moving_threshold = 0.5;  // meters of center displacement along a track
  int exclusion_dilation = 2;     // pixels added around moving masks
  int band_width = 8;             // background band around object masks, pixels
};

/// Convex hull of the 8 projected box corners; nullopt when a corner is behind the camera.
std::optional<std::vector<Vec2>> projected_box_hull(const Box3D& box, const CameraModel& camera);
/// Rasterized hull; empty when the projection is unavailable.
BinaryMask box_silhouette(const Box3D& box, const CameraModel& camera);

struct MaskBoxMatch {
  int mask = -1;
  int box = -1;
  double iou = 0.0;
};

/// Best-first assignment on an IoU table (rows = masks, columns = boxes); pairs below
/// `floor` stay unmatched and each row and column is used at most once. Ties resolve to
/// the lower (mask, box) index.
std::vector<MaskBoxMatch> greedy_assignment(const std::vector<std::vector<double>>& iou, double floor);

std::vector<MaskBoxMatch> match_mask_to_box(std::span<const InstanceMask> masks, std::span<const BoxAnnotation> boxes,
                                            const CameraModel& camera, double floor = 0.3);

struct TrackObservation {
  std::size_t frame = 0;
  int mask = -1;  // index into the frame's masks
  int box = -1;   // index into the frame's boxes
  double iou = 0.0;
};

struct ObjectTrack {
  int track_id = -1;  // box track id; untracked objects get ids from kUntrackedIdBase up
  int segment = 0;    // > 0 when the same id reappeared after a gap
  std::vector<TrackObservation> observations;
  bool intact = false;
};

inline constexpr int kUntrackedIdBase = 1000000;

/// Links matched observations over consecutive frames (by box track id, else by mask IoU)
/// and flags intact tracks. A frame without the object ends the track.
std::vector<ObjectTrack> build_tracks(const SceneManifest& manifest, const DecompositionConfig& config = {});

/// Every observation's mask stays off the image border, overlaps no other instance mask,
/// and fills at least `fill_ratio` of its projected box hull.
bool select_intact(const ObjectTrack& track, const SceneManifest& manifest, const DecompositionConfig& config = {});

/// Box track ids whose world center moves more than the threshold over the manifest.
std::set<int> moving_track_ids(const SceneManifest& manifest, double threshold = 0.5);

/// Pixels of `frame` dropped from background training: masks matched to moving boxes, dilated.
BinaryMask background_exclusion(const SceneManifest& manifest, std::size_t frame, const std::set<int>& moving,
                                const DecompositionConfig& config = {});

/// World-frame rays with color and depth targets for every non-excluded pixel.
TrainingBatch background_rays(const SceneManifest& manifest, const DecompositionConfig& config = {});

/// Object-local rays of a track: mask pixels labeled foreground with their colors, band pixels
/// labeled background with black targets. Depth targets that leave `local_bounds` are dropped.
TrainingBatch object_rays(const ObjectTrack& track, const SceneManifest& manifest, const Aabb& local_bounds,
                          const DecompositionConfig& config = {});

/// Placement that maps the object-local frame of `box` into the world.
RigidPlacement box_placement(const Box3D& box);

}  // namespace voxaug
