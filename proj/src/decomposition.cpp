#include "voxaug/decomposition.hpp"

#include <algorithm>
#include <map>

#include "voxaug/error.hpp"

namespace voxaug {

std::optional<std::vector<Vec2>> projected_box_hull(const Box3D& box, const CameraModel& camera) {
  std::vector<Vec2> points;
  for (const Vec3& corner : box.corners()) {
    const auto p = camera.project(corner, 1e-3);
    if (!p) return std::nullopt;
    points.push_back(*p);
  }
  return convex_hull(std::move(points));
}

BinaryMask box_silhouette(const Box3D& box, const CameraModel& camera) {
  const auto hull = projected_box_hull(box, camera);
  if (!hull) return BinaryMask(camera.width, camera.height);
  return rasterize_convex(*hull, camera.width, camera.height);
}

std::vector<MaskBoxMatch> greedy_assignment(const std::vector<std::vector<double>>& iou, double floor) {
  std::vector<MaskBoxMatch> candidates;
  for (std::size_t m = 0; m < iou.size(); ++m) {
    for (std::size_t b = 0; b < iou[m].size(); ++b) {
      if (iou[m][b] >= floor && iou[m][b] > 0.0) {
        candidates.push_back({static_cast<int>(m), static_cast<int>(b), iou[m][b]});
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const MaskBoxMatch& a, const MaskBoxMatch& b) { return a.iou > b.iou; });
  std::vector<MaskBoxMatch> result;
  std::set<int> used_masks, used_boxes;
  for (const MaskBoxMatch& c : candidates) {
    if (used_masks.count(c.mask) || used_boxes.count(c.box)) continue;
    used_masks.insert(c.mask);
    used_boxes.insert(c.box);
    result.push_back(c);
  }
  return result;
}

std::vector<MaskBoxMatch> match_mask_to_box(std::span<const InstanceMask> masks, std::span<const BoxAnnotation> boxes,
                                            const CameraModel& camera, double floor) {
  std::vector<BinaryMask> hulls;
  hulls.reserve(boxes.size());
  for (const BoxAnnotation& b : boxes) hulls.push_back(box_silhouette(b.box, camera));
  std::vector<std::vector<double>> table(masks.size(), std::vector<double>(boxes.size(), 0.0));
  for (std::size_t m = 0; m < masks.size(); ++m) {
    for (std::size_t b = 0; b < boxes.size(); ++b) table[m][b] = mask_iou(masks[m].mask, hulls[b]);
  }
  return greedy_assignment(table, floor);
}

std::vector<ObjectTrack> build_tracks(const SceneManifest& manifest, const DecompositionConfig& config) {
  std::vector<ObjectTrack> tracks;
  std::map<int, int> segments_seen;               // track id -> segments started
  std::map<int, std::size_t> open_by_id;          // track id -> index of the track extended last frame
  std::vector<std::size_t> open_untracked;        // tracks without ids, alive in the previous frame
  int next_untracked = kUntrackedIdBase;

  for (std::size_t f = 0; f < manifest.frames.size(); ++f) {
    const FrameRecord& frame = manifest.frames[f];
    std::map<int, std::size_t> still_open;
    std::vector<std::size_t> still_untracked;
    for (const MaskBoxMatch& m : match_mask_to_box(frame.masks, frame.boxes, frame.camera, config.match_iou)) {
      const TrackObservation obs{f, m.mask, m.box, m.iou};
      const int id = frame.boxes[m.box].track_id;
      if (id >= 0) {
        auto it = open_by_id.find(id);
        std::size_t index;
        if (it != open_by_id.end()) {
          index = it->second;
        } else {
          index = tracks.size();
          tracks.push_back({id, segments_seen[id]++, {}, false});
        }
        tracks[index].observations.push_back(obs);
        still_open[id] = index;
        continue;
      }
      // Untracked: continue the previous-frame track whose last mask overlaps best.
      std::size_t best = tracks.size();
      double best_iou = config.track_iou;
      for (std::size_t t : open_untracked) {
        if (std::find(still_untracked.begin(), still_untracked.end(), t) != still_untracked.end()) continue;
        const TrackObservation& last = tracks[t].observations.back();
        const double iou = mask_iou(manifest.frames[last.frame].masks[last.mask].mask, frame.masks[m.mask].mask);
        if (iou >= best_iou) {
          best_iou = iou;
          best = t;
        }
      }
      if (best == tracks.size()) tracks.push_back({next_untracked++, 0, {}, false});
      tracks[best].observations.push_back(obs);
      still_untracked.push_back(best);
    }
    open_by_id = std::move(still_open);
    open_untracked = std::move(still_untracked);
  }
  for (ObjectTrack& t : tracks) t.intact = select_intact(t, manifest, config);
  return tracks;
}

bool select_intact(const ObjectTrack& track, const SceneManifest& manifest, const DecompositionConfig& config) {
  if (track.observations.empty()) return false;
  for (const TrackObservation& obs : track.observations) {
    const FrameRecord& frame = manifest.frames.at(obs.frame);
    const BinaryMask& mask = frame.masks.at(obs.mask).mask;
    if (mask.empty() || mask.touches_border()) return false;
    for (std::size_t other = 0; other < frame.masks.size(); ++other) {
      if (static_cast<int>(other) != obs.mask && intersection_count(mask, frame.masks[other].mask) > 0) return false;
    }
    const BinaryMask hull = box_silhouette(frame.boxes.at(obs.box).box, frame.camera);
    const std::size_t hull_area = hull.count();
    if (hull_area == 0) return false;
    const double fill = static_cast<double>(intersection_count(mask, hull)) / static_cast<double>(hull_area);
    if (fill < config.fill_ratio) return false;
  }
  return true;
}

std::set<int> moving_track_ids(const SceneManifest& manifest, double threshold) {
  std::map<int, std::vector<Vec3>> centers;
  for (const FrameRecord& f : manifest.frames) {
    for (const BoxAnnotation& b : f.boxes) {
      if (b.track_id >= 0) centers[b.track_id].push_back(b.box.center);
    }
  }
  std::set<int> moving;
  for (const auto& [id, list] : centers) {
    double spread = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = i + 1; j < list.size(); ++j) spread = std::max(spread, (list[i] - list[j]).norm());
    }
    if (spread > threshold) moving.insert(id);
  }
  return moving;
}

BinaryMask background_exclusion(const SceneManifest& manifest, std::size_t frame_index, const std::set<int>& moving,
                                const DecompositionConfig& config) {
  const FrameRecord& frame = manifest.frames.at(frame_index);
  BinaryMask excluded(frame.camera.width, frame.camera.height);
  if (moving.empty()) return excluded;
  for (const MaskBoxMatch& m : match_mask_to_box(frame.masks, frame.boxes, frame.camera, config.match_iou)) {
    if (moving.count(frame.boxes[m.box].track_id)) excluded = mask_union(excluded, frame.masks[m.mask].mask);
  }
  return dilate(excluded, config.exclusion_dilation);
}

TrainingBatch background_rays(const SceneManifest& manifest, const DecompositionConfig& config) {
  const std::set<int> moving = moving_track_ids(manifest, config.moving_threshold);
  TrainingBatch batch;
  for (std::size_t f = 0; f < manifest.frames.size(); ++f) {
    const FrameRecord& frame = manifest.frames[f];
    Image8 image_storage;
    DepthMap16 depth_storage;
    const Image8& image = frame_image(frame, manifest.root, image_storage);
    const DepthMap16* depth = frame_depth(frame, manifest.root, depth_storage);
    const BinaryMask excluded = background_exclusion(manifest, f, moving, config);
    for (int v = 0; v < frame.camera.height; ++v) {
      for (int u = 0; u < frame.camera.width; ++u) {
        if (excluded.at(u, v)) continue;
        const bool has_depth = depth && depth->valid(u, v);
        batch.push(generate_ray(frame.camera, u + 0.5, v + 0.5), image.at(u, v), has_depth ? depth->meters(u, v) : 0.0,
                   has_depth);
      }
    }
  }
  return batch;
}

RigidPlacement box_placement(const Box3D& box) {
  RigidPlacement p;
  p.translation = box.center;
  p.yaw = box.yaw;
  p.box = box;
  return p;
}

TrainingBatch object_rays(const ObjectTrack& track, const SceneManifest& manifest, const Aabb& local_bounds,
                          const DecompositionConfig& config) {
  TrainingBatch batch;
  for (const TrackObservation& obs : track.observations) {
    const FrameRecord& frame = manifest.frames.at(obs.frame);
    const BinaryMask& mask = frame.masks.at(obs.mask).mask;
    if (mask.empty()) continue;
    Image8 image_storage;
    DepthMap16 depth_storage;
    const Image8& image = frame_image(frame, manifest.root, image_storage);
    const DepthMap16* depth = frame_depth(frame, manifest.root, depth_storage);
    const RigidPlacement placement = box_placement(frame.boxes.at(obs.box).box);
    const BinaryMask crop = dilate(mask, config.band_width);
    for (int v = 0; v < frame.camera.height; ++v) {
      for (int u = 0; u < frame.camera.width; ++u) {
        if (!crop.at(u, v)) continue;
        const Ray local = transform_ray(generate_ray(frame.camera, u + 0.5, v + 0.5), placement,
                                        TransformDirection::WorldToLocal);
        if (!mask.at(u, v)) {
          batch.push(local, Rgb::Zero(), 0.0, false, MaskLabel::Background);
          continue;
        }
        bool has_depth = depth && depth->valid(u, v);
        double target = has_depth ? depth->meters(u, v) : 0.0;
        if (has_depth) {
          const auto span = ray_aabb_intersect(local, local_bounds);
          has_depth = span && target >= span->first && target <= span->second;
        }
        batch.push(local, image.at(u, v), has_depth ? target : 0.0, has_depth, MaskLabel::Foreground);
      }
    }
  }
  return batch;
}

}  // namespace voxaug
