#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "voxaug/geometry.hpp"
#include "voxaug/image.hpp"
#include "voxaug/mask.hpp"

namespace voxaug {

struct BoxAnnotation {
  int track_id = -1;  // -1 when the source has no tracking
  Box3D box;
};

struct InstanceMask {
  int instance_id = 0;
  BinaryMask mask;
};

struct FrameRecord {
  double timestamp = 0.0;
  std::string image_path;  // relative to the manifest directory
  std::string depth_path;  // empty when the frame has no depth
  CameraModel camera;
  std::vector<BoxAnnotation> boxes;
  std::vector<InstanceMask> masks;

  // Pixel data kept in memory (synthetic datasets); loaded from the paths otherwise.
  std::optional<Image8> image;
  std::optional<DepthMap16> depth;
};

/// One scene: posed frames with images, optional depth, instance masks and 3D boxes.
///
/// JSON layout:
///   { "name": str, "background_color": [r, g, b], "bounds": {"min": [..], "max": [..]} (optional),
///     "frames": [ { "timestamp": s, "image": path, "depth": path | "",
///                   "camera": {"fx", "fy", "cx", "cy", "width", "height",
///                              "pose": 16 numbers, row-major world-from-camera},
///                   "boxes": [ {"track_id", "center": [..], "size": [l, w, h], "yaw"} ],
///                   "masks": [ {"instance_id", "counts": [RLE runs]} ] } ] }
struct SceneManifest {
  std::string name;
  Rgb background_color = Rgb::Zero();
  std::optional<Aabb> bounds;
  std::vector<FrameRecord> frames;
  std::filesystem::path root;  // directory relative paths resolve against

  /// Throws InvalidArgument when a frame lacks a valid camera, masks do not match the image
  /// size, or a track id repeats within a frame.
  void validate() const;
};

SceneManifest parse_manifest(const std::string& json_text, const std::filesystem::path& root = {});
std::string manifest_to_json(const SceneManifest& manifest);

/// Throws IoError when unreadable and FormatError when the document is malformed.
SceneManifest load_manifest(const std::filesystem::path& path);
/// Writes the JSON document and any in-memory images/depths to their relative paths.
void save_manifest(const SceneManifest& manifest, const std::filesystem::path& path);

const Image8& frame_image(const FrameRecord& frame, const std::filesystem::path& root, Image8& storage);
/// nullptr when the frame carries no depth.
const DepthMap16* frame_depth(const FrameRecord& frame, const std::filesystem::path& root, DepthMap16& storage);

}  // namespace voxaug
