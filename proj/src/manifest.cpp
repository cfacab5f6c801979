#include "voxaug/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "voxaug/error.hpp"

namespace voxaug {

using json_util::json;

void SceneManifest::validate() const {
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const FrameRecord& frame = frames[f];
    const std::string where = "frame " + std::to_string(f) + ": ";
    try {
      frame.camera.validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + e.what());
    }
    std::set<int> tracks;
    for (const BoxAnnotation& b : frame.boxes) {
      b.box.validate();
      if (b.track_id >= 0 && !tracks.insert(b.track_id).second) {
        throw InvalidArgument(where + "track id " + std::to_string(b.track_id) + " repeats");
      }
    }
    for (const InstanceMask& m : frame.masks) {
      if (m.mask.width != frame.camera.width || m.mask.height != frame.camera.height) {
        throw InvalidArgument(where + "mask size differs from the image size");
      }
    }
  }
}

using json_util::vec;
using json_util::vec3;

SceneManifest parse_manifest(const std::string& json_text, const std::filesystem::path& root) {
  SceneManifest m;
  m.root = root;
  try {
    const json doc = json::parse(json_text);
    m.name = doc.value("name", std::string{});
    if (doc.contains("background_color")) m.background_color = vec3(doc["background_color"]);
    if (doc.contains("bounds")) m.bounds = Aabb{vec3(doc["bounds"].at("min")), vec3(doc["bounds"].at("max"))};
    for (const json& jf : doc.at("frames")) {
      FrameRecord f;
      f.timestamp = jf.value("timestamp", 0.0);
      f.image_path = jf.at("image").get<std::string>();
      f.depth_path = jf.value("depth", std::string{});
      f.camera = json_util::camera_model(jf.at("camera"));
      for (const json& jb : jf.value("boxes", json::array())) {
        BoxAnnotation b;
        b.track_id = jb.value("track_id", -1);
        b.box = json_util::box3d(jb);
        f.boxes.push_back(b);
      }
      for (const json& jm : jf.value("masks", json::array())) {
        const auto counts = jm.at("counts").get<std::vector<std::uint32_t>>();
        f.masks.push_back({jm.at("instance_id").get<int>(), rle_decode(counts, f.camera.width, f.camera.height)});
      }
      m.frames.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid manifest: ") + e.what());
  }
  return m;
}

std::string manifest_to_json(const SceneManifest& m) {
  json doc;
  doc["name"] = m.name;
  doc["background_color"] = vec(m.background_color);
  if (m.bounds) doc["bounds"] = {{"min", vec(m.bounds->min)}, {"max", vec(m.bounds->max)}};
  json frames = json::array();
  for (const FrameRecord& f : m.frames) {
    json jf;
    jf["timestamp"] = f.timestamp;
    jf["image"] = f.image_path;
    jf["depth"] = f.depth_path;
    jf["camera"] = json_util::camera(f.camera);
    json boxes = json::array();
    for (const BoxAnnotation& b : f.boxes) {
      boxes.push_back({{"track_id", b.track_id}, {"center", vec(b.box.center)},
                       {"size", vec(b.box.size)}, {"yaw", b.box.yaw}});
    }
    jf["boxes"] = boxes;
    json masks = json::array();
    for (const InstanceMask& im : f.masks) masks.push_back({{"instance_id", im.instance_id}, {"counts", rle_encode(im.mask)}});
    jf["masks"] = masks;
    frames.push_back(jf);
  }
  doc["frames"] = frames;
  return doc.dump(1);
}

SceneManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

void save_manifest(const SceneManifest& manifest, const std::filesystem::path& path) {
  const std::filesystem::path root = path.parent_path();
  if (!root.empty()) std::filesystem::create_directories(root);
  for (const FrameRecord& f : manifest.frames) {
    if (f.image) write_ppm(root / f.image_path, *f.image);
    if (f.depth && !f.depth_path.empty()) write_pgm16(root / f.depth_path, *f.depth);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

const Image8& frame_image(const FrameRecord& frame, const std::filesystem::path& root, Image8& storage) {
  if (frame.image) return *frame.image;
  storage = read_ppm(root / frame.image_path);
  if (storage.width != frame.camera.width || storage.height != frame.camera.height) {
    throw FormatError(frame.image_path + ": image size differs from the camera");
  }
  return storage;
}

const DepthMap16* frame_depth(const FrameRecord& frame, const std::filesystem::path& root, DepthMap16& storage) {
  if (frame.depth) return &*frame.depth;
  if (frame.depth_path.empty()) return nullptr;
  storage = read_pgm16(root / frame.depth_path);
  if (storage.width != frame.camera.width || storage.height != frame.camera.height) {
    throw FormatError(frame.depth_path + ": depth size differs from the camera");
  }
  return &storage;
}

}  // namespace voxaug
