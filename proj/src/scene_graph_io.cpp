#include <algorithm>
#include <fstream>

#include "json_util.hpp"
#include "voxaug/composer.hpp"
#include "voxaug/error.hpp"
#include "voxaug/image.hpp"

namespace voxaug {

using json_util::json;

namespace {

const char* state_name(CellState s) {
  switch (s) {
    case CellState::Valid: return "valid";
    case CellState::Invalid: return "invalid";
    case CellState::Occluded: return "occluded";
  }
  return "?";
}

CellState state_from(const std::string& s) {
  if (s == "valid") return CellState::Valid;
  if (s == "invalid") return CellState::Invalid;
  if (s == "occluded") return CellState::Occluded;
  throw FormatError("unknown cell state '" + s + "'");
}

}  // namespace

std::string scene_graph_to_json(const SceneGraph& scene) {
  json doc;
  doc["background"] = scene.background_id;
  doc["index"] = scene.index;
  doc["seed"] = scene.seed;
  doc["jitter"] = {{"t_x", scene.jitter.t_x}, {"t_y", scene.jitter.t_y}, {"t_theta", scene.jitter.t_theta}};
  json objects = json::array();
  for (const PlacedObject& o : scene.objects) {
    objects.push_back({{"asset", o.asset_id}, {"box", json_util::box(o.placement.box)}});
  }
  doc["objects"] = objects;
  json cameras = json::array();
  for (const CameraModel& c : scene.cameras) cameras.push_back(json_util::camera(c));
  doc["cameras"] = cameras;
  json boxes = json::array();
  for (const AnnotatedBox& b : scene.boxes) {
    json jb = json_util::box(b.box);
    jb["source"] = b.source == BoxSource::Placed ? "placed" : "original";
    jb["asset"] = b.asset_id;
    jb["track_id"] = b.track_id;
    boxes.push_back(jb);
  }
  doc["boxes"] = boxes;
  return doc.dump(1);
}

SceneGraph scene_graph_from_json(const std::string& text) {
  SceneGraph scene;
  try {
    const json doc = json::parse(text);
    scene.background_id = doc.at("background").get<std::string>();
    scene.index = doc.value("index", 0);
    scene.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("jitter")) {
      const json& j = doc["jitter"];
      scene.jitter.t_x = j.at("t_x").get<double>();
      scene.jitter.t_y = j.at("t_y").get<double>();
      scene.jitter.t_theta = j.at("t_theta").get<double>();
      scene.jitter.seed = scene.seed;
    }
    for (const json& jo : doc.value("objects", json::array())) {
      PlacedObject o;
      o.asset_id = jo.at("asset").get<std::string>();
      o.placement.box = json_util::box3d(jo.at("box"));
      o.placement.translation = o.placement.box.center;
      o.placement.yaw = o.placement.box.yaw;
      scene.objects.push_back(std::move(o));
    }
    for (const json& jc : doc.value("cameras", json::array())) scene.cameras.push_back(json_util::camera_model(jc));
    for (const json& jb : doc.value("boxes", json::array())) {
      AnnotatedBox b;
      b.box = json_util::box3d(jb);
      const std::string source = jb.value("source", std::string("original"));
      if (source != "original" && source != "placed") throw FormatError("unknown box source '" + source + "'");
      b.source = source == "placed" ? BoxSource::Placed : BoxSource::Original;
      b.asset_id = jb.value("asset", std::string{});
      b.track_id = jb.value("track_id", -1);
      scene.boxes.push_back(std::move(b));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed scene graph: ") + e.what());
  }
  try {
    for (const PlacedObject& o : scene.objects) o.placement.box.validate();
    for (const AnnotatedBox& b : scene.boxes) b.box.validate();
    for (const CameraModel& c : scene.cameras) c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid scene graph: ") + e.what());
  }
  return scene;
}

std::string valid_region_to_json(const ValidRegionMap& map) {
  json doc;
  doc["origin"] = {map.origin.x(), map.origin.y()};
  doc["cell_size"] = map.cell_size;
  doc["nx"] = map.nx;
  doc["ny"] = map.ny;
  doc["delta1"] = map.delta1;
  doc["delta2"] = map.delta2;
  doc["ground_height"] = map.ground_height;
  json max = json::array(), mean = json::array(), ground = json::array(), samples = json::array(),
       state = json::array();
  for (const PillarCell& c : map.cells) {
    max.push_back(c.max_density);
    mean.push_back(c.mean_density);
    ground.push_back(c.ground);
    samples.push_back(c.samples);
    state.push_back(state_name(c.state));
  }
  doc["max_density"] = max;
  doc["mean_density"] = mean;
  doc["ground"] = ground;
  doc["samples"] = samples;
  doc["state"] = state;
  doc["counts"] = {{"valid", map.count(CellState::Valid)},
                   {"invalid", map.count(CellState::Invalid)},
                   {"occluded", map.count(CellState::Occluded)}};
  return doc.dump(1);
}

ValidRegionMap valid_region_from_json(const std::string& text) {
  ValidRegionMap map;
  try {
    const json doc = json::parse(text);
    const json& o = doc.at("origin");
    map.origin = Vec2(o.at(0).get<double>(), o.at(1).get<double>());
    map.cell_size = doc.at("cell_size").get<double>();
    map.nx = doc.at("nx").get<int>();
    map.ny = doc.at("ny").get<int>();
    map.delta1 = doc.at("delta1").get<double>();
    map.delta2 = doc.at("delta2").get<double>();
    map.ground_height = doc.at("ground_height").get<double>();
    if (map.nx < 1 || map.ny < 1 || !(map.cell_size > 0.0)) throw FormatError("valid-region map has no cells");
    const std::size_t n = static_cast<std::size_t>(map.nx) * map.ny;
    const json& max = doc.at("max_density");
    const json& mean = doc.at("mean_density");
    const json& ground = doc.at("ground");
    const json& samples = doc.at("samples");
    const json& state = doc.at("state");
    if (max.size() != n || mean.size() != n || ground.size() != n || samples.size() != n || state.size() != n) {
      throw FormatError("valid-region map cell arrays have the wrong length");
    }
    map.cells.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      map.cells[i] = {max[i].get<double>(), mean[i].get<double>(), samples[i].get<std::size_t>(),
                      ground[i].get<double>(), state_from(state[i].get<std::string>())};
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed valid-region map: ") + e.what());
  }
  return map;
}

void write_valid_region_ppm(const ValidRegionMap& map, const std::string& path, int pixels_per_cell) {
  if (pixels_per_cell < 1) throw InvalidArgument("pixels per cell must be positive");
  Image8 image;
  image.width = map.nx * pixels_per_cell;
  image.height = map.ny * pixels_per_cell;
  image.rgb.assign(static_cast<std::size_t>(image.width) * image.height * 3, 0);
  for (int j = 0; j < map.ny; ++j) {
    for (int i = 0; i < map.nx; ++i) {
      std::array<std::uint8_t, 3> rgb{};
      switch (map.at(i, j).state) {
        case CellState::Valid: rgb = {60, 180, 75}; break;
        case CellState::Invalid: rgb = {200, 40, 40}; break;
        case CellState::Occluded: rgb = {110, 110, 110}; break;
      }
      // Grid lines make individual cells readable.
      for (int y = 0; y < pixels_per_cell; ++y) {
        for (int x = 0; x < pixels_per_cell; ++x) {
          const bool edge = pixels_per_cell >= 4 && (x == 0 || y == 0);
          const int row = (map.ny - 1 - j) * pixels_per_cell + y;  // +y (north) at the top
          const int col = i * pixels_per_cell + x;
          std::uint8_t* px = &image.rgb[(static_cast<std::size_t>(row) * image.width + col) * 3];
          for (int ch = 0; ch < 3; ++ch) px[ch] = edge ? static_cast<std::uint8_t>(rgb[ch] * 3 / 4) : rgb[ch];
        }
      }
    }
  }
  write_ppm(path, image);
}

}  // namespace voxaug
