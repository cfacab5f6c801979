#include "json_util.hpp"
#include "voxaug/error.hpp"
#include "voxaug/synth.hpp"

namespace voxaug {

using json_util::json;

namespace {

const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Box: return "box";
    case ShapeKind::Slab: return "slab";
  }
  return "?";
}

ShapeKind shape_from(const std::string& s) {
  if (s == "sphere") return ShapeKind::Sphere;
  if (s == "box") return ShapeKind::Box;
  if (s == "slab") return ShapeKind::Slab;
  throw FormatError("unknown primitive shape '" + s + "'");
}

json primitive_json(const Primitive& p) {
  json j = {{"shape", shape_name(p.shape)}, {"center", json_util::vec(p.center)}, {"size", json_util::vec(p.size)},
            {"yaw", p.yaw}, {"sigma", p.sigma}, {"color", json_util::vec(p.color)},
            {"softness", p.softness}, {"mirror", p.mirror}};
  if (p.negative_y_color) j["negative_y_color"] = json_util::vec(*p.negative_y_color);
  return j;
}

Primitive primitive_from(const json& j) {
  Primitive p;
  p.shape = shape_from(j.at("shape").get<std::string>());
  p.center = json_util::vec3(j.at("center"));
  p.size = json_util::vec3(j.at("size"));
  p.yaw = j.value("yaw", 0.0);
  p.sigma = j.at("sigma").get<double>();
  p.color = json_util::vec3(j.at("color"));
  p.softness = j.value("softness", 0.0);
  p.mirror = j.value("mirror", false);
  if (j.contains("negative_y_color")) p.negative_y_color = json_util::vec3(j["negative_y_color"]);
  return p;
}

}  // namespace

std::string scene_to_json(const AnalyticScene& scene) {
  json doc;
  doc["name"] = scene.name;
  doc["bounds"] = {{"min", json_util::vec(scene.scene_bounds.min)}, {"max", json_util::vec(scene.scene_bounds.max)}};
  doc["background"] = json_util::vec(scene.background);
  doc["ground_height"] = scene.ground_height;
  doc["nominal_step"] = scene.nominal_step;
  json prims = json::array();
  for (const Primitive& p : scene.primitives) prims.push_back(primitive_json(p));
  doc["primitives"] = prims;
  json objects = json::array();
  for (const AnalyticObject& o : scene.objects) {
    json parts = json::array();
    for (const Primitive& p : o.parts) parts.push_back(primitive_json(p));
    objects.push_back({{"instance_id", o.instance_id}, {"track_id", o.track_id}, {"box", json_util::box(o.box)},
                       {"velocity", json_util::vec(o.velocity)}, {"yaw_rate", o.yaw_rate}, {"parts", parts}});
  }
  doc["objects"] = objects;
  return doc.dump(1);
}

AnalyticScene scene_from_json(const std::string& text) {
  AnalyticScene scene;
  try {
    const json doc = json::parse(text);
    if (doc.contains("preset")) {
      scene = preset_scene(doc["preset"].get<std::string>());
      return scene;
    }
    scene.name = doc.value("name", std::string("scene"));
    scene.scene_bounds = Aabb{json_util::vec3(doc.at("bounds").at("min")), json_util::vec3(doc.at("bounds").at("max"))};
    if (doc.contains("background")) scene.background = json_util::vec3(doc["background"]);
    scene.ground_height = doc.value("ground_height", 0.0);
    scene.nominal_step = doc.value("nominal_step", 0.05);
    for (const json& jp : doc.value("primitives", json::array())) scene.primitives.push_back(primitive_from(jp));
    for (const json& jo : doc.value("objects", json::array())) {
      AnalyticObject o;
      o.instance_id = jo.value("instance_id", 1);
      o.track_id = jo.value("track_id", o.instance_id);
      o.box = json_util::box3d(jo.at("box"));
      if (jo.contains("velocity")) o.velocity = json_util::vec3(jo["velocity"]);
      o.yaw_rate = jo.value("yaw_rate", 0.0);
      for (const json& jp : jo.at("parts")) o.parts.push_back(primitive_from(jp));
      scene.objects.push_back(std::move(o));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed scene spec: ") + e.what());
  }
  try {
    scene.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid scene spec: ") + e.what());
  }
  return scene;
}

}  // namespace voxaug
