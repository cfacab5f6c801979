#pragma once

// JSON helpers shared by the manifest, scene-spec and scene-graph readers.

#include <json.hpp>

#include "voxaug/error.hpp"
#include "voxaug/geometry.hpp"

namespace voxaug::json_util {

using nlohmann::json;

inline json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json box(const Box3D& b) { return {{"center", vec(b.center)}, {"size", vec(b.size)}, {"yaw", b.yaw}}; }

inline Box3D box3d(const json& j) {
  Box3D b;
  b.center = vec3(j.at("center"));
  b.size = vec3(j.at("size"));
  b.yaw = wrap_angle(j.value("yaw", 0.0));
  return b;
}

inline json camera(const CameraModel& c) {
  json pose = json::array();
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col < 4; ++col) {
      double v = 0.0;
      if (r < 3) v = col < 3 ? c.world_from_camera.rotation(r, col) : c.world_from_camera.translation[r];
      else v = col == 3 ? 1.0 : 0.0;
      pose.push_back(v);
    }
  }
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
          {"width", c.width}, {"height", c.height}, {"pose", pose}};
}

inline CameraModel camera_model(const json& j) {
  CameraModel c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  const json& pose = j.at("pose");
  if (!pose.is_array() || pose.size() != 16) throw FormatError("camera pose must hold 16 numbers");
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) c.world_from_camera.rotation(r, col) = pose[r * 4 + col].get<double>();
    c.world_from_camera.translation[r] = pose[r * 4 + 3].get<double>();
  }
  return c;
}

}  // namespace voxaug::json_util
