#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace voxaug {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rgb = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;

// World: right-handed, z up. Camera: x right, y down, z forward.
// Object-local: x forward, y left, z up; symmetry plane at y = 0.
enum class Frame : std::uint8_t { World = 0, ObjectLocal = 1 };

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

Mat3 yaw_rotation(double yaw);

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;

  /// Throws InvalidArgument unless the rotation is orthonormal with det +1.
  void validate(double tolerance = 1e-6) const;
};

/// Camera pose looking from `eye` toward `target` with world z as up.
RigidTransform look_at(const Vec3& eye, const Vec3& target);

struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  RigidTransform world_from_camera;

  Vec3 center() const { return world_from_camera.translation; }
  void validate() const;
  /// Pinhole intrinsics with the principal point at the image center.
  static CameraModel from_fov(int width, int height, double horizontal_fov,
                              const RigidTransform& pose);
  /// Projects a world point; returns nullopt when it is not in front of the camera.
  std::optional<Vec2> project(const Vec3& world_point, double min_depth = 1e-6) const;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();
  Frame frame = Frame::World;

  Vec3 at(double t) const { return origin + t * direction; }
  void validate() const;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Aabb expanded(double margin) const {
    return {min - Vec3::Constant(margin), max + Vec3::Constant(margin)};
  }
};

/// Yaw-only oriented box. `size` is (length along local x, width along y, height along z).
struct Box3D {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  double yaw = 0.0;
  Frame frame = Frame::World;

  std::array<Vec3, 8> corners() const;
  /// Footprint corners in counter-clockwise order.
  std::array<Vec2, 4> footprint() const;
  double volume() const { return size.prod(); }
  bool contains(const Vec3& p) const;
  Aabb bounding_aabb() const;
  void validate() const;
};

struct RigidPlacement {
  Vec3 translation = Vec3::Zero();
  double yaw = 0.0;
  Box3D box;

  RigidTransform world_from_local() const;
};

/// Back-projects pixel coordinates (subpixel, pixel centers at +0.5) into a world ray
/// with t in [0, inf). Throws InvalidArgument for pixels outside the image.
Ray generate_ray(const CameraModel& camera, double u, double v);

/// Slab test clipped to [t_near, t_far]. Returns nullopt on a miss or an empty span.
std::optional<std::pair<double, double>> ray_aabb_intersect(const Ray& ray, const Aabb& box);

/// Exact for yaw-only boxes: footprint polygon overlap times vertical overlap.
double box3d_iou(const Box3D& a, const Box3D& b);
double box3d_intersection_volume(const Box3D& a, const Box3D& b);

/// Area of the intersection of two convex counter-clockwise polygons.
double convex_overlap_area(std::span<const Vec2> a, std::span<const Vec2> b);

enum class TransformDirection { WorldToLocal, LocalToWorld };

Ray transform_ray(const Ray& ray, const RigidPlacement& placement, TransformDirection direction);

}  // namespace voxaug
