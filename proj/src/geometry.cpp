#include "voxaug/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "voxaug/error.hpp"

namespace voxaug {

double wrap_angle(double radians) {
  double wrapped = std::remainder(radians, 2.0 * kPi);  // [-pi, pi]
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

Mat3 yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

void RigidTransform::validate(double tolerance) const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InvalidArgument("rigid transform has non-finite entries");
  }
  if (!(rotation.transpose() * rotation).isApprox(Mat3::Identity(), tolerance) ||
      std::abs(rotation.determinant() - 1.0) > tolerance) {
    throw InvalidArgument("rotation is not orthonormal with determinant +1");
  }
}

RigidTransform look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = Vec3::UnitY().cross(forward);  // looking straight up/down
  right.normalize();
  const Vec3 down = forward.cross(right);
  RigidTransform pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("camera image size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw InvalidArgument("camera principal point outside the image");
  }
  world_from_camera.validate();
}

CameraModel CameraModel::from_fov(int width, int height, double horizontal_fov,
                                  const RigidTransform& pose) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.fx = 0.5 * width / std::tan(0.5 * horizontal_fov);
  cam.fy = cam.fx;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.world_from_camera = pose;
  return cam;
}

std::optional<Vec2> CameraModel::project(const Vec3& world_point, double min_depth) const {
  const Vec3 p = world_from_camera.inverse().apply(world_point);
  if (p.z() < min_depth) return std::nullopt;
  return Vec2(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

void Ray::validate() const {
  if (std::abs(direction.norm() - 1.0) > 1e-6) throw InvalidArgument("ray direction is not unit length");
  if (!(t_near >= 0.0 && t_near < t_far)) throw InvalidArgument("ray bounds must satisfy 0 <= t_near < t_far");
}

std::array<Vec3, 8> Box3D::corners() const {
  const Mat3 r = yaw_rotation(yaw);
  const Vec3 half = 0.5 * size;
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 1) ? half.x() : -half.x(), (i & 2) ? half.y() : -half.y(),
                     (i & 4) ? half.z() : -half.z());
    out[i] = center + r * local;
  }
  return out;
}

std::array<Vec2, 4> Box3D::footprint() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double hx = 0.5 * size.x(), hy = 0.5 * size.y();
  const std::array<Vec2, 4> local{Vec2(-hx, -hy), Vec2(hx, -hy), Vec2(hx, hy), Vec2(-hx, hy)};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Vec2(center.x() + c * local[i].x() - s * local[i].y(),
                  center.y() + s * local[i].x() + c * local[i].y());
  }
  return out;
}

bool Box3D::contains(const Vec3& p) const {
  const Vec3 local = yaw_rotation(-yaw) * (p - center);
  return (local.cwiseAbs().array() <= 0.5 * size.array()).all();
}

Aabb Box3D::bounding_aabb() const {
  Aabb box{Vec3::Constant(std::numeric_limits<double>::infinity()),
           Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const Vec3& c : corners()) {
    box.min = box.min.cwiseMin(c);
    box.max = box.max.cwiseMax(c);
  }
  return box;
}

void Box3D::validate() const {
  if (!(size.array() > 0.0).all()) throw InvalidArgument("box sizes must be positive");
  if (!center.allFinite() || !std::isfinite(yaw)) throw InvalidArgument("box pose is not finite");
}

RigidTransform RigidPlacement::world_from_local() const {
  return {yaw_rotation(yaw), translation};
}

Ray generate_ray(const CameraModel& camera, double u, double v) {
  if (!(u >= 0.0 && u < camera.width && v >= 0.0 && v < camera.height)) {
    throw InvalidArgument("pixel outside the image");
  }
  const Vec3 dir_cam((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
  Ray ray;
  ray.origin = camera.world_from_camera.translation;
  ray.direction = (camera.world_from_camera.rotation * dir_cam).normalized();
  return ray;
}

std::optional<std::pair<double, double>> ray_aabb_intersect(const Ray& ray, const Aabb& box) {
  double t0 = ray.t_near;
  double t1 = ray.t_far;
  for (int axis = 0; axis < 3; ++axis) {
    const double o = ray.origin[axis];
    const double d = ray.direction[axis];
    if (d == 0.0) {
      if (o < box.min[axis] || o > box.max[axis]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / d;
    double ta = (box.min[axis] - o) * inv;
    double tb = (box.max[axis] - o) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const std::vector<Vec2>& poly) {
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    area += cross2(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * area;
}

}  // namespace

double convex_overlap_area(std::span<const Vec2> a, std::span<const Vec2> b) {
  // Sutherland-Hodgman: clip `a` by each edge of `b`.
  std::vector<Vec2> poly(a.begin(), a.end());
  for (std::size_t e = 0; e < b.size() && !poly.empty(); ++e) {
    const Vec2& p = b[e];
    const Vec2& q = b[(e + 1) % b.size()];
    const Vec2 edge = q - p;
    auto side = [&](const Vec2& x) { return cross2(edge, x - p); };
    std::vector<Vec2> next;
    next.reserve(poly.size() + 2);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& cur = poly[i];
      const Vec2& nxt = poly[(i + 1) % poly.size()];
      const double sc = side(cur);
      const double sn = side(nxt);
      if (sc >= 0.0) next.push_back(cur);
      if ((sc >= 0.0) != (sn >= 0.0)) {
        const double t = sc / (sc - sn);
        next.push_back(cur + t * (nxt - cur));
      }
    }
    poly = std::move(next);
  }
  if (poly.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(poly));
}

double box3d_intersection_volume(const Box3D& a, const Box3D& b) {
  const double z_overlap = std::min(a.center.z() + 0.5 * a.size.z(), b.center.z() + 0.5 * b.size.z()) -
                           std::max(a.center.z() - 0.5 * a.size.z(), b.center.z() - 0.5 * b.size.z());
  if (z_overlap <= 0.0) return 0.0;
  // Circumscribed-circle rejection keeps separated boxes at exactly zero.
  const double ra = 0.5 * std::hypot(a.size.x(), a.size.y());
  const double rb = 0.5 * std::hypot(b.size.x(), b.size.y());
  if ((a.center.head<2>() - b.center.head<2>()).norm() >= ra + rb) return 0.0;
  const auto fa = a.footprint();
  const auto fb = b.footprint();
  const double area = convex_overlap_area(fa, fb);
  if (area <= 1e-12) return 0.0;  // round-off floor for boxes that only touch
  return area * z_overlap;
}

double box3d_iou(const Box3D& a, const Box3D& b) {
  const double inter = box3d_intersection_volume(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Ray transform_ray(const Ray& ray, const RigidPlacement& placement, TransformDirection direction) {
  const RigidTransform world_from_local = placement.world_from_local();
  const RigidTransform xf =
      direction == TransformDirection::WorldToLocal ? world_from_local.inverse() : world_from_local;
  Ray out = ray;
  out.origin = xf.apply(ray.origin);
  out.direction = xf.apply_direction(ray.direction);
  out.frame = direction == TransformDirection::WorldToLocal ? Frame::ObjectLocal : Frame::World;
  return out;
}

}  // namespace voxaug
