#include <cmath>

#include "voxaug/error.hpp"
#include "voxaug/synth.hpp"

namespace voxaug {

namespace {

Primitive box(const Vec3& center, const Vec3& size, const Rgb& color, double sigma, double softness,
              double yaw = 0.0, bool mirror = false) {
  Primitive p;
  p.shape = ShapeKind::Box;
  p.center = center;
  p.size = size;
  p.yaw = yaw;
  p.sigma = sigma;
  p.color = color;
  p.softness = softness;
  p.mirror = mirror;
  return p;
}

Primitive ground_slab(double softness) {
  Primitive p;
  p.shape = ShapeKind::Slab;
  p.center = Vec3(0.0, 0.0, -0.5);
  p.size = Vec3(1.0, 1.0, 1.0);
  p.sigma = 20.0;
  p.color = Rgb(0.42, 0.42, 0.45);
  p.softness = softness;
  return p;
}

const Rgb kSky(0.55, 0.7, 0.9);

}  // namespace

AnalyticObject make_car(bool distinct_sides, int instance_id, int track_id) {
  constexpr double kSigma = 30.0;
  constexpr double kSoft = 0.1;
  AnalyticObject car;
  car.instance_id = instance_id;
  car.track_id = track_id;
  car.box = Box3D{Vec3(0.0, 0.0, 0.8), Vec3(4.2, 1.9, 1.6), 0.0, Frame::World};
  Primitive body = box({0.0, 0.0, -0.25}, {4.0, 1.7, 0.7}, Rgb(0.75, 0.12, 0.1), kSigma, kSoft);
  if (distinct_sides) body.negative_y_color = Rgb(0.1, 0.3, 0.75);
  car.parts.push_back(body);
  car.parts.push_back(box({-0.3, 0.0, 0.42}, {2.0, 1.5, 0.64}, Rgb(0.55, 0.65, 0.78), kSigma, kSoft));
  car.parts.push_back(box({0.2, 0.0, -0.25}, {1.1, 1.76, 0.12}, Rgb(0.92, 0.92, 0.9), kSigma, kSoft));
  car.parts.push_back(box({1.3, 0.7, -0.5}, {0.62, 0.3, 0.6}, Rgb(0.06, 0.06, 0.07), kSigma, kSoft, 0.0, true));
  car.parts.push_back(box({-1.3, 0.7, -0.5}, {0.62, 0.3, 0.6}, Rgb(0.06, 0.06, 0.07), kSigma, kSoft, 0.0, true));
  car.parts.push_back(box({1.98, 0.55, -0.1}, {0.12, 0.35, 0.16}, Rgb(0.98, 0.92, 0.45), kSigma, kSoft, 0.0, true));
  car.parts.push_back(box({-1.98, 0.55, -0.1}, {0.12, 0.35, 0.16}, Rgb(0.95, 0.2, 0.15), kSigma, kSoft, 0.0, true));
  return car;
}

AnalyticScene street_scene(const StreetOptions& options) {
  const double soft = options.softness;
  AnalyticScene scene;
  scene.name = "street";
  scene.scene_bounds = Aabb{Vec3(-12.0, -8.0, -1.0), Vec3(12.0, 8.0, 5.0)};
  scene.background = kSky;
  scene.ground_height = 0.0;
  scene.nominal_step = 0.05;
  scene.primitives.push_back(ground_slab(soft));
  // Raised sidewalk along the north wall.
  scene.primitives.push_back(box({0.0, 5.75, 0.0}, {24.0, 2.5, 0.3}, Rgb(0.7, 0.68, 0.62), 20.0, soft));
  scene.primitives.push_back(box({0.0, 7.0, 2.0}, {20.0, 0.6, 4.0}, Rgb(0.66, 0.34, 0.24), 40.0, soft));
  scene.primitives.push_back(box({0.0, 6.65, 1.2}, {2.0, 0.2, 2.2}, Rgb(0.25, 0.2, 0.15), 40.0, soft));
  scene.primitives.push_back(box({10.5, -3.0, 1.5}, {0.6, 6.0, 3.0}, Rgb(0.86, 0.8, 0.58), 40.0, soft));
  if (options.include_car) {
    AnalyticObject car = make_car(false, 1, 1);
    car.box.center = Vec3(1.5, -1.0, 0.8);
    car.box.yaw = 0.3;
    car.velocity = options.car_velocity;
    scene.objects.push_back(car);
  }
  return scene;
}

std::vector<CameraModel> street_cameras(int count, double phase, int width, int height) {
  if (count < 1) throw InvalidArgument("camera count must be positive");
  std::vector<CameraModel> cameras;
  for (int i = 0; i < count; ++i) {
    const double a = 2.0 * kPi * (static_cast<double>(i) + phase) / static_cast<double>(count);
    const Vec3 eye(8.0 * std::cos(a), 4.0 * std::sin(a), 1.6);
    // Look across the street, slightly downward, alternating left and right of center.
    const double swing = (i % 2 == 0 ? 1.0 : -1.0) * 3.0;
    const Vec3 target(-0.4 * eye.x() - swing * std::sin(a), -0.4 * eye.y() + swing * std::cos(a) * 0.5, 0.6);
    cameras.push_back(CameraModel::from_fov(width, height, 80.0 * kPi / 180.0, look_at(eye, target)));
  }
  return cameras;
}

AnalyticScene wall_scene(const Vec3& wall_center, double wall_length, double wall_height, double softness) {
  AnalyticScene scene;
  scene.name = "wall";
  scene.scene_bounds = Aabb{Vec3(-16.0, -16.0, -1.0), Vec3(16.0, 16.0, 5.0)};
  scene.background = kSky;
  scene.primitives.push_back(ground_slab(softness));
  scene.primitives.push_back(box({wall_center.x(), wall_center.y(), 0.5 * wall_height}, {0.6, wall_length, wall_height},
                                 Rgb(0.66, 0.34, 0.24), 50.0, softness));
  return scene;
}

AnalyticScene u_wall_scene(double softness) {
  AnalyticScene scene;
  scene.name = "u_wall";
  scene.scene_bounds = Aabb{Vec3(-16.0, -16.0, -1.0), Vec3(16.0, 16.0, 5.0)};
  scene.background = kSky;
  scene.primitives.push_back(ground_slab(softness));
  const Rgb brick(0.66, 0.34, 0.24);
  scene.primitives.push_back(box({5.0, 0.0, 1.5}, {0.6, 7.6, 3.0}, brick, 50.0, softness));
  scene.primitives.push_back(box({3.0, 3.0, 1.5}, {3.6, 0.6, 3.0}, brick, 50.0, softness));
  scene.primitives.push_back(box({3.0, -3.0, 1.5}, {3.6, 0.6, 3.0}, brick, 50.0, softness));
  return scene;
}

AnalyticScene car_scene(bool distinct_sides, bool with_ground) {
  AnalyticScene scene;
  scene.name = "car";
  scene.scene_bounds = Aabb{Vec3(-10.0, -10.0, -1.0), Vec3(10.0, 10.0, 4.0)};
  scene.background = with_ground ? kSky : Rgb::Zero();
  scene.nominal_step = 0.02;
  if (with_ground) scene.primitives.push_back(ground_slab(0.1));
  scene.objects.push_back(make_car(distinct_sides, 1, 1));
  return scene;
}

AnalyticScene sphere_scene(double radius, double sigma, double softness) {
  AnalyticScene scene;
  scene.name = "sphere";
  const double extent = radius + softness + 1.0;
  scene.scene_bounds = Aabb{Vec3::Constant(-extent), Vec3::Constant(extent)};
  scene.nominal_step = 0.02;
  Primitive p;
  p.shape = ShapeKind::Sphere;
  p.size = Vec3(radius, radius, radius);
  p.sigma = sigma;
  p.color = Rgb(0.85, 0.35, 0.2);
  p.softness = softness;
  scene.primitives.push_back(p);
  return scene;
}

AnalyticScene preset_scene(const std::string& name) {
  if (name == "street") return street_scene();
  if (name == "street_moving") {
    StreetOptions options;
    options.car_velocity = Vec3(0.3, 0.0, 0.0);
    return street_scene(options);
  }
  if (name == "wall") return wall_scene(Vec3(1.0, 0.0, 0.0), 7.6, 3.0);
  if (name == "u_wall") return u_wall_scene();
  if (name == "car") return car_scene(false, true);
  if (name == "car_distinct") return car_scene(true, true);
  if (name == "car_isolated") return car_scene(false, false);
  if (name == "sphere") return sphere_scene();
  throw InvalidArgument("unknown scene preset '" + name + "'");
}

}  // namespace voxaug
