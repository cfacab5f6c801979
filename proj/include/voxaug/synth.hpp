#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "voxaug/geometry.hpp"
#include "voxaug/manifest.hpp"
#include "voxaug/renderer.hpp"
#include "voxaug/voxel_field.hpp"

namespace voxaug {

enum class ShapeKind : std::uint8_t { Sphere, Box, Slab };

/// Constant-density solid. Box: `size` is (l, w, h) about `center`, yawed. Sphere: radius
/// size.x(). Slab: all x, y with z within center.z() +- size.z() / 2.
struct Primitive {
  ShapeKind shape = ShapeKind::Sphere;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  double yaw = 0.0;
  double sigma = 1.0;
  Rgb color = Rgb::Constant(0.5);
  std::optional<Rgb> negative_y_color;  // color where the host frame has y < 0
  double softness = 0.0;                // width of the smooth density ramp across the surface
  bool mirror = false;                  // also instantiate the reflection across y = 0

  double signed_distance(const Vec3& x) const;
  /// Density at x: sigma inside, 0 outside, smoothstep across the softness band.
  double density(const Vec3& x) const;
  Rgb color_at(const Vec3& x) const;
  Primitive reflected() const;
  void validate() const;
};

/// Rigid object: parts in its box frame, posed per frame by constant-rate motion.
struct AnalyticObject {
  int instance_id = 1;
  int track_id = 1;
  Box3D box;                    // world pose at frame 0
  Vec3 velocity = Vec3::Zero(); // meters per frame
  double yaw_rate = 0.0;        // radians per frame
  std::vector<Primitive> parts;

  Box3D box_at(int frame) const;
};

struct AnalyticScene {
  std::string name = "scene";
  Aabb scene_bounds{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  Rgb background = Rgb::Zero();
  double ground_height = 0.0;
  double nominal_step = 0.05;  // spacing that resolves the scene's smallest feature
  std::vector<Primitive> primitives;
  std::vector<AnalyticObject> objects;

  // Radiance-source interface (frame 0).
  const Aabb& bounds() const { return scene_bounds; }
  double density(const Vec3& x) const;
  Rgb color(const Vec3& x, const Vec3& d) const;
  double voxel_size() const { return nominal_step; }

  /// Scene with every object moved to its pose at `frame`.
  AnalyticScene at_frame(int frame) const;
  void validate() const;
};

struct AnalyticSample {
  double sigma = 0.0;
  Rgb color = Rgb::Zero();
};

/// Summed density and density-weighted color of the primitives containing x; (0, black)
/// outside the scene bounds.
AnalyticSample eval_analytic(const AnalyticScene& scene, const Vec3& x);
/// Density contributed by one object's parts alone.
double eval_object_density(const AnalyticScene& scene, std::size_t object, const Vec3& x);

struct OracleOptions {
  double step = 1e-3;  // meters
  Rgb background = Rgb::Zero();
  bool early_termination = false;
};

struct OracleResult {
  RenderResult render;
  std::vector<double> instance_weight;  // rendering weight owed to each object
};

/// Brute-force midpoint quadrature at a fixed step over the ray's span inside the scene bounds.
OracleResult oracle_render(const AnalyticScene& scene, const Ray& ray, const OracleOptions& options);

struct BakeReport {
  std::size_t clamped_low = 0;   // empty nodes raised to the density floor
  std::size_t clamped_high = 0;  // nodes above the representable density
};

inline constexpr double kBakeDensityFloor = 1e-5;
inline constexpr double kBakeDensityCeiling = 1e4;

/// Samples the scene at every grid node. Density is inverted through the activation;
/// empty nodes borrow the nearest primitive's color so interpolation does not darken edges.
VoxelField bake(const AnalyticScene& scene, const GridSpec& grid, BakeReport* report = nullptr);
/// Bakes one object's parts in its local frame.
VoxelField bake_object(const AnalyticObject& object, const GridSpec& grid, BakeReport* report = nullptr);

struct DatasetOptions {
  double step = 0.02;           // oracle step
  int mask_dilation_max = 0;    // per-frame radius drawn uniformly from [0, max]
  std::uint64_t seed = 0;
  double mask_threshold = 0.5;  // instance weight that makes a pixel part of the instance
  std::string image_prefix = "frames";
};

/// Renders every camera with the oracle (frame i uses objects posed at frame i).
SceneManifest generate_dataset(const AnalyticScene& scene, const std::vector<CameraModel>& cameras,
                               const DatasetOptions& options = {});

/// Ground-truth image of one camera.
RenderedImage oracle_image(const AnalyticScene& scene, const CameraModel& camera, double step,
                           Exec exec = Exec::Parallel);

/// Cameras on a circle around `target` at `radius` and `height`, angles evenly spaced over
/// [start, end) radians (measured from +x toward +y).
std::vector<CameraModel> orbit_cameras(const Vec3& target, double radius, double height, int count, double start,
                                       double end, int width, int height_px, double horizontal_fov);

// Presets --------------------------------------------------------------------------------

/// Mirror-symmetric two-box car with wheels and lights, about 4.2 x 1.9 x 1.6 m. With
/// `distinct_sides`, the y < 0 side of the body gets its own color.
AnalyticObject make_car(bool distinct_sides = false, int instance_id = 1, int track_id = 1);

struct StreetOptions {
  double softness = 0.3;
  bool include_car = true;
  Vec3 car_velocity = Vec3::Zero();
};
/// About 24 x 16 x 6 m: ground slab, two walls and a parked car.
AnalyticScene street_scene(const StreetOptions& options = {});

/// Cameras on an ellipse inside the street (semi-axes 8 x 4 m, 1.6 m high) looking at points
/// near the center; `phase` in [0, 1) shifts the angles by that fraction of the spacing.
std::vector<CameraModel> street_cameras(int count, double phase, int width, int height);

/// Ground plus one wall of the given center, length (along y) and height.
AnalyticScene wall_scene(const Vec3& wall_center, double wall_length, double wall_height, double softness = 0.2);

/// Ground plus a U-shaped wall opening toward -x.
AnalyticScene u_wall_scene(double softness = 0.2);

/// The car alone on a ground slab (for object reconstruction).
AnalyticScene car_scene(bool distinct_sides = false, bool with_ground = true);

/// Single soft sphere.
AnalyticScene sphere_scene(double radius = 1.0, double sigma = 5.0, double softness = 0.2);

// JSON scene specs ------------------------------------------------------------------------

std::string scene_to_json(const AnalyticScene& scene);
AnalyticScene scene_from_json(const std::string& text);
AnalyticScene preset_scene(const std::string& name);

}  // namespace voxaug
