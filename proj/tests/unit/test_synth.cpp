#include <doctest.h>

#include <cmath>
#include <random>

#include "voxaug/mask.hpp"
#include "voxaug/synth.hpp"

using namespace voxaug;

namespace {

Primitive sphere_at(const Vec3& c, double r, double sigma, const Rgb& color, double softness = 0.0) {
  Primitive p;
  p.shape = ShapeKind::Sphere;
  p.center = c;
  p.size = Vec3::Constant(r);
  p.sigma = sigma;
  p.color = color;
  p.softness = softness;
  return p;
}

AnalyticScene open_scene() {
  AnalyticScene s;
  s.scene_bounds = {Vec3::Constant(-5), Vec3::Constant(5)};
  return s;
}

}  // namespace

TEST_CASE("eval_analytic examples") {
  AnalyticScene s = open_scene();
  s.primitives.push_back(sphere_at(Vec3::Zero(), 1.0, 2.0, Rgb(1, 0, 0)));
  AnalyticSample a = eval_analytic(s, Vec3(3, 0, 0));
  CHECK(a.sigma == 0.0);
  CHECK(a.color == Rgb::Zero());
  a = eval_analytic(s, Vec3(0.2, 0, 0));
  CHECK(a.sigma == 2.0);
  CHECK(a.color == Rgb(1, 0, 0));

  s.primitives = {sphere_at(Vec3::Zero(), 1.0, 1.0, Rgb(1, 0, 0)), sphere_at(Vec3(0.5, 0, 0), 1.0, 1.0, Rgb(0, 0, 1))};
  a = eval_analytic(s, Vec3(0.25, 0, 0));
  CHECK(a.sigma == 2.0);
  CHECK((a.color - Rgb(0.5, 0, 0.5)).norm() < 1e-12);
  // Outside the scene bounds nothing exists.
  s.primitives = {sphere_at(Vec3(4.9, 0, 0), 1.0, 1.0, Rgb(1, 1, 1))};
  CHECK(eval_analytic(s, Vec3(5.2, 0, 0)).sigma == 0.0);
}

TEST_CASE("primitives: mirror flag and side colors") {
  Primitive p = sphere_at(Vec3(0, 1.0, 0), 0.3, 3.0, Rgb(0, 1, 0));
  p.mirror = true;
  AnalyticScene s = open_scene();
  s.primitives.push_back(p);
  CHECK(eval_analytic(s, Vec3(0, 1.0, 0)).sigma == 3.0);
  CHECK(eval_analytic(s, Vec3(0, -1.0, 0)).sigma == 3.0);
  CHECK(eval_analytic(s, Vec3(0, 0, 0)).sigma == 0.0);

  const AnalyticObject car = make_car(true);
  AnalyticScene local = open_scene();
  local.primitives = car.parts;
  const Rgb left = eval_analytic(local, Vec3(0, 0.8, -0.3)).color;
  const Rgb right = eval_analytic(local, Vec3(0, -0.8, -0.3)).color;
  CHECK((left - right).norm() > 0.1);
  local.primitives = make_car(false).parts;
  CHECK((eval_analytic(local, Vec3(0, 0.8, -0.3)).color - eval_analytic(local, Vec3(0, -0.8, -0.3)).color).norm() < 1e-12);
}

TEST_CASE("oracle_render closed forms") {
  // Homogeneous slab of thickness L crossed perpendicularly.
  const double s = 1.7, L = 0.8;
  AnalyticScene scene = open_scene();
  Primitive slab;
  slab.shape = ShapeKind::Slab;
  slab.center = Vec3(0, 0, 0);
  slab.size = Vec3(1, 1, L);
  slab.sigma = s;
  slab.color = Rgb(0.2, 0.6, 0.9);
  scene.primitives.push_back(slab);
  OracleOptions o;
  o.step = L / 1e4;
  const Ray down{Vec3(0.3, -0.2, 2.0), Vec3(0, 0, -1), 0.0, 4.0};
  const OracleResult r = oracle_render(scene, down, o);
  const double alpha = 1.0 - std::exp(-s * L);
  CHECK((r.render.color - alpha * slab.color).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(r.render.opacity == doctest::Approx(alpha).epsilon(1e-6));

  // Empty scene: background.
  o.background = Rgb(0.1, 0.2, 0.3);
  const OracleResult empty = oracle_render(open_scene(), down, o);
  CHECK(empty.render.color == o.background);
  CHECK(empty.render.opacity == 0.0);
  CHECK_FALSE(empty.render.depth_valid);

  o.step = 0.0;
  CHECK_THROWS_AS(oracle_render(scene, down, o), InvalidArgument);
}

TEST_CASE("oracle_render self-converges on a sphere") {
  const AnalyticScene scene = sphere_scene();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.3);
  OracleOptions coarse, fine;
  coarse.step = 1e-3;
  fine.step = 5e-4;
  for (int i = 0; i < 10; ++i) {
    const Vec3 origin(-3.0, n(rng), n(rng));
    const Ray ray{origin, (Vec3(0, n(rng), n(rng)) - origin).normalized(), 0.0, 6.0};
    const RenderResult a = oracle_render(scene, ray, coarse).render;
    const RenderResult b = oracle_render(scene, ray, fine).render;
    CHECK((a.color - b.color).cwiseAbs().maxCoeff() < 1e-6);
    // Convexity: the color is an opacity-weighted mix of the sphere color.
    CHECK(a.opacity >= 0.0);
    CHECK(a.opacity <= 1.0);
    CHECK((a.color - a.opacity * scene.primitives[0].color).norm() < 1e-9);
  }
}

TEST_CASE("oracle instance weights sum to the object opacity") {
  AnalyticScene scene = car_scene(false, false);
  OracleOptions o;
  o.step = 2e-3;
  const Vec3 origin(-8, 0.2, 0.9);
  const Ray ray{origin, (Vec3(0, 0.1, 0.7) - origin).normalized(), 0.0, 20.0};
  const OracleResult r = oracle_render(scene, ray, o);
  REQUIRE(r.instance_weight.size() == 1);
  CHECK(r.instance_weight[0] == doctest::Approx(r.render.opacity).epsilon(1e-9));
  CHECK(r.render.opacity > 0.99);
}

TEST_CASE("bake reproduces analytic density at nodes and renders close to the oracle") {
  const AnalyticScene scene = sphere_scene();
  const GridSpec grid = GridSpec::covering(scene.scene_bounds, scene.scene_bounds.extent().x() / 127.0);
  BakeReport report;
  const VoxelField f = bake(scene, grid, &report);
  CHECK(f.grid.resolution[0] == 128);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> idx(0, 127);
  int checked = 0;
  for (int n = 0; n < 2000; ++n) {
    const int i = idx(rng), j = idx(rng), k = idx(rng);
    const double truth = eval_analytic(scene, grid.node_position(i, j, k)).sigma;
    if (truth < kBakeDensityFloor || truth > kBakeDensityCeiling) continue;
    ++checked;
    CHECK(query_density(f, grid.node_position(i, j, k)) == doctest::Approx(truth).epsilon(1e-5));
  }
  CHECK(checked > 100);
  CHECK(report.clamped_high == 0);

  const auto cams = orbit_cameras(Vec3::Zero(), 4.0, 1.0, 2, 0.0, kPi, 48, 36, 1.0);
  for (const CameraModel& cam : cams) {
    const RenderedImage truth = oracle_image(scene, cam, 2e-3);
    const RenderedImage baked = render_image(f, cam, SampleSpec{}, CompositeOptions{});
    CHECK(psnr(baked.color, truth.color) >= 35.0);
  }
}

TEST_CASE("bake clamps unreachable densities") {
  AnalyticScene scene = open_scene();
  scene.primitives.push_back(sphere_at(Vec3::Zero(), 2.0, 1e6, Rgb(1, 1, 1)));
  BakeReport report;
  const VoxelField f = bake(scene, GridSpec::covering(scene.scene_bounds, 0.5), &report);
  CHECK(report.clamped_high > 0);
  CHECK(query_density(f, Vec3::Zero()) == doctest::Approx(kBakeDensityCeiling).epsilon(1e-5));
}

TEST_CASE("generate_dataset: depth maps, exact masks and bounded dilation") {
  const AnalyticScene scene = car_scene(false, true);
  const auto cams = orbit_cameras(Vec3(0, 0, 0.8), 8.0, 2.0, 3, 0.0, 2.0, 40, 30, 1.2);
  DatasetOptions opt;
  opt.step = 0.01;
  const SceneManifest exact = generate_dataset(scene, cams, opt);
  REQUIRE(exact.frames.size() == 3);
  CHECK_NOTHROW(exact.validate());
  opt.mask_dilation_max = 2;
  opt.seed = 9;
  const SceneManifest noisy = generate_dataset(scene, cams, opt);

  for (std::size_t f = 0; f < cams.size(); ++f) {
    const FrameRecord& frame = exact.frames[f];
    REQUIRE(frame.depth.has_value());
    REQUIRE(frame.masks.size() == 1);
    const RenderedImage truth = oracle_image(scene.at_frame(static_cast<int>(f)), cams[f], opt.step);
    int depth_bad = 0;
    for (int v = 0; v < truth.height; ++v) {
      for (int u = 0; u < truth.width; ++u) {
        const std::size_t p = truth.pixel(u, v);
        if (!truth.depth_valid[p]) continue;
        depth_bad += std::abs(frame.depth->meters(u, v) - truth.depth[p]) > 0.5e-3 + 1e-9;
      }
    }
    CHECK(depth_bad == 0);
    // Exact masks: every pixel over the threshold, as the oracle attributes it.
    const BinaryMask& m = frame.masks[0].mask;
    int mismatch = 0;
    OracleOptions o;
    o.step = opt.step;
    const AnalyticScene posed = scene.at_frame(static_cast<int>(f));
    for (int v = 0; v < truth.height; v += 3) {
      for (int u = 0; u < truth.width; u += 3) {
        const OracleResult r = oracle_render(posed, generate_ray(cams[f], u + 0.5, v + 0.5), o);
        mismatch += (r.instance_weight[0] >= opt.mask_threshold) != m.at(u, v);
      }
    }
    CHECK(mismatch == 0);
    // Dilated masks only grow, by at most two pixels.
    const BinaryMask& d = noisy.frames[f].masks[0].mask;
    CHECK(mask_difference(m, d).empty());
    CHECK(mask_difference(d, dilate(m, 2)).empty());
  }
  // Same seed, same corruption.
  const SceneManifest again = generate_dataset(scene, cams, opt);
  for (std::size_t f = 0; f < cams.size(); ++f) CHECK(again.frames[f].masks[0].mask.data == noisy.frames[f].masks[0].mask.data);
  opt.mask_dilation_max = -1;
  CHECK_THROWS_AS(generate_dataset(scene, cams, opt), InvalidArgument);
}

TEST_CASE("scene specs round-trip through JSON") {
  for (const char* name : {"street", "street_moving", "wall", "u_wall", "car", "car_distinct", "car_isolated", "sphere"}) {
    const AnalyticScene s = preset_scene(name);
    CHECK_NOTHROW(s.validate());
    const std::string text = scene_to_json(s);
    CHECK(scene_to_json(scene_from_json(text)) == text);
  }
  CHECK_THROWS(preset_scene("nope"));
  CHECK_THROWS_AS(scene_from_json("{"), FormatError);
}

TEST_CASE("moving objects follow constant-rate motion") {
  AnalyticObject car = make_car();
  car.velocity = Vec3(0.5, 0, 0);
  car.yaw_rate = 0.1;
  const Box3D b = car.box_at(4);
  CHECK((b.center - (car.box.center + Vec3(2.0, 0, 0))).norm() < 1e-12);
  CHECK(b.yaw == doctest::Approx(0.4));
  CHECK(b.size == car.box.size);
}

TEST_CASE("oracle_image: parallel kernel matches the serial reference") {
  const AnalyticScene scene = car_scene(true, true);
  const CameraModel cam = orbit_cameras(Vec3(0, 0, 0.8), 7.0, 2.0, 1, 0.5, 0.5, 24, 18, 1.0).front();
  const RenderedImage a = oracle_image(scene, cam, 0.01, Exec::Serial);
  const RenderedImage b = oracle_image(scene, cam, 0.01, Exec::Parallel);
  CHECK(a.color == b.color);
  CHECK(a.depth == b.depth);
  CHECK(a.opacity == b.opacity);
}
