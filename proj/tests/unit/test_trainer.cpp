#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "support/gradcheck.hpp"
#include "voxaug/losses.hpp"
#include "voxaug/renderer.hpp"
#include "voxaug/trainer.hpp"

using namespace voxaug;
using voxaug::testing::check_gradients;
using voxaug::testing::random_batch;
using voxaug::testing::random_field_d;

TEST_CASE("color_loss examples") {
  const std::vector<Rgb> a{Rgb(1, 0, 0)}, zero{Rgb::Zero()};
  CHECK(color_loss(a, a) == 0.0);
  CHECK(color_loss(a, zero) == 1.0);
  const std::vector<Rgb> p{Rgb(0.5, 0, 0), Rgb(0.5, 0.5, 0.5)}, t{Rgb::Zero(), Rgb::Zero()};
  CHECK(color_loss(p, t) == doctest::Approx(0.5));
  CHECK_THROWS_AS(color_loss(p, zero), InvalidArgument);
}

TEST_CASE("depth_loss examples") {
  const std::vector<std::uint8_t> on{1}, off{0}, both{1, 1};
  CHECK(depth_loss(std::vector<double>{5.0}, std::vector<double>{4.0}, on) == 1.0);
  CHECK(depth_loss(std::vector<double>{5.0}, std::vector<double>{4.0}, off) == 0.0);
  CHECK(depth_loss(std::vector<double>{3.0, 7.0}, std::vector<double>{4.0, 5.0}, both) == 1.5);
  CHECK_THROWS_AS(depth_loss(std::vector<double>{3.0}, std::vector<double>{4.0, 5.0}, both), InvalidArgument);
}

TEST_CASE("gc_loss examples") {
  const double eps = kProbabilityEpsilon;
  const std::vector<MaskLabel> fg{MaskLabel::Foreground}, bg{MaskLabel::Background};
  CHECK(gc_loss(std::vector<double>{1 - eps}, fg) < 1e-5);
  CHECK(gc_loss(std::vector<double>{std::exp(-1.0)}, fg) == doctest::Approx(1.0));
  CHECK(gc_loss(std::vector<double>{eps}, bg) < 1e-5);
  CHECK(gc_loss(std::vector<double>{0.0}, bg) >= 0.0);
  CHECK(std::isfinite(gc_loss(std::vector<double>{0.0}, fg)));
  const std::vector<MaskLabel> mixed{MaskLabel::None, MaskLabel::Background};
  CHECK(gc_loss(std::vector<double>{0.9, 0.5}, mixed) == doctest::Approx(std::log(2.0)));
  const BceTerm t = binary_cross_entropy(0.25, MaskLabel::Foreground);
  CHECK(t.dloss_dp == doctest::Approx(-4.0));
}

TEST_CASE("mirror_ray examples") {
  Ray r;
  r.origin = Vec3(1, 2, 0);
  r.direction = Vec3(0, -1, 0);
  r.t_near = 0.25;
  r.t_far = 9.0;
  r.frame = Frame::ObjectLocal;
  const Ray m = mirror_ray(r);
  CHECK(m.origin == Vec3(1, -2, 0));
  CHECK(m.direction == Vec3(0, 1, 0));
  CHECK(m.t_near == r.t_near);
  CHECK(m.t_far == r.t_far);
  const Ray back = mirror_ray(m);
  CHECK(back.origin == r.origin);
  CHECK(back.direction == r.direction);

  Ray planar = r;
  planar.origin = Vec3(1, 0, 3);
  planar.direction = Vec3(1, 0, 0);
  const Ray fixed = mirror_ray(planar);
  CHECK(fixed.origin == planar.origin);
  CHECK(fixed.direction == planar.direction);

  Ray world = r;
  world.frame = Frame::World;
  CHECK_THROWS_AS(mirror_ray(world), InvalidArgument);
}

TEST_CASE("renderer symmetry equivariance") {
  VoxelFieldD f = random_field_d(ColorMode::Direct, 8, 21);
  // Make the grid symmetric in extent about y = 0 so mirroring maps nodes onto nodes.
  f.grid.bounds.min.y() = -0.875;
  f.grid.bounds.max.y() = 0.875;
  VoxelFieldD g = f;
  const auto& res = f.grid.resolution;
  for (int k = 0; k < res[2]; ++k) {
    for (int j = 0; j < res[1]; ++j) {
      for (int i = 0; i < res[0]; ++i) {
        const std::size_t a = f.grid.index(i, j, k), b = f.grid.index(i, res[1] - 1 - j, k);
        g.density_grid[b] = f.density_grid[a];
        for (int c = 0; c < 3; ++c) g.color_grid[b * 3 + c] = f.color_grid[a * 3 + c];
      }
    }
  }
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 20; ++n) {
    Ray r;
    r.frame = Frame::ObjectLocal;
    r.origin = Vec3(-3, u(rng), u(rng));
    r.direction = (Vec3(u(rng) * 0.5, u(rng) * 0.5, u(rng) * 0.5) - r.origin).normalized();
    const RenderResult a = render(f, mirror_ray(r), 128, {});
    const RenderResult b = render(g, r, 128, {});
    CHECK((a.color - b.color).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(a.depth - b.depth) < 1e-6);
  }
}

TEST_CASE("losses are zero at perfect predictions") {
  const VoxelFieldD f = random_field_d(ColorMode::Direct, 6, 30);
  TrainingBatch batch = random_batch(f.bounds(), 12, 31);
  RaySampling s;
  s.jitter = false;
  // Replace targets with the field's own renders.
  const LossBreakdown first = evaluate_batch(f, batch, {1, 0.1, 0.0}, s, nullptr, Exec::Serial);
  CHECK(first.total > 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const RenderResult r = render(f, batch.rays[i], SampleSpec{0, s.step_ratio, s.max_samples}, {});
    batch.target_color[i] = r.color;
    batch.target_depth[i] = r.depth;
    batch.depth_valid[i] = r.depth_valid;
  }
  const LossBreakdown zero = evaluate_batch(f, batch, {1, 0.1, 0.0}, s, nullptr, Exec::Serial);
  CHECK(zero.color < 1e-20);
  CHECK(zero.depth < 1e-9);
}

TEST_CASE("gradients match central differences in both color modes") {
  for (ColorMode mode : {ColorMode::Direct, ColorMode::FeatureMLP}) {
    const VoxelFieldD f = random_field_d(mode, 8, 40 + static_cast<int>(mode));
    const TrainingBatch batch = random_batch(f.bounds(), 24, 41);
    const auto r = check_gradients(f, batch, {1.0, 0.1, 0.05}, 60, 42);
    INFO("mode " << static_cast<int>(mode) << " max rel " << r.max_rel_error);
    CHECK(r.checked == 60);
    CHECK(r.nonzero > 30);
    CHECK(r.max_rel_error <= 1e-3);
  }
}

TEST_CASE("single ray through a single voxel: density gradient sign") {
  GridSpec g;
  g.bounds = {Vec3::Zero(), Vec3::Ones()};
  g.voxel_size = 1.0;
  VoxelFieldD f = VoxelFieldD::create(g, ColorMode::Direct);
  std::fill(f.color_grid.begin(), f.color_grid.end(), 2.0);  // bright voxel
  TrainingBatch batch;
  Ray r;
  r.origin = Vec3(-1, 0.5, 0.5);
  r.direction = Vec3::UnitX();
  batch.push(r, Rgb::Constant(0.8), 0.0, false, MaskLabel::Foreground);
  RaySampling s;
  s.jitter = false;
  FieldGradient grad;
  grad.reset(f);
  evaluate_batch(f, batch, {1, 0, 0}, s, &grad, Exec::Serial);
  for (std::size_t i = 0; i < f.density_grid.size(); ++i) {
    VoxelFieldD up = f, down = f;
    up.density_grid[i] += 1e-4;
    down.density_grid[i] -= 1e-4;
    const double fd = (evaluate_batch(up, batch, {1, 0, 0}, s, nullptr, Exec::Serial).total -
                       evaluate_batch(down, batch, {1, 0, 0}, s, nullptr, Exec::Serial).total) / 2e-4;
    CHECK(fd < 0.0);  // more density brings the dark render toward the bright target
    CHECK((grad.density[i] < 0.0) == (fd < 0.0));
  }
}

TEST_CASE("zero loss weights leave parameters unchanged") {
  VoxelField f = random_field_d(ColorMode::Direct, 6, 50).cast<float>();
  const VoxelField before = f;
  TrainConfig cfg;
  cfg.weights = {0, 0, 0};
  Adam<float> opt(f, cfg.lr_grid, cfg.lr_mlp);
  gradient_step(f, opt, random_batch(f.bounds(), 16, 51), cfg, 0);
  CHECK(f.density_grid == before.density_grid);
  CHECK(f.color_grid == before.color_grid);
}

TEST_CASE("fit_field: zero iterations keep the initialized field") {
  VoxelField f = random_field_d(ColorMode::Direct, 6, 52).cast<float>();
  const VoxelField before = f;
  TrainConfig cfg;
  cfg.iterations = 0;
  const TrainReport rep = fit_field(f, random_batch(f.bounds(), 16, 53), cfg);
  CHECK(rep.trace.empty());
  CHECK(f.density_grid == before.density_grid);
  CHECK_THROWS_AS(fit_field(f, TrainingBatch{}, cfg), InvalidArgument);
}

TEST_CASE("parallel batch evaluation matches the serial reference") {
  const VoxelFieldD direct = random_field_d(ColorMode::Direct, 8, 60);
  const TrainingBatch batch = random_batch(direct.bounds(), 300, 61);
  RaySampling s;
  s.seed = 9;
  FieldGradient gs, gp;
  gs.reset(direct);
  gp.reset(direct);
  const LossBreakdown ls = evaluate_batch(direct, batch, {}, s, &gs, Exec::Serial);
  const LossBreakdown lp = evaluate_batch(direct, batch, {}, s, &gp, Exec::Parallel);
  CHECK(ls.total == lp.total);
  CHECK(gs.density == gp.density);
  CHECK(gs.color == gp.color);

  const VoxelFieldD mlp = random_field_d(ColorMode::FeatureMLP, 6, 62);
  gs.reset(mlp);
  gp.reset(mlp);
  const LossBreakdown ms = evaluate_batch(mlp, batch, {}, s, &gs, Exec::Serial);
  const LossBreakdown mp = evaluate_batch(mlp, batch, {}, s, &gp, Exec::Parallel);
  CHECK(ms.total == doctest::Approx(mp.total).epsilon(1e-12));
  double worst = 0.0;
  for (std::size_t i = 0; i < gs.mlp.size(); ++i) worst = std::max(worst, std::abs(gs.mlp[i] - gp.mlp[i]));
  CHECK(worst < 1e-10);
}

TEST_CASE("fit_field is deterministic and reduces the loss") {
  const VoxelFieldD ref = random_field_d(ColorMode::Direct, 8, 70);
  TrainingBatch pool = random_batch(ref.bounds(), 400, 71);
  RaySampling s;
  s.jitter = false;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const RenderResult r = render(ref, pool.rays[i], SampleSpec{}, {});
    pool.target_color[i] = r.color;
    pool.target_depth[i] = r.depth;
    pool.depth_valid[i] = r.depth_valid;
    pool.mask_label[i] = MaskLabel::None;
  }
  GridSpec grid = ref.grid;
  VoxelField a = VoxelField::create(grid, ColorMode::Direct), b = a, c = a;
  TrainConfig cfg;
  cfg.iterations = 40;
  cfg.batch_size = 128;
  cfg.seed = 3;
  cfg.psnr_warning = 0.0;
  const TrainReport ra = fit_field(a, pool, cfg, Exec::Parallel);
  fit_field(b, pool, cfg, Exec::Parallel);
  fit_field(c, pool, cfg, Exec::Serial);
  CHECK(a.density_grid == b.density_grid);
  CHECK(a.density_grid == c.density_grid);
  CHECK(a.color_grid == c.color_grid);
  CHECK(ra.trace.back().loss.total < ra.trace.front().loss.total);

  const auto path = std::filesystem::temp_directory_path() / "voxaug_trace.csv";
  write_loss_trace(path, ra.trace);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,total,color,depth,gc");
  std::filesystem::remove(path);
}

TEST_CASE("non-finite loss aborts with the iteration index") {
  VoxelField f = random_field_d(ColorMode::Direct, 6, 80).cast<float>();
  f.density_grid[f.grid.index(2, 2, 2)] = std::numeric_limits<float>::quiet_NaN();
  TrainingBatch batch;
  Ray r;
  r.origin = f.grid.node_position(2, 2, 2) - Vec3(5, 0, 0);
  r.direction = Vec3::UnitX();
  batch.push(r, Rgb::Constant(0.5), 0.0, false);
  TrainConfig cfg;
  cfg.iterations = 3;
  cfg.batch_size = 1;
  try {
    fit_field(f, batch, cfg);
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(e.iteration() == 0);
  }
}

TEST_CASE("symmetric batches double with mirrored rays") {
  TrainingBatch b;
  Ray r;
  r.frame = Frame::ObjectLocal;
  r.origin = Vec3(0, 3, 1);
  r.direction = Vec3(0, -1, 0);
  b.push(r, Rgb(0.1, 0.2, 0.3), 2.0, true, MaskLabel::Foreground);
  const TrainingBatch m = b.mirrored();
  REQUIRE(m.size() == 1);
  CHECK(m.rays[0].origin == Vec3(0, -3, 1));
  CHECK(m.target_color[0] == b.target_color[0]);
  CHECK(m.mask_label[0] == MaskLabel::Foreground);
  CHECK(m.target_depth[0] == 2.0);
}

TEST_CASE("background-labeled rays feed only the gc term") {
  const VoxelFieldD f = random_field_d(ColorMode::Direct, 6, 40);
  TrainingBatch batch = random_batch(f.bounds(), 30, 41);
  RaySampling s;
  s.jitter = false;
  const LossBreakdown base = evaluate_batch(f, batch, {1, 0, 0}, s, nullptr, Exec::Serial);
  std::size_t counted = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) counted += batch.mask_label[i] != MaskLabel::Background;
  CHECK(base.rays == 30);
  CHECK(base.color_rays == counted);
  // Arbitrary targets on background rays change nothing.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.mask_label[i] == MaskLabel::Background) batch.target_color[i] = Rgb::Ones() - batch.target_color[i];
  }
  FieldGradient grad;
  grad.reset(f);
  const LossBreakdown moved = evaluate_batch(f, batch, {1, 0, 0}, s, &grad, Exec::Serial);
  CHECK(moved.color == base.color);
  CHECK(moved.total == base.total);
}
