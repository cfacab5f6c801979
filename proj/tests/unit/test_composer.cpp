#include <doctest.h>

#include <set>

#include <cstdio>
#include <filesystem>
#include <limits>

#include "support/oracles.hpp"
#include "voxaug/composer.hpp"
#include "voxaug/synth.hpp"

using namespace voxaug;
using namespace voxaug::testing;

namespace {

constexpr float kEmptyRaw = -1e30f;  // softplus underflows to exactly 0

VoxelField empty_field(const Aabb& box, double voxel = 0.25) {
  VoxelField f = VoxelField::create(GridSpec::covering(box, voxel), ColorMode::Direct);
  std::fill(f.density_grid.begin(), f.density_grid.end(), kEmptyRaw);
  return f;
}

PillarConfig flat_config(double ground = 0.0) {
  PillarConfig c;
  c.ground_height = ground;
  return c;
}

// Hand-built map: every cell has the given max density (mean = max / 2).
ValidRegionMap map_from(const std::vector<std::string>& rows, double cell = 2.0) {
  ValidRegionMap m;
  m.cell_size = cell;
  m.ny = static_cast<int>(rows.size());
  m.nx = static_cast<int>(rows[0].size());
  m.cells.resize(static_cast<std::size_t>(m.nx) * m.ny);
  for (int j = 0; j < m.ny; ++j) {
    for (int i = 0; i < m.nx; ++i) {
      // Row 0 of the picture is the top (largest y).
      const char ch = rows[m.ny - 1 - j][i];
      PillarCell& c = m.at(i, j);
      c.max_density = ch == '#' ? 100.0 : 0.0;
      c.mean_density = c.max_density / 2;
      c.samples = 1;
    }
  }
  classify_valid(m, m.delta1, m.delta2);
  return m;
}

}  // namespace

TEST_CASE("pillar_stats examples") {
  VoxelField f = empty_field({Vec3(0, 0, -1), Vec3(8, 6, 4)});
  ValidRegionMap m = pillar_stats(f, flat_config());
  CHECK(m.nx == 4);
  CHECK(m.ny == 3);
  for (const PillarCell& c : m.cells) {
    CHECK(c.max_density == 0.0);
    CHECK(c.mean_density == 0.0);
    CHECK(c.samples > 0);
  }
  const std::size_t node = f.grid.index(5, 9, 8);  // (1.25, 2.25, 1.0)
  f.density_grid[node] = static_cast<float>(softplus_inverse(40.0) - f.density_bias);
  m = pillar_stats(f, flat_config());
  const PillarCell& hit = m.at(0, 1);
  CHECK(hit.max_density == doctest::Approx(40.0).epsilon(1e-5));
  CHECK(hit.mean_density == doctest::Approx(hit.max_density / hit.samples));
  CHECK(m.at(1, 1).max_density == 0.0);
}

TEST_CASE("pillar_stats matches a brute-force scan, serial and parallel") {
  VoxelField f = VoxelField::create(GridSpec::covering({Vec3(-3, -2, -1), Vec3(9.1, 7.3, 4)}, 0.3), ColorMode::Direct);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 3.0);
  for (float& v : f.density_grid) v = static_cast<float>(g(rng));
  for (bool estimated : {false, true}) {
    PillarConfig cfg;
    if (!estimated) cfg.ground_height = 0.1;
    const ValidRegionMap serial = pillar_stats(f, cfg, Exec::Serial);
    const ValidRegionMap parallel = pillar_stats(f, cfg, Exec::Parallel);
    const PillarScan scan = brute_force_pillars(f, serial, cfg.z_min, cfg.z_max);
    for (std::size_t c = 0; c < serial.cells.size(); ++c) {
      CHECK(serial.cells[c].samples == scan.count[c]);
      CHECK(serial.cells[c].max_density == doctest::Approx(scan.max[c]).epsilon(1e-12));
      CHECK(serial.cells[c].mean_density == doctest::Approx(scan.sum[c] / std::max<std::size_t>(scan.count[c], 1)).epsilon(1e-12));
      CHECK(serial.cells[c].max_density == parallel.cells[c].max_density);
      CHECK(serial.cells[c].mean_density == parallel.cells[c].mean_density);
      CHECK(serial.cells[c].ground == parallel.cells[c].ground);
    }
  }
}

TEST_CASE("ground estimation follows a baked slab") {
  AnalyticScene scene = wall_scene(Vec3(4, 0, 0), 6.0, 3.0);
  for (Primitive& p : scene.primitives) p.center.z() += 0.8;  // lift everything 0.8 m
  scene.scene_bounds = {Vec3(-8, -8, -1), Vec3(8, 8, 5)};
  const VoxelField f = bake(scene, GridSpec::covering(scene.scene_bounds, 0.25));
  const double ground = estimate_ground_height(f, 5.0);
  CHECK(std::abs(ground - 0.8) < 0.15);
}

TEST_CASE("classify_valid examples and monotonicity") {
  ValidRegionMap m;
  m.nx = 3;
  m.ny = 1;
  m.cells = {{40, 5, 1, 0, CellState::Valid}, {20, 18, 1, 0, CellState::Valid}, {20, 10, 1, 0, CellState::Valid}};
  classify_valid(m, 30, 15);
  CHECK(m.cells[0].state == CellState::Invalid);
  CHECK(m.cells[1].state == CellState::Invalid);
  CHECK(m.cells[2].state == CellState::Valid);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 60.0);
  ValidRegionMap r;
  r.nx = 20;
  r.ny = 20;
  r.cells.resize(400);
  for (auto& c : r.cells) {
    c.max_density = u(rng);
    c.mean_density = c.max_density * u(rng) / 60.0;
  }
  std::size_t previous = 0;
  for (double d : {5.0, 10.0, 20.0, 30.0, 45.0, 70.0}) {
    classify_valid(r, d, d / 2);
    CHECK(r.count(CellState::Valid) >= previous);
    previous = r.count(CellState::Valid);
  }
}

TEST_CASE("bev_line_cells") {
  const ValidRegionMap m = map_from({".....", ".....", ".....", ".....", "....."}, 1.0);
  auto cells = bev_line_cells(m, Vec2(0.5, 0.5), Vec2(3.5, 0.5));
  REQUIRE(cells.size() == 4);
  CHECK(cells.front() == std::array<int, 2>{0, 0});
  CHECK(cells.back() == std::array<int, 2>{3, 0});
  // Through a grid corner: diagonal step, neighbors untouched.
  cells = bev_line_cells(m, Vec2(0.5, 0.5), Vec2(2.5, 2.5));
  CHECK(cells == std::vector<std::array<int, 2>>{{0, 0}, {1, 1}, {2, 2}});
  // Running along a grid line enters no cell interior.
  CHECK(bev_line_cells(m, Vec2(1.0, 0.2), Vec2(1.0, 4.2)).empty());
  // Agrees with the exact clip on random segments.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int n = 0; n < 300; ++n) {
    const Vec2 a(u(rng), u(rng)), b(u(rng), u(rng));
    const auto got = bev_line_cells(m, a, b);
    std::set<std::array<int, 2>> expect;
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 5; ++i)
        if (segment_enters_open_square(a, b, Vec2(i, j), Vec2(i + 1, j + 1))) expect.insert({i, j});
    CHECK(std::set<std::array<int, 2>>(got.begin(), got.end()) == expect);
  }
}

TEST_CASE("occlusion_filter examples") {
  ValidRegionMap open = map_from({".......", ".......", ".......", "......."});
  occlusion_filter(open, Vec2(1, 1));
  CHECK(open.count(CellState::Occluded) == 0);
  CHECK(open.count(CellState::Valid) == 28);
  CHECK_THROWS_AS(occlusion_filter(open, Vec2(-1, 1)), InvalidArgument);

  // Ego in cell (0, 1); one wall cell straight ahead at (2, 1).
  ValidRegionMap m = map_from({".......", ".......", "..#....", "......."});
  occlusion_filter(m, Vec2(1, 3));
  for (int i = 3; i < 7; ++i) CHECK(m.at(i, 1).state == CellState::Occluded);
  CHECK(m.at(2, 1).state == CellState::Invalid);
  CHECK(m.at(1, 1).state == CellState::Valid);
  for (int i = 0; i < 7; ++i) {
    CHECK(m.at(i, 3).state == CellState::Valid);
    CHECK((m.at(i, 0).state != CellState::Occluded || i >= 3));
  }
}

TEST_CASE("occlusion_filter matches the exact line-of-sight oracle") {
  const std::vector<std::vector<std::string>> layouts = {
      {"............", "..#######...", "..#.....#...", "........#...", "..#.....#...", "..#######...", "............"},
      {"#...........", "....#.......", "..#...##....", "......#.....", ".........#..", "...#........", "..........##"},
  };
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(0.05, 23.95), uy(0.05, 13.95);
  for (const auto& rows : layouts) {
    for (int trial = 0; trial < 20; ++trial) {
      ValidRegionMap m = map_from(rows);
      const Vec2 ego(ux(rng), uy(rng));
      ValidRegionMap parallel = m;
      occlusion_filter(m, ego, Exec::Serial);
      occlusion_filter(parallel, ego, Exec::Parallel);
      const auto oracle = line_of_sight_states(m, ego);
      int mismatches = 0;
      for (std::size_t c = 0; c < m.cells.size(); ++c) {
        mismatches += m.cells[c].state != oracle[c];
        CHECK(m.cells[c].state == parallel.cells[c].state);
      }
      CHECK(mismatches == 0);
    }
  }
}

TEST_CASE("occlusion never validates an invalid cell") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ValidRegionMap m;
  m.nx = m.ny = 15;
  m.cell_size = 2.0;
  m.cells.resize(225);
  for (auto& c : m.cells) c.max_density = u(rng) < 0.15 ? 50.0 : 3.0;
  classify_valid(m, 30, 15);
  const ValidRegionMap before = m;
  occlusion_filter(m, Vec2(15, 15));
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    if (before.cells[c].state == CellState::Invalid) CHECK(m.cells[c].state == CellState::Invalid);
    if (m.cells[c].state == CellState::Valid) CHECK(before.cells[c].state == CellState::Valid);
  }
}

TEST_CASE("sample_placement: identity, ranges and uniformity") {
  const Box3D base{Vec3(3.25, -1.5, 0.8), Vec3(4, 1.8, 1.5), 0.7};
  std::mt19937_64 rng(11);
  JitterConfig zero;
  zero.t_x = zero.t_y = zero.t_theta = 0.0;
  for (int i = 0; i < 100; ++i) {
    const RigidPlacement p = sample_placement(base, zero, rng);
    CHECK(p.box.center == base.center);
    CHECK(p.box.yaw == base.yaw);
    CHECK(p.translation == base.center);
    CHECK(p.box.size == base.size);
  }

  const JitterConfig j;  // 20 m, 5 m, 30 degrees
  const Box3D straight{Vec3::Zero(), Vec3::Ones(), 0.0};
  std::vector<double> xs, ys, ts;
  for (int i = 0; i < 20000; ++i) {
    const RigidPlacement p = sample_placement(straight, j, rng);
    CHECK(std::abs(p.yaw) <= j.t_theta);
    xs.push_back(p.box.center.x());
    ys.push_back(p.box.center.y());
    ts.push_back(p.yaw);
  }
  CHECK(ks_uniform(xs, -20, 20) < 0.015);
  CHECK(ks_uniform(ys, -5, 5) < 0.015);
  CHECK(ks_uniform(ts, -j.t_theta, j.t_theta) < 0.015);

  // Offsets follow the base heading.
  Box3D turned = straight;
  turned.yaw = kPi / 2;
  JitterConfig along;
  along.t_y = 0.0;
  along.t_theta = 0.0;
  for (int i = 0; i < 20; ++i) {
    const RigidPlacement p = sample_placement(turned, along, rng);
    CHECK(std::abs(p.box.center.x()) < 1e-12);
  }

  std::mt19937_64 a(5), b(5);
  CHECK(sample_placement(base, j, a).box.center == sample_placement(base, j, b).box.center);
}

TEST_CASE("heading entropy grows under yaw jitter") {
  std::vector<double> point(5000, 0.3);
  const double before = heading_entropy(point);
  CHECK(before == 0.0);
  std::mt19937_64 rng(12);
  const JitterConfig j;
  std::vector<double> jittered;
  for (int i = 0; i < 5000; ++i) jittered.push_back(sample_placement({Vec3::Zero(), Vec3::Ones(), 0.3}, j, rng).yaw);
  CHECK(heading_entropy(jittered) > before);
  CHECK(heading_entropy(jittered) <= std::log(13.0) + 1e-9);
}

TEST_CASE("try_place outcomes") {
  ValidRegionMap m = map_from({"......", "......", "...#..", "......"});
  const Aabb bounds{Vec3(0, 0, -1), Vec3(12, 8, 5)};
  SceneGraph scene;
  auto place = [](const Vec3& c, double yaw = 0.0) {
    RigidPlacement p;
    p.box = {c, Vec3(1.5, 0.8, 1.0), yaw};
    p.translation = c;
    p.yaw = yaw;
    return p;
  };
  CHECK(try_place(scene, "a", place(Vec3(1, 1, 0.5)), m, bounds) == PlaceOutcome::Accepted);
  CHECK(scene.boxes.size() == 1);
  CHECK(scene.boxes[0].source == BoxSource::Placed);
  CHECK(try_place(scene, "a", place(Vec3(1, 1, 0.5)), m, bounds) == PlaceOutcome::Collision);
  CHECK(box3d_iou(scene.boxes[0].box, place(Vec3(1, 1, 0.5)).box) == doctest::Approx(1.0));
  CHECK(try_place(scene, "a", place(Vec3(7, 3, 0.5)), m, bounds) == PlaceOutcome::InvalidRegion);
  CHECK(try_place(scene, "a", place(Vec3(11.7, 1, 0.5)), m, bounds) == PlaceOutcome::OutOfBounds);
  // Touching faces do not collide.
  CHECK(try_place(scene, "a", place(Vec3(2.5, 1, 0.5)), m, bounds) == PlaceOutcome::Accepted);
  CHECK(check_scene_graph(scene, &m).empty());
  CHECK(std::string(outcome_name(PlaceOutcome::Collision)) == "collision");
}

TEST_CASE("generate_batch") {
  ValidRegionMap m = map_from({"........", "........", "...##...", "........", "........"});
  const Aabb bounds{Vec3(0, 0, -1), Vec3(16, 10, 5)};
  std::vector<PoolEntry> pool;
  for (int i = 0; i < 5; ++i) pool.push_back({"asset" + std::to_string(i), Vec3(3.5 + 0.2 * i, 1.8, 1.5)});
  const std::vector<AnnotatedBox> originals{{Box3D{Vec3(5, 3, 0.75), Vec3(4, 1.8, 1.5), 0.2}, BoxSource::Original, "", 4}};
  const std::vector<CameraModel> cams{CameraModel::from_fov(16, 12, 1.2, look_at(Vec3(1, 1, 2), Vec3(8, 5, 0)))};
  BatchInput in;
  in.background_id = "bg";
  in.background_bounds = bounds;
  in.map = &m;
  in.pool = pool;
  in.originals = originals;
  in.cameras = cams;
  BatchConfig cfg;
  cfg.count = 0;
  CHECK(generate_batch(in, cfg).empty());

  cfg.count = 12;
  cfg.jitter.seed = 77;
  const auto graphs = generate_batch(in, cfg);
  REQUIRE(graphs.size() == 12);
  for (const SceneGraph& g : graphs) {
    CHECK(g.objects.size() >= 1);
    CHECK(g.objects.size() <= 2);
    CHECK(g.cameras.size() == 1);
    CHECK(g.boxes.front().source == BoxSource::Original);
    CHECK(check_scene_graph(g, &m).empty());
    for (const PlacedObject& o : g.objects) {
      CHECK(o.placement.box.center.z() == doctest::Approx(m.ground_at(o.placement.box.center.head<2>()) + 0.75));
    }
  }
  const auto again = generate_batch(in, cfg);
  for (std::size_t i = 0; i < graphs.size(); ++i) CHECK(scene_graph_to_json(graphs[i]) == scene_graph_to_json(again[i]));

  // A single valid cell receives every placement.
  ValidRegionMap one = map_from({"####", "##.#", "####"});
  in.map = &one;
  in.background_bounds = {Vec3(0, 0, -1), Vec3(8, 6, 5)};
  in.originals = {};
  std::vector<PoolEntry> small{{"tiny", Vec3(0.8, 0.5, 0.5)}};
  in.pool = small;
  cfg.uniform_base = true;
  cfg.jitter.t_x = 0.4;
  cfg.jitter.t_y = 0.4;
  const auto forced = generate_batch(in, cfg);
  REQUIRE(forced.size() == 12);
  for (const SceneGraph& g : forced) {
    CHECK_FALSE(g.objects.empty());
    for (const PlacedObject& o : g.objects) {
      const auto c = one.cell_of(o.placement.box.center.head<2>());
      REQUIRE(c);
      CHECK((*c == std::array<int, 2>{2, 1}));
    }
  }

  // No valid cell at all.
  ValidRegionMap wall = map_from({"###", "###"});
  in.map = &wall;
  CHECK(generate_batch(in, cfg).empty());
}

TEST_CASE("serialization round trips") {
  ValidRegionMap m = map_from({"..#", "..."});
  m.origin = Vec2(-3, 2);
  m.ground_height = 0.4;
  occlusion_filter(m, Vec2(-2, 3));
  const ValidRegionMap back = valid_region_from_json(valid_region_to_json(m));
  CHECK(valid_region_to_json(back) == valid_region_to_json(m));
  CHECK_THROWS_AS(valid_region_from_json("{\"origin\": 3}"), FormatError);

  SceneGraph g;
  g.background_id = "abc";
  g.seed = 42;
  g.index = 3;
  RigidPlacement p;
  p.box = {Vec3(1, 2, 0.75), Vec3(4, 1.8, 1.5), 0.25};
  p.translation = p.box.center;
  p.yaw = p.box.yaw;
  g.objects.push_back({"car", p});
  g.boxes.push_back({Box3D{Vec3(-5, 0, 0.7), Vec3(4, 2, 1.4), -1.0}, BoxSource::Original, "", 9});
  g.boxes.push_back({p.box, BoxSource::Placed, "car", -1});
  g.cameras.push_back(CameraModel::from_fov(32, 24, 1.1, look_at(Vec3(0, -8, 2), Vec3(0, 0, 0.5))));
  const std::string text = scene_graph_to_json(g);
  const SceneGraph r = scene_graph_from_json(text);
  CHECK(scene_graph_to_json(r) == text);
  CHECK(r.boxes[1].source == BoxSource::Placed);
  CHECK(r.boxes[0].track_id == 9);
  CHECK_THROWS_AS(scene_graph_from_json("not json"), FormatError);

  const auto path = (std::filesystem::temp_directory_path() / "voxaug_region.ppm").string();
  write_valid_region_ppm(m, path, 4);
  CHECK(std::filesystem::file_size(path) > 3u * 12 * 8);
  std::filesystem::remove(path);
}
