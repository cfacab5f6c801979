#include "voxaug/composer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "voxaug/error.hpp"

namespace voxaug {

void PillarConfig::validate() const {
  if (!(cell_size > 0.0)) throw InvalidArgument("pillar cell size must be positive");
  if (!(z_max > z_min)) throw InvalidArgument("pillar height range is empty");
  if (!(delta1 >= delta2 && delta2 >= 0.0)) throw InvalidArgument("pillar thresholds need delta1 >= delta2 >= 0");
  if (!(ground_density > 0.0)) throw InvalidArgument("ground density threshold must be positive");
}

void JitterConfig::validate() const {
  if (!(t_x >= 0.0 && t_y >= 0.0 && t_theta >= 0.0)) throw InvalidArgument("jitter limits must be non-negative");
}

std::optional<std::array<int, 2>> ValidRegionMap::cell_of(const Vec2& p) const {
  const Vec2 q = (p - origin) / cell_size;
  if (!(q.x() >= 0.0 && q.y() >= 0.0 && q.x() <= nx && q.y() <= ny)) return std::nullopt;
  // Points on the far edge belong to the last cell.
  const int i = std::min(static_cast<int>(std::floor(q.x())), nx - 1);
  const int j = std::min(static_cast<int>(std::floor(q.y())), ny - 1);
  return std::array<int, 2>{i, j};
}

bool ValidRegionMap::valid_at(const Vec2& p) const {
  const auto c = cell_of(p);
  return c && at((*c)[0], (*c)[1]).state == CellState::Valid;
}

double ValidRegionMap::ground_at(const Vec2& p) const {
  const auto c = cell_of(p);
  return c ? at((*c)[0], (*c)[1]).ground : ground_height;
}

std::size_t ValidRegionMap::count(CellState state) const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [state](const PillarCell& c) { return c.state == state; }));
}

namespace {

double node_density(const VoxelField& field, std::size_t node) {
  return softplus(static_cast<double>(field.density_grid[node]) + field.density_bias);
}

double median_of(std::vector<double>& values) {
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

// Ground from a per-level density profile (level k at z0 + k * dz).
std::optional<double> profile_ground(const std::vector<double>& profile, double z0, double dz, double dense) {
  std::size_t k = 0;
  while (k < profile.size() && profile[k] < dense) ++k;
  if (k == profile.size()) return std::nullopt;
  while (k + 1 < profile.size() && profile[k + 1] >= profile[k]) ++k;
  const double half = 0.5 * profile[k];
  std::size_t m = k + 1;
  while (m < profile.size() && profile[m] >= half) ++m;
  if (m == profile.size()) return z0 + dz * static_cast<double>(profile.size() - 1);
  const double a = profile[m - 1];
  const double b = profile[m];
  return z0 + dz * (static_cast<double>(m - 1) + (a - half) / (a - b));
}

// Maps each lattice column index along one axis to its BEV cell.
std::vector<int> column_cells(int nodes, double voxel, double cell, int cells) {
  std::vector<int> out(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    out[i] = std::min(static_cast<int>(std::floor(i * voxel / cell)), cells - 1);
  }
  return out;
}

constexpr double kGroundTolerance = 0.5;  // meters a cell's ground may depart from the scene's

}  // namespace

double estimate_ground_height(const VoxelField& field, double dense_threshold) {
  const GridSpec& g = field.grid;
  const auto [rx, ry, rz] = g.resolution;
  std::vector<double> profile(static_cast<std::size_t>(rz));
  std::vector<double> level(static_cast<std::size_t>(rx) * ry);
  for (int k = 0; k < rz; ++k) {
    for (int j = 0; j < ry; ++j) {
      for (int i = 0; i < rx; ++i) level[static_cast<std::size_t>(j) * rx + i] = node_density(field, g.index(i, j, k));
    }
    profile[k] = median_of(level);
  }
  return profile_ground(profile, g.bounds.min.z(), g.voxel_size, dense_threshold).value_or(g.bounds.min.z());
}

ValidRegionMap pillar_stats(const VoxelField& field, const PillarConfig& config, Exec exec) {
  config.validate();
  field.validate();
  const GridSpec& g = field.grid;
  const auto [rx, ry, rz] = g.resolution;

  ValidRegionMap map;
  map.origin = Vec2(g.bounds.min.x(), g.bounds.min.y());
  map.cell_size = config.cell_size;
  const Vec3 extent = g.bounds.extent();
  map.nx = std::max(1, static_cast<int>(std::ceil(extent.x() / config.cell_size - 1e-9)));
  map.ny = std::max(1, static_cast<int>(std::ceil(extent.y() / config.cell_size - 1e-9)));
  map.delta1 = config.delta1;
  map.delta2 = config.delta2;
  map.ground_height = config.ground_height ? *config.ground_height : estimate_ground_height(field, config.ground_density);
  map.cells.assign(static_cast<std::size_t>(map.nx) * map.ny, PillarCell{});

  const std::vector<int> cx = column_cells(rx, g.voxel_size, config.cell_size, map.nx);
  const std::vector<int> cy = column_cells(ry, g.voxel_size, config.cell_size, map.ny);
  std::vector<std::vector<int>> xs(map.nx), ys(map.ny);
  for (int i = 0; i < rx; ++i) xs[cx[i]].push_back(i);
  for (int j = 0; j < ry; ++j) ys[cy[j]].push_back(j);

  const double z0 = g.bounds.min.z();
  auto cell_stats = [&](int ci, int cj) {
    PillarCell& cell = map.at(ci, cj);
    double ground = map.ground_height;
    if (!config.ground_height && !xs[ci].empty() && !ys[cj].empty()) {
      std::vector<double> profile(static_cast<std::size_t>(rz));
      std::vector<double> level;
      level.reserve(xs[ci].size() * ys[cj].size());
      for (int k = 0; k < rz; ++k) {
        level.clear();
        for (int j : ys[cj]) {
          for (int i : xs[ci]) level.push_back(node_density(field, g.index(i, j, k)));
        }
        profile[k] = median_of(level);
      }
      const auto local = profile_ground(profile, z0, g.voxel_size, config.ground_density);
      if (local && std::abs(*local - map.ground_height) <= kGroundTolerance) ground = *local;
    }
    cell.ground = ground;
    const double lo = ground + config.z_min;
    const double hi = ground + config.z_max;
    double sum = 0.0;
    double max = 0.0;
    std::size_t n = 0;
    for (int k = 0; k < rz; ++k) {
      const double z = z0 + g.voxel_size * k;
      if (z < lo || z > hi) continue;
      for (int j : ys[cj]) {
        for (int i : xs[ci]) {
          const double s = node_density(field, g.index(i, j, k));
          sum += s;
          max = std::max(max, s);
          ++n;
        }
      }
    }
    cell.samples = n;
    cell.max_density = max;
    cell.mean_density = n > 0 ? sum / static_cast<double>(n) : 0.0;
    cell.state = CellState::Valid;
  };

  const int total = map.nx * map.ny;
  if (exec == Exec::Serial) {
    for (int c = 0; c < total; ++c) cell_stats(c % map.nx, c / map.nx);
  } else {
#pragma omp parallel for schedule(dynamic, 4)
    for (int c = 0; c < total; ++c) cell_stats(c % map.nx, c / map.nx);
  }
  return map;
}

void classify_valid(ValidRegionMap& map, double delta1, double delta2) {
  map.delta1 = delta1;
  map.delta2 = delta2;
  for (PillarCell& c : map.cells) {
    c.state = (c.max_density < delta1 && c.mean_density < delta2) ? CellState::Valid : CellState::Invalid;
  }
}

std::vector<std::array<int, 2>> bev_line_cells(const ValidRegionMap& map, const Vec2& a, const Vec2& b) {
  std::vector<std::array<int, 2>> out;
  const Vec2 p = (a - map.origin) / map.cell_size;
  const Vec2 d = (b - a) / map.cell_size;
  if (d.x() == 0.0 && d.y() == 0.0) return out;
  std::array<int, 2> cell{};
  std::array<int, 2> step{};
  std::array<double, 2> t_max{};
  std::array<double, 2> t_delta{};
  for (int axis = 0; axis < 2; ++axis) {
    const double start = p[axis];
    const double dir = d[axis];
    const double fl = std::floor(start);
    if (dir == 0.0) {
      if (fl == start) return out;  // runs along a grid line: no interior is crossed
      cell[axis] = static_cast<int>(fl);
      step[axis] = 0;
      t_max[axis] = std::numeric_limits<double>::infinity();
      t_delta[axis] = std::numeric_limits<double>::infinity();
      continue;
    }
    // On a grid line heading negative, the segment starts in the lower cell.
    cell[axis] = static_cast<int>(fl) - ((dir < 0.0 && fl == start) ? 1 : 0);
    step[axis] = dir > 0.0 ? 1 : -1;
    const double boundary = dir > 0.0 ? cell[axis] + 1.0 : static_cast<double>(cell[axis]);
    t_max[axis] = (boundary - start) / dir;
    t_delta[axis] = 1.0 / std::abs(dir);
  }
  while (true) {
    if (cell[0] >= 0 && cell[1] >= 0 && cell[0] < map.nx && cell[1] < map.ny) out.push_back(cell);
    const double t = std::min(t_max[0], t_max[1]);
    if (t >= 1.0) break;
    // Equal crossings pass exactly through a corner: step both axes.
    const bool sx = t_max[0] == t;
    const bool sy = t_max[1] == t;
    if (sx) {
      cell[0] += step[0];
      t_max[0] += t_delta[0];
    }
    if (sy) {
      cell[1] += step[1];
      t_max[1] += t_delta[1];
    }
  }
  return out;
}

void occlusion_filter(ValidRegionMap& map, const Vec2& ego, Exec exec) {
  const auto ego_cell = map.cell_of(ego);
  if (!ego_cell) throw InvalidArgument("ego position lies outside the valid-region map");
  const int total = map.nx * map.ny;
  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(total), 0);
  auto test = [&](int c) {
    const int i = c % map.nx;
    const int j = c / map.nx;
    if (map.at(i, j).state != CellState::Valid) return;
    for (const auto& crossed : bev_line_cells(map, ego, map.cell_center(i, j))) {
      if (crossed == *ego_cell || (crossed[0] == i && crossed[1] == j)) continue;
      if (map.at(crossed[0], crossed[1]).max_density >= map.delta1) {
        blocked[c] = 1;
        return;
      }
    }
  };
  if (exec == Exec::Serial) {
    for (int c = 0; c < total; ++c) test(c);
  } else {
#pragma omp parallel for schedule(dynamic, 16)
    for (int c = 0; c < total; ++c) test(c);
  }
  for (int c = 0; c < total; ++c) {
    if (blocked[c]) map.cells[c].state = CellState::Occluded;
  }
}

ValidRegionMap valid_region(const VoxelField& field, const PillarConfig& config, const Vec2& ego, Exec exec) {
  ValidRegionMap map = pillar_stats(field, config, exec);
  classify_valid(map, config.delta1, config.delta2);
  occlusion_filter(map, ego, exec);
  return map;
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

}  // namespace

RigidPlacement sample_placement(const Box3D& base, const JitterConfig& jitter, std::mt19937_64& rng) {
  base.validate();
  jitter.validate();
  const double ux = uniform01(rng);
  const double uy = uniform01(rng);
  const double ut = uniform01(rng);
  Box3D box = base;
  if (jitter.t_x > 0.0 || jitter.t_y > 0.0) {
    const Vec2 local(jitter.t_x * (2.0 * ux - 1.0), jitter.t_y * (2.0 * uy - 1.0));
    const double c = std::cos(base.yaw);
    const double s = std::sin(base.yaw);
    box.center.x() += c * local.x() - s * local.y();
    box.center.y() += s * local.x() + c * local.y();
  }
  if (jitter.t_theta > 0.0) box.yaw = wrap_angle(base.yaw + jitter.t_theta * (2.0 * ut - 1.0));
  RigidPlacement out;
  out.translation = box.center;
  out.yaw = box.yaw;
  out.box = box;
  return out;
}

double heading_entropy(std::span<const double> yaws, double bin_degrees) {
  if (!(bin_degrees > 0.0)) throw InvalidArgument("bin width must be positive");
  if (yaws.empty()) return 0.0;
  const int bins = static_cast<int>(std::ceil(360.0 / bin_degrees));
  std::vector<std::size_t> hist(static_cast<std::size_t>(bins), 0);
  for (double yaw : yaws) {
    const double deg = wrap_angle(yaw) * 180.0 / kPi;  // (-180, 180]
    const int b = std::clamp(static_cast<int>(std::floor((deg + 180.0) / bin_degrees)), 0, bins - 1);
    ++hist[b];
  }
  double h = 0.0;
  const double n = static_cast<double>(yaws.size());
  for (std::size_t c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

const char* outcome_name(PlaceOutcome outcome) {
  switch (outcome) {
    case PlaceOutcome::Accepted: return "accepted";
    case PlaceOutcome::InvalidRegion: return "invalid-region";
    case PlaceOutcome::Collision: return "collision";
    case PlaceOutcome::OutOfBounds: return "out-of-bounds";
  }
  return "?";
}

namespace {

bool inside_bounds(const Box3D& box, const Aabb& bounds) {
  for (const Vec3& c : box.corners()) {
    if (!bounds.contains(c)) return false;
  }
  return true;
}

}  // namespace

PlaceOutcome try_place(SceneGraph& scene, const std::string& asset_id, const RigidPlacement& placement,
                       const ValidRegionMap& map, const Aabb& background_bounds) {
  const Box3D& box = placement.box;
  if (!map.valid_at(box.center.head<2>())) return PlaceOutcome::InvalidRegion;
  if (!inside_bounds(box, background_bounds)) return PlaceOutcome::OutOfBounds;
  for (const AnnotatedBox& other : scene.boxes) {
    if (box3d_iou(other.box, box) != 0.0) return PlaceOutcome::Collision;
  }
  scene.objects.push_back({asset_id, placement});
  scene.boxes.push_back({box, BoxSource::Placed, asset_id, -1});
  return PlaceOutcome::Accepted;
}

std::vector<SceneGraph> generate_batch(const BatchInput& input, const BatchConfig& config) {
  if (config.count < 0) throw InvalidArgument("scene graph count must be non-negative");
  if (config.min_objects < 0 || config.max_objects < config.min_objects) {
    throw InvalidArgument("object count range is invalid");
  }
  if (config.max_attempts < 1) throw InvalidArgument("placement attempts must be positive");
  config.jitter.validate();
  if (config.count == 0) return {};
  if (input.map == nullptr) throw InvalidArgument("batch generation needs a valid-region map");
  if (input.pool.empty()) throw InvalidArgument("asset pool is empty");
  const ValidRegionMap& map = *input.map;

  std::vector<std::array<int, 2>> valid_cells;
  for (int j = 0; j < map.ny; ++j) {
    for (int i = 0; i < map.nx; ++i) {
      if (map.at(i, j).state == CellState::Valid) valid_cells.push_back({i, j});
    }
  }
  if (valid_cells.empty()) {
    std::cerr << "warning: the background has no valid placement cell\n";
    return {};
  }
  const bool uniform = config.uniform_base || input.originals.empty();

  std::vector<SceneGraph> out;
  out.reserve(static_cast<std::size_t>(config.count));
  for (int g = 0; g < config.count; ++g) {
    std::mt19937_64 rng(mix_seed(config.jitter.seed, static_cast<std::uint64_t>(g)));
    SceneGraph scene;
    scene.background_id = input.background_id;
    if (!input.cameras.empty()) scene.cameras.push_back(input.cameras[static_cast<std::size_t>(g) % input.cameras.size()]);
    scene.boxes.assign(input.originals.begin(), input.originals.end());
    scene.seed = config.jitter.seed;
    scene.jitter = config.jitter;
    scene.index = g;
    const int span = config.max_objects - config.min_objects + 1;
    const int objects = config.min_objects + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(span)));
    for (int o = 0; o < objects; ++o) {
      const PoolEntry& asset = input.pool[uniform_index(rng, input.pool.size())];
      for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
        Box3D base;
        if (uniform) {
          const auto& c = valid_cells[uniform_index(rng, valid_cells.size())];
          const Vec2 xy = map.cell_center(c[0], c[1]);
          base.center = Vec3(xy.x(), xy.y(), 0.0);
        } else {
          base = input.originals[uniform_index(rng, input.originals.size())].box;
        }
        base.size = asset.size;
        base.frame = Frame::World;
        RigidPlacement p = sample_placement(base, config.jitter, rng);
        const double z = map.ground_at(p.box.center.head<2>()) + 0.5 * asset.size.z();
        p.box.center.z() = z;
        p.translation.z() = z;
        if (try_place(scene, asset.id, p, map, input.background_bounds) == PlaceOutcome::Accepted) break;
      }
    }
    out.push_back(std::move(scene));
  }
  return out;
}

std::vector<std::string> check_scene_graph(const SceneGraph& scene, const ValidRegionMap* map) {
  std::vector<std::string> problems;
  std::size_t placed = 0;
  for (std::size_t a = 0; a < scene.boxes.size(); ++a) {
    const Box3D& box = scene.boxes[a].box;
    if (!(box.size.array() > 0.0).all()) problems.push_back("box " + std::to_string(a) + " has a non-positive size");
    if (scene.boxes[a].source == BoxSource::Placed) {
      ++placed;
      if (map != nullptr && !map->valid_at(box.center.head<2>())) {
        problems.push_back("placed box " + std::to_string(a) + " is not in a valid cell");
      }
    }
    for (std::size_t b = a + 1; b < scene.boxes.size(); ++b) {
      const double iou = box3d_iou(box, scene.boxes[b].box);
      if (iou != 0.0) {
        problems.push_back("boxes " + std::to_string(a) + " and " + std::to_string(b) + " overlap (IoU " +
                           std::to_string(iou) + ")");
      }
    }
  }
  if (placed != scene.objects.size()) problems.push_back("placed boxes and objects disagree");
  for (std::size_t o = 0; o < scene.objects.size(); ++o) {
    const RigidPlacement& p = scene.objects[o].placement;
    if (p.translation != p.box.center || p.yaw != p.box.yaw) {
      problems.push_back("object " + std::to_string(o) + " placement disagrees with its box");
    }
  }
  return problems;
}

}  // namespace voxaug
