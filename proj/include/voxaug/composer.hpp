#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "voxaug/geometry.hpp"
#include "voxaug/parallel.hpp"
#include "voxaug/voxel_field.hpp"

namespace voxaug {

struct PillarConfig {
  double cell_size = 2.0;  // BEV cell edge, meters
  double z_min = 0.2;      // height band above the local ground
  double z_max = 3.0;
  double delta1 = 30.0;    // max(Z_p) threshold
  double delta2 = 15.0;    // mean(Z_p) threshold
  double ground_density = 5.0;  // a z-level is "dense" when its median density reaches this
  std::optional<double> ground_height;  // fixes the ground instead of estimating it

  void validate() const;
};

enum class CellState : std::uint8_t { Valid = 0, Invalid = 1, Occluded = 2 };

struct PillarCell {
  double max_density = 0.0;
  double mean_density = 0.0;
  std::size_t samples = 0;  // grid points in the pillar
  double ground = 0.0;      // local ground height
  CellState state = CellState::Valid;
};

/// BEV grid of pillars over the field's (x, y) extent. Cell (i, j) covers
/// [origin + cell * (i, j), origin + cell * (i + 1, j + 1)).
struct ValidRegionMap {
  Vec2 origin = Vec2::Zero();
  double cell_size = 1.0;
  int nx = 0;
  int ny = 0;
  double delta1 = 30.0;
  double delta2 = 15.0;
  double ground_height = 0.0;  // scene-wide estimate
  std::vector<PillarCell> cells;  // row-major, j * nx + i

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  PillarCell& at(int i, int j) { return cells[index(i, j)]; }
  const PillarCell& at(int i, int j) const { return cells[index(i, j)]; }
  Vec2 cell_center(int i, int j) const { return origin + cell_size * Vec2(i + 0.5, j + 0.5); }
  /// Cell containing p, or nullopt outside the map.
  std::optional<std::array<int, 2>> cell_of(const Vec2& p) const;
  bool valid_at(const Vec2& p) const;
  double ground_at(const Vec2& p) const;
  std::size_t count(CellState state) const;
};

/// Scene-wide ground: where the median density profile, walking up from the lowest dense
/// level, first drops below half of that run's peak. Falls back to the field's floor.
double estimate_ground_height(const VoxelField& field, double dense_threshold);

/// Per-cell max / mean of the activated density over the grid points inside the pillar's
/// height band; every cell starts Valid.
ValidRegionMap pillar_stats(const VoxelField& field, const PillarConfig& config, Exec exec = Exec::Parallel);

/// Valid iff max < delta1 and mean < delta2; occlusion marks are cleared.
void classify_valid(ValidRegionMap& map, double delta1, double delta2);

/// Cells whose interior the open segment a-b passes through (positive length), in order
/// from a to b. Ties at grid corners step diagonally.
std::vector<std::array<int, 2>> bev_line_cells(const ValidRegionMap& map, const Vec2& a, const Vec2& b);

/// Marks valid cells occluded when the segment from `ego` to their center crosses a cell with
/// max >= delta1 (the ego and target cells themselves excluded). Throws InvalidArgument if
/// the ego lies outside the map.
void occlusion_filter(ValidRegionMap& map, const Vec2& ego, Exec exec = Exec::Parallel);

/// pillar_stats, classify_valid and occlusion_filter in sequence.
ValidRegionMap valid_region(const VoxelField& field, const PillarConfig& config, const Vec2& ego,
                            Exec exec = Exec::Parallel);

struct JitterConfig {
  double t_x = 20.0;  // meters, along the base heading
  double t_y = 5.0;   // meters, across it
  double t_theta = 30.0 * kPi / 180.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Offsets uniform in [-t_x, t_x] x [-t_y, t_y] (base box frame) and yaw uniform in
/// [-t_theta, t_theta]. Always draws three numbers; a zero limit leaves that component
/// bit-identical to the base.
RigidPlacement sample_placement(const Box3D& base, const JitterConfig& jitter, std::mt19937_64& rng);

/// Shannon entropy (nats) of the yaw histogram with `bin_degrees` bins over (-180, 180].
double heading_entropy(std::span<const double> yaws, double bin_degrees = 5.0);

enum class BoxSource : std::uint8_t { Original = 0, Placed = 1 };

struct AnnotatedBox {
  Box3D box;
  BoxSource source = BoxSource::Original;
  std::string asset_id;  // placed boxes only
  int track_id = -1;
};

struct PlacedObject {
  std::string asset_id;
  RigidPlacement placement;
};

struct SceneGraph {
  std::string background_id;
  std::vector<PlacedObject> objects;
  std::vector<CameraModel> cameras;
  std::vector<AnnotatedBox> boxes;  // original annotations followed by placements
  std::uint64_t seed = 0;
  JitterConfig jitter;
  int index = 0;
};

enum class PlaceOutcome : std::uint8_t { Accepted, InvalidRegion, Collision, OutOfBounds };
const char* outcome_name(PlaceOutcome outcome);

/// Checks the center cell, the background bounds and zero IoU against every box; on
/// acceptance appends the object and its box to the graph.
PlaceOutcome try_place(SceneGraph& scene, const std::string& asset_id, const RigidPlacement& placement,
                       const ValidRegionMap& map, const Aabb& background_bounds);

struct PoolEntry {
  std::string id;
  Vec3 size = Vec3::Ones();  // canonical box size
};

struct BatchConfig {
  int count = 12;
  int min_objects = 1;
  int max_objects = 2;
  int max_attempts = 50;     // per object
  bool uniform_base = false; // draw base poses from valid cells instead of annotations
  JitterConfig jitter;
};

struct BatchInput {
  std::string background_id;
  Aabb background_bounds;
  const ValidRegionMap* map = nullptr;
  std::span<const PoolEntry> pool;
  std::span<const AnnotatedBox> originals;  // world boxes already in the scene
  std::span<const CameraModel> cameras;  // graph g renders camera g mod size
};

/// Graph g draws from mt19937_64(mix_seed(jitter.seed, g)), so the result is independent of
/// the order graphs are built in. No valid cell gives an empty batch and a warning.
std::vector<SceneGraph> generate_batch(const BatchInput& input, const BatchConfig& config);

/// Independent re-check of the graph invariants; returns one message per violation.
std::vector<std::string> check_scene_graph(const SceneGraph& scene, const ValidRegionMap* map = nullptr);

// Serialization ----------------------------------------------------------------------------

std::string scene_graph_to_json(const SceneGraph& scene);
/// Throws FormatError on malformed input.
SceneGraph scene_graph_from_json(const std::string& text);

std::string valid_region_to_json(const ValidRegionMap& map);
ValidRegionMap valid_region_from_json(const std::string& text);
/// One pixel per cell, north up: green valid, red invalid, gray occluded.
void write_valid_region_ppm(const ValidRegionMap& map, const std::string& path, int pixels_per_cell = 8);

}  // namespace voxaug
