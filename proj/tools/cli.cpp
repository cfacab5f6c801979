#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "asset_store.hpp"
#include "voxaug/asset_io.hpp"
#include "voxaug/decomposition.hpp"
#include "voxaug/image.hpp"
#include "voxaug/manifest.hpp"
#include "voxaug/parallel.hpp"
#include "voxaug/reconstruction.hpp"
#include "voxaug/renderer.hpp"
#include "voxaug/synth.hpp"

namespace voxaug::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Rgb rgb_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected an [r, g, b] triple");
  return Rgb(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

template <class T>
void read_key(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj[key].get<T>();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig c;
  try {
    const json doc = json::parse(text);
    read_key(doc, "seed", c.seed);
    read_key(doc, "threads", c.threads);
    if (doc.contains("paths")) {
      const json& p = doc["paths"];
      if (p.contains("manifest")) c.manifest = p["manifest"].get<std::string>();
      if (p.contains("store")) c.store = p["store"].get<std::string>();
      if (p.contains("output")) c.output = p["output"].get<std::string>();
    }
    if (doc.contains("train")) {
      const json& t = doc["train"];
      read_key(t, "iterations", c.train.iterations);
      read_key(t, "batch_size", c.train.batch_size);
      read_key(t, "lr_grid", c.train.lr_grid);
      read_key(t, "lr_mlp", c.train.lr_mlp);
      read_key(t, "symmetric", c.train.symmetric);
      read_key(t, "step_ratio", c.train.step_ratio);
      read_key(t, "max_samples", c.train.max_samples);
      read_key(t, "background_voxel", c.background_voxel);
      read_key(t, "object_voxel", c.object_voxel);
      read_key(t, "max_resolution", c.max_resolution);
      if (t.contains("weights")) {
        read_key(t["weights"], "color", c.train.weights.color);
        read_key(t["weights"], "depth", c.train.weights.depth);
        read_key(t["weights"], "gc", c.train.weights.gc);
      }
      if (t.contains("color_mode")) {
        const std::string mode = t["color_mode"].get<std::string>();
        if (mode == "direct") c.color_mode = ColorMode::Direct;
        else if (mode == "mlp") c.color_mode = ColorMode::FeatureMLP;
        else throw FormatError("color_mode must be \"direct\" or \"mlp\"");
      }
    }
    if (doc.contains("pillar")) {
      const json& p = doc["pillar"];
      read_key(p, "cell_size", c.pillar.cell_size);
      read_key(p, "z_min", c.pillar.z_min);
      read_key(p, "z_max", c.pillar.z_max);
      read_key(p, "delta1", c.pillar.delta1);
      read_key(p, "delta2", c.pillar.delta2);
      read_key(p, "ground_density", c.pillar.ground_density);
      if (p.contains("ground_height")) c.pillar.ground_height = p["ground_height"].get<double>();
    }
    if (doc.contains("jitter")) {
      const json& j = doc["jitter"];
      read_key(j, "t_x", c.jitter.t_x);
      read_key(j, "t_y", c.jitter.t_y);
      if (j.contains("t_theta_deg")) c.jitter.t_theta = j["t_theta_deg"].get<double>() * kPi / 180.0;
    }
    if (doc.contains("compose")) {
      read_key(doc["compose"], "count", c.count);
      read_key(doc["compose"], "uniform_base", c.uniform_base);
    }
    if (doc.contains("render")) {
      const json& r = doc["render"];
      read_key(r, "width", c.render.width);
      read_key(r, "height", c.render.height);
      read_key(r, "step_ratio", c.render.step_ratio);
      read_key(r, "max_samples", c.render.max_samples);
      if (r.contains("background")) c.render.background = rgb_from(r["background"]);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  try {
    return parse_config(read_text(path));
  } catch (const IoError& e) {
    throw FormatError(e.what());
  }
}

namespace {

// Flag values; unset flags leave the config file's values alone.
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output;
  std::optional<std::string> store;
  std::optional<std::string> manifest;
  std::optional<int> iterations;
  std::optional<int> batch_size;
  std::optional<double> lr_grid;
  std::optional<double> voxel;
  std::optional<double> w_depth;
  std::optional<double> w_gc;
  std::optional<double> delta1;
  std::optional<double> delta2;
  std::optional<double> cell;
  std::optional<double> t_x;
  std::optional<double> t_y;
  std::optional<double> t_theta_deg;
  std::optional<int> count;
  std::optional<int> width;
  std::optional<int> height;
};

SceneManifest read_manifest(const fs::path& path) {
  if (path.empty()) throw FormatError("no manifest given (--manifest or paths.manifest)");
  SceneManifest m;
  try {
    m = load_manifest(path);
  } catch (const IoError& e) {
    throw FormatError(e.what());
  }
  if (m.frames.empty()) throw FormatError("manifest " + path.string() + " has no frames");
  return m;
}

json loss_json(const LossBreakdown& l) {
  return {{"total", l.total}, {"color", l.color}, {"depth", l.depth}, {"gc", l.gc},
          {"rays", l.rays}, {"depth_rays", l.depth_rays}, {"gc_rays", l.gc_rays}};
}

json report_json(const TrainReport& r, int iterations) {
  json j;
  j["iterations"] = iterations;
  j["ray_pool"] = r.ray_pool;
  j["final_psnr"] = r.final_psnr;
  j["psnr_warning"] = r.psnr_warning;
  j["final_loss"] = r.trace.empty() ? json(nullptr) : loss_json(r.trace.back().loss);
  return j;
}

// Asset argument: a file (added to the store) or a content id already in the store.
std::string resolve_asset(AssetStore& store, const std::string& ref) {
  if (fs::is_regular_file(ref)) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(ref);
    decode_asset(bytes);  // reject garbage before it enters the store
    return store.put(bytes);
  }
  if (!store.contains(ref)) throw MissingAsset("asset '" + ref + "' is neither a file nor in the store");
  return ref;
}

Asset fetch_asset(const AssetStore& store, const std::string& id) { return decode_asset(store.get(id)); }

VoxelField fetch_background(const AssetStore& store, const std::string& id) {
  Asset a = fetch_asset(store, id);
  if (!std::holds_alternative<VoxelField>(a)) throw FormatError("asset " + id + " is not a background");
  return std::get<VoxelField>(std::move(a));
}

ObjectAsset fetch_object(const AssetStore& store, const std::string& id) {
  Asset a = fetch_asset(store, id);
  if (!std::holds_alternative<ObjectAsset>(a)) throw FormatError("asset " + id + " is not an object");
  return std::get<ObjectAsset>(std::move(a));
}

// Mean activated density at grid nodes inside and outside the canonical box.
std::pair<double, double> density_audit(const ObjectAsset& asset) {
  const GridSpec& g = asset.field.grid;
  double inside = 0.0, outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (int k = 0; k < g.resolution[2]; ++k) {
    for (int j = 0; j < g.resolution[1]; ++j) {
      for (int i = 0; i < g.resolution[0]; ++i) {
        const double s = softplus(double(asset.field.density_grid[g.index(i, j, k)]) + asset.field.density_bias);
        if (asset.canonical_box.contains(g.node_position(i, j, k))) {
          inside += s;
          ++n_in;
        } else {
          outside += s;
          ++n_out;
        }
      }
    }
  }
  return {n_in ? inside / double(n_in) : 0.0, n_out ? outside / double(n_out) : 0.0};
}

Vec2 camera_ego(std::span<const CameraModel> cameras, const ValidRegionMap& map) {
  Vec2 sum = Vec2::Zero();
  for (const CameraModel& c : cameras) sum += c.center().head<2>();
  if (!cameras.empty()) {
    const Vec2 ego = sum / static_cast<double>(cameras.size());
    if (map.cell_of(ego)) return ego;
  }
  return map.origin + 0.5 * map.cell_size * Vec2(map.nx, map.ny);
}

std::vector<CameraModel> manifest_cameras(const SceneManifest& m) {
  std::vector<CameraModel> out;
  for (const FrameRecord& f : m.frames) out.push_back(f.camera);
  return out;
}

CameraModel resized(const CameraModel& c, int width, int height) {
  if (width <= 0 && height <= 0) return c;
  CameraModel out = c;
  const double sx = width > 0 ? double(width) / c.width : double(height) / c.height;
  const double sy = height > 0 ? double(height) / c.height : sx;
  out.width = width > 0 ? width : static_cast<int>(std::lround(c.width * sx));
  out.height = height > 0 ? height : static_cast<int>(std::lround(c.height * sy));
  out.fx *= sx;
  out.cx *= sx;
  out.fy *= sy;
  out.cy *= sy;
  return out;
}

// Commands -------------------------------------------------------------------------------

struct SynthArgs {
  std::string preset;
  std::string scene_file;
  std::string rig = "auto";
  int views = 40;
  int width = 128;
  int height = 128;
  double fov_deg = 80.0;
  double radius = 8.0;
  double cam_height = 2.0;
  double arc_start_deg = 0.0;
  double arc_end_deg = 360.0;
  double phase = 0.0;
  int mask_dilation = 0;
  double step = 0.02;
  bool self_check = false;
};

json cmd_synth(const PipelineConfig& cfg, const SynthArgs& a) {
  AnalyticScene scene;
  if (!a.scene_file.empty()) {
    try {
      scene = scene_from_json(read_text(a.scene_file));
    } catch (const IoError& e) {
      throw FormatError(e.what());
    }
  } else {
    scene = preset_scene(a.preset.empty() ? "street" : a.preset);
  }
  std::string rig = a.rig;
  if (rig == "auto") rig = scene.name.rfind("street", 0) == 0 ? "street" : "orbit";
  std::vector<CameraModel> cameras;
  if (rig == "street") {
    cameras = street_cameras(a.views, a.phase, a.width, a.height);
  } else if (rig == "orbit") {
    const Vec3 target = scene.objects.empty() ? Vec3(scene.scene_bounds.center().x(), scene.scene_bounds.center().y(), 0.5)
                                              : scene.objects.front().box.center;
    const double deg = kPi / 180.0;
    cameras = orbit_cameras(target, a.radius, a.cam_height, a.views, a.arc_start_deg * deg, a.arc_end_deg * deg,
                            a.width, a.height, a.fov_deg * deg);
  } else {
    throw InvalidArgument("unknown camera rig '" + rig + "'");
  }
  DatasetOptions options;
  options.step = a.step;
  options.mask_dilation_max = a.mask_dilation;
  options.seed = cfg.seed;
  const SceneManifest manifest = generate_dataset(scene, cameras, options);
  const fs::path manifest_path = cfg.output / "manifest.json";
  save_manifest(manifest, manifest_path);
  write_text(cfg.output / "scene.json", scene_to_json(scene));

  json summary = {{"command", "synth"}, {"scene", scene.name}, {"manifest", manifest_path.string()},
                  {"frames", manifest.frames.size()}, {"rig", rig}};
  if (a.self_check) {
    // Bake the scene on a lattice and compare its render of the first view with the oracle.
    const GridSpec grid = capped_grid(scene.scene_bounds, scene.nominal_step, 128);
    const VoxelField baked = bake(scene, grid);
    CompositeOptions composite;
    composite.background = scene.background;
    const RenderedImage a_img = render_image(baked, cameras.front(), SampleSpec{}, composite);
    const RenderedImage b_img = oracle_image(scene, cameras.front(), a.step);
    summary["self_check_psnr"] = psnr(a_img.color, b_img.color);
  }
  return summary;
}

json cmd_train_background(const PipelineConfig& cfg, const std::string& trace) {
  const SceneManifest manifest = read_manifest(cfg.manifest);
  BackgroundOptions options;
  options.voxel_size = cfg.background_voxel;
  options.max_resolution = cfg.max_resolution;
  options.color_mode = cfg.color_mode;
  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  const TrainedBackground result = train_background(manifest, train, options);
  AssetStore store(cfg.store_dir());
  bool hit = false;
  const std::string id = store.put(encode_asset(result.field), &hit);
  if (!trace.empty()) write_loss_trace(trace, result.report.trace);
  json summary = {{"command", "train-background"}, {"asset", id}, {"path", store.path_of(id).string()},
                  {"cache_hit", hit}};
  summary["training"] = report_json(result.report, train.iterations);
  return summary;
}

json cmd_train_object(const PipelineConfig& cfg, int track_id, bool skip_intact, const std::string& trace) {
  const SceneManifest manifest = read_manifest(cfg.manifest);
  const std::vector<ObjectTrack> tracks = build_tracks(manifest);
  const ObjectTrack* chosen = nullptr;
  for (const ObjectTrack& t : tracks) {
    if (t.track_id != track_id) continue;
    if (chosen == nullptr || (!chosen->intact && t.intact)) chosen = &t;
  }
  if (chosen == nullptr) throw InvalidArgument("track " + std::to_string(track_id) + " does not appear in the manifest");
  ObjectOptions options;
  options.voxel_size = cfg.object_voxel;
  options.color_mode = cfg.color_mode;
  options.require_intact = !skip_intact;
  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  const TrainedObject result = train_object(manifest, *chosen, train, options);
  AssetStore store(cfg.store_dir());
  bool hit = false;
  const std::string id = store.put(encode_asset(result.asset), &hit);
  if (!trace.empty()) write_loss_trace(trace, result.report.trace);
  const auto [inside, outside] = density_audit(result.asset);
  json summary = {{"command", "train-object"}, {"asset", id}, {"path", store.path_of(id).string()},
                  {"cache_hit", hit}, {"track", track_id}, {"symmetric", result.asset.symmetric},
                  {"density_inside_box", inside}, {"density_outside_box", outside}};
  summary["training"] = report_json(result.report, train.iterations);
  return summary;
}

std::optional<Vec2> parse_ego(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  if (v.size() != 2) throw InvalidArgument("--ego takes two numbers");
  return Vec2(v[0], v[1]);
}

json cmd_validregion(const PipelineConfig& cfg, const std::string& background, const std::vector<double>& ego_arg) {
  AssetStore store(cfg.store_dir());
  const std::string id = resolve_asset(store, background);
  const VoxelField field = fetch_background(store, id);
  ValidRegionMap map = pillar_stats(field, cfg.pillar);
  classify_valid(map, cfg.pillar.delta1, cfg.pillar.delta2);
  std::vector<CameraModel> cameras;
  if (!cfg.manifest.empty()) cameras = manifest_cameras(read_manifest(cfg.manifest));
  const Vec2 ego = parse_ego(ego_arg).value_or(camera_ego(cameras, map));
  occlusion_filter(map, ego);
  const fs::path json_path = cfg.output / "valid_region.json";
  const fs::path ppm_path = cfg.output / "valid_region.ppm";
  write_text(json_path, valid_region_to_json(map));
  write_valid_region_ppm(map, ppm_path.string());
  return {{"command", "validregion"}, {"background", id}, {"map", json_path.string()}, {"image", ppm_path.string()},
          {"ego", {ego.x(), ego.y()}}, {"ground_height", map.ground_height},
          {"cells", {{"valid", map.count(CellState::Valid)}, {"invalid", map.count(CellState::Invalid)},
                     {"occluded", map.count(CellState::Occluded)}}}};
}

json cmd_compose(const PipelineConfig& cfg, const std::string& background, const std::vector<std::string>& objects,
                 const std::vector<double>& ego_arg) {
  if (objects.empty()) throw InvalidArgument("compose needs at least one object asset");
  AssetStore store(cfg.store_dir());
  const std::string bg_id = resolve_asset(store, background);
  const VoxelField field = fetch_background(store, bg_id);
  std::vector<PoolEntry> pool;
  for (const std::string& ref : objects) {
    const std::string id = resolve_asset(store, ref);
    pool.push_back({id, fetch_object(store, id).canonical_box.size});
  }

  std::vector<CameraModel> cameras;
  std::vector<AnnotatedBox> originals;
  if (!cfg.manifest.empty()) {
    const SceneManifest manifest = read_manifest(cfg.manifest);
    cameras = manifest_cameras(manifest);
    // Static tracks stay in the background, so their first observation is an existing box.
    const std::set<int> moving = moving_track_ids(manifest);
    std::set<int> seen;
    for (const FrameRecord& f : manifest.frames) {
      for (const BoxAnnotation& b : f.boxes) {
        if (b.track_id < 0 || moving.count(b.track_id) || !seen.insert(b.track_id).second) continue;
        originals.push_back({b.box, BoxSource::Original, {}, b.track_id});
      }
    }
  }

  ValidRegionMap map = pillar_stats(field, cfg.pillar);
  classify_valid(map, cfg.pillar.delta1, cfg.pillar.delta2);
  occlusion_filter(map, parse_ego(ego_arg).value_or(camera_ego(cameras, map)));

  BatchConfig batch;
  batch.count = cfg.count;
  batch.uniform_base = cfg.uniform_base;
  batch.jitter = cfg.jitter;
  batch.jitter.seed = cfg.seed;
  BatchInput input;
  input.background_id = bg_id;
  input.background_bounds = field.bounds();
  input.map = &map;
  input.pool = pool;
  input.originals = originals;
  input.cameras = cameras;
  const std::vector<SceneGraph> graphs = generate_batch(input, batch);
  if (graphs.empty() && batch.count > 0) throw NoValidRegion("the background has no valid placement cell");

  json files = json::array();
  std::size_t placed = 0;
  for (const SceneGraph& g : graphs) {
    char name[64];
    std::snprintf(name, sizeof(name), "graph_%04d.json", g.index);
    const fs::path path = cfg.output / "scene_graphs" / name;
    write_text(path, scene_graph_to_json(g));
    files.push_back(path.string());
    placed += g.objects.size();
  }
  return {{"command", "compose"}, {"background", bg_id}, {"graphs", files}, {"placements", placed},
          {"valid_cells", map.count(CellState::Valid)}};
}

json box_annotation(const AnnotatedBox& b) {
  return {{"center", {b.box.center.x(), b.box.center.y(), b.box.center.z()}},
          {"size", {b.box.size.x(), b.box.size.y(), b.box.size.z()}},
          {"yaw", b.box.yaw},
          {"source", b.source == BoxSource::Placed ? "placed" : "original"},
          {"asset", b.asset_id},
          {"track_id", b.track_id}};
}

json cmd_render(const PipelineConfig& cfg, const std::string& graph_path, int camera_index) {
  SceneGraph graph;
  try {
    graph = scene_graph_from_json(read_text(graph_path));
  } catch (const IoError& e) {
    throw FormatError(e.what());
  }
  if (graph.cameras.empty()) throw InvalidArgument("scene graph has no cameras");
  const std::vector<std::string> problems = check_scene_graph(graph);
  if (!problems.empty()) throw FormatError("scene graph fails its invariants: " + problems.front());

  const AssetStore store(cfg.store_dir());
  const VoxelField background = fetch_background(store, graph.background_id);
  std::vector<ObjectAsset> objects;
  objects.reserve(graph.objects.size());
  for (const PlacedObject& o : graph.objects) objects.push_back(fetch_object(store, o.asset_id));
  std::vector<FieldInstance> fields{{&background, std::nullopt}};
  for (std::size_t i = 0; i < objects.size(); ++i) fields.push_back({&objects[i].field, graph.objects[i].placement});

  SampleSpec spec;
  spec.step_ratio = cfg.render.step_ratio;
  spec.max_samples = cfg.render.max_samples;
  CompositeOptions composite;
  composite.background = cfg.render.background.value_or(Rgb::Zero());

  const std::string stem = fs::path(graph_path).stem().string();
  json outputs = json::array();
  const int first = camera_index >= 0 ? camera_index : 0;
  const int last = camera_index >= 0 ? camera_index + 1 : static_cast<int>(graph.cameras.size());
  if (first >= static_cast<int>(graph.cameras.size())) throw InvalidArgument("camera index out of range");
  for (int c = first; c < last; ++c) {
    const CameraModel camera = resized(graph.cameras[c], cfg.render.width, cfg.render.height);
    const RenderedImage image = render_composed_image(fields, camera, spec, composite);
    const std::string base = stem + "_cam" + std::to_string(c);
    const fs::path ppm = cfg.output / (base + ".ppm");
    const fs::path pgm = cfg.output / (base + "_depth.pgm");
    const fs::path ann = cfg.output / (base + ".json");
    fs::create_directories(cfg.output);
    write_ppm(ppm, to_image8(image.color, image.width, image.height));
    write_pgm16(pgm, to_depth16(image.depth, image.depth_valid, image.width, image.height));
    json annotation;
    annotation["image"] = ppm.filename().string();
    annotation["depth"] = pgm.filename().string();
    annotation["scene_graph"] = fs::path(graph_path).filename().string();
    annotation["background"] = graph.background_id;
    annotation["seed"] = graph.seed;
    annotation["jitter"] = {{"t_x", graph.jitter.t_x}, {"t_y", graph.jitter.t_y}, {"t_theta", graph.jitter.t_theta}};
    const auto& pose = camera.world_from_camera;
    json m = json::array();
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) m.push_back(pose.rotation(r, k));
      m.push_back(pose.translation[r]);
    }
    for (double v : {0.0, 0.0, 0.0, 1.0}) m.push_back(v);
    annotation["camera"] = {{"fx", camera.fx}, {"fy", camera.fy}, {"cx", camera.cx}, {"cy", camera.cy},
                            {"width", camera.width}, {"height", camera.height}, {"pose", m}};
    json boxes = json::array();
    for (const AnnotatedBox& b : graph.boxes) boxes.push_back(box_annotation(b));
    annotation["boxes"] = boxes;
    write_text(ann, annotation.dump(1));
    outputs.push_back({{"image", ppm.string()}, {"depth", pgm.string()}, {"annotation", ann.string()}});
  }
  return {{"command", "render"}, {"outputs", outputs}};
}

void apply(PipelineConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.output) c.output = *o.output;
  if (o.store) c.store = *o.store;
  if (o.manifest) c.manifest = *o.manifest;
  if (o.iterations) c.train.iterations = *o.iterations;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.lr_grid) c.train.lr_grid = *o.lr_grid;
  if (o.voxel) c.background_voxel = c.object_voxel = *o.voxel;
  if (o.w_depth) c.train.weights.depth = *o.w_depth;
  if (o.w_gc) c.train.weights.gc = *o.w_gc;
  if (o.delta1) c.pillar.delta1 = *o.delta1;
  if (o.delta2) c.pillar.delta2 = *o.delta2;
  if (o.cell) c.pillar.cell_size = *o.cell;
  if (o.t_x) c.jitter.t_x = *o.t_x;
  if (o.t_y) c.jitter.t_y = *o.t_y;
  if (o.t_theta_deg) c.jitter.t_theta = *o.t_theta_deg * kPi / 180.0;
  if (o.count) c.count = *o.count;
  if (o.width) c.render.width = *o.width;
  if (o.height) c.render.height = *o.height;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Voxel-field driving-scene reconstruction and 3D augmentation"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "JSON config file; flags override its values");
  app.add_option("--seed", o.seed, "global seed");
  app.add_option("--threads", o.threads, "worker threads (results do not depend on it)");
  app.add_option("-o,--output", o.output, "output directory");
  app.add_option("--store", o.store, "asset store directory (default <output>/assets)");

  auto add_train_flags = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "scene manifest JSON");
    sub->add_option("--iterations", o.iterations);
    sub->add_option("--batch-size", o.batch_size);
    sub->add_option("--lr-grid", o.lr_grid);
    sub->add_option("--voxel", o.voxel, "voxel size in meters");
    sub->add_option("--depth-weight", o.w_depth);
    sub->add_option("--gc-weight", o.w_gc);
  };
  auto add_pillar_flags = [&](CLI::App* sub) {
    sub->add_option("--delta1", o.delta1, "pillar max-density threshold");
    sub->add_option("--delta2", o.delta2, "pillar mean-density threshold");
    sub->add_option("--cell", o.cell, "pillar cell size in meters");
  };

  SynthArgs synth;
  CLI::App* c_synth = app.add_subcommand("synth", "render a synthetic dataset from an analytic scene");
  c_synth->add_option("--preset", synth.preset, "street, street_moving, wall, u_wall, car, car_distinct, car_isolated, sphere");
  c_synth->add_option("--scene", synth.scene_file, "analytic scene spec (JSON)");
  c_synth->add_option("--rig", synth.rig, "auto, street or orbit");
  c_synth->add_option("--views", synth.views);
  c_synth->add_option("--width", synth.width);
  c_synth->add_option("--height", synth.height);
  c_synth->add_option("--fov", synth.fov_deg, "horizontal field of view, degrees");
  c_synth->add_option("--radius", synth.radius, "orbit radius");
  c_synth->add_option("--cam-height", synth.cam_height, "orbit camera height");
  c_synth->add_option("--arc-start", synth.arc_start_deg, "orbit start angle, degrees");
  c_synth->add_option("--arc-end", synth.arc_end_deg, "orbit end angle, degrees");
  c_synth->add_option("--phase", synth.phase, "street rig angular phase in [0, 1)");
  c_synth->add_option("--mask-dilation", synth.mask_dilation, "max per-frame mask dilation, pixels");
  c_synth->add_option("--step", synth.step, "oracle quadrature step, meters");
  c_synth->add_flag("--self-check", synth.self_check, "report PSNR of a baked render against the oracle");

  std::string trace;
  CLI::App* c_bg = app.add_subcommand("train-background", "train a background field");
  add_train_flags(c_bg);
  c_bg->add_option("--trace", trace, "write the loss trace as CSV");

  int track = -1;
  bool skip_intact = false;
  std::optional<bool> symmetric;
  CLI::App* c_obj = app.add_subcommand("train-object", "train an object field from one track");
  add_train_flags(c_obj);
  c_obj->add_option("--track", track, "track id")->required();
  c_obj->add_option("--symmetric", symmetric, "mirror rays across the symmetry plane (true/false)");
  c_obj->add_flag("--skip-intact-check", skip_intact);
  c_obj->add_option("--trace", trace, "write the loss trace as CSV");

  std::string background;
  std::vector<double> ego;
  CLI::App* c_vr = app.add_subcommand("validregion", "compute the valid placement region of a background");
  c_vr->add_option("--background", background, "asset id or file")->required();
  c_vr->add_option("--manifest", o.manifest, "manifest whose cameras define the ego position");
  c_vr->add_option("--ego", ego, "ego x y (default: mean camera position)")->expected(2);
  add_pillar_flags(c_vr);

  std::vector<std::string> objects;
  bool uniform_base = false;
  CLI::App* c_comp = app.add_subcommand("compose", "generate augmented scene graphs");
  c_comp->add_option("--background", background, "asset id or file")->required();
  c_comp->add_option("--objects", objects, "object asset ids or files")->required();
  c_comp->add_option("--manifest", o.manifest, "background manifest: cameras and existing boxes");
  c_comp->add_option("--count", o.count, "scene graphs to generate");
  c_comp->add_option("--tx", o.t_x, "max translation along the heading, meters");
  c_comp->add_option("--ty", o.t_y, "max translation across the heading, meters");
  c_comp->add_option("--ttheta", o.t_theta_deg, "max yaw jitter, degrees");
  c_comp->add_flag("--uniform-base", uniform_base, "draw base poses uniformly over valid cells");
  c_comp->add_option("--ego", ego, "ego x y")->expected(2);
  add_pillar_flags(c_comp);

  std::string graph_path;
  int camera_index = -1;
  CLI::App* c_render = app.add_subcommand("render", "render a scene graph");
  c_render->add_option("--scene-graph", graph_path)->required();
  c_render->add_option("--camera", camera_index, "camera index (default: all)");
  c_render->add_option("--width", o.width);
  c_render->add_option("--height", o.height);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kParseFailure;
  }

  try {
    PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_config(o.config);
    apply(cfg, o);
    if (symmetric) cfg.train.symmetric = *symmetric;
    if (uniform_base) cfg.uniform_base = true;
    if (cfg.threads > 0) set_worker_count(cfg.threads);

    json summary;
    if (c_synth->parsed()) summary = cmd_synth(cfg, synth);
    else if (c_bg->parsed()) summary = cmd_train_background(cfg, trace);
    else if (c_obj->parsed()) summary = cmd_train_object(cfg, track, skip_intact, trace);
    else if (c_vr->parsed()) summary = cmd_validregion(cfg, background, ego);
    else if (c_comp->parsed()) summary = cmd_compose(cfg, background, objects, ego);
    else summary = cmd_render(cfg, graph_path, camera_index);
    out << summary.dump(1) << '\n';
    return kOk;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kParseFailure;
  } catch (const ChecksumError& e) {
    err << "error: " << e.what() << '\n';
    return kParseFailure;
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << '\n';
    return kDiverged;
  } catch (const NotIntact& e) {
    err << "error: " << e.what() << '\n';
    return kNotIntact;
  } catch (const NoValidRegion& e) {
    err << "error: " << e.what() << '\n';
    return kNoValidRegion;
  } catch (const MissingAsset& e) {
    err << "error: " << e.what() << '\n';
    return kMissingAsset;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kParseFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"voxaug"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace voxaug::cli
