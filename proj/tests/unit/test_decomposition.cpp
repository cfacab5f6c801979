#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "voxaug/decomposition.hpp"
#include "voxaug/reconstruction.hpp"
#include "voxaug/synth.hpp"

using namespace voxaug;

namespace {

CameraModel test_camera(int w = 64, int h = 48) {
  return CameraModel::from_fov(w, h, 1.4, look_at(Vec3(-10, 0, 2), Vec3(0, 0, 0.8)));
}

BinaryMask rect_mask(int w, int h, int u0, int v0, int u1, int v1) {
  BinaryMask m(w, h);
  for (int v = v0; v < v1; ++v)
    for (int u = u0; u < u1; ++u) m.set(u, v);
  return m;
}

FrameRecord frame_with(const CameraModel& cam, std::vector<BoxAnnotation> boxes, std::vector<InstanceMask> masks) {
  FrameRecord f;
  f.camera = cam;
  f.boxes = std::move(boxes);
  f.masks = std::move(masks);
  Image8 img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(std::size_t(cam.width) * cam.height * 3, 128);
  f.image = img;
  return f;
}

// Exhaustive search over injective assignments maximizing the summed IoU of kept pairs.
double best_assignment_score(const std::vector<std::vector<double>>& iou, double floor) {
  const std::size_t rows = iou.size(), cols = iou.empty() ? 0 : iou[0].size();
  std::vector<int> perm(std::max(rows, cols));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const int c = perm[r];
      if (c < static_cast<int>(cols) && iou[r][c] >= floor) s += iou[r][c];
    }
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("match_mask_to_box: exact hull, disjoint and greedy optimum") {
  const CameraModel cam = test_camera();
  const Box3D box{Vec3(0, 0, 0.8), Vec3(4, 2, 1.6), 0.3};
  const BinaryMask hull = box_silhouette(box, cam);
  REQUIRE_FALSE(hull.empty());
  const InstanceMask m{1, hull};
  const BoxAnnotation b{7, box};
  auto matches = match_mask_to_box(std::span(&m, 1), std::span(&b, 1), cam);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].iou == doctest::Approx(1.0));

  const InstanceMask far{2, rect_mask(cam.width, cam.height, 0, 0, 3, 3)};
  CHECK(match_mask_to_box(std::span(&far, 1), std::span(&b, 1), cam).empty());

  const std::vector<std::vector<double>> table{{0.9, 0.2}, {0.3, 0.8}};
  matches = greedy_assignment(table, 0.3);
  REQUIRE(matches.size() == 2);
  CHECK(matches[0].mask == 0);
  CHECK(matches[0].box == 0);
  CHECK(matches[1].mask == 1);
  CHECK(matches[1].box == 1);
  double score = 0.0;
  for (const auto& mm : matches) score += mm.iou;
  CHECK(score == doctest::Approx(best_assignment_score(table, 0.3)));
}

TEST_CASE("greedy assignment is injective and respects the floor") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> t(4, std::vector<double>(3));
    for (auto& row : t)
      for (double& x : row) x = u(rng);
    const auto m = greedy_assignment(t, 0.3);
    std::set<int> rows, cols;
    for (const auto& x : m) {
      CHECK(x.iou >= 0.3);
      CHECK(rows.insert(x.mask).second);
      CHECK(cols.insert(x.box).second);
    }
  }
}

TEST_CASE("build_tracks: lengths, gaps and crossing objects") {
  const CameraModel cam = test_camera();
  const Box3D box{Vec3(0, 0, 0.8), Vec3(4, 2, 1.6), 0.0};
  const BinaryMask sil = box_silhouette(box, cam);
  SceneManifest m;
  for (int f = 0; f < 5; ++f) m.frames.push_back(frame_with(cam, {{3, box}}, {{1, sil}}));
  auto tracks = build_tracks(m);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].observations.size() == 5);
  CHECK(tracks[0].track_id == 3);

  m.frames[2].boxes.clear();
  m.frames[2].masks.clear();
  tracks = build_tracks(m);
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].observations.size() == 2);
  CHECK(tracks[1].observations.size() == 2);
  CHECK(tracks[0].track_id == tracks[1].track_id);
  CHECK(tracks[0].segment != tracks[1].segment);

  // Two objects that swap sides keep their ids.
  SceneManifest x;
  for (int f = 0; f < 4; ++f) {
    const double s = -3.0 + 2.0 * f;
    const Box3D a{Vec3(0, s, 0.8), Vec3(2, 1.5, 1.6), 0.0}, b{Vec3(2, -s, 0.8), Vec3(2, 1.5, 1.6), 0.0};
    x.frames.push_back(frame_with(cam, {{10, a}, {20, b}}, {{1, box_silhouette(a, cam)}, {2, box_silhouette(b, cam)}}));
  }
  tracks = build_tracks(x);
  std::set<std::pair<std::size_t, int>> seen;
  for (const auto& t : tracks) {
    CHECK((t.track_id == 10 || t.track_id == 20));
    for (const auto& o : t.observations) {
      CHECK(x.frames[o.frame].boxes[o.box].track_id == t.track_id);
      CHECK(seen.insert({o.frame, o.mask}).second);  // tracks partition observations
    }
  }
}

TEST_CASE("build_tracks links untracked boxes by mask overlap") {
  const CameraModel cam = test_camera();
  SceneManifest m;
  for (int f = 0; f < 3; ++f) {
    const Box3D box{Vec3(0, 0.1 * f, 0.8), Vec3(4, 2, 1.6), 0.0};
    m.frames.push_back(frame_with(cam, {{-1, box}}, {{1, box_silhouette(box, cam)}}));
  }
  const auto tracks = build_tracks(m);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].observations.size() == 3);
  CHECK(tracks[0].track_id >= kUntrackedIdBase);
}

TEST_CASE("select_intact") {
  const CameraModel cam = test_camera();
  const Box3D box{Vec3(0, 0, 0.8), Vec3(4, 2, 1.6), 0.0};
  const BinaryMask sil = box_silhouette(box, cam);
  SceneManifest m;
  m.frames.push_back(frame_with(cam, {{1, box}}, {{1, sil}}));
  auto tracks = build_tracks(m);
  REQUIRE(tracks.size() == 1);
  CHECK(select_intact(tracks[0], m));

  // Touching the left edge.
  BinaryMask edge = sil;
  for (int v = 0; v < cam.height; ++v) {
    bool row = false;
    for (int u = 0; u < cam.width; ++u) row = row || sil.at(u, v);
    if (row)
      for (int u = 0; u < 3; ++u) edge.set(u, v);
  }
  REQUIRE(edge.touches_border());
  SceneManifest e = m;
  e.frames[0].masks[0].mask = edge;
  CHECK_FALSE(select_intact(tracks[0], e));

  // Overlapped by another instance.
  SceneManifest o = m;
  o.frames[0].masks.push_back({2, rect_mask(cam.width, cam.height, 30, 20, 34, 24)});
  REQUIRE(intersection_count(o.frames[0].masks[0].mask, o.frames[0].masks[1].mask) > 0);
  CHECK_FALSE(select_intact(build_tracks(o)[0], o));

  // A sliver that fills little of its hull.
  SceneManifest s = m;
  int u_lo = cam.width, u_hi = 0;
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u)
      if (sil.at(u, v)) u_lo = std::min(u_lo, u), u_hi = std::max(u_hi, u);
  const int cut = u_lo + (u_hi - u_lo) * 65 / 100;
  s.frames[0].masks[0].mask = mask_difference(sil, rect_mask(cam.width, cam.height, 0, 0, cut, cam.height));
  const auto st = build_tracks(s);
  REQUIRE(st.size() == 1);
  CHECK_FALSE(select_intact(st[0], s));
}

TEST_CASE("background_rays: exclusion of moving objects") {
  AnalyticScene scene = car_scene(false, true);
  scene.objects[0].velocity = Vec3(0.6, 0, 0);
  const auto cams = orbit_cameras(Vec3(0, 0, 0.8), 9.0, 2.0, 3, 0.0, 0.6, 40, 30, 1.3);
  DatasetOptions opt;
  opt.step = 0.05;
  const SceneManifest m = generate_dataset(scene, cams, opt);
  const std::set<int> moving = moving_track_ids(m);
  CHECK(moving == std::set<int>{1});

  std::size_t excluded_total = 0;
  for (std::size_t f = 0; f < m.frames.size(); ++f) {
    const BinaryMask ex = background_exclusion(m, f, moving);
    REQUIRE_FALSE(m.frames[f].masks.empty());
    const BinaryMask expect = dilate(m.frames[f].masks[0].mask, 2);
    CHECK(ex.data == expect.data);
    excluded_total += ex.count();
  }
  const TrainingBatch rays = background_rays(m);
  CHECK(rays.size() + excluded_total == 3u * 40 * 30);

  // No masks at all: every pixel trains.
  SceneManifest bare = m;
  for (auto& f : bare.frames) f.masks.clear();
  CHECK(background_rays(bare).size() == 3u * 40 * 30);

  // A mask that matches no box is not excluded, even when it covers the whole frame.
  SceneManifest covered = m;
  covered.frames[1].masks[0].mask = rect_mask(40, 30, 0, 0, 40, 30);
  CHECK(background_exclusion(covered, 1, moving).empty());
  CHECK(background_rays(covered).size() == rays.size() + background_exclusion(m, 1, moving).count());
}

TEST_CASE("object_rays: local frame, labels and cross-frame correspondence") {
  AnalyticScene scene = car_scene(false, false);
  scene.objects[0].yaw_rate = kPi / 2;
  std::vector<CameraModel> cams(2, CameraModel::from_fov(80, 60, 1.0, look_at(Vec3(-9, 2, 3), Vec3(0, 0, 0.7))));
  DatasetOptions opt;
  opt.step = 0.01;
  const SceneManifest m = generate_dataset(scene, cams, opt);
  const auto tracks = build_tracks(m);
  REQUIRE(tracks.size() == 1);
  const Aabb local = object_field_region(scene.objects[0].box.size, 0.3);
  const TrainingBatch rays = object_rays(tracks[0], m, local);
  REQUIRE(rays.size() > 0);
  std::size_t fg = 0, bg = 0;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    CHECK(rays.rays[i].frame == Frame::ObjectLocal);
    if (rays.mask_label[i] == MaskLabel::Foreground) ++fg;
    if (rays.mask_label[i] == MaskLabel::Background) {
      ++bg;
      CHECK(rays.target_color[i] == Rgb::Zero());
    }
  }
  CHECK(fg == m.frames[0].masks[0].mask.count() + m.frames[1].masks[0].mask.count());
  CHECK(bg > 0);

  // Pixels from both frames that hit the same local surface point share their color.
  struct Hit {
    Vec3 p;
    Rgb c;
  };
  std::vector<Hit> frame_hits[2];
  const std::size_t first = m.frames[0].masks[0].mask.count();
  std::size_t seen_fg = 0;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    if (rays.mask_label[i] != MaskLabel::Foreground || !rays.depth_valid[i]) continue;
    const int f = seen_fg++ < first ? 0 : 1;
    frame_hits[f].push_back({rays.rays[i].at(rays.target_depth[i]), rays.target_color[i]});
  }
  // Local hit points lie on the object's surface whatever the frame.
  AnalyticScene local_scene;
  local_scene.scene_bounds = local;
  local_scene.primitives = scene.objects[0].parts;
  int on_surface = 0, hits = 0;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    if (rays.mask_label[i] != MaskLabel::Foreground || !rays.depth_valid[i]) continue;
    ++hits;
    bool solid = false;
    for (double dt = -0.05; dt <= 0.05 && !solid; dt += 0.01)
      solid = eval_analytic(local_scene, rays.rays[i].at(rays.target_depth[i] + dt)).sigma > 1.0;
    on_surface += solid;
  }
  REQUIRE(hits > 100);
  CHECK(on_surface >= hits * 9 / 10);
  // Hits well inside one part carry that part's color in both frames.
  int interior[2] = {0, 0}, agree[2] = {0, 0};
  for (int f = 0; f < 2; ++f) {
    for (const Hit& h : frame_hits[f]) {
      const Rgb ref = eval_analytic(local_scene, h.p).color;
      bool uniform = true;
      for (int axis = 0; axis < 3 && uniform; ++axis) {
        for (double s : {-0.08, 0.08}) {
          Vec3 q = h.p;
          q[axis] += s;
          const AnalyticSample a = eval_analytic(local_scene, q);
          if (a.sigma > 0.0 && (a.color - ref).cwiseAbs().maxCoeff() > 1e-9) uniform = false;
        }
      }
      if (!uniform || eval_analytic(local_scene, h.p).sigma < 1.0) continue;
      ++interior[f];
      agree[f] += (h.c - ref).cwiseAbs().maxCoeff() < 0.05;
    }
  }
  for (int f = 0; f < 2; ++f) {
    CHECK(interior[f] > 20);
    CHECK(agree[f] >= interior[f] * 9 / 10);
  }

  // A static object with identity pose: local rays are world rays shifted by the center.
  const Box3D at_origin{Vec3(1, 2, 0.8), Vec3(4.2, 1.9, 1.6), 0.0};
  Ray w;
  w.origin = Vec3(-5, 1, 2);
  w.direction = Vec3(1, 0, 0);
  const Ray l = transform_ray(w, box_placement(at_origin), TransformDirection::WorldToLocal);
  CHECK((l.origin - (w.origin - at_origin.center)).norm() < 1e-12);
  CHECK((l.direction - w.direction).norm() < 1e-12);

  // Empty mask observation contributes nothing.
  SceneManifest empty = m;
  for (auto& f : empty.frames) f.masks[0].mask = BinaryMask(80, 60);
  ObjectTrack t = tracks[0];
  CHECK(object_rays(t, empty, local).size() == 0);
}

TEST_CASE("mask utilities") {
  BinaryMask m = rect_mask(20, 10, 5, 3, 9, 6);
  const auto rle = rle_encode(m);
  CHECK(rle_decode(rle, 20, 10).data == m.data);
  CHECK(dilate(m, 0).data == m.data);
  CHECK(dilate(m, 1).count() == 6u * 5);
  CHECK(erode(dilate(m, 2), 2).data == m.data);
  CHECK(mask_iou(m, m) == 1.0);
  CHECK_FALSE(m.touches_border());
  const auto hull = convex_hull({Vec2(0, 0), Vec2(2, 0), Vec2(1, 1), Vec2(2, 2), Vec2(0, 2), Vec2(1, 0)});
  CHECK(hull.size() == 4);
  CHECK(rasterize_convex(hull, 4, 4).count() == 4);
}
