// Serial reference vs OpenMP kernel for each parallel hot path.
// Arg 0 = Exec::Serial, 1 = Exec::Parallel.

#include <benchmark/benchmark.h>

#include "voxaug/composer.hpp"
#include "voxaug/decomposition.hpp"
#include "voxaug/renderer.hpp"
#include "voxaug/synth.hpp"
#include "voxaug/trainer.hpp"

using namespace voxaug;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

const AnalyticScene& street() {
  static const AnalyticScene s = street_scene();
  return s;
}

const VoxelField& baked_street() {
  static const VoxelField f = bake(street(), GridSpec::covering(street().scene_bounds, 0.25));
  return f;
}

void BM_RenderImage(benchmark::State& state) {
  const VoxelField& f = baked_street();
  const CameraModel cam = street_cameras(1, 0.0, 96, 72).front();
  for (auto _ : state) benchmark::DoNotOptimize(render_image(f, cam, SampleSpec{}, CompositeOptions{}, exec_of(state)));
}

void BM_EvaluateBatch(benchmark::State& state) {
  static const SceneManifest manifest = [] {
    DatasetOptions opt;
    opt.step = 0.05;
    return generate_dataset(street(), street_cameras(4, 0.0, 48, 48), opt);
  }();
  VoxelField field = VoxelField::create(GridSpec::covering(street().scene_bounds, 0.25), ColorMode::Direct, 1);
  const TrainingBatch all = background_rays(manifest);
  TrainingBatch batch;
  for (std::size_t i = 0; i < all.size() && i < 4096; ++i) {
    batch.push(all.rays[i], all.target_color[i], all.target_depth[i], all.depth_valid[i], all.mask_label[i]);
  }
  RaySampling sampling;
  sampling.jitter = false;
  FieldGradient grad;
  for (auto _ : state) {
    grad.reset(field);
    benchmark::DoNotOptimize(evaluate_batch(field, batch, LossWeights{}, sampling, &grad, exec_of(state)));
  }
}

void BM_PillarStats(benchmark::State& state) {
  const VoxelField& f = baked_street();
  for (auto _ : state) benchmark::DoNotOptimize(pillar_stats(f, PillarConfig{}, exec_of(state)));
}

void BM_OcclusionFilter(benchmark::State& state) {
  const ValidRegionMap base = pillar_stats(baked_street(), PillarConfig{0.5});
  for (auto _ : state) {
    ValidRegionMap map = base;
    occlusion_filter(map, Vec2::Zero(), exec_of(state));
    benchmark::DoNotOptimize(map.cells.data());
  }
}

}  // namespace

BENCHMARK(BM_RenderImage)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PillarStats)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OcclusionFilter)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
