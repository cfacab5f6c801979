#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "voxaug/geometry.hpp"
#include "voxaug/losses.hpp"
#include "voxaug/parallel.hpp"
#include "voxaug/voxel_field.hpp"

namespace voxaug {

/// Rays with their supervision, stored as parallel arrays.
struct TrainingBatch {
  std::vector<Ray> rays;
  std::vector<Rgb> target_color;
  std::vector<double> target_depth;
  std::vector<std::uint8_t> depth_valid;
  std::vector<MaskLabel> mask_label;

  std::size_t size() const { return rays.size(); }
  bool empty() const { return rays.empty(); }
  void reserve(std::size_t n);
  void push(const Ray& ray, const Rgb& color, double depth, bool has_depth, MaskLabel label = MaskLabel::None);
  void append(const TrainingBatch& other);
  TrainingBatch select(std::span<const std::size_t> indices) const;
  /// Copy with every ray reflected across the object symmetry plane; targets carried over.
  TrainingBatch mirrored() const;
  /// Throws InvalidArgument on length mismatch or targets outside [0, 1].
  void validate() const;
};

struct LossWeights {
  double color = 1.0;
  double depth = 0.1;
  double gc = 0.1;
};

/// How a batch is discretized along each ray.
struct RaySampling {
  double step_ratio = 0.5;  // sample spacing as a fraction of the voxel size
  int max_samples = 1024;
  bool jitter = true;
  bool early_termination = true;
  Rgb background = Rgb::Zero();
  std::uint64_t seed = 0;  // jitter stream; ray i draws from mix_seed(seed, i)
};

struct LossBreakdown {
  double total = 0.0;
  double color = 0.0;
  double depth = 0.0;
  double gc = 0.0;
  std::size_t rays = 0;
  std::size_t color_rays = 0;  // rays labeled Background feed only the gc term
  std::size_t depth_rays = 0;
  std::size_t gc_rays = 0;
};

/// dL/dparameter in double precision, laid out like the field's arrays.
struct FieldGradient {
  std::vector<double> density;
  std::vector<double> color;
  std::vector<double> mlp;

  template <class Scalar>
  void reset(const BasicVoxelField<Scalar>& field) {
    density.assign(field.density_grid.size(), 0.0);
    color.assign(field.color_grid.size(), 0.0);
    mlp.assign(field.mlp.params.size(), 0.0);
  }
  bool all_finite() const;
};

/// Renders the batch, evaluates the weighted losses and, when `gradient` is non-null,
/// accumulates their analytic gradient. Depth counts only rays whose target is valid and
/// whose rendered opacity reaches kDepthOpacityEpsilon; gc counts labeled rays, with the
/// object probability taken over the field's own bounds.
///
/// Exec::Parallel renders fixed chunks concurrently and scatters their gradient records in
/// chunk order, so the result does not depend on the worker count. Exec::Serial is the
/// reference: bitwise equal for direct color, equal up to summation order for the MLP.
template <class Scalar>
LossBreakdown evaluate_batch(const BasicVoxelField<Scalar>& field, const TrainingBatch& batch,
                             const LossWeights& weights, const RaySampling& sampling,
                             FieldGradient* gradient, Exec exec = Exec::Parallel);

struct TrainConfig {
  int iterations = 40000;
  int batch_size = 4096;
  double lr_grid = 0.1;
  double lr_mlp = 1e-3;
  LossWeights weights;
  bool symmetric = false;
  std::uint64_t seed = 0;
  double step_ratio = 0.5;
  int max_samples = 1024;
  bool jitter = true;
  bool early_termination = true;
  Rgb background = Rgb::Zero();
  double psnr_warning = 28.0;  // final training PSNR below this emits a warning

  void validate() const;
};

/// Adaptive-moment optimizer over every field parameter (beta 0.9 / 0.99).
template <class Scalar>
class Adam {
 public:
  Adam(const BasicVoxelField<Scalar>& field, double lr_grid, double lr_mlp);
  void step(BasicVoxelField<Scalar>& field, const FieldGradient& gradient);
  int steps() const { return steps_; }

 private:
  double lr_grid_;
  double lr_mlp_;
  int steps_ = 0;
  std::vector<double> m_density_, v_density_, m_color_, v_color_, m_mlp_, v_mlp_;
};

/// One optimizer update on `batch`. Throws TrainingDiverged on a non-finite loss or gradient.
template <class Scalar>
LossBreakdown gradient_step(BasicVoxelField<Scalar>& field, Adam<Scalar>& optimizer, const TrainingBatch& batch,
                            const TrainConfig& config, int iteration, Exec exec = Exec::Parallel);

struct TraceRow {
  int iteration = 0;
  LossBreakdown loss;
};

struct TrainReport {
  std::vector<TraceRow> trace;
  double final_psnr = 0.0;  // training PSNR of the last batch
  bool psnr_warning = false;
  std::size_t ray_pool = 0;
};

/// Optimizes `field` in place on random batches drawn from `pool`. With config.symmetric,
/// every batch is doubled with its mirror image (object-local rays only).
TrainReport fit_field(VoxelField& field, const TrainingBatch& pool, const TrainConfig& config,
                      Exec exec = Exec::Parallel);

/// CSV with header iteration,total,color,depth,gc.
void write_loss_trace(const std::filesystem::path& path, std::span<const TraceRow> trace);

}  // namespace voxaug
