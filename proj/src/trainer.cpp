#include "voxaug/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include "voxaug/error.hpp"
#include "voxaug/renderer.hpp"

namespace voxaug {

void TrainingBatch::reserve(std::size_t n) {
  rays.reserve(n);
  target_color.reserve(n);
  target_depth.reserve(n);
  depth_valid.reserve(n);
  mask_label.reserve(n);
}

void TrainingBatch::push(const Ray& ray, const Rgb& color, double depth, bool has_depth, MaskLabel label) {
  rays.push_back(ray);
  target_color.push_back(color);
  target_depth.push_back(depth);
  depth_valid.push_back(has_depth ? 1 : 0);
  mask_label.push_back(label);
}

void TrainingBatch::append(const TrainingBatch& other) {
  rays.insert(rays.end(), other.rays.begin(), other.rays.end());
  target_color.insert(target_color.end(), other.target_color.begin(), other.target_color.end());
  target_depth.insert(target_depth.end(), other.target_depth.begin(), other.target_depth.end());
  depth_valid.insert(depth_valid.end(), other.depth_valid.begin(), other.depth_valid.end());
  mask_label.insert(mask_label.end(), other.mask_label.begin(), other.mask_label.end());
}

TrainingBatch TrainingBatch::select(std::span<const std::size_t> indices) const {
  TrainingBatch out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    out.push(rays.at(i), target_color[i], target_depth[i], depth_valid[i] != 0, mask_label[i]);
  }
  return out;
}

TrainingBatch TrainingBatch::mirrored() const {
  TrainingBatch out = *this;
  for (Ray& r : out.rays) r = mirror_ray(r);
  return out;
}

void TrainingBatch::validate() const {
  const std::size_t n = rays.size();
  if (target_color.size() != n || target_depth.size() != n || depth_valid.size() != n || mask_label.size() != n) {
    throw InvalidArgument("training batch arrays differ in length");
  }
  for (const Rgb& c : target_color) {
    if (!((c.array() >= 0.0).all() && (c.array() <= 1.0).all())) {
      throw InvalidArgument("target colors must lie in [0, 1]");
    }
  }
}

bool FieldGradient::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(density) && finite(color) && finite(mlp);
}

namespace {

constexpr std::size_t kChunkRays = 128;

// Gradient of one sample with respect to its interpolated raw density, kept apart from the
// depth part, which is normalized by the valid-depth count once the whole batch is known.
struct SampleRecord {
  Vec3 x;
  double g_raw = 0.0;
  double g_raw_depth = 0.0;
};

struct GradientSink {
  std::vector<SampleRecord> records;
  std::vector<double> color;  // `channels` values per record
  std::vector<double> mlp;
};

struct RayTerms {
  double color = 0.0;
  double depth = 0.0;
  double gc = 0.0;
  bool color_counted = false;
  bool depth_counted = false;
  bool gc_counted = false;
};

struct Normalizers {
  double color = 0.0;  // w_color / N_color
  double gc = 0.0;     // w_gc / N_gc
  double depth_weight = 0.0;
};

struct ForwardSample {
  Vec3 x;
  double t, delta, dsigma, weight, t_after;
  Rgb c;
};

struct Scratch {
  std::vector<ForwardSample> samples;
  std::vector<MlpTape> tapes;
  std::vector<double> features;
  std::vector<double> input;
  std::vector<double> input_grad;
};

template <class Scalar>
RayTerms trace_ray(const BasicVoxelField<Scalar>& field, const TrainingBatch& batch, std::size_t i,
                   const RaySampling& sampling, const Normalizers& norm, GradientSink* sink, Scratch& scratch) {
  const Ray& ray = batch.rays[i];
  const bool mlp = field.color_mode == ColorMode::FeatureMLP;
  const int ch = field.channels;
  scratch.samples.clear();

  double transmittance = 1.0;
  Rgb color_sum = Rgb::Zero();
  double depth_sum = 0.0;
  if (const auto hit = ray_aabb_intersect(ray, field.bounds())) {
    Ray clipped = ray;
    clipped.t_near = hit->first;
    clipped.t_far = hit->second;
    const SampleSpec spec{0, sampling.step_ratio, sampling.max_samples};
    const int n = spec.samples_for(hit->second - hit->first, field.voxel_size());
    SplitMix64 rng(mix_seed(sampling.seed, i));
    scratch.features.resize(ch);
    if (mlp) {
      scratch.input.resize(kMlpInputDim);
      if (scratch.tapes.size() < static_cast<std::size_t>(n)) scratch.tapes.resize(n);
    }
    for (const SamplePoint& p : sample_along_ray(clipped, n, sampling.jitter, &rng)) {
      if (sampling.early_termination && transmittance < kTerminationThreshold) break;
      const Vec3 x = ray.at(p.t);
      const TrilinearStencil s = trilinear_stencil(field.grid, x);
      if (!s.inside) continue;
      const double raw = interpolate_density_raw(field, s) + field.density_bias;
      const double sigma = softplus(raw);
      interpolate_color(field, s, scratch.features);
      Rgb c;
      if (mlp) {
        mlp_input(field, scratch.features, x, ray.direction, scratch.input);
        const Rgb logits = mlp_forward(field.mlp, scratch.input, &scratch.tapes[scratch.samples.size()]);
        c = Rgb(sigmoid(logits.x()), sigmoid(logits.y()), sigmoid(logits.z()));
      } else {
        c = Rgb(sigmoid(scratch.features[0]), sigmoid(scratch.features[1]), sigmoid(scratch.features[2]));
      }
      const double alpha = -std::expm1(-sigma * p.delta);
      const double weight = transmittance * alpha;
      color_sum += weight * c;
      depth_sum += weight * p.t;
      transmittance *= 1.0 - alpha;
      scratch.samples.push_back({x, p.t, p.delta, sigmoid(raw), weight, transmittance, c});
    }
  }

  const double opacity = 1.0 - transmittance;
  const Rgb rendered = color_sum + transmittance * sampling.background;
  const bool depth_ok = opacity >= kDepthOpacityEpsilon;
  const double depth = depth_sum / std::max(opacity, kDepthOpacityEpsilon);

  RayTerms terms;
  // Background-band rays only say "no object here"; a black color target would be met just as
  // well by dark density, so they are left to the gc term.
  terms.color_counted = batch.mask_label[i] != MaskLabel::Background;
  const Rgb color_err = terms.color_counted ? Rgb(rendered - batch.target_color[i]) : Rgb::Zero();
  terms.color = color_err.squaredNorm();
  double g_depth = 0.0;
  if (batch.depth_valid[i] && depth_ok) {
    terms.depth_counted = true;
    const double diff = depth - batch.target_depth[i];
    terms.depth = std::abs(diff);
    g_depth = norm.depth_weight * static_cast<double>((diff > 0.0) - (diff < 0.0));
  }
  double g_prob = 0.0;
  if (batch.mask_label[i] != MaskLabel::None) {
    terms.gc_counted = true;
    const BceTerm bce = binary_cross_entropy(opacity, batch.mask_label[i]);
    terms.gc = bce.loss;
    g_prob = norm.gc * bce.dloss_dp;
  }
  if (sink == nullptr || scratch.samples.empty()) return terms;

  const Rgb g_color = norm.color * 2.0 * color_err;
  const double background_term = transmittance * g_color.dot(sampling.background);
  Rgb suffix_color = Rgb::Zero();
  double suffix_depth = 0.0;
  for (std::size_t k = scratch.samples.size(); k-- > 0;) {
    const ForwardSample& s = scratch.samples[k];
    const double dcolor_ds = s.t_after * g_color.dot(s.c) - g_color.dot(suffix_color) - background_term;
    double g_s_depth = 0.0;
    if (g_depth != 0.0) {
      const double dn_ds = s.t_after * s.t - suffix_depth;
      g_s_depth = g_depth * (dn_ds * opacity - depth_sum * transmittance) / (opacity * opacity);
    }
    const double g_s = dcolor_ds + g_prob * transmittance;
    const double chain = s.delta * s.dsigma;
    sink->records.push_back({s.x, g_s * chain, g_s_depth * chain});

    const Rgb g_c = s.weight * g_color;
    const Rgb g_logits = g_c.cwiseProduct(s.c.cwiseProduct(Rgb::Ones() - s.c));
    if (mlp) {
      scratch.input_grad.resize(kMlpInputDim);
      mlp_backward(field.mlp, scratch.tapes[k], g_logits, sink->mlp, scratch.input_grad);
      sink->color.insert(sink->color.end(), scratch.input_grad.begin(), scratch.input_grad.begin() + ch);
    } else {
      sink->color.insert(sink->color.end(), {g_logits.x(), g_logits.y(), g_logits.z()});
    }
    suffix_color += s.weight * s.c;
    suffix_depth += s.weight * s.t;
  }
  return terms;
}

void scatter(const GridSpec& grid, int channels, const GradientSink& sink, double depth_scale,
             FieldGradient& gradient) {
  for (std::size_t r = 0; r < sink.records.size(); ++r) {
    const SampleRecord& rec = sink.records[r];
    const TrilinearStencil s = trilinear_stencil(grid, rec.x);
    const double g = rec.g_raw + depth_scale * rec.g_raw_depth;
    const double* gc = sink.color.data() + r * channels;
    for (int c = 0; c < 8; ++c) {
      const double w = s.weight[c];
      gradient.density[s.index[c]] += w * g;
      double* dst = gradient.color.data() + std::size_t(s.index[c]) * channels;
      for (int k = 0; k < channels; ++k) dst[k] += w * gc[k];
    }
  }
}

}  // namespace

template <class Scalar>
LossBreakdown evaluate_batch(const BasicVoxelField<Scalar>& field, const TrainingBatch& batch,
                             const LossWeights& weights, const RaySampling& sampling,
                             FieldGradient* gradient, Exec exec) {
  batch.validate();
  if (batch.empty()) throw InvalidArgument("training batch is empty");
  const std::size_t n = batch.size();
  const std::size_t gc_rays = static_cast<std::size_t>(
      std::count_if(batch.mask_label.begin(), batch.mask_label.end(), [](MaskLabel l) { return l != MaskLabel::None; }));
  const std::size_t color_rays = static_cast<std::size_t>(
      std::count_if(batch.mask_label.begin(), batch.mask_label.end(), [](MaskLabel l) { return l != MaskLabel::Background; }));
  Normalizers norm;
  norm.color = color_rays > 0 ? weights.color / static_cast<double>(color_rays) : 0.0;
  norm.gc = gc_rays > 0 ? weights.gc / static_cast<double>(gc_rays) : 0.0;
  norm.depth_weight = weights.depth;

  if (gradient) gradient->reset(field);
  std::vector<RayTerms> terms(n);
  const bool mlp = field.color_mode == ColorMode::FeatureMLP;
  std::vector<GradientSink> sinks;

  if (exec == Exec::Serial) {
    sinks.resize(1);
    Scratch scratch;
    GradientSink* sink = gradient ? &sinks[0] : nullptr;
    if (sink && mlp) sink->mlp = std::move(gradient->mlp);
    for (std::size_t i = 0; i < n; ++i) terms[i] = trace_ray(field, batch, i, sampling, norm, sink, scratch);
    if (sink && mlp) gradient->mlp = std::move(sink->mlp);
  } else {
    const std::size_t chunks = (n + kChunkRays - 1) / kChunkRays;
    sinks.resize(chunks);
#pragma omp parallel
    {
      Scratch scratch;
#pragma omp for schedule(dynamic, 1)
      for (std::size_t c = 0; c < chunks; ++c) {
        GradientSink* sink = gradient ? &sinks[c] : nullptr;
        if (sink && mlp) sink->mlp.assign(field.mlp.params.size(), 0.0);
        const std::size_t end = std::min(n, (c + 1) * kChunkRays);
        for (std::size_t i = c * kChunkRays; i < end; ++i) {
          terms[i] = trace_ray(field, batch, i, sampling, norm, sink, scratch);
        }
      }
    }
    if (gradient && mlp) {
      for (const GradientSink& sink : sinks) {
        for (std::size_t p = 0; p < sink.mlp.size(); ++p) gradient->mlp[p] += sink.mlp[p];
      }
    }
  }

  LossBreakdown loss;
  loss.rays = n;
  loss.color_rays = color_rays;
  loss.gc_rays = gc_rays;
  double color_sum = 0.0, depth_sum = 0.0, gc_sum = 0.0;
  for (const RayTerms& t : terms) {
    color_sum += t.color;
    gc_sum += t.gc;
    if (t.depth_counted) {
      depth_sum += t.depth;
      ++loss.depth_rays;
    }
  }
  loss.color = color_rays > 0 ? color_sum / static_cast<double>(color_rays) : 0.0;
  loss.depth = loss.depth_rays > 0 ? depth_sum / static_cast<double>(loss.depth_rays) : 0.0;
  loss.gc = gc_rays > 0 ? gc_sum / static_cast<double>(gc_rays) : 0.0;
  loss.total = weights.color * loss.color + weights.depth * loss.depth + weights.gc * loss.gc;

  if (gradient) {
    const double depth_scale = loss.depth_rays > 0 ? 1.0 / static_cast<double>(loss.depth_rays) : 0.0;
    for (const GradientSink& sink : sinks) scatter(field.grid, field.channels, sink, depth_scale, *gradient);
  }
  return loss;
}

void TrainConfig::validate() const {
  if (iterations < 0) throw InvalidArgument("iterations must be non-negative");
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
  if (!(lr_grid >= 0.0) || !(lr_mlp >= 0.0)) throw InvalidArgument("learning rates must be non-negative");
  if (!(weights.color >= 0.0) || !(weights.depth >= 0.0) || !(weights.gc >= 0.0)) {
    throw InvalidArgument("loss weights must be non-negative");
  }
  if (!(step_ratio > 0.0) || max_samples < 1) throw InvalidArgument("invalid ray sampling settings");
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.99;
constexpr double kAdamEps = 1e-8;

template <class Scalar>
void adam_update(std::vector<Scalar>& params, const std::vector<double>& grad, std::vector<double>& m,
                 std::vector<double>& v, double lr, double c1, double c2) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(params.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
    v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
    if (m[i] == 0.0) continue;
    const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEps);
    params[i] = static_cast<Scalar>(static_cast<double>(params[i]) - update);
  }
}

}  // namespace

template <class Scalar>
Adam<Scalar>::Adam(const BasicVoxelField<Scalar>& field, double lr_grid, double lr_mlp)
    : lr_grid_(lr_grid),
      lr_mlp_(lr_mlp),
      m_density_(field.density_grid.size(), 0.0),
      v_density_(field.density_grid.size(), 0.0),
      m_color_(field.color_grid.size(), 0.0),
      v_color_(field.color_grid.size(), 0.0),
      m_mlp_(field.mlp.params.size(), 0.0),
      v_mlp_(field.mlp.params.size(), 0.0) {}

template <class Scalar>
void Adam<Scalar>::step(BasicVoxelField<Scalar>& field, const FieldGradient& gradient) {
  if (gradient.density.size() != field.density_grid.size() || gradient.color.size() != field.color_grid.size() ||
      gradient.mlp.size() != field.mlp.params.size() || m_density_.size() != field.density_grid.size()) {
    throw InvalidArgument("gradient layout does not match the field");
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(kBeta1, steps_);
  const double c2 = 1.0 - std::pow(kBeta2, steps_);
  adam_update(field.density_grid, gradient.density, m_density_, v_density_, lr_grid_, c1, c2);
  adam_update(field.color_grid, gradient.color, m_color_, v_color_, lr_grid_, c1, c2);
  adam_update(field.mlp.params, gradient.mlp, m_mlp_, v_mlp_, lr_mlp_, c1, c2);
}

template <class Scalar>
LossBreakdown gradient_step(BasicVoxelField<Scalar>& field, Adam<Scalar>& optimizer, const TrainingBatch& batch,
                            const TrainConfig& config, int iteration, Exec exec) {
  RaySampling sampling;
  sampling.step_ratio = config.step_ratio;
  sampling.max_samples = config.max_samples;
  sampling.jitter = config.jitter;
  sampling.early_termination = config.early_termination;
  sampling.background = config.background;
  sampling.seed = mix_seed(config.seed, static_cast<std::uint64_t>(iteration), 0x6a09e667ULL);
  FieldGradient gradient;
  const LossBreakdown loss = evaluate_batch(field, batch, config.weights, sampling, &gradient, exec);
  if (!std::isfinite(loss.total)) throw TrainingDiverged(iteration, "loss is not finite");
  if (!gradient.all_finite()) throw TrainingDiverged(iteration, "gradient is not finite");
  optimizer.step(field, gradient);
  return loss;
}

TrainReport fit_field(VoxelField& field, const TrainingBatch& pool, const TrainConfig& config, Exec exec) {
  config.validate();
  pool.validate();
  if (pool.empty()) throw InvalidArgument("no valid training rays");
  TrainReport report;
  report.ray_pool = pool.size();
  Adam<float> optimizer(field, config.lr_grid, config.lr_mlp);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::size_t> indices(static_cast<std::size_t>(config.batch_size));
  report.trace.reserve(config.iterations);
  for (int it = 0; it < config.iterations; ++it) {
    for (std::size_t& i : indices) i = pick(rng);
    TrainingBatch batch = pool.select(indices);
    if (config.symmetric) batch.append(batch.mirrored());
    report.trace.push_back({it, gradient_step(field, optimizer, batch, config, it, exec)});
  }
  if (!report.trace.empty()) {
    const double mse = report.trace.back().loss.color / 3.0;
    report.final_psnr = mse > 0.0 ? -10.0 * std::log10(mse) : std::numeric_limits<double>::infinity();
    if (report.final_psnr < config.psnr_warning) {
      report.psnr_warning = true;
      std::cerr << "warning: final training PSNR " << report.final_psnr << " dB is below "
                << config.psnr_warning << " dB\n";
    }
  }
  return report;
}

void write_loss_trace(const std::filesystem::path& path, std::span<const TraceRow> trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "iteration,total,color,depth,gc\n";
  for (const TraceRow& row : trace) {
    out << row.iteration << ',' << row.loss.total << ',' << row.loss.color << ',' << row.loss.depth << ','
        << row.loss.gc << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

#define VOXAUG_INSTANTIATE_TRAINER(S)                                                                   \
  template LossBreakdown evaluate_batch(const BasicVoxelField<S>&, const TrainingBatch&, const LossWeights&, \
                                        const RaySampling&, FieldGradient*, Exec);                      \
  template class Adam<S>;                                                                               \
  template LossBreakdown gradient_step(BasicVoxelField<S>&, Adam<S>&, const TrainingBatch&, const TrainConfig&, \
                                       int, Exec);

VOXAUG_INSTANTIATE_TRAINER(float)
VOXAUG_INSTANTIATE_TRAINER(double)

}  // namespace voxaug
