#include "voxaug/voxel_field.hpp"

#include <algorithm>
#include <random>

#include "voxaug/error.hpp"

namespace voxaug {

GridSpec GridSpec::covering(const Aabb& region, double voxel_size) {
  if (!(voxel_size > 0.0)) throw InvalidArgument("voxel size must be positive");
  GridSpec grid;
  grid.voxel_size = voxel_size;
  grid.bounds.min = region.min;
  for (int a = 0; a < 3; ++a) {
    const double extent = region.max[a] - region.min[a];
    if (!(extent > 0.0)) throw InvalidArgument("grid region must have positive extent");
    grid.resolution[a] = std::max(2, static_cast<int>(std::ceil(extent / voxel_size - 1e-9)) + 1);
    grid.bounds.max[a] = region.min[a] + voxel_size * (grid.resolution[a] - 1);
  }
  return grid;
}

void GridSpec::validate() const {
  if (!(voxel_size > 0.0)) throw InvalidArgument("voxel size must be positive");
  for (int a = 0; a < 3; ++a) {
    if (resolution[a] < 2) throw InvalidArgument("grid resolution must be at least 2 per axis");
    const double expected = voxel_size * (resolution[a] - 1);
    if (std::abs((bounds.max[a] - bounds.min[a]) - expected) > 1e-6) {
      throw InvalidArgument("voxel size inconsistent with bounds and resolution");
    }
  }
}

TrilinearStencil trilinear_stencil(const GridSpec& grid, const Vec3& x) {
  TrilinearStencil s;
  std::array<int, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double rel = (x[a] - grid.bounds.min[a]) / grid.voxel_size;
    const int last = grid.resolution[a] - 1;
    if (!(rel >= 0.0 && rel <= static_cast<double>(last))) return s;
    const int i0 = std::min(static_cast<int>(rel), last - 1);
    base[a] = i0;
    frac[a] = rel - i0;
  }
  s.inside = true;
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(grid.resolution[0]);
  const std::size_t sz = sy * grid.resolution[1];
  const std::size_t origin = grid.index(base[0], base[1], base[2]);
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    s.index[c] = static_cast<std::uint32_t>(origin + dx * sx + dy * sy + dz * sz);
    s.weight[c] = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                  (dz ? frac[2] : 1.0 - frac[2]);
  }
  return s;
}

template <class Scalar>
std::size_t ColorMlp<Scalar>::weight_offset(int layer) const {
  std::size_t offset = 0;
  for (int l = 0; l < layer; ++l) offset += std::size_t(dims[l]) * dims[l + 1] + dims[l + 1];
  return offset;
}

template <class Scalar>
std::size_t ColorMlp<Scalar>::param_count(const std::vector<int>& dims) {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) count += std::size_t(dims[l]) * dims[l + 1] + dims[l + 1];
  return count;
}

template <class Scalar>
BasicVoxelField<Scalar> BasicVoxelField<Scalar>::create(const GridSpec& grid, ColorMode mode,
                                                        std::uint64_t seed) {
  grid.validate();
  BasicVoxelField field;
  field.grid = grid;
  field.color_mode = mode;
  field.channels = mode == ColorMode::Direct ? 3 : kFeatureDim;
  field.density_grid.assign(grid.node_count(), static_cast<Scalar>(kInitialDensityRaw));
  field.color_grid.assign(grid.node_count() * field.channels, Scalar(0));
  field.density_bias = softplus_inverse(kInitialDensity) - kInitialDensityRaw;
  if (mode == ColorMode::FeatureMLP) {
    field.mlp.dims = {kMlpInputDim, kMlpHidden, 3};
    field.mlp.params.resize(ColorMlp<Scalar>::param_count(field.mlp.dims));
    std::mt19937_64 rng(seed);
    for (int l = 0; l < field.mlp.layer_count(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(field.mlp.dims[l]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      const std::size_t begin = field.mlp.weight_offset(l);
      const std::size_t end = field.mlp.weight_offset(l + 1);
      for (std::size_t p = begin; p < end; ++p) field.mlp.params[p] = static_cast<Scalar>(dist(rng));
    }
  }
  return field;
}

template <class Scalar>
void BasicVoxelField<Scalar>::validate() const {
  grid.validate();
  const int expected_channels = color_mode == ColorMode::Direct ? 3 : kFeatureDim;
  if (channels != expected_channels) throw InvalidArgument("channel count does not match color mode");
  if (density_grid.size() != grid.node_count()) throw InvalidArgument("density grid size mismatch");
  if (color_grid.size() != grid.node_count() * channels) throw InvalidArgument("color grid size mismatch");
  if (color_mode == ColorMode::FeatureMLP) {
    if (mlp.dims.size() < 2 || mlp.dims.front() != kMlpInputDim || mlp.dims.back() != 3) {
      throw InvalidArgument("MLP dimensions do not match the color head layout");
    }
    if (mlp.params.size() != ColorMlp<Scalar>::param_count(mlp.dims)) {
      throw InvalidArgument("MLP parameter count mismatch");
    }
  } else if (!mlp.params.empty()) {
    throw InvalidArgument("direct color mode carries no MLP");
  }
}

template <class Scalar>
double BasicVoxelField<Scalar>::density(const Vec3& x) const {
  return query_density(*this, x);
}

template <class Scalar>
Rgb BasicVoxelField<Scalar>::color(const Vec3& x, const Vec3& d) const {
  return query_color(*this, x, d);
}

template <class Scalar>
template <class Other>
BasicVoxelField<Other> BasicVoxelField<Scalar>::cast() const {
  BasicVoxelField<Other> out;
  out.grid = grid;
  out.color_mode = color_mode;
  out.channels = channels;
  out.density_grid.assign(density_grid.begin(), density_grid.end());
  out.color_grid.assign(color_grid.begin(), color_grid.end());
  out.mlp.dims = mlp.dims;
  out.mlp.params.assign(mlp.params.begin(), mlp.params.end());
  out.density_bias = density_bias;
  return out;
}

template <class Scalar>
double interpolate_density_raw(const BasicVoxelField<Scalar>& field, const TrilinearStencil& s) {
  double raw = 0.0;
  for (int c = 0; c < 8; ++c) raw += s.weight[c] * static_cast<double>(field.density_grid[s.index[c]]);
  return raw;
}

template <class Scalar>
void interpolate_color(const BasicVoxelField<Scalar>& field, const TrilinearStencil& s, std::span<double> out) {
  const int ch = field.channels;
  std::fill(out.begin(), out.end(), 0.0);
  for (int c = 0; c < 8; ++c) {
    const Scalar* node = field.color_grid.data() + std::size_t(s.index[c]) * ch;
    const double w = s.weight[c];
    for (int k = 0; k < ch; ++k) out[k] += w * static_cast<double>(node[k]);
  }
}

template <class Scalar>
double query_density(const BasicVoxelField<Scalar>& field, const Vec3& x) {
  const TrilinearStencil s = trilinear_stencil(field.grid, x);
  if (!s.inside) return 0.0;
  return softplus(interpolate_density_raw(field, s) + field.density_bias);
}

void positional_encoding(const Vec3& p, int frequencies, std::span<double> out) {
  out[0] = p.x();
  out[1] = p.y();
  out[2] = p.z();
  std::size_t o = 3;
  double scale = kPi;
  for (int f = 0; f < frequencies; ++f, scale *= 2.0) {
    for (int a = 0; a < 3; ++a) out[o++] = std::sin(scale * p[a]);
    for (int a = 0; a < 3; ++a) out[o++] = std::cos(scale * p[a]);
  }
}

template <class Scalar>
void mlp_input(const BasicVoxelField<Scalar>& field, std::span<const double> features, const Vec3& x,
               const Vec3& d, std::span<double> out) {
  std::copy(features.begin(), features.end(), out.begin());
  const Vec3 normalized =
      (2.0 * (x - field.grid.bounds.min).array() / field.grid.bounds.extent().array() - 1.0).matrix();
  positional_encoding(normalized, kPositionFrequencies, out.subspan(kFeatureDim, kPositionEncodingDim));
  positional_encoding(d, kDirectionFrequencies,
                      out.subspan(kFeatureDim + kPositionEncodingDim, kDirectionEncodingDim));
}

template <class Scalar>
Rgb mlp_forward(const ColorMlp<Scalar>& mlp, std::span<const double> input, MlpTape* tape) {
  std::vector<double> activation(input.begin(), input.end());
  if (tape) {
    tape->input = activation;
    tape->pre.resize(mlp.layer_count());
    tape->post.resize(mlp.layer_count());
  }
  for (int l = 0; l < mlp.layer_count(); ++l) {
    const int in = mlp.dims[l], out = mlp.dims[l + 1];
    const Scalar* w = mlp.params.data() + mlp.weight_offset(l);
    const Scalar* b = mlp.params.data() + mlp.bias_offset(l);
    std::vector<double> z(out);
    for (int r = 0; r < out; ++r) {
      double acc = static_cast<double>(b[r]);
      const Scalar* row = w + std::size_t(r) * in;
      for (int c = 0; c < in; ++c) acc += static_cast<double>(row[c]) * activation[c];
      z[r] = acc;
    }
    const bool last = l + 1 == mlp.layer_count();
    std::vector<double> a(z);
    if (!last) {
      for (double& v : a) v = softplus(v);
    }
    if (tape) {
      tape->pre[l] = z;
      tape->post[l] = a;
    }
    activation = std::move(a);
  }
  return Rgb(activation[0], activation[1], activation[2]);
}

template <class Scalar>
void mlp_backward(const ColorMlp<Scalar>& mlp, const MlpTape& tape, const Rgb& output_grad,
                  std::span<double> param_grad, std::span<double> input_grad) {
  std::vector<double> grad{output_grad.x(), output_grad.y(), output_grad.z()};
  for (int l = mlp.layer_count() - 1; l >= 0; --l) {
    const int in = mlp.dims[l], out = mlp.dims[l + 1];
    const std::vector<double>& prev = l == 0 ? tape.input : tape.post[l - 1];
    const Scalar* w = mlp.params.data() + mlp.weight_offset(l);
    double* gw = param_grad.data() + mlp.weight_offset(l);
    double* gb = param_grad.data() + mlp.bias_offset(l);
    std::vector<double> grad_prev(in, 0.0);
    for (int r = 0; r < out; ++r) {
      const double g = grad[r];
      if (g == 0.0) continue;
      gb[r] += g;
      double* gw_row = gw + std::size_t(r) * in;
      const Scalar* w_row = w + std::size_t(r) * in;
      for (int c = 0; c < in; ++c) {
        gw_row[c] += g * prev[c];
        grad_prev[c] += g * static_cast<double>(w_row[c]);
      }
    }
    if (l > 0) {
      const std::vector<double>& pre = tape.pre[l - 1];
      for (int c = 0; c < in; ++c) grad_prev[c] *= sigmoid(pre[c]);
    }
    grad = std::move(grad_prev);
  }
  std::copy(grad.begin(), grad.end(), input_grad.begin());
}

template <class Scalar>
Rgb query_color(const BasicVoxelField<Scalar>& field, const Vec3& x, const Vec3& d) {
  const TrilinearStencil s = trilinear_stencil(field.grid, x);
  if (!s.inside) return Rgb::Zero();
  if (field.color_mode == ColorMode::Direct) {
    std::array<double, 3> logits{};
    interpolate_color(field, s, logits);
    return Rgb(sigmoid(logits[0]), sigmoid(logits[1]), sigmoid(logits[2]));
  }
  std::array<double, kFeatureDim> features{};
  interpolate_color(field, s, features);
  std::array<double, kMlpInputDim> input{};
  mlp_input(field, features, x, d, input);
  const Rgb logits = mlp_forward(field.mlp, input, nullptr);
  return Rgb(sigmoid(logits.x()), sigmoid(logits.y()), sigmoid(logits.z()));
}

void ObjectAsset::validate() const {
  field.validate();
  canonical_box.validate();
  const Aabb box = canonical_box.bounding_aabb();
  if (!field.grid.bounds.contains(box.min) || !field.grid.bounds.contains(box.max)) {
    throw InvalidArgument("object field bounds must enclose the canonical box");
  }
}

#define VOXAUG_INSTANTIATE_FIELD(S)                                                                  \
  template struct ColorMlp<S>;                                                                       \
  template struct BasicVoxelField<S>;                                                                \
  template double interpolate_density_raw(const BasicVoxelField<S>&, const TrilinearStencil&);      \
  template void interpolate_color(const BasicVoxelField<S>&, const TrilinearStencil&, std::span<double>); \
  template double query_density(const BasicVoxelField<S>&, const Vec3&);                            \
  template Rgb query_color(const BasicVoxelField<S>&, const Vec3&, const Vec3&);                    \
  template void mlp_input(const BasicVoxelField<S>&, std::span<const double>, const Vec3&, const Vec3&, \
                          std::span<double>);                                                        \
  template Rgb mlp_forward(const ColorMlp<S>&, std::span<const double>, MlpTape*);                  \
  template void mlp_backward(const ColorMlp<S>&, const MlpTape&, const Rgb&, std::span<double>,     \
                             std::span<double>);

VOXAUG_INSTANTIATE_FIELD(float)
VOXAUG_INSTANTIATE_FIELD(double)

template BasicVoxelField<double> BasicVoxelField<float>::cast<double>() const;
template BasicVoxelField<float> BasicVoxelField<double>::cast<float>() const;
template BasicVoxelField<float> BasicVoxelField<float>::cast<float>() const;
template BasicVoxelField<double> BasicVoxelField<double>::cast<double>() const;

}  // namespace voxaug
