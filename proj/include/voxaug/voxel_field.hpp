#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "voxaug/geometry.hpp"

namespace voxaug {

enum class ColorMode : std::uint8_t { Direct = 0, FeatureMLP = 1 };
enum class FieldKind : std::uint8_t { Background = 0, Object = 1 };

inline constexpr int kFeatureDim = 12;
inline constexpr int kMlpHidden = 64;
inline constexpr int kPositionFrequencies = 4;
inline constexpr int kDirectionFrequencies = 4;
inline constexpr int kPositionEncodingDim = 3 + 6 * kPositionFrequencies;
inline constexpr int kDirectionEncodingDim = 3 + 6 * kDirectionFrequencies;
inline constexpr int kMlpInputDim = kFeatureDim + kPositionEncodingDim + kDirectionEncodingDim;

/// Raw density value every grid node starts from.
inline constexpr double kInitialDensityRaw = -4.0;
/// Activated density of a freshly initialized grid.
inline constexpr double kInitialDensity = 1e-3;

inline double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }
inline double softplus_inverse(double y) { return y > 20.0 ? y : std::log(std::expm1(y)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Regular lattice of nodes: node (i, j, k) sits at bounds.min + voxel_size * (i, j, k).
struct GridSpec {
  Aabb bounds;
  std::array<int, 3> resolution{2, 2, 2};
  double voxel_size = 1.0;

  /// Smallest lattice with the given spacing whose bounds cover `region`; max is snapped up.
  static GridSpec covering(const Aabb& region, double voxel_size);

  std::size_t node_count() const {
    return static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * resolution[1] + j) * resolution[0] + i;
  }
  Vec3 node_position(int i, int j, int k) const {
    return bounds.min + voxel_size * Vec3(i, j, k);
  }
  void validate() const;
};

/// Eight lattice corners and weights of a trilinear lookup.
struct TrilinearStencil {
  std::array<std::uint32_t, 8> index{};
  std::array<double, 8> weight{};
  bool inside = false;
};

TrilinearStencil trilinear_stencil(const GridSpec& grid, const Vec3& x);

/// Fully connected head with softplus between layers (smooth, so finite differences agree); parameters are stored flat, layer by
/// layer, each as a row-major (out x in) weight matrix followed by the bias vector.
template <class Scalar>
struct ColorMlp {
  std::vector<int> dims;  // {input, hidden..., output}
  std::vector<Scalar> params;

  int layer_count() const { return static_cast<int>(dims.size()) - 1; }
  std::size_t weight_offset(int layer) const;
  std::size_t bias_offset(int layer) const { return weight_offset(layer) + std::size_t(dims[layer]) * dims[layer + 1]; }
  static std::size_t param_count(const std::vector<int>& dims);
};

template <class Scalar>
struct BasicVoxelField {
  GridSpec grid;
  ColorMode color_mode = ColorMode::Direct;
  int channels = 3;             // 3 for Direct, kFeatureDim for FeatureMLP
  std::vector<Scalar> density_grid;  // raw, pre-activation, one per node
  std::vector<Scalar> color_grid;    // node-major: node * channels + c
  ColorMlp<Scalar> mlp;         // empty in Direct mode
  double density_bias = 0.0;

  /// Constant raw density, zero color logits/features, seeded MLP initialization.
  static BasicVoxelField create(const GridSpec& grid, ColorMode mode, std::uint64_t seed = 0);

  double voxel_size() const { return grid.voxel_size; }
  const Aabb& bounds() const { return grid.bounds; }
  /// Throws InvalidArgument when array sizes disagree with the grid.
  void validate() const;

  double density(const Vec3& x) const;
  Rgb color(const Vec3& x, const Vec3& d) const;

  template <class Other>
  BasicVoxelField<Other> cast() const;
};

using VoxelField = BasicVoxelField<float>;
using VoxelFieldD = BasicVoxelField<double>;

template <class Scalar>
double query_density(const BasicVoxelField<Scalar>& field, const Vec3& x);

template <class Scalar>
Rgb query_color(const BasicVoxelField<Scalar>& field, const Vec3& x, const Vec3& d);

/// Interpolated raw density (before bias and activation); 0 outside the grid.
template <class Scalar>
double interpolate_density_raw(const BasicVoxelField<Scalar>& field, const TrilinearStencil& stencil);

/// Interpolated color logits or features, written to `out` (size channels).
template <class Scalar>
void interpolate_color(const BasicVoxelField<Scalar>& field, const TrilinearStencil& stencil,
                       std::span<double> out);

/// Positional encoding [p, sin(2^k pi p), cos(2^k pi p)] for k < frequencies.
void positional_encoding(const Vec3& p, int frequencies, std::span<double> out);

/// Builds the MLP input vector: features, encoded normalized position, encoded direction.
template <class Scalar>
void mlp_input(const BasicVoxelField<Scalar>& field, std::span<const double> features,
               const Vec3& x, const Vec3& d, std::span<double> out);

/// Activations kept by the forward pass for backpropagation.
struct MlpTape {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;   // pre-activation per layer
  std::vector<std::vector<double>> post;  // post-activation per layer (softplus, or identity at the end)
};

/// Returns the raw output logits (size 3).
template <class Scalar>
Rgb mlp_forward(const ColorMlp<Scalar>& mlp, std::span<const double> input, MlpTape* tape);

/// Accumulates dL/dparams into `param_grad` and writes dL/dinput into `input_grad`.
template <class Scalar>
void mlp_backward(const ColorMlp<Scalar>& mlp, const MlpTape& tape, const Rgb& output_grad,
                  std::span<double> param_grad, std::span<double> input_grad);

struct ObjectAsset {
  VoxelField field;       // in the object-local box frame
  Box3D canonical_box;    // local frame, centered at the origin
  bool symmetric = false;

  void validate() const;
};

}  // namespace voxaug
