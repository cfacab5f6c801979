#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "voxaug/voxel_field.hpp"

namespace voxaug {

// Little-endian layout:
//   "VXSA" | u32 version | u8 kind | 6 x f64 bounds (min xyz, max xyz) | 3 x u32 resolution
//   | f64 voxel_size | f64 density_bias | u8 color mode | u32 channels
//   | f32 density[nodes] | f32 color[nodes * channels]
//   | u32 layer_count | per layer: u32 in, u32 out | f32 mlp params (weights then bias per layer)
//   | object only: 3 x f64 center, 3 x f64 size, f64 yaw, u8 symmetric
//   | u32 CRC32 of every preceding byte
inline constexpr std::uint32_t kAssetVersion = 1;

using Asset = std::variant<VoxelField, ObjectAsset>;

std::vector<std::uint8_t> encode_asset(const VoxelField& field);
std::vector<std::uint8_t> encode_asset(const ObjectAsset& asset);
/// Throws FormatError (magic, version, structure) or ChecksumError (truncation, corruption).
Asset decode_asset(std::span<const std::uint8_t> bytes);

void save_asset(const VoxelField& field, const std::filesystem::path& path);
void save_asset(const ObjectAsset& asset, const std::filesystem::path& path);
Asset load_asset(const std::filesystem::path& path);

/// Typed loaders; throw FormatError when the file holds the other kind.
VoxelField load_background(const std::filesystem::path& path);
ObjectAsset load_object(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace voxaug
