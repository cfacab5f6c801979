#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "voxaug/error.hpp"

namespace voxaug {

class MissingAsset : public Error {
 public:
  using Error::Error;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Flat directory of encoded assets named by the hash of their bytes; storing the same
/// asset twice is a cache hit.
class AssetStore {
 public:
  explicit AssetStore(std::filesystem::path root);

  /// Returns the content id; writes the file only when it is not already present.
  std::string put(std::span<const std::uint8_t> bytes, bool* cache_hit = nullptr);
  bool contains(const std::string& id) const;
  std::filesystem::path path_of(const std::string& id) const;
  /// Throws MissingAsset when the id is unknown, ChecksumError when the bytes no longer hash to it.
  std::vector<std::uint8_t> get(const std::string& id) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace voxaug
