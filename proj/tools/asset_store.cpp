#include "asset_store.hpp"

#include <openssl/evp.h>

#include <memory>

#include "voxaug/asset_io.hpp"

namespace voxaug {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 15]);
  }
  return out;
}

AssetStore::AssetStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path AssetStore::path_of(const std::string& id) const { return root_ / (id + ".vxa"); }

bool AssetStore::contains(const std::string& id) const { return std::filesystem::exists(path_of(id)); }

std::string AssetStore::put(std::span<const std::uint8_t> bytes, bool* cache_hit) {
  const std::string id = sha256_hex(bytes);
  const bool hit = contains(id);
  if (!hit) {
    // Write then rename so a crash never leaves a truncated file under a valid id.
    const std::filesystem::path tmp = root_ / (id + ".tmp");
    write_file_bytes(tmp, bytes);
    std::filesystem::rename(tmp, path_of(id));
  }
  if (cache_hit) *cache_hit = hit;
  return id;
}

std::vector<std::uint8_t> AssetStore::get(const std::string& id) const {
  if (!contains(id)) throw MissingAsset("asset " + id + " is not in the store " + root_.string());
  std::vector<std::uint8_t> bytes = read_file_bytes(path_of(id));
  if (sha256_hex(bytes) != id) throw ChecksumError("asset " + id + " does not match its content hash");
  return bytes;
}

}  // namespace voxaug
