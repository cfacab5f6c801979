#include "voxaug/asset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "voxaug/error.hpp"

namespace voxaug {

static_assert(std::endian::native == std::endian::little, "asset I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'X', 'S', 'A'};

class Writer {
 public:
  template <class T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  template <class T>
  T get() {
    T value;
    get_raw(&value, sizeof(T));
    return value;
  }
  void get_raw(void* out, std::size_t size) {
    if (size > bytes_.size() - pos_) throw FormatError("asset payload ends prematurely");
    std::memcpy(out, bytes_.data() + pos_, size);
    pos_ += size;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = crc32(crc, bytes.data() + offset, static_cast<uInt>(n));
    offset += n;
  }
  return static_cast<std::uint32_t>(crc);
}

void write_field(Writer& w, const VoxelField& field, FieldKind kind) {
  field.validate();
  w.put_raw(kMagic, 4);
  w.put<std::uint32_t>(kAssetVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(kind));
  for (int a = 0; a < 3; ++a) w.put<double>(field.grid.bounds.min[a]);
  for (int a = 0; a < 3; ++a) w.put<double>(field.grid.bounds.max[a]);
  for (int a = 0; a < 3; ++a) w.put<std::uint32_t>(static_cast<std::uint32_t>(field.grid.resolution[a]));
  w.put<double>(field.grid.voxel_size);
  w.put<double>(field.density_bias);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(field.color_mode));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(field.channels));
  w.put_raw(field.density_grid.data(), field.density_grid.size() * sizeof(float));
  w.put_raw(field.color_grid.data(), field.color_grid.size() * sizeof(float));
  const std::uint32_t layers = field.mlp.dims.empty() ? 0u : static_cast<std::uint32_t>(field.mlp.layer_count());
  w.put<std::uint32_t>(layers);
  for (std::uint32_t l = 0; l < layers; ++l) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(field.mlp.dims[l]));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(field.mlp.dims[l + 1]));
  }
  w.put_raw(field.mlp.params.data(), field.mlp.params.size() * sizeof(float));
}

void finish(Writer& w) {
  const std::uint32_t crc = crc_of(w.bytes());
  w.put<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_asset(const VoxelField& field) {
  Writer w;
  write_field(w, field, FieldKind::Background);
  finish(w);
  return std::move(w.bytes());
}

std::vector<std::uint8_t> encode_asset(const ObjectAsset& asset) {
  asset.validate();
  Writer w;
  write_field(w, asset.field, FieldKind::Object);
  for (int a = 0; a < 3; ++a) w.put<double>(asset.canonical_box.center[a]);
  for (int a = 0; a < 3; ++a) w.put<double>(asset.canonical_box.size[a]);
  w.put<double>(asset.canonical_box.yaw);
  w.put<std::uint8_t>(asset.symmetric ? 1 : 0);
  finish(w);
  return std::move(w.bytes());
}

Asset decode_asset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a voxel asset (bad magic)");
  }
  if (bytes.size() < 8) throw ChecksumError("asset truncated");
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  const auto payload = bytes.first(bytes.size() - 4);
  if (crc_of(payload) != stored_crc) throw ChecksumError("asset checksum mismatch (truncated or corrupted)");

  Reader r(payload);
  char magic[4];
  r.get_raw(magic, 4);
  const auto version = r.get<std::uint32_t>();
  if (version != kAssetVersion) throw FormatError("unsupported asset version " + std::to_string(version));
  const auto kind_byte = r.get<std::uint8_t>();
  if (kind_byte > 1) throw FormatError("unknown field kind");
  const auto kind = static_cast<FieldKind>(kind_byte);

  VoxelField field;
  for (int a = 0; a < 3; ++a) field.grid.bounds.min[a] = r.get<double>();
  for (int a = 0; a < 3; ++a) field.grid.bounds.max[a] = r.get<double>();
  for (int a = 0; a < 3; ++a) field.grid.resolution[a] = static_cast<int>(r.get<std::uint32_t>());
  field.grid.voxel_size = r.get<double>();
  field.density_bias = r.get<double>();
  const auto mode = r.get<std::uint8_t>();
  if (mode > 1) throw FormatError("unknown color mode");
  field.color_mode = static_cast<ColorMode>(mode);
  field.channels = static_cast<int>(r.get<std::uint32_t>());
  try {
    field.grid.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid grid: ") + e.what());
  }
  const std::size_t nodes = field.grid.node_count();
  if (field.channels <= 0 || field.channels > 1024) throw FormatError("invalid channel count");
  if (nodes * sizeof(float) * (1 + field.channels) > r.remaining()) throw FormatError("grid arrays exceed payload");
  field.density_grid.resize(nodes);
  r.get_raw(field.density_grid.data(), nodes * sizeof(float));
  field.color_grid.resize(nodes * field.channels);
  r.get_raw(field.color_grid.data(), field.color_grid.size() * sizeof(float));
  const auto layers = r.get<std::uint32_t>();
  if (layers > 64) throw FormatError("implausible MLP layer count");
  for (std::uint32_t l = 0; l < layers; ++l) {
    const int in = static_cast<int>(r.get<std::uint32_t>());
    const int out = static_cast<int>(r.get<std::uint32_t>());
    if (l == 0) field.mlp.dims.push_back(in);
    else if (field.mlp.dims.back() != in) throw FormatError("MLP layer dimensions do not chain");
    field.mlp.dims.push_back(out);
  }
  if (layers > 0) {
    const std::size_t count = ColorMlp<float>::param_count(field.mlp.dims);
    if (count * sizeof(float) > r.remaining()) throw FormatError("MLP parameters exceed payload");
    field.mlp.params.resize(count);
    r.get_raw(field.mlp.params.data(), count * sizeof(float));
  }
  try {
    field.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid field: ") + e.what());
  }

  if (kind == FieldKind::Background) {
    if (r.remaining() != 0) throw FormatError("trailing bytes after background field");
    return field;
  }
  ObjectAsset asset;
  asset.field = std::move(field);
  asset.canonical_box.frame = Frame::ObjectLocal;
  for (int a = 0; a < 3; ++a) asset.canonical_box.center[a] = r.get<double>();
  for (int a = 0; a < 3; ++a) asset.canonical_box.size[a] = r.get<double>();
  asset.canonical_box.yaw = r.get<double>();
  asset.symmetric = r.get<std::uint8_t>() != 0;
  if (r.remaining() != 0) throw FormatError("trailing bytes after object asset");
  return asset;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void save_asset(const VoxelField& field, const std::filesystem::path& path) {
  write_file_bytes(path, encode_asset(field));
}

void save_asset(const ObjectAsset& asset, const std::filesystem::path& path) {
  write_file_bytes(path, encode_asset(asset));
}

Asset load_asset(const std::filesystem::path& path) { return decode_asset(read_file_bytes(path)); }

VoxelField load_background(const std::filesystem::path& path) {
  Asset asset = load_asset(path);
  if (auto* field = std::get_if<VoxelField>(&asset)) return std::move(*field);
  throw FormatError(path.string() + " holds an object asset, expected a background field");
}

ObjectAsset load_object(const std::filesystem::path& path) {
  Asset asset = load_asset(path);
  if (auto* object = std::get_if<ObjectAsset>(&asset)) return std::move(*object);
  throw FormatError(path.string() + " holds a background field, expected an object asset");
}

}  // namespace voxaug
