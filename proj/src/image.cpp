#include "voxaug/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "voxaug/error.hpp"

namespace voxaug {

Rgb Image8::at(int u, int v) const {
  const std::size_t p = 3 * (std::size_t(v) * width + u);
  return Rgb(rgb[p], rgb[p + 1], rgb[p + 2]) / 255.0;
}

Image8 to_image8(std::span<const Rgb> colors, int width, int height) {
  if (colors.size() != std::size_t(width) * height) throw InvalidArgument("image size mismatch");
  Image8 image{width, height, std::vector<std::uint8_t>(colors.size() * 3)};
  for (std::size_t i = 0; i < colors.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(colors[i][c], 0.0, 1.0);
      image.rgb[3 * i + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return image;
}

std::vector<Rgb> to_colors(const Image8& image) {
  std::vector<Rgb> out(std::size_t(image.width) * image.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Rgb(image.rgb[3 * i], image.rgb[3 * i + 1], image.rgb[3 * i + 2]) / 255.0;
  }
  return out;
}

DepthMap16 to_depth16(std::span<const double> depth, std::span<const std::uint8_t> valid, int width, int height) {
  const std::size_t n = std::size_t(width) * height;
  if (depth.size() != n || valid.size() != n) throw InvalidArgument("depth map size mismatch");
  DepthMap16 out{width, height, std::vector<std::uint16_t>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    const long mm = std::lround(depth[i] * 1000.0);
    if (mm >= 1 && mm <= 65535) out.millimeters[i] = static_cast<std::uint16_t>(mm);
  }
  return out;
}

namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  NetpbmHeader h;
  auto next_token = [&]() {
    std::string token;
    while (in >> token) {
      if (token[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return token;
    }
    throw FormatError("truncated netpbm header in " + path.string());
  };
  h.magic = next_token();
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::logic_error&) {
    throw FormatError("malformed netpbm header in " + path.string());
  }
  in.get();  // single whitespace before the raster
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
    throw FormatError("invalid netpbm dimensions in " + path.string());
  }
  return h;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image8& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Image8 read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P6" || h.maxval != 255) throw FormatError(path.string() + " is not an 8-bit P6 image");
  Image8 image{h.width, h.height, std::vector<std::uint8_t>(std::size_t(h.width) * h.height * 3)};
  in.read(reinterpret_cast<char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.rgb.size())) throw FormatError(path.string() + " is truncated");
  return image;
}

void write_pgm16(const std::filesystem::path& path, const DepthMap16& depth) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << depth.width << ' ' << depth.height << "\n65535\n";
  std::vector<std::uint8_t> raster(depth.millimeters.size() * 2);
  for (std::size_t i = 0; i < depth.millimeters.size(); ++i) {  // netpbm is big-endian
    raster[2 * i] = static_cast<std::uint8_t>(depth.millimeters[i] >> 8);
    raster[2 * i + 1] = static_cast<std::uint8_t>(depth.millimeters[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

DepthMap16 read_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P5" || h.maxval != 65535) throw FormatError(path.string() + " is not a 16-bit P5 image");
  DepthMap16 depth{h.width, h.height, std::vector<std::uint16_t>(std::size_t(h.width) * h.height)};
  std::vector<std::uint8_t> raster(depth.millimeters.size() * 2);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) throw FormatError(path.string() + " is truncated");
  for (std::size_t i = 0; i < depth.millimeters.size(); ++i) {
    depth.millimeters[i] = static_cast<std::uint16_t>((raster[2 * i] << 8) | raster[2 * i + 1]);
  }
  return depth;
}

}  // namespace voxaug
