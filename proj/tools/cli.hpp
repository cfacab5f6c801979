#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "voxaug/composer.hpp"
#include "voxaug/error.hpp"
#include "voxaug/trainer.hpp"

namespace voxaug::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kParseFailure = 2,
  kDiverged = 3,
  kNotIntact = 4,
  kNoValidRegion = 5,
  kMissingAsset = 6,
};

class NoValidRegion : public Error {
 public:
  using Error::Error;
};

struct RenderSettings {
  int width = 0;   // 0 keeps the camera's own resolution
  int height = 0;
  double step_ratio = 0.5;
  int max_samples = 4096;
  std::optional<Rgb> background;  // defaults to black
};

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path store;   // defaults to <output>/assets
  std::filesystem::path output = ".";
  TrainConfig train;
  double background_voxel = 0.25;
  double object_voxel = 0.25;
  int max_resolution = 330;
  ColorMode color_mode = ColorMode::Direct;
  PillarConfig pillar;
  JitterConfig jitter;
  int count = 12;
  bool uniform_base = false;
  RenderSettings render;
  std::uint64_t seed = 0;
  int threads = 0;

  std::filesystem::path store_dir() const { return store.empty() ? output / "assets" : store; }
};

/// Reads a JSON config; keys left out keep their defaults. Throws FormatError.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text);

/// Runs one command line (argv[0] is the program name) and returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace voxaug::cli
