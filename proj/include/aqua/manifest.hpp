#pragma once

#include <array>
#include <string>
#include <vector>

#include "aqua/geometry.hpp"
#include "aqua/image.hpp"

namespace aqua {

// Per-channel underwater formation coefficients (R, G, B).
struct WaterParams {
  std::array<double, 3> beta_d{};  // attenuation, 1/world-unit
  std::array<double, 3> beta_b{};  // backscatter, 1/world-unit
  std::array<double, 3> b_inf{};   // ambient light, [0, 1]

  void validate() const;

  static WaterParams paper_preset() {
    return {{0.22, 0.1, 0.15}, {0.22, 0.1, 0.15}, {0.013, 0.04, 0.01}};
  }
};

struct FrameInfo {
  std::string clean, depth, degraded, he;
  std::string split;  // "train" or "test"
};

struct DatasetManifest {
  int width = 0, height = 0;
  double t_near = 0, t_far = 0;
  uint64_t seed = 0;
  WaterParams water;
  std::vector<CameraPose> poses;
  std::vector<FrameInfo> frames;

  void save(const std::string& path) const;
  static DatasetManifest load(const std::string& path);
};

// Manifest plus all image artifacts loaded into memory.
struct Dataset {
  std::string dir;
  DatasetManifest manifest;
  std::vector<Image> clean, degraded, he;
  std::vector<DepthMap> depth;
  std::vector<int> train_ids, test_ids;
};

Dataset load_dataset(const std::string& dir);

}  // namespace aqua
