#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aqua/errors.hpp"

namespace aqua {

// RGB image, values in [0, 1], row-major [v][u][c].
struct Image {
  int width = 0, height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0.0) {}

  double& at(int v, int u, int c) { return data[(static_cast<size_t>(v) * width + u) * 3 + c]; }
  double at(int v, int u, int c) const {
    return data[(static_cast<size_t>(v) * width + u) * 3 + c];
  }
  size_t pixels() const { return static_cast<size_t>(width) * height; }
};

// Scalar depth field in world units (distance along the ray), with a validity
// mask; invalid pixels (background) carry the far bound.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> d;
  std::vector<uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), d(static_cast<size_t>(w) * h, 0.0),
        valid(static_cast<size_t>(w) * h, 1) {}

  double& at(int v, int u) { return d[static_cast<size_t>(v) * width + u]; }
  double at(int v, int u) const { return d[static_cast<size_t>(v) * width + u]; }
  bool is_valid(int v, int u) const { return valid[static_cast<size_t>(v) * width + u] != 0; }
};

// 8-bit sRGB PNG. Writing quantizes with round(v * 255); reading returns v/255.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Little-endian PFM ("PF" single... we use grayscale "Pf") for depth, plus a
// sidecar-free convention: invalid pixels are stored as negative values.
void write_pfm(const std::string& path, const DepthMap& depth);
DepthMap read_pfm(const std::string& path);

uint8_t quantize8(double v);

}  // namespace aqua
