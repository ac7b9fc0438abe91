#pragma once

// Full-reference image quality metrics and the warp-based multi-view
// consistency harness with analytic ground-truth flow.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aqua/geometry.hpp"
#include "aqua/image.hpp"

namespace aqua {

constexpr double kPsnrCap = 99.0;  // returned when MSE is exactly zero

struct MetricReport {
  double psnr = 0;
  double ssim = 0;
  double nrmse = 0;
  size_t pixel_count = 0;
};

using Mask = std::vector<uint8_t>;  // one entry per pixel, row-major

double psnr(const Image& a, const Image& b, double peak = 1.0,
            const Mask* mask = nullptr);
// Windowed SSIM on the channel-mean grayscale: 11x11 Gaussian window with
// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1. Mean over windows fully
// inside the image (and fully unmasked, when a mask is given).
double ssim(const Image& a, const Image& b, const Mask* mask = nullptr);
// RMSE normalized by the Euclidean norm of the reference b.
double nrmse(const Image& a, const Image& b, const Mask* mask = nullptr);

MetricReport metric_report(const Image& a, const Image& b, const Mask* mask = nullptr);

// Pixel displacements from view A's grid into view B, with a validity mask.
struct FlowField {
  int width = 0, height = 0;
  std::vector<double> du, dv;
  Mask valid;
};

// Geometric flow: unproject each pixel of A at its known depth, reproject into
// B. Pixels are masked when A's depth is invalid, the reprojection leaves B's
// bounds or lands behind the camera, or the point is occluded in B (depth_b
// disagrees with the reprojected distance by more than 1% relative).
FlowField analytic_flow(const CameraPose& pose_a, const CameraPose& pose_b,
                        const DepthMap& depth_a, const DepthMap& depth_b);

// Inverse bilinear warp: out(u, v) = image sampled at (u + du, v + dv). The
// returned mask is the flow validity intersected with in-bounds sampling.
std::pair<Image, Mask> warp(const Image& image, const FlowField& flow);

// Renders (or any image source) for two poses, aligned via analytic flow and
// compared with masked metrics.
using RenderFn = std::function<Image(const CameraPose&)>;
MetricReport consistency_eval(const RenderFn& render_fn, const CameraPose& pose_a,
                              const CameraPose& pose_b, const DepthMap& depth_a,
                              const DepthMap& depth_b);

}  // namespace aqua
