#include "aqua/metrics.hpp"

#include <cmath>

#include "aqua/errors.hpp"

namespace aqua {

namespace {
void check_shapes(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw usage_error("metric inputs must have identical shapes");
}
}  // namespace

double psnr(const Image& a, const Image& b, double peak, const Mask* mask) {
  check_shapes(a, b);
  double acc = 0;
  size_t n = 0;
  for (size_t i = 0; i < a.pixels(); ++i) {
    if (mask && !(*mask)[i]) continue;
    for (int c = 0; c < 3; ++c) {
      double d = a.data[i * 3 + c] - b.data[i * 3 + c];
      acc += d * d;
    }
    ++n;
  }
  if (n == 0) throw usage_error("psnr: no pixels to evaluate");
  double mse = acc / (3.0 * n);
  if (mse == 0.0) return kPsnrCap;
  return 10.0 * std::log10(peak * peak / mse);
}

double nrmse(const Image& a, const Image& b, const Mask* mask) {
  check_shapes(a, b);
  double err = 0, ref = 0;
  for (size_t i = 0; i < a.pixels(); ++i) {
    if (mask && !(*mask)[i]) continue;
    for (int c = 0; c < 3; ++c) {
      double d = a.data[i * 3 + c] - b.data[i * 3 + c];
      err += d * d;
      ref += b.data[i * 3 + c] * b.data[i * 3 + c];
    }
  }
  if (ref == 0.0) throw input_error("nrmse: zero-norm reference");
  return std::sqrt(err) / std::sqrt(ref);
}

double ssim(const Image& a, const Image& b, const Mask* mask) {
  check_shapes(a, b);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5, kK1 = 0.01, kK2 = 0.03, kL = 1.0;
  if (a.width < kWin || a.height < kWin)
    throw usage_error("ssim: image smaller than the 11x11 window");

  double w[kWin][kWin];
  double wsum = 0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      double di = i - kWin / 2, dj = j - kWin / 2;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2 * kSigma * kSigma));
      wsum += w[i][j];
    }
  for (auto& row : w)
    for (double& x : row) x /= wsum;

  auto gray = [](const Image& img, int v, int u) {
    return (img.at(v, u, 0) + img.at(v, u, 1) + img.at(v, u, 2)) / 3.0;
  };

  const double c1 = (kK1 * kL) * (kK1 * kL), c2 = (kK2 * kL) * (kK2 * kL);
  double acc = 0;
  size_t nwin = 0;
  for (int v = 0; v + kWin <= a.height; ++v)
    for (int u = 0; u + kWin <= a.width; ++u) {
      // with a mask, keep windows that are at least half valid and renormalize
      // the Gaussian weights over the valid pixels; sparse masks (warp-based
      // consistency) rarely yield fully valid windows
      double vw[kWin][kWin];
      double vsum = 0;
      int nvalid = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          bool ok = !mask || (*mask)[static_cast<size_t>(v + i) * a.width + (u + j)];
          vw[i][j] = ok ? w[i][j] : 0.0;
          vsum += vw[i][j];
          nvalid += ok;
        }
      if (nvalid * 2 < kWin * kWin || vsum <= 0) continue;
      double ma = 0, mb = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          ma += vw[i][j] / vsum * gray(a, v + i, u + j);
          mb += vw[i][j] / vsum * gray(b, v + i, u + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          double da = gray(a, v + i, u + j) - ma;
          double db = gray(b, v + i, u + j) - mb;
          va += vw[i][j] / vsum * da * da;
          vb += vw[i][j] / vsum * db * db;
          cov += vw[i][j] / vsum * da * db;
        }
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++nwin;
    }
  if (nwin == 0) throw usage_error("ssim: no valid windows");
  return acc / static_cast<double>(nwin);
}

MetricReport metric_report(const Image& a, const Image& b, const Mask* mask) {
  MetricReport r;
  r.psnr = psnr(a, b, 1.0, mask);
  r.ssim = ssim(a, b, mask);
  r.nrmse = nrmse(a, b, mask);
  if (mask) {
    r.pixel_count = 0;
    for (uint8_t m : *mask)
      if (m) ++r.pixel_count;
  } else {
    r.pixel_count = a.pixels();
  }
  return r;
}

namespace {
double bilinear_depth(const DepthMap& d, double u, double v, bool& ok) {
  int u0 = static_cast<int>(std::floor(u)), v0 = static_cast<int>(std::floor(v));
  ok = false;
  if (u0 < 0 || v0 < 0 || u0 + 1 >= d.width || v0 + 1 >= d.height) {
    // clamp to the edge for boundary pixels
    u0 = std::min(std::max(u0, 0), d.width - 2);
    v0 = std::min(std::max(v0, 0), d.height - 2);
  }
  double fu = u - u0, fv = v - v0;
  fu = std::min(std::max(fu, 0.0), 1.0);
  fv = std::min(std::max(fv, 0.0), 1.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (!d.is_valid(v0 + i, u0 + j)) return 0.0;
  ok = true;
  double a = d.at(v0, u0) * (1 - fu) + d.at(v0, u0 + 1) * fu;
  double b = d.at(v0 + 1, u0) * (1 - fu) + d.at(v0 + 1, u0 + 1) * fu;
  return a * (1 - fv) + b * fv;
}
}  // namespace

FlowField analytic_flow(const CameraPose& pose_a, const CameraPose& pose_b,
                        const DepthMap& depth_a, const DepthMap& depth_b) {
  if (depth_a.width != pose_a.width || depth_a.height != pose_a.height)
    throw usage_error("analytic_flow: depth/pose shape mismatch");
  FlowField f;
  f.width = pose_a.width;
  f.height = pose_a.height;
  const size_t n = static_cast<size_t>(f.width) * f.height;
  f.du.assign(n, 0.0);
  f.dv.assign(n, 0.0);
  f.valid.assign(n, 0);
  // depth-edge guard: a pixel next to a depth discontinuity (or next to the
  // background) mixes foreground and background under bilinear resampling, so
  // exclude it rather than score interpolation artifacts
  auto near_depth_edge = [&](int v, int u) {
    double d0 = depth_a.at(v, u);
    for (int dv = -1; dv <= 1; ++dv)
      for (int du = -1; du <= 1; ++du) {
        int vv = v + dv, uu = u + du;
        if (vv < 0 || uu < 0 || vv >= f.height || uu >= f.width) continue;
        if (!depth_a.is_valid(vv, uu)) return true;
        if (std::abs(depth_a.at(vv, uu) - d0) > 0.1 * d0) return true;
      }
    return false;
  };
  for (int v = 0; v < f.height; ++v)
    for (int u = 0; u < f.width; ++u) {
      const size_t idx = static_cast<size_t>(v) * f.width + u;
      if (!depth_a.is_valid(v, u)) continue;
      if (near_depth_edge(v, u)) continue;
      Ray ray = generate_ray(pose_a, u, v, 0.0, 1.0);
      Vec3 p = ray.origin + ray.direction * depth_a.at(v, u);
      double ub, vb, zb;
      if (!pose_b.project(p, ub, vb, zb)) continue;
      if (ub < 0 || ub > pose_b.width - 1 || vb < 0 || vb > pose_b.height - 1) continue;
      // occlusion: compare the reprojected ray distance with B's own depth
      double dist_b = (p - pose_b.center()).norm();
      bool ok;
      double db = bilinear_depth(depth_b, ub, vb, ok);
      if (!ok || std::abs(db - dist_b) > 0.01 * dist_b) continue;
      f.du[idx] = ub - u;
      f.dv[idx] = vb - v;
      f.valid[idx] = 1;
    }
  return f;
}

std::pair<Image, Mask> warp(const Image& image, const FlowField& flow) {
  if (flow.width <= 0 || flow.height <= 0)
    throw usage_error("warp: empty flow field");
  Image out(flow.width, flow.height);
  Mask mask(static_cast<size_t>(flow.width) * flow.height, 0);
  for (int v = 0; v < flow.height; ++v)
    for (int u = 0; u < flow.width; ++u) {
      const size_t idx = static_cast<size_t>(v) * flow.width + u;
      if (!flow.valid[idx]) continue;
      double su = u + flow.du[idx], sv = v + flow.dv[idx];
      if (su < 0 || su > image.width - 1 || sv < 0 || sv > image.height - 1) continue;
      int u0 = std::min(static_cast<int>(su), image.width - 2);
      int v0 = std::min(static_cast<int>(sv), image.height - 2);
      double fu = su - u0, fv = sv - v0;
      for (int c = 0; c < 3; ++c) {
        double top = image.at(v0, u0, c) * (1 - fu) + image.at(v0, u0 + 1, c) * fu;
        double bot = image.at(v0 + 1, u0, c) * (1 - fu) + image.at(v0 + 1, u0 + 1, c) * fu;
        out.at(v, u, c) = top * (1 - fv) + bot * fv;
      }
      mask[idx] = 1;
    }
  return {std::move(out), std::move(mask)};
}

MetricReport consistency_eval(const RenderFn& render_fn, const CameraPose& pose_a,
                              const CameraPose& pose_b, const DepthMap& depth_a,
                              const DepthMap& depth_b) {
  Image render_a = render_fn(pose_a);
  Image render_b = render_fn(pose_b);
  FlowField flow = analytic_flow(pose_a, pose_b, depth_a, depth_b);
  auto [aligned_b, mask] = warp(render_b, flow);
  // B's render pulled onto A's grid, compared against A's render
  return metric_report(aligned_b, render_a, &mask);
}

}  // namespace aqua
