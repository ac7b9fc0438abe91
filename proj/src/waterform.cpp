#include "aqua/waterform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "aqua/photometry.hpp"

namespace aqua {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
  for (const auto& p : primitives) {
    Vec3 ext = p.kind == Primitive::Kind::Sphere ? Vec3{p.radius, p.radius, p.radius}
                                                 : p.half;
    if (std::abs(p.center.x) + ext.x > 9.0 || std::abs(p.center.y) + ext.y > 9.0 ||
        std::abs(p.center.z) + ext.z > 9.0)
      throw input_error("scene primitive outside the [-9,9]^3 working volume");
  }
  if (train_count < 4) throw input_error("scene needs at least 4 training poses");
  if (train_count > static_cast<int>(poses.size()))
    throw input_error("train_count exceeds pose count");
}

namespace {

bool hit_sphere(const Primitive& p, const Vec3& o, const Vec3& d, double t_min,
                double& t, Vec3& normal) {
  Vec3 oc = o - p.center;
  double b = oc.dot(d);
  double c = oc.dot(oc) - p.radius * p.radius;
  double disc = b * b - c;
  if (disc < 0) return false;
  double s = std::sqrt(disc);
  double root = -b - s;
  if (root <= t_min) root = -b + s;
  if (root <= t_min) return false;
  t = root;
  normal = (o + d * t - p.center).normalized();
  return true;
}

bool hit_box(const Primitive& p, const Vec3& o, const Vec3& d, double t_min, double& t,
             Vec3& normal) {
  Vec3 lo = p.center - p.half, hi = p.center + p.half;
  double t0 = -1e30, t1 = 1e30;
  int axis0 = -1;
  const double od[3] = {o.x, o.y, o.z};
  const double dd[3] = {d.x, d.y, d.z};
  const double lov[3] = {lo.x, lo.y, lo.z};
  const double hiv[3] = {hi.x, hi.y, hi.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dd[a]) < 1e-12) {
      if (od[a] < lov[a] || od[a] > hiv[a]) return false;
      continue;
    }
    double ta = (lov[a] - od[a]) / dd[a];
    double tb = (hiv[a] - od[a]) / dd[a];
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis0 = a;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  if (t0 <= t_min || axis0 < 0) return false;
  t = t0;
  double n[3] = {0, 0, 0};
  n[axis0] = dd[axis0] > 0 ? -1.0 : 1.0;
  normal = {n[0], n[1], n[2]};
  return true;
}

}  // namespace

std::optional<SceneHit> intersect_scene(const SceneSpec& scene, const Vec3& origin,
                                        const Vec3& dir, double t_min) {
  std::optional<SceneHit> best;
  for (const auto& p : scene.primitives) {
    double t;
    Vec3 normal;
    bool ok = p.kind == Primitive::Kind::Sphere
                  ? hit_sphere(p, origin, dir, t_min, t, normal)
                  : hit_box(p, origin, dir, t_min, t, normal);
    if (ok && (!best || t < best->t)) best = SceneHit{t, normal, &p};
  }
  return best;
}

Image degrade(const Image& clean, const DepthMap& depth, const WaterParams& params) {
  if (clean.width != depth.width || clean.height != depth.height)
    throw input_error("degrade: image/depth shape mismatch");
  params.validate();
  for (double d : depth.d)
    if (d < 0) throw input_error("degrade: negative depth");
  Image out(clean.width, clean.height);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < clean.height; ++v)
    for (int u = 0; u < clean.width; ++u) {
      double d = depth.at(v, u);
      for (int c = 0; c < 3; ++c) {
        double direct = clean.at(v, u, c) * std::exp(-params.beta_d[c] * d);
        double back = params.b_inf[c] * (1.0 - std::exp(-params.beta_b[c] * d));
        out.at(v, u, c) = std::clamp(direct + back, 0.0, 1.0);
      }
    }
  return out;
}

std::pair<Image, DepthMap> render_clean(const SceneSpec& scene, const CameraPose& pose) {
  scene.validate();
  pose.validate();
  Image img(pose.width, pose.height);
  DepthMap depth(pose.width, pose.height);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < pose.height; ++v)
    for (int u = 0; u < pose.width; ++u) {
      Ray ray = generate_ray(pose, u, v, scene.t_near, scene.t_far);
      auto hit = intersect_scene(scene, ray.origin, ray.direction);
      if (hit) {
        // fixed world-space light so a surface point shades identically from
        // every viewpoint; view-dependent shading would put a floor on the
        // achievable cross-view consistency of the ground truth itself
        static const Vec3 kLight = Vec3{0.3, -0.25, -1.0}.normalized();
        double lambert = std::max(0.0, hit->normal.dot(kLight * -1.0));
        double shade = 0.25 + 0.75 * lambert;
        for (int c = 0; c < 3; ++c) {
          double alb = c == 0 ? hit->prim->albedo.x
                              : (c == 1 ? hit->prim->albedo.y : hit->prim->albedo.z);
          img.at(v, u, c) = std::clamp(alb * shade, 0.0, 1.0);
        }
        depth.at(v, u) = hit->t;
      } else {
        img.at(v, u, 0) = scene.background.x;
        img.at(v, u, 1) = scene.background.y;
        img.at(v, u, 2) = scene.background.z;
        depth.at(v, u) = scene.t_far;
        depth.valid[static_cast<size_t>(v) * pose.width + u] = 0;
      }
    }
  return {std::move(img), std::move(depth)};
}

static CameraPose look_at_pose(const Vec3& eye, const Vec3& target, int width,
                               int height, double focal) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 up{0, 0, 1};
  Vec3 right{up.y * fwd.z - up.z * fwd.y, up.z * fwd.x - up.x * fwd.z,
             up.x * fwd.y - up.y * fwd.x};
  right = right.normalized();
  Vec3 down{fwd.y * right.z - fwd.z * right.y, fwd.z * right.x - fwd.x * right.z,
            fwd.x * right.y - fwd.y * right.x};
  CameraPose p;
  // world-from-camera columns: x = right, y = fwd x right, z = fwd
  p.rotation.m[0] = right.x;
  p.rotation.m[3] = right.y;
  p.rotation.m[6] = right.z;
  p.rotation.m[1] = down.x;
  p.rotation.m[4] = down.y;
  p.rotation.m[7] = down.z;
  p.rotation.m[2] = fwd.x;
  p.rotation.m[5] = fwd.y;
  p.rotation.m[8] = fwd.z;
  p.translation = eye;
  p.fx = p.fy = focal;
  p.cx = width / 2.0;
  p.cy = height / 2.0;
  p.width = width;
  p.height = height;
  return p;
}

SceneSpec make_default_scene(uint64_t seed, int width, int height, int n_train,
                             int n_test) {
  SceneSpec scene;
  std::mt19937 rng(static_cast<uint32_t>(seed));
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Spheres only: box face edges are shading discontinuities without a depth
  // jump, which puts a hard ceiling on the cross-view consistency of the
  // ground truth itself (warping resamples across the edge). Sphere shading is
  // smooth everywhere and sphere silhouettes are depth edges, which the
  // consistency mask already excludes. The ground is a wide, gently curved cap.
  Primitive floor;
  floor.kind = Primitive::Kind::Sphere;
  floor.center = {0, 0, -4.8};
  floor.radius = 4.0;
  floor.albedo = {0.75, 0.72, 0.65};
  scene.primitives.push_back(floor);

  const int n_objects = 6;
  for (int i = 0; i < n_objects; ++i) {
    Primitive p;
    p.kind = Primitive::Kind::Sphere;
    double ang = 2.0 * M_PI * (i + uni(rng) * 0.5) / n_objects;
    double rad = 0.25 + 0.4 * uni(rng);
    double size = 0.12 + 0.18 * uni(rng);
    p.center = {rad * std::cos(ang), rad * std::sin(ang), -0.8 + size + 0.35 * uni(rng)};
    p.radius = size;
    p.half = {size, size, size};
    // vivid, channel-diverse albedos
    p.albedo = {0.15 + 0.8 * uni(rng), 0.15 + 0.8 * uni(rng), 0.15 + 0.8 * uni(rng)};
    scene.primitives.push_back(p);
  }

  const int total = n_train + n_test;
  const double radius = 2.8, z_eye = 0.9;
  const double focal = 0.9 * width;
  for (int i = 0; i < total; ++i) {
    double theta = 2.0 * M_PI * i / total;
    Vec3 eye{radius * std::cos(theta), radius * std::sin(theta), z_eye};
    scene.poses.push_back(look_at_pose(eye, {0, 0, -0.2}, width, height, focal));
  }
  scene.train_count = n_train;
  scene.t_near = 1.0;
  scene.t_far = 5.0;
  return scene;
}

void make_dataset(const SceneSpec& scene, const WaterParams& params,
                  const std::string& out_dir, uint64_t seed) {
  scene.validate();
  params.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create dataset directory " + out_dir + ": " + ec.message());

  DatasetManifest m;
  m.width = scene.poses[0].width;
  m.height = scene.poses[0].height;
  m.t_near = scene.t_near;
  m.t_far = scene.t_far;
  m.seed = seed;
  m.water = params;
  m.poses = scene.poses;

  char name[64];
  for (size_t i = 0; i < scene.poses.size(); ++i) {
    auto [clean, depth] = render_clean(scene, scene.poses[i]);
    FrameInfo f;
    std::snprintf(name, sizeof(name), "frame_%03zu_clean.png", i);
    f.clean = name;
    write_png(out_dir + "/" + f.clean, clean);
    std::snprintf(name, sizeof(name), "frame_%03zu_depth.pfm", i);
    f.depth = name;
    write_pfm(out_dir + "/" + f.depth, depth);

    // Degrade the quantized clean image so the on-disk artifacts are exactly
    // reproducible from each other.
    Image clean_q = read_png(out_dir + "/" + f.clean);
    Image deg = degrade(clean_q, depth, params);
    std::snprintf(name, sizeof(name), "frame_%03zu_degraded.png", i);
    f.degraded = name;
    write_png(out_dir + "/" + f.degraded, deg);

    Image deg_q = read_png(out_dir + "/" + f.degraded);
    Image he = histogram_equalize(deg_q);
    std::snprintf(name, sizeof(name), "frame_%03zu_he.png", i);
    f.he = name;
    write_png(out_dir + "/" + f.he, he);

    f.split = static_cast<int>(i) < scene.train_count ? "train" : "test";
    m.frames.push_back(f);
  }
  m.save(out_dir + "/manifest.json");
}

}  // namespace aqua
