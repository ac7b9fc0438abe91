#pragma once

// Synthetic underwater image formation and procedural scene/dataset
// generation with exact analytic depth.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aqua/geometry.hpp"
#include "aqua/image.hpp"
#include "aqua/manifest.hpp"

namespace aqua {

struct Primitive {
  enum class Kind { Sphere, Box } kind = Kind::Sphere;
  Vec3 center;
  double radius = 0;  // spheres
  Vec3 half;          // axis-aligned boxes
  Vec3 albedo;
};

struct SceneSpec {
  std::vector<Primitive> primitives;  // all inside the [-9, 9]^3 working volume
  Vec3 background{0.35, 0.4, 0.45};
  std::vector<CameraPose> poses;
  int train_count = 0;  // first train_count poses are the training split
  double t_near = 1.0, t_far = 5.0;

  void validate() const;
};

struct SceneHit {
  double t = 0;
  Vec3 normal;
  const Primitive* prim = nullptr;
};

// Nearest ray-primitive intersection with t > t_min, or nullopt.
std::optional<SceneHit> intersect_scene(const SceneSpec& scene, const Vec3& origin,
                                        const Vec3& dir, double t_min = 1e-9);

// I = J * exp(-beta_d * d) + B_inf * (1 - exp(-beta_b * d)), clamped to [0, 1].
Image degrade(const Image& clean, const DepthMap& depth, const WaterParams& params);

// Analytic first-hit render: headlight diffuse shading, exact depth (distance
// along the ray). Background pixels get the background color and an invalid
// depth equal to t_far.
std::pair<Image, DepthMap> render_clean(const SceneSpec& scene, const CameraPose& pose);

// Deterministic procedural scene: a floor slab plus seeded colored primitives,
// cameras on a circular arc facing the origin.
SceneSpec make_default_scene(uint64_t seed, int width, int height, int n_train,
                             int n_test);

// Writes clean/depth/degraded/HE artifacts for every pose plus manifest.json.
void make_dataset(const SceneSpec& scene, const WaterParams& params,
                  const std::string& out_dir, uint64_t seed);

}  // namespace aqua
