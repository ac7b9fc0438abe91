#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "aqua/errors.hpp"

namespace aqua {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    return {x / n, y / n, z / n};
  }
};

// Row-major 3x3 matrix.
struct Mat3 {
  double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.m[c * 3 + r] = m[r * 3 + c];
    return t;
  }
  bool is_rotation(double tol = 1e-6) const;
};

// Pinhole camera, world-from-camera transform. Camera looks along +z in its
// own frame; pixel (u, v) back-projects to ((u-cx)/fx, (v-cy)/fy, 1).
struct CameraPose {
  Mat3 rotation;     // world-from-camera
  Vec3 translation;  // camera center in world units
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
  Vec3 center() const { return translation; }
  // World point -> continuous pixel coordinates + depth along the camera z axis.
  // Returns false when the point is behind the camera.
  bool project(const Vec3& p, double& u, double& v, double& depth) const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  double t_near = 0, t_far = 0;
};

struct RaySamples {
  std::vector<double> t;      // ascending sample parameters
  std::vector<double> delta;  // interval lengths, delta[N-1] = t_far - t[N-1]
  std::vector<Vec3> points;
};

std::vector<Ray> generate_rays(const CameraPose& pose,
                               const std::vector<std::pair<double, double>>& pixels,
                               double t_near, double t_far);

Ray generate_ray(const CameraPose& pose, double u, double v, double t_near,
                 double t_far);

// One stratified sample per equal bin of [t_near, t_far]. Pass rng = nullptr
// for the deterministic bin-midpoint mode.
RaySamples stratified_sample(const Ray& ray, int n, std::mt19937* rng);

// [x?, sin(2^k pi x), cos(2^k pi x) for k = 0..L-1], elementwise per frequency.
void positional_encode(const double* x, int dim, int num_freqs, bool include_input,
                       double* out);

inline int encoding_dim(int dim, int num_freqs, bool include_input) {
  return dim * ((include_input ? 1 : 0) + 2 * num_freqs);
}

}  // namespace aqua
