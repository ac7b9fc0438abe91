#include "aqua/geometry.hpp"

#include <numbers>
#include <string>

namespace aqua {

bool Mat3::is_rotation(double tol) const {
  // R * R^T == I: pairwise dot products of the rows
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) acc += m[r * 3 + k] * m[c * 3 + k];
      if (std::abs(acc - (r == c ? 1.0 : 0.0)) > tol) return false;
    }
  double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
  return std::abs(det - 1.0) <= tol;
}

void CameraPose::validate() const {
  if (!rotation.is_rotation())
    throw input_error("camera rotation is not orthonormal with det +1");
  if (fx <= 0 || fy <= 0) throw input_error("focal lengths must be positive");
  if (cx < 0 || cx >= width || cy < 0 || cy >= height)
    throw input_error("principal point outside image bounds");
}

bool CameraPose::project(const Vec3& p, double& u, double& v, double& depth) const {
  Vec3 pc = rotation.transposed() * (p - translation);
  depth = pc.z;
  if (pc.z <= 0) return false;
  u = fx * pc.x / pc.z + cx;
  v = fy * pc.y / pc.z + cy;
  return true;
}

Ray generate_ray(const CameraPose& pose, double u, double v, double t_near,
                 double t_far) {
  Vec3 dir_cam{(u - pose.cx) / pose.fx, (v - pose.cy) / pose.fy, 1.0};
  Ray ray;
  ray.origin = pose.center();
  ray.direction = (pose.rotation * dir_cam).normalized();
  ray.t_near = t_near;
  ray.t_far = t_far;
  return ray;
}

std::vector<Ray> generate_rays(const CameraPose& pose,
                               const std::vector<std::pair<double, double>>& pixels,
                               double t_near, double t_far) {
  pose.validate();
  if (!(t_near >= 0 && t_near < t_far)) throw input_error("need 0 <= t_near < t_far");
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (auto [u, v] : pixels) {
    if (u < 0 || u >= pose.width || v < 0 || v >= pose.height)
      throw input_error("pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") outside image bounds");
    rays.push_back(generate_ray(pose, u, v, t_near, t_far));
  }
  return rays;
}

RaySamples stratified_sample(const Ray& ray, int n, std::mt19937* rng) {
  if (n < 2) throw config_error("stratified_sample needs n >= 2");
  RaySamples s;
  s.t.resize(n);
  s.delta.resize(n);
  s.points.resize(n);
  const double bin = (ray.t_far - ray.t_near) / n;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    double jitter = rng ? uni(*rng) : 0.5;
    s.t[i] = ray.t_near + (i + jitter) * bin;
  }
  for (int i = 0; i < n; ++i) {
    s.delta[i] = (i + 1 < n ? s.t[i + 1] : ray.t_far) - s.t[i];
    s.points[i] = ray.origin + ray.direction * s.t[i];
  }
  return s;
}

void positional_encode(const double* x, int dim, int num_freqs, bool include_input,
                       double* out) {
  int o = 0;
  if (include_input)
    for (int d = 0; d < dim; ++d) out[o++] = x[d];
  double freq = std::numbers::pi;
  for (int k = 0; k < num_freqs; ++k) {
    for (int d = 0; d < dim; ++d) out[o++] = std::sin(freq * x[d]);
    for (int d = 0; d < dim; ++d) out[o++] = std::cos(freq * x[d]);
    freq *= 2.0;
  }
}

}  // namespace aqua
