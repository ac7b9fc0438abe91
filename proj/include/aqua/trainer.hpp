#pragma once

// The optimization loop: ray batching, dual-path rendering (attenuated render
// against the raw degraded inputs, restored render against histogram-equalized
// pseudo ground truth), Adam updates on a log-linear LR schedule, periodic
// checkpoints, and the smoothing ablation toggle.

#include <random>
#include <string>
#include <vector>

#include "aqua/field.hpp"
#include "aqua/manifest.hpp"
#include "aqua/photometry.hpp"

namespace aqua {

struct TrainConfig {
  int rays_per_batch = 256;
  int samples_per_ray = 32;
  int total_iters = 5000;
  double lr_start = 5e-4;
  double lr_end = 5e-6;
  double alpha = 5e-4;  // weight of the distribution loss
  uint64_t seed = 1;
  bool smoothing_enabled = true;
  int checkpoint_every = 1000;
  int histogram_bins = 32;
  double sinkhorn_epsilon = 1e-3;
  int sinkhorn_max_iters = 50;
  double sinkhorn_tol = 1e-6;
  FieldArch arch = FieldArch::desk_scale();

  void validate() const;
};

// Log-linear interpolation between lr_start and lr_end.
double lr_at(int iter, const TrainConfig& config);

struct AdamState {
  std::vector<TensorF> m, v;
  int64_t step = 0;
  float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;

  static AdamState like(const FieldParams<float>& params);
};

// Standard bias-corrected Adam. Returns false (params untouched) when any
// gradient entry is non-finite.
bool adam_step(FieldParams<float>& params, const FieldParams<float>& grads,
               AdamState& state, float lr);

struct StepReport {
  LossReport<double> loss;
  bool applied = true;  // false when the iteration was skipped (non-finite)
  bool sinkhorn_converged = true;
};

// One training batch given gathered supervision pixels. Exposed for tests;
// `train` drives it.
class Trainer {
 public:
  Trainer(const Dataset& dataset, const TrainConfig& config);

  StepReport step();
  void run(const std::string& out_dir);  // full loop with logging/checkpoints

  const FieldParams<float>& params() const { return params_; }
  FieldParams<float>& params() { return params_; }
  int iteration() const { return iter_; }

 private:
  struct PixelRef {
    int view, u, v;
  };
  void reshuffle();

  const Dataset& dataset_;
  TrainConfig config_;
  FieldParams<float> params_;
  AdamState adam_;
  std::mt19937 rng_;
  std::vector<PixelRef> pool_;
  size_t pool_pos_ = 0;
  int iter_ = 0;
};

// Render a full view with deterministic (bin-midpoint) sampling. In degraded
// mode the smoothed attenuation profile is recomputed per pixel batch with the
// training procedure; restored mode bypasses attenuation entirely.
enum class RenderMode { Degraded, Restored };
Image render_view(const FieldParams<float>& params, const CameraPose& pose,
                  double t_near, double t_far, int samples_per_ray, RenderMode mode,
                  bool smoothing_enabled = true, int pixel_batch = 1024);

}  // namespace aqua
