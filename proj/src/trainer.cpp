#include "aqua/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aqua/renderer.hpp"

namespace aqua {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (rays_per_batch < 1) throw config_error("rays_per_batch must be >= 1");
  if (samples_per_ray < 2) throw config_error("samples_per_ray must be >= 2");
  if (total_iters < 0) throw config_error("total_iters must be >= 0");
  if (!(lr_start >= lr_end && lr_end > 0))
    throw config_error("need lr_start >= lr_end > 0");
  if (alpha < 0) throw config_error("alpha must be >= 0");
  if (histogram_bins < 2) throw config_error("histogram_bins must be >= 2");
  if (!(sinkhorn_epsilon > 0)) throw config_error("sinkhorn_epsilon must be > 0");
}

double lr_at(int iter, const TrainConfig& config) {
  if (iter < 0 || iter > config.total_iters) throw usage_error("lr_at: iter out of range");
  if (config.total_iters == 0) return config.lr_start;
  double t = static_cast<double>(iter) / config.total_iters;
  return config.lr_start * std::pow(config.lr_end / config.lr_start, t);
}

AdamState AdamState::like(const FieldParams<float>& params) {
  AdamState s;
  s.m.reserve(params.tensors.size());
  s.v.reserve(params.tensors.size());
  for (const auto& t : params.tensors) {
    s.m.emplace_back(t.shape);
    s.v.emplace_back(t.shape);
  }
  return s;
}

bool adam_step(FieldParams<float>& params, const FieldParams<float>& grads,
               AdamState& state, float lr) {
  if (params.tensors.size() != grads.tensors.size() ||
      state.m.size() != params.tensors.size())
    throw usage_error("adam_step: shape mismatch");
  for (const auto& g : grads.tensors)
    if (!g.all_finite()) return false;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), state.step);
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), state.step);
  for (size_t t = 0; t < params.tensors.size(); ++t) {
    float* p = params.tensors[t].data.data();
    const float* g = grads.tensors[t].data.data();
    float* m = state.m[t].data.data();
    float* v = state.v[t].data.data();
    const int64_t n = params.tensors[t].numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
      m[i] = state.beta1 * m[i] + (1.0f - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0f - state.beta2) * g[i] * g[i];
      float mhat = m[i] / static_cast<float>(bc1);
      float vhat = v[i] / static_cast<float>(bc2);
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
  return true;
}

Trainer::Trainer(const Dataset& dataset, const TrainConfig& config)
    : dataset_(dataset),
      config_(config),
      params_(init_params<float>(config.arch, config.seed)),
      adam_(AdamState::like(params_)),
      rng_(static_cast<uint32_t>(config.seed ^ 0x9e3779b9u)) {
  config_.validate();
  if (dataset_.train_ids.empty()) throw usage_error("dataset has no training frames");
  const auto& m = dataset_.manifest;
  pool_.reserve(dataset_.train_ids.size() * static_cast<size_t>(m.width) * m.height);
  for (int id : dataset_.train_ids)
    for (int v = 0; v < m.height; ++v)
      for (int u = 0; u < m.width; ++u) pool_.push_back({id, u, v});
  reshuffle();
}

void Trainer::reshuffle() {
  std::shuffle(pool_.begin(), pool_.end(), rng_);
  pool_pos_ = 0;
}

StepReport Trainer::step() {
  const auto& m = dataset_.manifest;
  const int B = config_.rays_per_batch;
  const int N = config_.samples_per_ray;
  const FieldArch& arch = config_.arch;
  const int64_t total = static_cast<int64_t>(B) * N;

  // gather this batch's pixels
  std::vector<PixelRef> batch(B);
  for (int r = 0; r < B; ++r) {
    if (pool_pos_ >= pool_.size()) reshuffle();
    batch[r] = pool_[pool_pos_++];
  }

  // sample rays (jittered) and encode
  TensorF pos_enc({total, arch.pos_dim()});
  TensorF dir_enc({total, arch.dir_dim()});
  std::vector<float> deltas(total);
  TensorF gt({B, 3}), he({B, 3});
  std::vector<double> enc_buf(std::max(arch.pos_dim(), arch.dir_dim()));
  for (int r = 0; r < B; ++r) {
    const PixelRef& px = batch[r];
    const CameraPose& pose = m.poses[px.view];
    Ray ray = generate_ray(pose, px.u, px.v, m.t_near, m.t_far);
    RaySamples s = stratified_sample(ray, N, &rng_);
    double dvec[3] = {ray.direction.x, ray.direction.y, ray.direction.z};
    positional_encode(dvec, 3, arch.dir_freqs, arch.include_input, enc_buf.data());
    std::vector<float> dir_row(arch.dir_dim());
    for (int k = 0; k < arch.dir_dim(); ++k) dir_row[k] = static_cast<float>(enc_buf[k]);
    for (int i = 0; i < N; ++i) {
      const int64_t row = static_cast<int64_t>(r) * N + i;
      double pvec[3] = {s.points[i].x, s.points[i].y, s.points[i].z};
      positional_encode(pvec, 3, arch.pos_freqs, arch.include_input, enc_buf.data());
      for (int k = 0; k < arch.pos_dim(); ++k)
        pos_enc(row, k) = static_cast<float>(enc_buf[k]);
      std::copy(dir_row.begin(), dir_row.end(), dir_enc.row(row));
      deltas[row] = static_cast<float>(s.delta[i]);
    }
    for (int c = 0; c < 3; ++c) {
      gt(r, c) = static_cast<float>(dataset_.degraded[px.view].at(px.v, px.u, c));
      he(r, c) = static_cast<float>(dataset_.he[px.view].at(px.v, px.u, c));
    }
  }

  FieldCache<float> cache;
  field_forward(params_, pos_enc, dir_enc, cache);

  // smoothed (or raw per-ray) attenuation profile
  SmoothCache<float> smooth_cache;
  TensorF profile;
  const TensorF& kernel = params_.at(field_idx::smooth_k(arch));
  if (config_.smoothing_enabled)
    profile = batch_average_smooth(cache.phi, B, N, kernel, arch.phi_floor, &smooth_cache);

  // both render paths per ray
  TensorF att_px({B, 3}), rest_px({B, 3});
  std::vector<RenderCache<float>> cache_att(B), cache_std(B);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < B; ++r) {
    const int64_t off = static_cast<int64_t>(r) * N;
    const float* sigma = cache.sigma.data.data() + off;
    const float* color = cache.color.row(off);
    const float* delta = deltas.data() + off;
    const float* prof = config_.smoothing_enabled ? profile.data.data() : cache.phi.row(off);
    auto att = render_attenuated(sigma, color, delta, N, prof, &cache_att[r]);
    auto rst = render_standard(sigma, color, delta, N, &cache_std[r]);
    for (int c = 0; c < 3; ++c) {
      att_px(r, c) = att.rgb[c];
      rest_px(r, c) = rst.rgb[c];
    }
  }

  // losses
  TensorF d_att;
  float l_recon = reconstruction_loss(att_px, gt, &d_att);
  float l_sink = 0.0f;
  bool sk_converged = true;
  DistributionLoss<float> dist;
  if (config_.alpha > 0) {
    dist = distribution_loss(rest_px, he, config_.histogram_bins,
                             static_cast<float>(config_.sinkhorn_epsilon),
                             config_.sinkhorn_max_iters,
                             static_cast<float>(config_.sinkhorn_tol));
    l_sink = dist.value;
    sk_converged = dist.converged;
  }
  StepReport report;
  report.loss = total_loss<double>(l_recon, l_sink, config_.alpha);
  report.sinkhorn_converged = sk_converged;
  if (!std::isfinite(report.loss.total)) {
    report.applied = false;
    ++iter_;
    return report;
  }

  // backward through both render paths
  TensorF dsigma({total, 1}), dcolor({total, 3}), dphi({total, 3});
  TensorF dprofile({N, 3});
  const float alpha_f = static_cast<float>(config_.alpha);
  for (int r = 0; r < B; ++r) {
    const int64_t off = static_cast<int64_t>(r) * N;
    const float* sigma = cache.sigma.data.data() + off;
    const float* color = cache.color.row(off);
    const float* delta = deltas.data() + off;
    const float* prof = config_.smoothing_enabled ? profile.data.data() : cache.phi.row(off);
    float* dprof = config_.smoothing_enabled ? dprofile.data.data() : dphi.row(off);
    render_backward(sigma, color, delta, N, prof, cache_att[r], d_att.row(r),
                    dsigma.data.data() + off, dcolor.row(off), dprof);
    if (config_.alpha > 0) {
      float drgb[3] = {alpha_f * dist.grad_pixels(r, 0), alpha_f * dist.grad_pixels(r, 1),
                       alpha_f * dist.grad_pixels(r, 2)};
      render_backward(sigma, color, delta, N, static_cast<const float*>(nullptr),
                      cache_std[r], drgb, dsigma.data.data() + off, dcolor.row(off),
                      static_cast<float*>(nullptr));
    }
  }

  FieldParams<float> grads = make_zero_params<float>(arch);
  if (config_.smoothing_enabled)
    batch_average_smooth_backward(kernel, arch.phi_floor, smooth_cache, dprofile, dphi,
                                  grads.at(field_idx::smooth_k(arch)));
  field_backward(params_, cache, dsigma, dcolor, dphi, grads);

  float lr = static_cast<float>(lr_at(iter_, config_));
  report.applied = adam_step(params_, grads, adam_, lr);
  ++iter_;
  return report;
}

void Trainer::run(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory " + out_dir + ": " + ec.message());
  std::ofstream log(out_dir + "/train_log.txt");
  if (!log) throw io_error("cannot open training log in " + out_dir);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "# aquafield training log\n"
                "# seed=%llu iters=%d rays_per_batch=%d samples_per_ray=%d alpha=%.17g "
                "smoothing=%d bins=%d sinkhorn_eps=%.17g\n",
                static_cast<unsigned long long>(config_.seed), config_.total_iters,
                config_.rays_per_batch, config_.samples_per_ray, config_.alpha,
                config_.smoothing_enabled ? 1 : 0, config_.histogram_bins,
                config_.sinkhorn_epsilon);
  log << buf;

  auto ckpt_path = [&](int iter) {
    char name[64];
    std::snprintf(name, sizeof(name), "ckpt_%06d.aqfd", iter);
    return out_dir + "/" + name;
  };
  save_checkpoint(ckpt_path(0), params_);
  for (int it = 0; it < config_.total_iters; ++it) {
    double lr = lr_at(it, config_);
    StepReport r = step();
    std::snprintf(buf, sizeof(buf),
                  "iter=%d lr=%.17g l_recon=%.17g l_sinkhorn=%.17g total=%.17g%s\n",
                  it, lr, r.loss.l_recon, r.loss.l_sinkhorn, r.loss.total,
                  r.applied ? "" : " skipped=1");
    log << buf;
    if (config_.checkpoint_every > 0 && (it + 1) % config_.checkpoint_every == 0 &&
        it + 1 != config_.total_iters)
      save_checkpoint(ckpt_path(it + 1), params_);
  }
  save_checkpoint(out_dir + "/ckpt_final.aqfd", params_);
  log.flush();
  if (!log) throw io_error("short write on training log in " + out_dir);
}

Image render_view(const FieldParams<float>& params, const CameraPose& pose,
                  double t_near, double t_far, int samples_per_ray, RenderMode mode,
                  bool smoothing_enabled, int pixel_batch) {
  pose.validate();
  const FieldArch& arch = params.arch;
  const int N = samples_per_ray;
  Image out(pose.width, pose.height);
  const int64_t npix = static_cast<int64_t>(pose.width) * pose.height;
  std::vector<double> enc_buf(std::max(arch.pos_dim(), arch.dir_dim()));

  for (int64_t start = 0; start < npix; start += pixel_batch) {
    const int B = static_cast<int>(std::min<int64_t>(pixel_batch, npix - start));
    const int64_t total = static_cast<int64_t>(B) * N;
    TensorF pos_enc({total, arch.pos_dim()});
    TensorF dir_enc({total, arch.dir_dim()});
    std::vector<float> deltas(total);
    for (int r = 0; r < B; ++r) {
      const int64_t pix = start + r;
      const int u = static_cast<int>(pix % pose.width);
      const int v = static_cast<int>(pix / pose.width);
      Ray ray = generate_ray(pose, u, v, t_near, t_far);
      RaySamples s = stratified_sample(ray, N, nullptr);
      double dvec[3] = {ray.direction.x, ray.direction.y, ray.direction.z};
      positional_encode(dvec, 3, arch.dir_freqs, arch.include_input, enc_buf.data());
      std::vector<float> dir_row(arch.dir_dim());
      for (int k = 0; k < arch.dir_dim(); ++k) dir_row[k] = static_cast<float>(enc_buf[k]);
      for (int i = 0; i < N; ++i) {
        const int64_t row = static_cast<int64_t>(r) * N + i;
        double pvec[3] = {s.points[i].x, s.points[i].y, s.points[i].z};
        positional_encode(pvec, 3, arch.pos_freqs, arch.include_input, enc_buf.data());
        for (int k = 0; k < arch.pos_dim(); ++k)
          pos_enc(row, k) = static_cast<float>(enc_buf[k]);
        std::copy(dir_row.begin(), dir_row.end(), dir_enc.row(row));
        deltas[row] = static_cast<float>(s.delta[i]);
      }
    }
    FieldCache<float> cache;
    field_forward(params, pos_enc, dir_enc, cache);
    TensorF profile;
    if (mode == RenderMode::Degraded && smoothing_enabled)
      profile = batch_average_smooth(cache.phi, B, N,
                                     params.at(field_idx::smooth_k(arch)),
                                     arch.phi_floor, static_cast<SmoothCache<float>*>(nullptr));
#pragma omp parallel for schedule(static)
    for (int r = 0; r < B; ++r) {
      const int64_t off = static_cast<int64_t>(r) * N;
      const float* sigma = cache.sigma.data.data() + off;
      const float* color = cache.color.row(off);
      const float* delta = deltas.data() + off;
      PixelRadiance<float> px;
      if (mode == RenderMode::Restored) {
        px = restore_render(sigma, color, delta, N);
      } else {
        const float* prof = smoothing_enabled ? profile.data.data() : cache.phi.row(off);
        px = render_attenuated(sigma, color, delta, N, prof);
      }
      const int64_t pix = start + r;
      const int u = static_cast<int>(pix % pose.width);
      const int v = static_cast<int>(pix / pose.width);
      for (int c = 0; c < 3; ++c)
        out.at(v, u, c) = std::clamp(static_cast<double>(px.rgb[c]), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace aqua
