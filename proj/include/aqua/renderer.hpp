#pragma once

// Volume rendering along one ray, in two flavors: the plain path and the
// attenuated path whose per-channel transmittance also accumulates the running
// product of illuminance attenuation. Both paths share the same front-to-back
// accumulation order, so the attenuated render with an all-ones profile equals
// the plain render bitwise. Also hosts the batch-averaged smoothing of the
// attenuation profile and the analytic backward passes for all of it.

#include <cmath>
#include <vector>

#include "aqua/activations.hpp"
#include "aqua/errors.hpp"
#include "aqua/tensor.hpp"

namespace aqua {

// T(i) = exp(-sum_{j<i} sigma_j * delta_j), T(0) = 1.
template <typename T>
void transmittance(const T* sigma, const T* delta, int n, T* out) {
  T cum = T(0);
  for (int i = 0; i < n; ++i) {
    if (sigma[i] < T(0)) throw input_error("transmittance: negative density");
    if (delta[i] <= T(0)) throw input_error("transmittance: non-positive interval");
    out[i] = std::exp(-cum);
    cum += sigma[i] * delta[i];
  }
}

// T_lambda(i) = T(i) * prod_{j<i} phi_lambda(j); phi is [n x 3], out is [n x 3].
template <typename T>
void attenuated_transmittance(const T* sigma, const T* delta, const T* phi, int n,
                              T* out) {
  std::vector<T> tv(n);
  transmittance(sigma, delta, n, tv.data());
  T prod[3] = {T(1), T(1), T(1)};
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      T ph = phi[i * 3 + c];
      if (!(ph > T(0) && ph <= T(1)))
        throw input_error("attenuated_transmittance: phi outside (0, 1]");
      out[i * 3 + c] = tv[i] * prod[c];
    }
    for (int c = 0; c < 3; ++c) prod[c] *= phi[i * 3 + c];
  }
}

template <typename T>
struct PixelRadiance {
  T rgb[3] = {T(0), T(0), T(0)};
  T opacity = T(0);
};

// Per-ray cache for the backward pass.
template <typename T>
struct RenderCache {
  int n = 0;
  bool attenuated = false;
  std::vector<T> trans;  // n, channel-free transmittance
  std::vector<T> alpha;  // n
  std::vector<T> prod;   // n x 3, prefix products of the profile (ones when plain)
  bool valid = false;
};

// rgb_c = sum_i (T_i * P_ic) * alpha_i * color_ic. Pass profile = nullptr for
// the plain render (P == 1). Kept out of line so both render paths run the
// exact same machine code: inlining into the two call sites would let the
// compiler contract/vectorize each copy differently, breaking the bitwise
// equality of the attenuated path at profile == 1 with the plain path.
template <typename T>
#if defined(__GNUC__)
__attribute__((noinline, noclone))
#endif
PixelRadiance<T>
render_core(const T* sigma, const T* color, const T* delta, int n, const T* profile,
            RenderCache<T>* cache) {
  PixelRadiance<T> out;
  std::vector<T> tv(n), alpha(n);
  transmittance(sigma, delta, n, tv.data());
  // Prefix products of the profile; all ones on the plain path. Keeping one
  // unconditional accumulation loop makes the two paths bitwise identical at
  // profile == 1 (no branch for the compiler to specialize on).
  std::vector<T> prod(static_cast<size_t>(n) * 3, T(1));
  if (profile) {
    T run[3] = {T(1), T(1), T(1)};
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        T ph = profile[i * 3 + c];
        if (!(ph > T(0) && ph <= T(1))) throw input_error("render: phi outside (0, 1]");
        prod[i * 3 + c] = run[c];
      }
      for (int c = 0; c < 3; ++c) run[c] *= profile[i * 3 + c];
    }
  }
  for (int i = 0; i < n; ++i) {
    alpha[i] = -std::expm1(-sigma[i] * delta[i]);
    for (int c = 0; c < 3; ++c) {
      T w = (tv[i] * prod[i * 3 + c]) * alpha[i];
      out.rgb[c] += w * color[i * 3 + c];
    }
    out.opacity += tv[i] * alpha[i];
  }
  if (cache) {
    cache->n = n;
    cache->attenuated = profile != nullptr;
    cache->trans = std::move(tv);
    cache->alpha = std::move(alpha);
    cache->prod = std::move(prod);
    cache->valid = true;
  }
  return out;
}

template <typename T>
PixelRadiance<T> render_standard(const T* sigma, const T* color, const T* delta, int n,
                                 RenderCache<T>* cache = nullptr) {
  return render_core(sigma, color, delta, n, static_cast<const T*>(nullptr), cache);
}

template <typename T>
PixelRadiance<T> render_attenuated(const T* sigma, const T* color, const T* delta,
                                   int n, const T* profile,
                                   RenderCache<T>* cache = nullptr) {
  return render_core(sigma, color, delta, n, profile, cache);
}

// Test-time entry point: the restored image is the plain render, attenuation
// removed.
template <typename T>
PixelRadiance<T> restore_render(const T* sigma, const T* color, const T* delta, int n,
                                RenderCache<T>* cache = nullptr) {
  return render_standard(sigma, color, delta, n, cache);
}

// Gradients of the rendered rgb w.r.t. the per-sample inputs. dprofile may be
// null for the plain path. All output buffers are accumulated into.
template <typename T>
void render_backward(const T* sigma, const T* color, const T* delta, int n,
                     const T* profile, const RenderCache<T>& cache, const T drgb[3],
                     T* dsigma, T* dcolor, T* dprofile) {
  if (!cache.valid || cache.n != n)
    throw usage_error("render_backward: missing or mismatched forward cache");
  if ((profile != nullptr) != cache.attenuated)
    throw usage_error("render_backward: cache does not match render path");
  // suffix_c(i) = sum_{j >= i} drgb_c * w_jc * color_jc, per channel
  std::vector<T> suffix(3, T(0));
  std::vector<T> suffix_at(static_cast<size_t>(n) * 3);
  for (int i = n - 1; i >= 0; --i) {
    for (int c = 0; c < 3; ++c) {
      T p = cache.prod[i * 3 + c];
      T w = (cache.trans[i] * p) * cache.alpha[i];
      suffix[c] += drgb[c] * w * color[i * 3 + c];
      suffix_at[i * 3 + c] = suffix[c];
    }
  }
  for (int i = 0; i < n; ++i) {
    T dalpha_term = T(0);  // d rgb / d sigma_i via alpha_i
    T dtrans_term = T(0);  // d rgb / d sigma_i via T_j, j > i
    for (int c = 0; c < 3; ++c) {
      T p = cache.prod[i * 3 + c];
      T w = (cache.trans[i] * p) * cache.alpha[i];
      dcolor[i * 3 + c] += drgb[c] * w;
      dalpha_term += drgb[c] * cache.trans[i] * p * color[i * 3 + c];
      T suf = (i + 1 < n) ? suffix_at[(i + 1) * 3 + c] : T(0);
      dtrans_term += suf;
      if (dprofile && profile) {
        dprofile[i * 3 + c] += suf / profile[i * 3 + c];
      }
    }
    // d alpha_i / d sigma_i = delta_i * (1 - alpha_i)
    dsigma[i] += dalpha_term * delta[i] * (T(1) - cache.alpha[i]) - delta[i] * dtrans_term;
  }
}

// --- Eq.-style batch-averaged smoothing of the attenuation profile ---

template <typename T>
struct SmoothCache {
  int batch = 0, n = 0;
  Tensor<T> mean;   // [n x 3]
  Tensor<T> logit;  // [n x 3]
  Tensor<T> conv;   // [n x 3]
  Tensor<T> out;    // [n x 3]
  bool valid = false;
};

// phi_batch: [batch * n x 3], ray-major. kernel: [3 x k]. Produces one shared
// profile [n x 3]: mean over the batch's rays per sample index, a 1-D
// convolution along the sample axis in logit space (edge-replicated padding),
// then squashed back into (phi_floor, 1].
template <typename T>
Tensor<T> batch_average_smooth(const Tensor<T>& phi_batch, int batch, int n,
                               const Tensor<T>& kernel, double phi_floor,
                               SmoothCache<T>* cache = nullptr) {
  if (batch < 1) throw usage_error("batch_average_smooth: empty batch");
  if (phi_batch.rows() != static_cast<int64_t>(batch) * n || phi_batch.cols() != 3)
    throw usage_error("batch_average_smooth: phi batch shape mismatch");
  const int k = static_cast<int>(kernel.cols());
  const int off = k / 2;
  const T floor = static_cast<T>(phi_floor);

  Tensor<T> mean({n, 3}), lg({n, 3}), cv({n, 3}), out({n, 3});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      T acc = T(0);
      for (int r = 0; r < batch; ++r) acc += phi_batch(int64_t(r) * n + i, c);
      mean(i, c) = acc / static_cast<T>(batch);
      T s = (mean(i, c) - floor) / (T(1) - floor);
      lg(i, c) = std::log(s / (T(1) - s));
    }
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      T acc = T(0);
      for (int j = 0; j < k; ++j) {
        int src = i + j - off;
        src = src < 0 ? 0 : (src >= n ? n - 1 : src);
        acc += kernel(c, j) * lg(src, c);
      }
      cv(i, c) = acc;
      out(i, c) = floor + (T(1) - floor) * sigmoid(cv(i, c));
    }
  if (cache) {
    cache->batch = batch;
    cache->n = n;
    cache->mean = mean;
    cache->logit = lg;
    cache->conv = cv;
    cache->out = out;
    cache->valid = true;
  }
  return out;
}

// dprofile -> gradient w.r.t. each ray's raw phi (accumulated into dphi_batch)
// and w.r.t. the kernel (accumulated into dkernel).
template <typename T>
void batch_average_smooth_backward(const Tensor<T>& kernel, double phi_floor,
                                   const SmoothCache<T>& cache,
                                   const Tensor<T>& dprofile, Tensor<T>& dphi_batch,
                                   Tensor<T>& dkernel) {
  if (!cache.valid) throw usage_error("smooth backward: missing forward cache");
  const int n = cache.n, batch = cache.batch;
  const int k = static_cast<int>(kernel.cols());
  const int off = k / 2;
  const T floor = static_cast<T>(phi_floor);

  Tensor<T> dconv({n, 3}), dlogit({n, 3});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      T s = (cache.out(i, c) - floor) / (T(1) - floor);
      dconv(i, c) = dprofile(i, c) * (T(1) - floor) * s * (T(1) - s);
    }
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < k; ++j) {
        int src = i + j - off;
        src = src < 0 ? 0 : (src >= n ? n - 1 : src);
        dkernel(c, j) += dconv(i, c) * cache.logit(src, c);
        dlogit(src, c) += dconv(i, c) * kernel(c, j);
      }
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      T s = (cache.mean(i, c) - floor) / (T(1) - floor);
      T dmean = dlogit(i, c) / (s * (T(1) - s) * (T(1) - floor));
      T per_ray = dmean / static_cast<T>(batch);
      for (int r = 0; r < batch; ++r) dphi_batch(int64_t(r) * n + i, c) += per_ray;
    }
}

}  // namespace aqua
