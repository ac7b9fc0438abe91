#pragma once

// The trainable neural field: a ReLU trunk producing density, a view-dependent
// color head, and a per-channel illuminance-attenuation head that sees only the
// trunk (position) feature. Forward caches activations; backward produces
// exact analytic gradients for every parameter.

#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "aqua/activations.hpp"
#include "aqua/errors.hpp"
#include "aqua/geometry.hpp"
#include "aqua/kernels.hpp"
#include "aqua/tensor.hpp"

namespace aqua {

struct FieldArch {
  int pos_freqs = 10;
  int dir_freqs = 4;
  bool include_input = true;
  int trunk_depth = 8;
  int trunk_width = 256;
  int skip_layer = 4;  // encoded position re-injected as extra input to this layer
  int color_hidden = 128;
  int atten_hidden = 64;
  int smooth_kernel = 5;  // length of the attenuation-profile smoothing kernel
  double phi_floor = 0.3;

  int pos_dim() const { return encoding_dim(3, pos_freqs, include_input); }
  int dir_dim() const { return encoding_dim(3, dir_freqs, include_input); }
  int trunk_in(int layer) const {
    if (layer == 0) return pos_dim();
    return layer == skip_layer ? trunk_width + pos_dim() : trunk_width;
  }
  bool operator==(const FieldArch&) const = default;

  // A small configuration that trains in reasonable time on one CPU core.
  static FieldArch desk_scale() {
    FieldArch a;
    a.trunk_depth = 4;
    a.trunk_width = 64;
    a.skip_layer = 2;
    a.color_hidden = 32;
    a.atten_hidden = 16;
    return a;
  }
};

// Tensor indices within FieldParams::tensors. Trunk weights/biases come first
// (W0, b0, W1, b1, ...), then the heads, then the smoothing kernel.
namespace field_idx {
inline int trunk_w(int l) { return 2 * l; }
inline int trunk_b(int l) { return 2 * l + 1; }
inline int sigma_w(const FieldArch& a) { return 2 * a.trunk_depth; }
inline int sigma_b(const FieldArch& a) { return 2 * a.trunk_depth + 1; }
inline int color_hw(const FieldArch& a) { return 2 * a.trunk_depth + 2; }
inline int color_hb(const FieldArch& a) { return 2 * a.trunk_depth + 3; }
inline int color_ow(const FieldArch& a) { return 2 * a.trunk_depth + 4; }
inline int color_ob(const FieldArch& a) { return 2 * a.trunk_depth + 5; }
inline int atten_hw(const FieldArch& a) { return 2 * a.trunk_depth + 6; }
inline int atten_hb(const FieldArch& a) { return 2 * a.trunk_depth + 7; }
inline int atten_ow(const FieldArch& a) { return 2 * a.trunk_depth + 8; }
inline int atten_ob(const FieldArch& a) { return 2 * a.trunk_depth + 9; }
inline int smooth_k(const FieldArch& a) { return 2 * a.trunk_depth + 10; }
inline int count(const FieldArch& a) { return 2 * a.trunk_depth + 11; }
}  // namespace field_idx

template <typename T>
struct FieldParams {
  FieldArch arch;
  std::vector<Tensor<T>> tensors;

  Tensor<T>& at(int i) { return tensors[i]; }
  const Tensor<T>& at(int i) const { return tensors[i]; }

  int64_t total_params() const {
    int64_t n = 0;
    for (const auto& t : tensors) n += t.numel();
    return n;
  }

  template <typename U>
  FieldParams<U> cast() const {
    FieldParams<U> out;
    out.arch = arch;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }
};

template <typename T>
FieldParams<T> make_zero_params(const FieldArch& a) {
  FieldParams<T> p;
  p.arch = a;
  p.tensors.resize(field_idx::count(a));
  for (int l = 0; l < a.trunk_depth; ++l) {
    p.at(field_idx::trunk_w(l)) = Tensor<T>({a.trunk_width, a.trunk_in(l)});
    p.at(field_idx::trunk_b(l)) = Tensor<T>({a.trunk_width});
  }
  p.at(field_idx::sigma_w(a)) = Tensor<T>({1, a.trunk_width});
  p.at(field_idx::sigma_b(a)) = Tensor<T>({1});
  p.at(field_idx::color_hw(a)) = Tensor<T>({a.color_hidden, a.trunk_width + a.dir_dim()});
  p.at(field_idx::color_hb(a)) = Tensor<T>({a.color_hidden});
  p.at(field_idx::color_ow(a)) = Tensor<T>({3, a.color_hidden});
  p.at(field_idx::color_ob(a)) = Tensor<T>({3});
  p.at(field_idx::atten_hw(a)) = Tensor<T>({a.atten_hidden, a.trunk_width});
  p.at(field_idx::atten_hb(a)) = Tensor<T>({a.atten_hidden});
  p.at(field_idx::atten_ow(a)) = Tensor<T>({3, a.atten_hidden});
  p.at(field_idx::atten_ob(a)) = Tensor<T>({3});
  p.at(field_idx::smooth_k(a)) = Tensor<T>({3, a.smooth_kernel});
  return p;
}

// Seeded fan-in uniform init. The attenuation head's final layer starts near
// identity attenuation (phi ~ 0.95) so early training behaves like a plain
// radiance field.
template <typename T>
FieldParams<T> init_params(const FieldArch& a, uint64_t seed) {
  FieldParams<T> p = make_zero_params<T>(a);
  std::mt19937 rng(static_cast<uint32_t>(seed));
  auto fill_uniform = [&](Tensor<T>& w, double scale) {
    double s = scale * std::sqrt(6.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> uni(-s, s);
    for (auto& v : w.data) v = static_cast<T>(uni(rng));
  };
  for (int l = 0; l < a.trunk_depth; ++l) fill_uniform(p.at(field_idx::trunk_w(l)), 1.0);
  fill_uniform(p.at(field_idx::sigma_w(a)), 1.0);
  fill_uniform(p.at(field_idx::color_hw(a)), 1.0);
  fill_uniform(p.at(field_idx::color_ow(a)), 1.0);
  fill_uniform(p.at(field_idx::atten_hw(a)), 1.0);
  fill_uniform(p.at(field_idx::atten_ow(a)), 0.05);
  double s95 = (0.95 - a.phi_floor) / (1.0 - a.phi_floor);
  double bias = std::log(s95 / (1.0 - s95));
  for (auto& v : p.at(field_idx::atten_ob(a)).data) v = static_cast<T>(bias);
  // Smoothing kernel starts as a normalized box filter.
  auto& k = p.at(field_idx::smooth_k(a));
  for (auto& v : k.data) v = static_cast<T>(1.0 / a.smooth_kernel);
  return p;
}

template <typename T>
struct FieldCache {
  bool valid = false;
  int64_t n = 0;
  Tensor<T> pos_enc, dir_enc;
  std::vector<Tensor<T>> trunk_act;  // post-ReLU activations, one per layer
  Tensor<T> skip_in;                 // concatenated input at the skip layer
  Tensor<T> color_in, color_h, color_raw;
  Tensor<T> atten_h, atten_raw;
  Tensor<T> sigma_raw;
  Tensor<T> sigma;  // [n x 1]
  Tensor<T> color;  // [n x 3]
  Tensor<T> phi;    // [n x 3]
};

template <typename T>
void field_forward(const FieldParams<T>& p, const Tensor<T>& pos_enc,
                   const Tensor<T>& dir_enc, FieldCache<T>& c) {
  const FieldArch& a = p.arch;
  if (pos_enc.cols() != a.pos_dim() || dir_enc.cols() != a.dir_dim() ||
      pos_enc.rows() != dir_enc.rows())
    throw config_error("field_forward: encoded feature shape mismatch");
  const int64_t n = pos_enc.rows();
  c.valid = true;
  c.n = n;
  c.pos_enc = pos_enc;
  c.dir_enc = dir_enc;
  c.trunk_act.resize(a.trunk_depth);

  const Tensor<T>* cur = &c.pos_enc;
  for (int l = 0; l < a.trunk_depth; ++l) {
    if (l == a.skip_layer && l > 0) {
      c.skip_in = Tensor<T>({n, a.trunk_width + a.pos_dim()});
      for (int64_t i = 0; i < n; ++i) {
        std::memcpy(c.skip_in.row(i), cur->row(i), sizeof(T) * a.trunk_width);
        std::memcpy(c.skip_in.row(i) + a.trunk_width, c.pos_enc.row(i),
                    sizeof(T) * a.pos_dim());
      }
      cur = &c.skip_in;
    }
    kernels::linear_forward(*cur, p.at(field_idx::trunk_w(l)),
                            p.at(field_idx::trunk_b(l)), c.trunk_act[l]);
    kernels::relu_forward(c.trunk_act[l]);
    cur = &c.trunk_act[l];
  }
  const Tensor<T>& feat = *cur;

  kernels::linear_forward(feat, p.at(field_idx::sigma_w(a)), p.at(field_idx::sigma_b(a)),
                          c.sigma_raw);

  c.color_in = Tensor<T>({n, a.trunk_width + a.dir_dim()});
  for (int64_t i = 0; i < n; ++i) {
    std::memcpy(c.color_in.row(i), feat.row(i), sizeof(T) * a.trunk_width);
    std::memcpy(c.color_in.row(i) + a.trunk_width, c.dir_enc.row(i),
                sizeof(T) * a.dir_dim());
  }
  kernels::linear_forward(c.color_in, p.at(field_idx::color_hw(a)),
                          p.at(field_idx::color_hb(a)), c.color_h);
  kernels::relu_forward(c.color_h);
  kernels::linear_forward(c.color_h, p.at(field_idx::color_ow(a)),
                          p.at(field_idx::color_ob(a)), c.color_raw);

  kernels::linear_forward(feat, p.at(field_idx::atten_hw(a)),
                          p.at(field_idx::atten_hb(a)), c.atten_h);
  kernels::relu_forward(c.atten_h);
  kernels::linear_forward(c.atten_h, p.at(field_idx::atten_ow(a)),
                          p.at(field_idx::atten_ob(a)), c.atten_raw);

  c.sigma = Tensor<T>({n, 1});
  c.color = Tensor<T>({n, 3});
  c.phi = Tensor<T>({n, 3});
  const T floor = static_cast<T>(a.phi_floor);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    c.sigma(i, 0) = softplus(c.sigma_raw(i, 0));
    for (int ch = 0; ch < 3; ++ch) {
      c.color(i, ch) = sigmoid(c.color_raw(i, ch));
      c.phi(i, ch) = floor + (T(1) - floor) * sigmoid(c.atten_raw(i, ch));
    }
  }
}

// Gradients of the upstream loss w.r.t. every parameter, given gradients
// w.r.t. the field outputs. The smoothing-kernel tensor is not touched here;
// its gradient comes from the renderer's smoothing backward pass.
template <typename T>
void field_backward(const FieldParams<T>& p, const FieldCache<T>& c,
                    const Tensor<T>& dsigma, const Tensor<T>& dcolor,
                    const Tensor<T>& dphi, FieldParams<T>& grads) {
  if (!c.valid) throw usage_error("field_backward: no cached forward state");
  const FieldArch& a = p.arch;
  const int64_t n = c.n;
  if (dsigma.rows() != n || dcolor.rows() != n || dphi.rows() != n)
    throw usage_error("field_backward: upstream gradient shape mismatch");

  const T floor = static_cast<T>(a.phi_floor);
  Tensor<T> dsigma_raw({n, 1}), dcolor_raw({n, 3}), datten_raw({n, 3});
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    dsigma_raw(i, 0) = dsigma(i, 0) * sigmoid(c.sigma_raw(i, 0));
    for (int ch = 0; ch < 3; ++ch) {
      T col = c.color(i, ch);
      dcolor_raw(i, ch) = dcolor(i, ch) * col * (T(1) - col);
      T s = (c.phi(i, ch) - floor) / (T(1) - floor);
      datten_raw(i, ch) = dphi(i, ch) * (T(1) - floor) * s * (T(1) - s);
    }
  }

  const Tensor<T>& feat = c.trunk_act[a.trunk_depth - 1];
  Tensor<T> dfeat({n, a.trunk_width});

  // sigma head
  {
    Tensor<T> dx;
    kernels::linear_backward_params(feat, dsigma_raw, grads.at(field_idx::sigma_w(a)),
                                    grads.at(field_idx::sigma_b(a)));
    kernels::linear_backward_input(dsigma_raw, p.at(field_idx::sigma_w(a)), dx);
    for (int64_t i = 0; i < n * a.trunk_width; ++i) dfeat.data[i] += dx.data[i];
  }
  // color head
  {
    Tensor<T> dch;
    kernels::linear_backward_params(c.color_h, dcolor_raw,
                                    grads.at(field_idx::color_ow(a)),
                                    grads.at(field_idx::color_ob(a)));
    kernels::linear_backward_input(dcolor_raw, p.at(field_idx::color_ow(a)), dch);
    kernels::relu_backward(c.color_h, dch);
    Tensor<T> dcin;
    kernels::linear_backward_params(c.color_in, dch, grads.at(field_idx::color_hw(a)),
                                    grads.at(field_idx::color_hb(a)));
    kernels::linear_backward_input(dch, p.at(field_idx::color_hw(a)), dcin);
    for (int64_t i = 0; i < n; ++i) {
      const T* src = dcin.row(i);
      T* dst = dfeat.row(i);
      for (int k = 0; k < a.trunk_width; ++k) dst[k] += src[k];
    }
  }
  // attenuation head
  {
    Tensor<T> dah;
    kernels::linear_backward_params(c.atten_h, datten_raw,
                                    grads.at(field_idx::atten_ow(a)),
                                    grads.at(field_idx::atten_ob(a)));
    kernels::linear_backward_input(datten_raw, p.at(field_idx::atten_ow(a)), dah);
    kernels::relu_backward(c.atten_h, dah);
    Tensor<T> dx;
    kernels::linear_backward_params(feat, dah, grads.at(field_idx::atten_hw(a)),
                                    grads.at(field_idx::atten_hb(a)));
    kernels::linear_backward_input(dah, p.at(field_idx::atten_hw(a)), dx);
    for (int64_t i = 0; i < n * a.trunk_width; ++i) dfeat.data[i] += dx.data[i];
  }

  // trunk, back to front
  Tensor<T> dcur = std::move(dfeat);
  for (int l = a.trunk_depth - 1; l >= 0; --l) {
    kernels::relu_backward(c.trunk_act[l], dcur);
    const Tensor<T>& in =
        (l == 0) ? c.pos_enc : (l == a.skip_layer ? c.skip_in : c.trunk_act[l - 1]);
    kernels::linear_backward_params(in, dcur, grads.at(field_idx::trunk_w(l)),
                                    grads.at(field_idx::trunk_b(l)));
    if (l == 0) break;
    Tensor<T> din;
    kernels::linear_backward_input(dcur, p.at(field_idx::trunk_w(l)), din);
    if (l == a.skip_layer) {
      // keep only the gradient of the previous activation, drop the encoding part
      Tensor<T> trimmed({n, a.trunk_width});
      for (int64_t i = 0; i < n; ++i)
        std::memcpy(trimmed.row(i), din.row(i), sizeof(T) * a.trunk_width);
      dcur = std::move(trimmed);
    } else {
      dcur = std::move(din);
    }
  }
}

// Checkpoint I/O (little-endian binary, bit-exact round trip).
void save_checkpoint(const std::string& path, const FieldParams<float>& params);
FieldParams<float> load_checkpoint(const std::string& path);

}  // namespace aqua
