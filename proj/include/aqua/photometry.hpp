#pragma once

// Photometric supervision: histogram equalization (pseudo ground truth),
// pixel reconstruction loss, differentiable soft histograms, and the debiased
// Sinkhorn divergence between per-channel intensity distributions.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "aqua/errors.hpp"
#include "aqua/image.hpp"
#include "aqua/tensor.hpp"

namespace aqua {

// Classic per-channel CDF remapping on 256 quantized levels. Constant channels
// are returned unchanged.
Image histogram_equalize(const Image& img);

template <typename T>
struct LossReport {
  T l_recon = T(0);
  T l_sinkhorn = T(0);
  T alpha = T(0);
  T total = T(0);
};

template <typename T>
LossReport<T> total_loss(T l_recon, T l_sinkhorn, T alpha) {
  if (alpha < T(0)) throw config_error("total_loss: alpha must be >= 0");
  LossReport<T> r;
  r.l_recon = l_recon;
  r.l_sinkhorn = l_sinkhorn;
  r.alpha = alpha;
  r.total = l_recon + alpha * l_sinkhorn;
  return r;
}

// Mean over the batch of squared L2 pixel error. grad (same shape as rendered)
// is overwritten with d loss / d rendered.
template <typename T>
T reconstruction_loss(const Tensor<T>& rendered, const Tensor<T>& reference,
                      Tensor<T>* grad = nullptr) {
  if (rendered.rows() != reference.rows() || rendered.cols() != reference.cols())
    throw usage_error("reconstruction_loss: batch length mismatch");
  const int64_t n = rendered.rows();
  if (n == 0) throw usage_error("reconstruction_loss: empty batch");
  if (grad && (grad->rows() != n || grad->cols() != rendered.cols()))
    *grad = Tensor<T>({n, rendered.cols()});
  T acc = T(0);
  for (int64_t i = 0; i < rendered.numel(); ++i) {
    T d = rendered.data[i] - reference.data[i];
    acc += d * d;
    if (grad) grad->data[i] = T(2) * d / static_cast<T>(n);
  }
  return acc / static_cast<T>(n);
}

// Per-channel normalized intensity histogram over [0, 1].
template <typename T>
struct IntensityHistogram {
  int bins = 0;
  Tensor<T> mass;             // [3 x bins], each row sums to 1
  std::vector<T> centers;     // bins, k / (bins - 1)
};

// Soft (linear) assignment: each value splits its unit mass between the two
// nearest bin centers, which keeps the histogram differentiable in the pixels.
template <typename T>
IntensityHistogram<T> build_histogram(const Tensor<T>& pixels, int bins) {
  if (bins < 2) throw config_error("build_histogram: need at least 2 bins");
  if (pixels.rows() == 0) throw usage_error("build_histogram: empty batch");
  if (pixels.cols() != 3) throw usage_error("build_histogram: pixels must be n x 3");
  IntensityHistogram<T> h;
  h.bins = bins;
  h.mass = Tensor<T>({3, bins});
  h.centers.resize(bins);
  for (int k = 0; k < bins; ++k) h.centers[k] = static_cast<T>(k) / (bins - 1);
  const int64_t n = pixels.rows();
  for (int64_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      T v = pixels(i, c);
      v = v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
      T pos = v * (bins - 1);
      int lo = static_cast<int>(pos);
      if (lo > bins - 2) lo = bins - 2;
      T frac = pos - static_cast<T>(lo);
      h.mass(c, lo) += (T(1) - frac) / static_cast<T>(n);
      h.mass(c, lo + 1) += frac / static_cast<T>(n);
    }
  return h;
}

template <typename T>
struct SinkhornResult {
  T value = T(0);
  Tensor<T> grad_p;  // [3 x bins], exact d value / d p.mass
  bool converged = true;
  T marginal_error = T(0);
  int iterations = 0;
};

namespace detail {

// One half Sinkhorn update in log domain:
// f_i = -eps * LSE_j( log w_j + (g_j - C_ij) / eps ), zero-mass bins skipped.
template <typename T>
void softmin_update(const std::vector<T>& logw, const std::vector<T>& g,
                    const std::vector<T>& centers, T eps, std::vector<T>& f_out) {
  const int b = static_cast<int>(centers.size());
  for (int i = 0; i < b; ++i) {
    T best = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < b; ++j) {
      if (logw[j] == -std::numeric_limits<T>::infinity()) continue;
      T d = centers[i] - centers[j];
      T e = logw[j] + (g[j] - d * d) / eps;
      if (e > best) best = e;
    }
    T acc = T(0);
    for (int j = 0; j < b; ++j) {
      if (logw[j] == -std::numeric_limits<T>::infinity()) continue;
      T d = centers[i] - centers[j];
      acc += std::exp(logw[j] + (g[j] - d * d) / eps - best);
    }
    f_out[i] = -eps * (best + std::log(acc));
  }
}

// Backward of one softmin update: given dL/df, accumulate into dL/dg and
// dL/dlogw. The softmax weights s_ij are recovered from the stored output f,
// since LSE_i = -f_i / eps.
template <typename T>
void softmin_backward(const std::vector<T>& logw, const std::vector<T>& g,
                      const std::vector<T>& f, const std::vector<T>& centers, T eps,
                      const std::vector<T>& df, std::vector<T>& dg,
                      std::vector<T>& dlogw) {
  const int b = static_cast<int>(centers.size());
  for (int i = 0; i < b; ++i) {
    if (df[i] == T(0)) continue;
    for (int j = 0; j < b; ++j) {
      if (logw[j] == -std::numeric_limits<T>::infinity()) continue;
      T d = centers[i] - centers[j];
      T s = std::exp(logw[j] + (g[j] - d * d + f[i]) / eps);
      dg[j] -= df[i] * s;
      dlogw[j] -= df[i] * eps * s;
    }
  }
}

template <typename T>
struct OtResult {
  T value = T(0);         // sharp transport cost <plan, C>
  std::vector<T> grad_p;  // exact d value / d p_k
  std::vector<T> grad_q;  // exact d value / d q_k
  T marginal_error = std::numeric_limits<T>::infinity();
  bool converged = false;
  int iterations = 0;
};

// Entropic OT between two histograms on a shared 1-D grid with squared cost:
// alternating log-domain updates, then the *sharp* cost <plan, C>, which at
// small eps sits much closer to the unregularized optimum than the dual value.
// Gradients are exact for the computed quantity: hand-rolled reverse mode
// through the stored trace of the unrolled iterations.
template <typename T>
OtResult<T> entropic_ot(const std::vector<T>& p, const std::vector<T>& q,
                        const std::vector<T>& centers, T eps, int max_iters, T tol,
                        bool with_grad = true) {
  const int b = static_cast<int>(centers.size());
  const T ninf = -std::numeric_limits<T>::infinity();
  auto log_of = [&](const std::vector<T>& w) {
    std::vector<T> lw(w.size());
    for (size_t i = 0; i < w.size(); ++i) lw[i] = w[i] > T(0) ? std::log(w[i]) : ninf;
    return lw;
  };
  std::vector<T> logp = log_of(p), logq = log_of(q);

  // forward, keeping the potentials for the backward sweep:
  // f[t] = softmin(logq, g[t]); g[t+1] = softmin(logp, f[t]); g[0] = 0
  std::vector<std::vector<T>> fs, gs;
  gs.push_back(std::vector<T>(b, T(0)));
  OtResult<T> r;
  std::vector<T> f_new(b);
  for (int it = 0; it < max_iters; ++it) {
    softmin_update(logq, gs.back(), centers, eps, f_new);
    if (!fs.empty()) {
      // p-side marginal violation of the plan implied by the previous f
      T err = T(0);
      for (int i = 0; i < b; ++i)
        if (p[i] > T(0))
          err += std::abs(p[i] * (std::exp((fs.back()[i] - f_new[i]) / eps) - T(1)));
      r.marginal_error = err;
      if (err < tol) {
        fs.push_back(f_new);
        r.iterations = it + 1;
        r.converged = true;
        break;
      }
    }
    fs.push_back(f_new);
    r.iterations = it + 1;
    if (it + 1 < max_iters) {
      std::vector<T> g_new(b);
      softmin_update(logp, fs.back(), centers, eps, g_new);
      gs.push_back(std::move(g_new));
    }
  }
  const std::vector<T>& f = fs.back();
  // matching g for the final f: one extra half step makes the plan's
  // q-marginal exact
  std::vector<T> g(b);
  softmin_update(logp, f, centers, eps, g);

  // sharp cost: plan_ij = exp(logp_i + logq_j + (f_i + g_j - C_ij)/eps)
  auto plan_cost = [&](int i, int j) {
    T d = centers[i] - centers[j];
    return std::exp(logp[i] + logq[j] + (f[i] + g[j] - d * d) / eps) * d * d;
  };
  for (int i = 0; i < b; ++i) {
    if (p[i] <= T(0)) continue;
    for (int j = 0; j < b; ++j) {
      if (q[j] <= T(0)) continue;
      r.value += plan_cost(i, j);
    }
  }
  if (!with_grad) return r;

  // reverse sweep. Direct dependence of the value on (logp, logq, f, g) first.
  std::vector<T> df(b, T(0)), dg(b, T(0)), dlogp(b, T(0)), dlogq(b, T(0));
  for (int i = 0; i < b; ++i) {
    if (p[i] <= T(0)) continue;
    for (int j = 0; j < b; ++j) {
      if (q[j] <= T(0)) continue;
      T pc = plan_cost(i, j);
      dlogp[i] += pc;
      dlogq[j] += pc;
      df[i] += pc / eps;
      dg[j] += pc / eps;
    }
  }
  // the trailing g = softmin(logp, f_final)
  {
    std::vector<T> df_extra(b, T(0));
    softmin_backward(logp, f, g, centers, eps, dg, df_extra, dlogp);
    for (int i = 0; i < b; ++i) df[i] += df_extra[i];
  }
  // unrolled iterations, back to front
  std::vector<T> dg_state(b, T(0));
  for (int t = static_cast<int>(fs.size()) - 1; t >= 0; --t) {
    // f[t] = softmin(logq, g[t])
    std::fill(dg_state.begin(), dg_state.end(), T(0));
    softmin_backward(logq, gs[t], fs[t], centers, eps, df, dg_state, dlogq);
    if (t == 0) break;
    // g[t] = softmin(logp, f[t-1])
    std::fill(df.begin(), df.end(), T(0));
    softmin_backward(logp, fs[t - 1], gs[t], centers, eps, dg_state, df, dlogp);
  }
  r.grad_p.assign(b, T(0));
  r.grad_q.assign(b, T(0));
  for (int k = 0; k < b; ++k) {
    if (p[k] > T(0)) r.grad_p[k] = dlogp[k] / p[k];
    if (q[k] > T(0)) r.grad_q[k] = dlogq[k] / q[k];
  }
  return r;
}

}  // namespace detail

// Debiased divergence S(p, q) = OT(p, q) - (OT(p, p) + OT(q, q)) / 2 with the
// sharp transport cost, summed over channels. grad_p is the exact gradient of
// the computed value w.r.t. p's bin masses. The cross term is evaluated in
// both directions and averaged: a finitely-converged solve is not exactly
// symmetric in its arguments, and the average makes S(p, q) == S(q, p) hold
// bitwise instead of only up to the convergence tolerance.
template <typename T>
SinkhornResult<T> sinkhorn_divergence(const IntensityHistogram<T>& p,
                                      const IntensityHistogram<T>& q, T eps,
                                      int max_iters, T tol) {
  if (p.bins != q.bins) throw usage_error("sinkhorn_divergence: bin grids differ");
  if (!(eps > T(0))) throw config_error("sinkhorn_divergence: eps must be > 0");
  SinkhornResult<T> out;
  out.grad_p = Tensor<T>({3, p.bins});
  out.marginal_error = T(0);
  for (int c = 0; c < 3; ++c) {
    std::vector<T> pc(p.mass.row(c), p.mass.row(c) + p.bins);
    std::vector<T> qc(q.mass.row(c), q.mass.row(c) + q.bins);
    auto pq = detail::entropic_ot(pc, qc, p.centers, eps, max_iters, tol);
    auto qp = detail::entropic_ot(qc, pc, p.centers, eps, max_iters, tol);
    auto pp = detail::entropic_ot(pc, pc, p.centers, eps, max_iters, tol);
    auto qq = detail::entropic_ot(qc, qc, p.centers, eps, max_iters, tol,
                                  /*with_grad=*/false);
    out.value += (pq.value + qp.value) / T(2) - (pp.value + qq.value) / T(2);
    for (int k = 0; k < p.bins; ++k)
      out.grad_p(c, k) = (pq.grad_p[k] + qp.grad_q[k]) / T(2) -
                         (pp.grad_p[k] + pp.grad_q[k]) / T(2);  // both pp slots are p
    out.converged = out.converged && pq.converged && qp.converged && pp.converged &&
                    qq.converged;
    out.marginal_error = std::max(
        {out.marginal_error, pq.marginal_error, qp.marginal_error, pp.marginal_error,
         qq.marginal_error});
    out.iterations = std::max(
        {out.iterations, pq.iterations, qp.iterations, pp.iterations, qq.iterations});
  }
  return out;
}

// Composite distribution loss: soft histograms of both pixel batches, then the
// Sinkhorn divergence, with the gradient chained back to the first batch's
// pixel values.
template <typename T>
struct DistributionLoss {
  T value = T(0);
  Tensor<T> grad_pixels;  // [n x 3]
  bool converged = true;
};

template <typename T>
DistributionLoss<T> distribution_loss(const Tensor<T>& pixels, const Tensor<T>& ref_pixels,
                                      int bins, T eps, int max_iters, T tol) {
  auto p = build_histogram(pixels, bins);
  auto q = build_histogram(ref_pixels, bins);
  auto sk = sinkhorn_divergence(p, q, eps, max_iters, tol);
  DistributionLoss<T> out;
  out.value = sk.value;
  out.converged = sk.converged;
  const int64_t n = pixels.rows();
  out.grad_pixels = Tensor<T>({n, 3});
  for (int64_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      T v = pixels(i, c);
      if (v <= T(0) || v >= T(1)) continue;  // clamped: no gradient
      T pos = v * (bins - 1);
      int lo = static_cast<int>(pos);
      if (lo > bins - 2) lo = bins - 2;
      out.grad_pixels(i, c) = (sk.grad_p(c, lo + 1) - sk.grad_p(c, lo)) *
                              static_cast<T>(bins - 1) / static_cast<T>(n);
    }
  return out;
}

}  // namespace aqua
