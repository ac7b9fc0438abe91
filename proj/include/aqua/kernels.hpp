#pragma once

// Batched dense-layer kernels. Parallelism is always over independent output
// rows, so results are bitwise identical for any thread count; the serial
// reference in serial_ref.hpp uses the same reduction order.

#include "aqua/tensor.hpp"

namespace aqua::kernels {

// Y[n x out] = X[n x in] * W[out x in]^T + b[out]
template <typename T>
void linear_forward(const Tensor<T>& X, const Tensor<T>& W, const Tensor<T>& b,
                    Tensor<T>& Y) {
  const int64_t n = X.rows(), in = X.cols(), out = W.rows();
  assert(W.cols() == in && b.numel() == out);
  if (Y.rows() != n || Y.cols() != out) Y = Tensor<T>({n, out});
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const T* x = X.row(i);
    T* y = Y.row(i);
    // four output rows at a time to reuse the loaded input row
    int64_t o = 0;
    for (; o + 4 <= out; o += 4) {
      const T* w0 = W.row(o);
      const T* w1 = W.row(o + 1);
      const T* w2 = W.row(o + 2);
      const T* w3 = W.row(o + 3);
      T a0 = T(0), a1 = T(0), a2 = T(0), a3 = T(0);
#pragma omp simd reduction(+ : a0, a1, a2, a3)
      for (int64_t k = 0; k < in; ++k) {
        const T xv = x[k];
        a0 += w0[k] * xv;
        a1 += w1[k] * xv;
        a2 += w2[k] * xv;
        a3 += w3[k] * xv;
      }
      y[o] = a0 + b.data[o];
      y[o + 1] = a1 + b.data[o + 1];
      y[o + 2] = a2 + b.data[o + 2];
      y[o + 3] = a3 + b.data[o + 3];
    }
    for (; o < out; ++o) {
      const T* w = W.row(o);
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (int64_t k = 0; k < in; ++k) acc += w[k] * x[k];
      y[o] = acc + b.data[o];
    }
  }
}

// dX[n x in] = dY[n x out] * W[out x in]
template <typename T>
void linear_backward_input(const Tensor<T>& dY, const Tensor<T>& W, Tensor<T>& dX) {
  const int64_t n = dY.rows(), out = dY.cols(), in = W.cols();
  if (dX.rows() != n || dX.cols() != in) dX = Tensor<T>({n, in});
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const T* dy = dY.row(i);
    T* dx = dX.row(i);
    for (int64_t k = 0; k < in; ++k) dx[k] = T(0);
    for (int64_t o = 0; o < out; ++o) {
      const T g = dy[o];
      const T* w = W.row(o);
#pragma omp simd
      for (int64_t k = 0; k < in; ++k) dx[k] += g * w[k];
    }
  }
}

// dW[out x in] += X^T-style reduction over the batch; db[out] += column sums.
template <typename T>
void linear_backward_params(const Tensor<T>& X, const Tensor<T>& dY, Tensor<T>& dW,
                            Tensor<T>& db) {
  const int64_t n = X.rows(), in = X.cols(), out = dY.cols();
  assert(dW.rows() == out && dW.cols() == in && db.numel() == out);
#pragma omp parallel for schedule(static)
  for (int64_t o = 0; o < out; ++o) {
    T* dw = dW.row(o);
    T accb = T(0);
    for (int64_t i = 0; i < n; ++i) {
      const T g = dY(i, o);
      const T* x = X.row(i);
#pragma omp simd
      for (int64_t k = 0; k < in; ++k) dw[k] += g * x[k];
      accb += g;
    }
    db.data[o] += accb;
  }
}

template <typename T>
void relu_forward(Tensor<T>& A) {
  const int64_t n = A.numel();
  T* a = A.data.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) a[i] = a[i] > T(0) ? a[i] : T(0);
}

// dPre = dPost where post-activation > 0 (post values are the cached ReLU outputs)
template <typename T>
void relu_backward(const Tensor<T>& post, Tensor<T>& dA) {
  const int64_t n = post.numel();
  const T* p = post.data.data();
  T* d = dA.data.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    if (p[i] <= T(0)) d[i] = T(0);
}

}  // namespace aqua::kernels
