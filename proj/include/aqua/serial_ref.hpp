#pragma once

// Plain serial versions of the kernels in kernels.hpp. Kept as the reference
// implementation for correctness tests and for the kernel benchmark.

#include "aqua/tensor.hpp"

namespace aqua::serial {

template <typename T>
void linear_forward(const Tensor<T>& X, const Tensor<T>& W, const Tensor<T>& b,
                    Tensor<T>& Y) {
  const int64_t n = X.rows(), in = X.cols(), out = W.rows();
  if (Y.rows() != n || Y.cols() != out) Y = Tensor<T>({n, out});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t o = 0; o < out; ++o) {
      T acc = T(0);
      for (int64_t k = 0; k < in; ++k) acc += W(o, k) * X(i, k);
      Y(i, o) = acc + b.data[o];
    }
}

template <typename T>
void linear_backward_input(const Tensor<T>& dY, const Tensor<T>& W, Tensor<T>& dX) {
  const int64_t n = dY.rows(), out = dY.cols(), in = W.cols();
  if (dX.rows() != n || dX.cols() != in) dX = Tensor<T>({n, in});
  dX.zero();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t o = 0; o < out; ++o)
      for (int64_t k = 0; k < in; ++k) dX(i, k) += dY(i, o) * W(o, k);
}

template <typename T>
void linear_backward_params(const Tensor<T>& X, const Tensor<T>& dY, Tensor<T>& dW,
                            Tensor<T>& db) {
  const int64_t n = X.rows(), in = X.cols(), out = dY.cols();
  for (int64_t o = 0; o < out; ++o) {
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t k = 0; k < in; ++k) dW(o, k) += dY(i, o) * X(i, k);
      db.data[o] += dY(i, o);
    }
  }
}

}  // namespace aqua::serial
