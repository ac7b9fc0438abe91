// Benchmarks the OpenMP dense-layer kernels against the plain serial
// reference. Usage: bench_kernels [rows] [repeats]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>

#include "aqua/kernels.hpp"
#include "aqua/serial_ref.hpp"
#include "aqua/tensor.hpp"

using aqua::TensorF;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void fill(TensorF& t, std::mt19937& rng) {
  std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
  for (auto& v : t.data) v = uni(rng);
}

// Largest element difference relative to the reference's largest magnitude.
// Per-element ratios are meaningless here: float sums reassociate, so
// near-zero outputs differ by the usual roundoff in absolute terms.
double max_rel_diff(const TensorF& a, const TensorF& b) {
  double worst = 0, scale = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
    scale = std::max(scale, std::abs(static_cast<double>(b.data[i])));
  }
  return worst / std::max(scale, 1e-30);
}

template <typename F>
double time_best_ms(int repeats, F&& fn) {
  double best = 1e30;
  for (int r = 0; r < repeats; ++r) {
    double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const int64_t n = argc > 1 ? std::atoll(argv[1]) : 16384;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;
  const int64_t in = 128, out = 128;
  std::mt19937 rng(7);

  TensorF X({n, in}), W({out, in}), b({out}), dY({n, out});
  fill(X, rng);
  fill(W, rng);
  fill(b, rng);
  fill(dY, rng);

  std::printf("dense kernels: batch=%lld in=%lld out=%lld, best of %d\n",
              static_cast<long long>(n), static_cast<long long>(in),
              static_cast<long long>(out), repeats);

  TensorF Y1, Y2;
  double t_par = time_best_ms(repeats, [&] { aqua::kernels::linear_forward(X, W, b, Y1); });
  double t_ser = time_best_ms(repeats, [&] { aqua::serial::linear_forward(X, W, b, Y2); });
  std::printf("forward          omp %8.2f ms   serial %8.2f ms   speedup %5.2fx   "
              "max rel diff %.2e\n",
              t_par, t_ser, t_ser / t_par, max_rel_diff(Y1, Y2));

  TensorF dX1, dX2;
  t_par = time_best_ms(repeats, [&] { aqua::kernels::linear_backward_input(dY, W, dX1); });
  t_ser = time_best_ms(repeats, [&] { aqua::serial::linear_backward_input(dY, W, dX2); });
  std::printf("backward input   omp %8.2f ms   serial %8.2f ms   speedup %5.2fx   "
              "max rel diff %.2e\n",
              t_par, t_ser, t_ser / t_par, max_rel_diff(dX1, dX2));

  TensorF dW1({out, in}), db1({out}), dW2({out, in}), db2({out});
  t_par = time_best_ms(repeats, [&] {
    dW1.zero();
    db1.zero();
    aqua::kernels::linear_backward_params(X, dY, dW1, db1);
  });
  t_ser = time_best_ms(repeats, [&] {
    dW2.zero();
    db2.zero();
    aqua::serial::linear_backward_params(X, dY, dW2, db2);
  });
  std::printf("backward params  omp %8.2f ms   serial %8.2f ms   speedup %5.2fx   "
              "max rel diff %.2e\n",
              t_par, t_ser, t_ser / t_par, max_rel_diff(dW1, dW2));
  return 0;
}
