#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "aqua/field.hpp"

using namespace aqua;

namespace {

FieldArch tiny_arch() {
  FieldArch a;
  a.pos_freqs = 2;
  a.dir_freqs = 1;
  a.trunk_depth = 3;
  a.trunk_width = 8;
  a.skip_layer = 1;
  a.color_hidden = 6;
  a.atten_hidden = 5;
  a.smooth_kernel = 3;
  return a;
}

template <typename T>
Tensor<T> random_tensor(std::vector<int64_t> shape, std::mt19937& rng, double lo = -1,
                        double hi = 1) {
  Tensor<T> t(shape);
  std::uniform_real_distribution<double> uni(lo, hi);
  for (auto& v : t.data) v = static_cast<T>(uni(rng));
  return t;
}

// Independent single-sample forward pass: plain loops, no shared kernel code.
struct NaiveOut {
  double sigma;
  double color[3];
  double phi[3];
};

NaiveOut naive_forward(const FieldParams<double>& p, const std::vector<double>& pos,
                       const std::vector<double>& dir) {
  const FieldArch& a = p.arch;
  auto dense = [](const Tensor<double>& w, const Tensor<double>& b,
                  const std::vector<double>& x) {
    std::vector<double> y(w.rows());
    for (int64_t o = 0; o < w.rows(); ++o) {
      double acc = b.data[o];
      for (int64_t k = 0; k < w.cols(); ++k) acc += w(o, k) * x[k];
      y[o] = acc;
    }
    return y;
  };
  auto relu = [](std::vector<double>& v) {
    for (auto& x : v) x = std::max(0.0, x);
  };

  std::vector<double> h = pos;
  for (int l = 0; l < a.trunk_depth; ++l) {
    if (l == a.skip_layer && l > 0) h.insert(h.end(), pos.begin(), pos.end());
    h = dense(p.at(field_idx::trunk_w(l)), p.at(field_idx::trunk_b(l)), h);
    relu(h);
  }
  NaiveOut out{};
  auto sig = dense(p.at(field_idx::sigma_w(a)), p.at(field_idx::sigma_b(a)), h);
  out.sigma = std::log1p(std::exp(sig[0]));

  std::vector<double> cin = h;
  cin.insert(cin.end(), dir.begin(), dir.end());
  auto ch = dense(p.at(field_idx::color_hw(a)), p.at(field_idx::color_hb(a)), cin);
  relu(ch);
  auto cr = dense(p.at(field_idx::color_ow(a)), p.at(field_idx::color_ob(a)), ch);
  auto ah = dense(p.at(field_idx::atten_hw(a)), p.at(field_idx::atten_hb(a)), h);
  relu(ah);
  auto ar = dense(p.at(field_idx::atten_ow(a)), p.at(field_idx::atten_ob(a)), ah);
  for (int c = 0; c < 3; ++c) {
    out.color[c] = 1.0 / (1.0 + std::exp(-cr[c]));
    out.phi[c] = a.phi_floor + (1.0 - a.phi_floor) / (1.0 + std::exp(-ar[c]));
  }
  return out;
}

}  // namespace

TEST_CASE("zero parameters give the constant field") {
  FieldArch a = tiny_arch();
  auto p = make_zero_params<double>(a);
  std::mt19937 rng(5);
  auto pos = random_tensor<double>({2, a.pos_dim()}, rng);
  auto dir = random_tensor<double>({2, a.dir_dim()}, rng);
  FieldCache<double> c;
  field_forward(p, pos, dir, c);
  for (int i = 0; i < 2; ++i) {
    CHECK(c.sigma(i, 0) == doctest::Approx(std::log(2.0)));  // softplus(0)
    for (int ch = 0; ch < 3; ++ch) {
      CHECK(c.color(i, ch) == doctest::Approx(0.5));
      CHECK(c.phi(i, ch) == doctest::Approx(a.phi_floor + 0.5 * (1 - a.phi_floor)));
    }
  }
}

TEST_CASE("density and attenuation ignore the view direction") {
  FieldArch a = tiny_arch();
  auto p = init_params<double>(a, 42);
  std::mt19937 rng(6);
  auto pos = random_tensor<double>({1, a.pos_dim()}, rng);
  auto dir1 = random_tensor<double>({1, a.dir_dim()}, rng);
  auto dir2 = random_tensor<double>({1, a.dir_dim()}, rng);
  FieldCache<double> c1, c2;
  field_forward(p, pos, dir1, c1);
  field_forward(p, pos, dir2, c2);
  CHECK(c1.sigma(0, 0) == c2.sigma(0, 0));
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(c1.phi(0, ch) == c2.phi(0, ch));
    CHECK(c1.color(0, ch) != c2.color(0, ch));  // color is view-dependent
  }
}

TEST_CASE("forward matches an independent implementation and range invariants") {
  FieldArch a = tiny_arch();
  std::mt19937 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = init_params<double>(a, 100 + trial);
    auto pos = random_tensor<double>({3, a.pos_dim()}, rng);
    auto dir = random_tensor<double>({3, a.dir_dim()}, rng);
    FieldCache<double> c;
    field_forward(p, pos, dir, c);
    for (int i = 0; i < 3; ++i) {
      std::vector<double> pv(pos.row(i), pos.row(i) + a.pos_dim());
      std::vector<double> dv(dir.row(i), dir.row(i) + a.dir_dim());
      NaiveOut ref = naive_forward(p, pv, dv);
      CHECK(c.sigma(i, 0) == doctest::Approx(ref.sigma).epsilon(1e-12));
      CHECK(c.sigma(i, 0) >= 0.0);
      for (int ch = 0; ch < 3; ++ch) {
        CHECK(c.color(i, ch) == doctest::Approx(ref.color[ch]).epsilon(1e-12));
        CHECK(c.phi(i, ch) == doctest::Approx(ref.phi[ch]).epsilon(1e-12));
        CHECK(c.color(i, ch) >= 0.0);
        CHECK(c.color(i, ch) <= 1.0);
        CHECK(c.phi(i, ch) > 0.0);
        CHECK(c.phi(i, ch) <= 1.0);
      }
    }
  }
}

TEST_CASE("shape mismatch and missing cache raise") {
  FieldArch a = tiny_arch();
  auto p = init_params<double>(a, 1);
  std::mt19937 rng(8);
  auto pos = random_tensor<double>({2, a.pos_dim() + 1}, rng);
  auto dir = random_tensor<double>({2, a.dir_dim()}, rng);
  FieldCache<double> c;
  CHECK_THROWS_AS(field_forward(p, pos, dir, c), config_error);
  auto grads = make_zero_params<double>(a);
  Tensor<double> d({2, 1});
  Tensor<double> d3({2, 3});
  CHECK_THROWS_AS(field_backward(p, c, d, d3, d3, grads), usage_error);
}

TEST_CASE("zero upstream gradient yields zero gradients") {
  FieldArch a = tiny_arch();
  auto p = init_params<double>(a, 3);
  std::mt19937 rng(9);
  auto pos = random_tensor<double>({4, a.pos_dim()}, rng);
  auto dir = random_tensor<double>({4, a.dir_dim()}, rng);
  FieldCache<double> c;
  field_forward(p, pos, dir, c);
  Tensor<double> dsigma({4, 1}), dcolor({4, 3}), dphi({4, 3});
  auto grads = make_zero_params<double>(a);
  field_backward(p, c, dsigma, dcolor, dphi, grads);
  for (size_t t = 0; t < grads.tensors.size(); ++t)
    for (double v : grads.tensors[t].data) CHECK(v == 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
  FieldArch a = tiny_arch();
  std::mt19937 rng(10);
  const int n = 4;
  const double h = 1e-4;

  for (int trial = 0; trial < 3; ++trial) {
    auto p = init_params<double>(a, 200 + trial);
    auto pos = random_tensor<double>({n, a.pos_dim()}, rng);
    auto dir = random_tensor<double>({n, a.dir_dim()}, rng);
    auto gs = random_tensor<double>({n, 1}, rng);
    auto gc = random_tensor<double>({n, 3}, rng);
    auto gp = random_tensor<double>({n, 3}, rng);

    auto loss = [&](const FieldParams<double>& params) {
      FieldCache<double> c;
      field_forward(params, pos, dir, c);
      double acc = 0;
      for (int i = 0; i < n; ++i) {
        acc += gs(i, 0) * c.sigma(i, 0);
        for (int ch = 0; ch < 3; ++ch)
          acc += gc(i, ch) * c.color(i, ch) + gp(i, ch) * c.phi(i, ch);
      }
      return acc;
    };

    FieldCache<double> c;
    field_forward(p, pos, dir, c);
    auto grads = make_zero_params<double>(a);
    field_backward(p, c, gs, gc, gp, grads);

    const int kernel_idx = field_idx::smooth_k(a);
    for (size_t t = 0; t < p.tensors.size(); ++t) {
      if (static_cast<int>(t) == kernel_idx) continue;  // not part of this graph
      for (int64_t i = 0; i < p.tensors[t].numel(); ++i) {
        double saved = p.tensors[t].data[i];
        p.tensors[t].data[i] = saved + h;
        double lp = loss(p);
        p.tensors[t].data[i] = saved - h;
        double lm = loss(p);
        p.tensors[t].data[i] = saved;
        double fd = (lp - lm) / (2 * h);
        double an = grads.tensors[t].data[i];
        double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        CHECK(std::abs(fd - an) / denom < 1e-5);
      }
    }
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  FieldArch a = tiny_arch();
  auto p = init_params<float>(a, 77);
  std::string path =
      (std::filesystem::temp_directory_path() / "aqua_field_ckpt_test.aqfd").string();
  save_checkpoint(path, p);
  FieldParams<float> q = load_checkpoint(path);
  CHECK(q.arch == p.arch);
  REQUIRE(q.tensors.size() == p.tensors.size());
  for (size_t t = 0; t < p.tensors.size(); ++t) {
    REQUIRE(q.tensors[t].shape == p.tensors[t].shape);
    for (int64_t i = 0; i < p.tensors[t].numel(); ++i)
      CHECK(q.tensors[t].data[i] == p.tensors[t].data[i]);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), io_error);
}
