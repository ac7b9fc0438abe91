#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aqua/renderer.hpp"

using namespace aqua;

namespace {

struct RayData {
  std::vector<double> sigma, delta, color, phi;  // color/phi are n x 3
  int n;
};

RayData random_ray(std::mt19937& rng, int n) {
  RayData r;
  r.n = n;
  std::uniform_real_distribution<double> us(0.0, 3.0), ud(0.01, 0.5), uc(0.0, 1.0),
      up(0.35, 0.999);
  for (int i = 0; i < n; ++i) {
    r.sigma.push_back(us(rng));
    r.delta.push_back(ud(rng));
    for (int c = 0; c < 3; ++c) {
      r.color.push_back(uc(rng));
      r.phi.push_back(up(rng));
    }
  }
  return r;
}

}  // namespace

TEST_CASE("transmittance matches the closed form and rejects bad input") {
  std::vector<double> sigma{0.5, 1.0, 2.0}, delta{0.1, 0.2, 0.3};
  std::vector<double> out(3);
  transmittance(sigma.data(), delta.data(), 3, out.data());
  CHECK(out[0] == 1.0);
  CHECK(out[1] == doctest::Approx(std::exp(-0.05)).epsilon(1e-14));
  CHECK(out[2] == doctest::Approx(std::exp(-0.05 - 0.2)).epsilon(1e-14));

  std::vector<double> bad_sigma{0.5, -1.0, 2.0};
  CHECK_THROWS_AS(transmittance(bad_sigma.data(), delta.data(), 3, out.data()),
                  input_error);
  std::vector<double> bad_delta{0.1, 0.0, 0.3};
  CHECK_THROWS_AS(transmittance(sigma.data(), bad_delta.data(), 3, out.data()),
                  input_error);
}

TEST_CASE("attenuated transmittance: all-ones profile reduces to plain") {
  std::mt19937 rng(1);
  RayData r = random_ray(rng, 16);
  std::vector<double> ones(16 * 3, 1.0), plain(16), att(16 * 3);
  transmittance(r.sigma.data(), r.delta.data(), 16, plain.data());
  attenuated_transmittance(r.sigma.data(), r.delta.data(), ones.data(), 16, att.data());
  for (int i = 0; i < 16; ++i)
    for (int c = 0; c < 3; ++c) CHECK(att[i * 3 + c] == plain[i]);  // bitwise
}

TEST_CASE("uniform phi gives the power law T_i * phi^(i-1)") {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    RayData r = random_ray(rng, 12);
    double phi_u[3] = {0.4, 0.7, 0.95};
    std::vector<double> prof(12 * 3);
    for (int i = 0; i < 12; ++i)
      for (int c = 0; c < 3; ++c) prof[i * 3 + c] = phi_u[c];
    std::vector<double> plain(12), att(12 * 3);
    transmittance(r.sigma.data(), r.delta.data(), 12, plain.data());
    attenuated_transmittance(r.sigma.data(), r.delta.data(), prof.data(), 12, att.data());
    for (int i = 0; i < 12; ++i)
      for (int c = 0; c < 3; ++c) {
        double expect = plain[i] * std::pow(phi_u[c], i);  // i prior samples
        CHECK(std::abs(att[i * 3 + c] - expect) <= 1e-12 * std::abs(expect));
      }
  }
}

TEST_CASE("phi outside (0,1] is rejected") {
  std::mt19937 rng(3);
  RayData r = random_ray(rng, 4);
  std::vector<double> out(4 * 3);
  r.phi[5] = 0.0;
  CHECK_THROWS_AS(
      attenuated_transmittance(r.sigma.data(), r.delta.data(), r.phi.data(), 4, out.data()),
      input_error);
  r.phi[5] = 1.2;
  CHECK_THROWS_AS(render_attenuated(r.sigma.data(), r.color.data(), r.delta.data(), 4,
                                    r.phi.data()),
                  input_error);
}

TEST_CASE("attenuated render with phi == 1 is bitwise the standard render") {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng() % 30);
    RayData r = random_ray(rng, n);
    std::vector<double> ones(static_cast<size_t>(n) * 3, 1.0);
    auto a = render_standard(r.sigma.data(), r.color.data(), r.delta.data(), n);
    auto b = render_attenuated(r.sigma.data(), r.color.data(), r.delta.data(), n,
                               ones.data());
    for (int c = 0; c < 3; ++c) CHECK(a.rgb[c] == b.rgb[c]);
    CHECK(a.opacity == b.opacity);
  }
}

TEST_CASE("rendered values stay in range; empty ray renders black") {
  std::mt19937 rng(5);
  RayData r = random_ray(rng, 24);
  auto px = render_attenuated(r.sigma.data(), r.color.data(), r.delta.data(), 24,
                              r.phi.data());
  for (int c = 0; c < 3; ++c) {
    CHECK(px.rgb[c] >= 0.0);
    CHECK(px.rgb[c] <= 1.0);
  }
  CHECK(px.opacity >= 0.0);
  CHECK(px.opacity <= 1.0);

  std::vector<double> zero_sigma(24, 0.0);
  auto black = render_standard(zero_sigma.data(), r.color.data(), r.delta.data(), 24);
  for (int c = 0; c < 3; ++c) CHECK(black.rgb[c] == 0.0);
  CHECK(black.opacity == 0.0);
}

TEST_CASE("render backward matches finite differences (both paths)") {
  std::mt19937 rng(6);
  const double h = 1e-6;
  std::uniform_real_distribution<double> ug(-1.0, 1.0);

  for (int trial = 0; trial < 20; ++trial) {
    int n = 3 + static_cast<int>(rng() % 10);
    RayData r = random_ray(rng, n);
    double drgb[3] = {ug(rng), ug(rng), ug(rng)};
    bool attenuated = trial % 2 == 0;
    const double* prof = attenuated ? r.phi.data() : nullptr;

    auto value = [&](const RayData& rd) {
      auto px = attenuated ? render_attenuated(rd.sigma.data(), rd.color.data(),
                                               rd.delta.data(), n, rd.phi.data())
                           : render_standard(rd.sigma.data(), rd.color.data(),
                                             rd.delta.data(), n);
      return drgb[0] * px.rgb[0] + drgb[1] * px.rgb[1] + drgb[2] * px.rgb[2];
    };

    RenderCache<double> cache;
    render_core(r.sigma.data(), r.color.data(), r.delta.data(), n, prof, &cache);
    std::vector<double> dsigma(n, 0.0), dcolor(static_cast<size_t>(n) * 3, 0.0),
        dprof(static_cast<size_t>(n) * 3, 0.0);
    render_backward(r.sigma.data(), r.color.data(), r.delta.data(), n, prof, cache,
                    drgb, dsigma.data(), dcolor.data(),
                    attenuated ? dprof.data() : nullptr);

    // relative error of the whole gradient vector: per-component ratios blow
    // up on near-zero entries where central-difference roundoff dominates
    double err2 = 0, norm2 = 0;
    auto fd_accum = [&](std::vector<double>& field, size_t idx, double analytic) {
      double saved = field[idx];
      field[idx] = saved + h;
      double lp = value(r);
      field[idx] = saved - h;
      double lm = value(r);
      field[idx] = saved;
      double fd = (lp - lm) / (2 * h);
      err2 += (fd - analytic) * (fd - analytic);
      norm2 += fd * fd;
    };

    for (int i = 0; i < n; ++i) {
      fd_accum(r.sigma, i, dsigma[i]);
      for (int c = 0; c < 3; ++c) {
        fd_accum(r.color, static_cast<size_t>(i) * 3 + c, dcolor[i * 3 + c]);
        if (attenuated)
          fd_accum(r.phi, static_cast<size_t>(i) * 3 + c, dprof[i * 3 + c]);
      }
    }
    CHECK(std::sqrt(err2 / std::max(norm2, 1e-12)) < 1e-5);
  }
}

TEST_CASE("render backward demands a matching cache") {
  std::mt19937 rng(7);
  RayData r = random_ray(rng, 5);
  double drgb[3] = {1, 1, 1};
  std::vector<double> d5(5, 0.0), d15(15, 0.0);
  RenderCache<double> cache;  // never filled
  CHECK_THROWS_AS(render_backward(r.sigma.data(), r.color.data(), r.delta.data(), 5,
                                  r.phi.data(), cache, drgb, d5.data(), d15.data(),
                                  d15.data()),
                  usage_error);
  render_standard(r.sigma.data(), r.color.data(), r.delta.data(), 5, &cache);
  // cache is for the plain path, but the attenuated path is requested
  CHECK_THROWS_AS(render_backward(r.sigma.data(), r.color.data(), r.delta.data(), 5,
                                  r.phi.data(), cache, drgb, d5.data(), d15.data(),
                                  d15.data()),
                  usage_error);
}

TEST_CASE("single-ray batch with an identity kernel returns phi unchanged") {
  std::mt19937 rng(8);
  const int n = 10;
  RayData r = random_ray(rng, n);
  Tensor<double> phi({n, 3});
  std::copy(r.phi.begin(), r.phi.end(), phi.data.begin());
  Tensor<double> kernel({3, 3});  // delta at the center tap
  for (int c = 0; c < 3; ++c) kernel(c, 1) = 1.0;
  Tensor<double> out = batch_average_smooth(phi, 1, n, kernel, 0.3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(out(i, c) == doctest::Approx(phi(i, c)).epsilon(1e-6));
}

TEST_CASE("batch averaging pools rays and keeps the output in range") {
  std::mt19937 rng(9);
  const int batch = 6, n = 8;
  Tensor<double> phi({batch * n, 3});
  std::uniform_real_distribution<double> up(0.35, 0.99);
  for (auto& v : phi.data) v = up(rng);
  Tensor<double> kernel({3, 5});
  for (int c = 0; c < 3; ++c)
    for (int j = 0; j < 5; ++j) kernel(c, j) = 0.2;
  Tensor<double> out = batch_average_smooth(phi, batch, n, kernel, 0.3);
  REQUIRE(out.rows() == n);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      CHECK(out(i, c) > 0.3);
      CHECK(out(i, c) <= 1.0);
    }
  // constant input (per channel) must be a fixed point of box smoothing
  Tensor<double> flat({batch * n, 3});
  for (int64_t i = 0; i < flat.rows(); ++i)
    for (int c = 0; c < 3; ++c) flat(i, c) = 0.4 + 0.2 * c;
  Tensor<double> fout = batch_average_smooth(flat, batch, n, kernel, 0.3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(fout(i, c) == doctest::Approx(0.4 + 0.2 * c).epsilon(1e-12));
}

TEST_CASE("smoothing backward matches finite differences") {
  std::mt19937 rng(10);
  const double h = 1e-6;
  std::uniform_real_distribution<double> up(0.35, 0.99), ug(-1.0, 1.0),
      uk(-0.3, 0.5);

  for (int trial = 0; trial < 10; ++trial) {
    const int batch = 3, n = 6, k = 5;
    Tensor<double> phi({batch * n, 3}), kernel({3, k}), dout({n, 3});
    for (auto& v : phi.data) v = up(rng);
    for (auto& v : kernel.data) v = uk(rng);
    for (auto& v : dout.data) v = ug(rng);

    auto value = [&](const Tensor<double>& ph, const Tensor<double>& kr) {
      Tensor<double> out = batch_average_smooth(ph, batch, n, kr, 0.3);
      double acc = 0;
      for (int64_t i = 0; i < out.numel(); ++i) acc += dout.data[i] * out.data[i];
      return acc;
    };

    SmoothCache<double> cache;
    batch_average_smooth(phi, batch, n, kernel, 0.3, &cache);
    Tensor<double> dphi({batch * n, 3}), dkernel({3, k});
    batch_average_smooth_backward(kernel, 0.3, cache, dout, dphi, dkernel);

    auto fd_check = [&](Tensor<double>& t, int64_t idx, double analytic) {
      double saved = t.data[idx];
      t.data[idx] = saved + h;
      double lp = value(phi, kernel);
      t.data[idx] = saved - h;
      double lm = value(phi, kernel);
      t.data[idx] = saved;
      double fd = (lp - lm) / (2 * h);
      double denom = std::max({std::abs(fd), std::abs(analytic), 1e-7});
      CHECK(std::abs(fd - analytic) / denom < 1e-5);
    };
    for (int64_t i = 0; i < phi.numel(); ++i) fd_check(phi, i, dphi.data[i]);
    for (int64_t i = 0; i < kernel.numel(); ++i) fd_check(kernel, i, dkernel.data[i]);
  }
}
