#include "doctest.h"

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "svc/kernels.hpp"
#include "svc/nn/ops.hpp"

using namespace svc;
using namespace svc::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& e : v) e = rng.uniform(-1.0, 1.0);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct GeomCase {
  std::size_t batch, cin, cout, len, k, stride, dil, pl, pr, groups;
};

const GeomCase kCases[] = {
    {1, 1, 1, 10, 1, 1, 1, 0, 0, 1},    {2, 3, 4, 17, 3, 1, 1, 1, 1, 1},
    {1, 4, 6, 40, 5, 3, 1, 2, 2, 2},    {3, 8, 8, 33, 7, 1, 5, 15, 15, 4},
    {1, 2, 3, 9, 11, 1, 1, 5, 5, 1},    {2, 16, 16, 64, 41, 4, 1, 20, 20, 16},
    {1, 5, 2, 3, 5, 3, 1, 2, 2, 1},     {1, 4, 4, 25, 3, 2, 3, 0, 4, 1},
};

Conv1dGeom geom_of(const GeomCase& c) {
  Conv1dGeom g;
  g.batch = c.batch;
  g.in_channels = c.cin;
  g.out_channels = c.cout;
  g.in_len = c.len;
  g.kernel = c.k;
  g.stride = c.stride;
  g.dilation = c.dil;
  g.pad_left = c.pl;
  g.groups = c.groups;
  g.out_len = conv1d_out_len(c.len, c.k, c.stride, c.dil, c.pl, c.pr);
  return g;
}

}  // namespace

TEST_CASE("conv1d output length") {
  CHECK(conv1d_out_len(10, 3, 1, 1, 1, 1) == 10);
  CHECK(conv1d_out_len(10, 5, 3, 1, 2, 2) == 4);
  CHECK(conv1d_out_len(2, 5, 1, 1, 0, 0) == 0);
}

TEST_CASE("parallel conv kernels match the serial reference") {
  std::uint64_t seed = 10;
  for (const auto& c : kCases) {
    const Conv1dGeom g = geom_of(c);
    REQUIRE(g.out_len > 0);
    const auto x = noise(g.batch * g.in_channels * g.in_len, ++seed);
    const auto w = noise(g.weight_size(), ++seed);
    const auto b = noise(g.out_channels, ++seed);
    const auto gy = noise(g.batch * g.out_channels * g.out_len, ++seed);

    std::vector<double> ys(gy.size()), yp(gy.size());
    serial::conv1d_forward(g, x, w, b, ys);
    parallel::conv1d_forward(g, x, w, b, yp);
    CHECK(max_abs_diff(ys, yp) < 1e-12);

    std::vector<double> gxs(x.size(), 0.5), gxp(x.size(), 0.5);
    serial::conv1d_backward_input(g, gy, w, gxs);
    parallel::conv1d_backward_input(g, gy, w, gxp);
    CHECK(max_abs_diff(gxs, gxp) < 1e-12);

    std::vector<double> gws(w.size(), 0.25), gwp(w.size(), 0.25);
    std::vector<double> gbs(b.size(), 0.0), gbp(b.size(), 0.0);
    serial::conv1d_backward_weight(g, gy, x, gws, gbs);
    parallel::conv1d_backward_weight(g, gy, x, gwp, gbp);
    CHECK(max_abs_diff(gws, gwp) < 1e-12);
    CHECK(max_abs_diff(gbs, gbp) < 1e-12);
  }
}

TEST_CASE("conv backward kernels are adjoint to the forward kernel") {
  // <conv(x), gy> = <x, conv^T(gy)> for the bias-free map.
  const Conv1dGeom g = geom_of(kCases[3]);
  const auto x = noise(g.batch * g.in_channels * g.in_len, 1);
  const auto w = noise(g.weight_size(), 2);
  const auto gy = noise(g.batch * g.out_channels * g.out_len, 3);
  std::vector<double> y(gy.size()), gx(x.size(), 0.0), gw(w.size(), 0.0);
  serial::conv1d_forward(g, x, w, {}, y);
  serial::conv1d_backward_input(g, gy, w, gx);
  serial::conv1d_backward_weight(g, gy, x, gw, {});
  double lhs = 0, rhs_x = 0, rhs_w = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * gy[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs_x += x[i] * gx[i];
  for (std::size_t i = 0; i < w.size(); ++i) rhs_w += w[i] * gw[i];
  CHECK(lhs == doctest::Approx(rhs_x).epsilon(1e-12));
  CHECK(lhs == doctest::Approx(rhs_w).epsilon(1e-12));
}

TEST_CASE("parallel yin difference matches the serial reference") {
  const auto x = noise(3000, 7);
  for (bool centered : {false, true}) {
    YinGeom g;
    g.frames = 26;
    g.hop = 120;
    g.first_start = -240;
    g.window = 480;
    g.max_lag = 480;
    g.centered = centered;
    std::vector<double> a(g.frames * (g.max_lag + 1)), b(a.size());
    serial::yin_difference(g, x, a);
    parallel::yin_difference(g, x, b);
    CHECK(max_abs_diff(a, b) < 1e-9);
    CHECK(a[0] == 0.0);  // zero lag
  }
}

TEST_CASE("autograd ops pass finite-difference checks") {
  using nn::Tensor;
  auto param = [](nn::Shape s, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(nn::shape_size(s));
    for (auto& e : v) e = rng.uniform(-1.0, 1.0);
    return Tensor::parameter(std::move(s), std::move(v));
  };

  SUBCASE("conv1d with groups, stride and dilation") {
    Tensor x = param({2, 4, 19}, 1), w = param({6, 2, 3}, 2), b = param({6}, 3);
    nn::Conv1dOptions o;
    o.stride = 2;
    o.dilation = 2;
    o.pad_left = 2;
    o.pad_right = 1;
    o.groups = 2;
    const Tensor r = test::random_weights({2, 6, 9}, 4);
    auto loss = [&] { return nn::dot(nn::conv1d(x, w, b, o), r); };
    const auto res = test::check_gradients({{"x", x}, {"w", w}, {"b", b}}, loss, 20, 1e-5, 5);
    CHECK(res.worst < 1e-6);
  }
  SUBCASE("transposed convolution") {
    Tensor x = param({1, 3, 7}, 1), w = param({3, 2, 8}, 2), b = param({2}, 3);
    const Tensor r = test::random_weights({1, 2, 28}, 4);
    auto loss = [&] { return nn::dot(nn::conv_transpose1d(x, w, b, 4, 2, 28), r); };
    const auto res = test::check_gradients({{"x", x}, {"w", w}, {"b", b}}, loss, 20, 1e-5, 6);
    CHECK(res.worst < 1e-6);
  }
  SUBCASE("weight norm, leaky relu, tanh, pooling and folding") {
    Tensor v = param({3, 1, 2}, 1), g = param({3}, 2), x = param({2, 1, 23}, 3);
    const Tensor r = test::random_weights({2 * 5, 3, 2}, 4);
    auto loss = [&] {
      Tensor h = nn::avg_pool1d(x, 4, 2, 1);  // 23 -> 11
      h = nn::period_fold(h, 5);              // [10, 1, 3]
      h = nn::conv1d(nn::tanh(h), nn::weight_norm(v, g), {}, {});
      return nn::dot(nn::leaky_relu(h, 0.1), r);
    };
    const auto res = test::check_gradients({{"v", v}, {"g", g}, {"x", x}}, loss, 30, 1e-6, 7);
    CHECK(res.worst < 1e-5);
  }
}

TEST_CASE("period fold arithmetic") {
  for (std::size_t len : {1200u, 1201u})
    for (std::size_t p : {2u, 3u, 5u, 7u, 11u}) {
      std::vector<double> v(len);
      for (std::size_t i = 0; i < len; ++i) v[i] = static_cast<double>(i);
      const auto y = nn::period_fold(nn::Tensor::constant({1, 1, len}, v), p);
      const std::size_t rows = (len + p - 1) / p;
      REQUIRE(y.shape() == nn::Shape{p, 1, rows});
      // Column j of the (rows x p) map is batch entry j.
      CHECK(y.data()[0 * rows + 1] == static_cast<double>(p));
      CHECK(y.data()[1 * rows + 0] == 1.0);
      if (len % p != 0) {
        // Reflect padding mirrors around the last real sample.
        const std::size_t padded = rows * p;
        const std::size_t idx = len;  // first padded position
        const double expect = static_cast<double>(2 * (len - 1) - idx);
        CHECK(y.data()[(idx % p) * rows + idx / p] == expect);
        CHECK(padded - len < p);
      }
    }
}
