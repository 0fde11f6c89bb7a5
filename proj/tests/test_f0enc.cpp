#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "svc/f0enc.hpp"
#include "svc/nn/ops.hpp"

using namespace svc;

namespace {

void zero_biases(PbtcEncoder& enc) {
  for (auto& b : enc.branches()) {
    nn::Tensor t = b.bias;
    for (double& v : t.mutable_data()) v = 0.0;
  }
}

// Direct transcription of the branch sum:
//   y[t, f] = sum_k bias_k[f] + sum_{s, l, w : s + w*d_k = t} x[s, l] * W_k[l, f, w]
std::vector<double> reference_pbtc(const PbtcEncoder& enc, const std::vector<double>& x,
                                   std::size_t T) {
  const std::size_t L = enc.levels(), F = enc.dim(), W = enc.width();
  std::vector<double> y(T * F, 0.0);
  for (const auto& br : enc.branches()) {
    const auto w = br.weight.data();
    const auto b = br.bias.data();
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) y[t * F + f] += b[f];
    for (std::size_t s = 0; s < T; ++s)
      for (std::size_t tap = 0; tap < W; ++tap) {
        const std::size_t t = s + tap * static_cast<std::size_t>(br.dilation);
        if (t >= T) continue;
        for (std::size_t l = 0; l < L; ++l)
          for (std::size_t f = 0; f < F; ++f) y[t * F + f] += x[s * L + l] * w[(l * F + f) * W + tap];
      }
  }
  return y;
}

nn::Tensor matrix(std::size_t rows, std::size_t cols, const std::vector<double>& v) {
  return nn::Tensor::constant({rows, cols}, v);
}

std::vector<double> sparse_random(std::size_t T, std::size_t L, Rng& rng) {
  std::vector<double> x(T * L, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    if (rng.uniform() < 0.7) x[t * L + rng.below(L)] = rng.uniform(-2.0, 2.0);
  return x;
}

double max_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("encoder construction") {
  const QLutEncoder q(400, 256, 1);
  CHECK(q.table().shape() == nn::Shape{400, 256});
  const QLutEncoder q2(400, 256, 1);
  CHECK(std::equal(q.table().data().begin(), q.table().data().end(), q2.table().data().begin()));
  const double bound = 1.0 / std::sqrt(400.0);
  for (double v : q.table().data()) CHECK(std::abs(v) <= bound);

  const PbtcEncoder p(EncoderDims{400, 256, 10, 3}, 1);
  REQUIRE(p.branch_count() == 10);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(p.branches()[k].dilation == static_cast<int>(k + 1));
    CHECK(p.branches()[k].weight.shape() == nn::Shape{400, 256, 3});
  }
  CHECK(p.reach() == 20);

  const PbtcEncoder p2(EncoderDims{400, 256, 10, 3}, 1);
  CHECK(p2.branches()[9].weight.data()[12345] == p.branches()[9].weight.data()[12345]);
  const PbtcEncoder p3(EncoderDims{400, 256, 10, 3}, 2);
  CHECK(p3.branches()[9].weight.data()[12345] != p.branches()[9].weight.data()[12345]);
}

TEST_CASE("q-lut lookup semantics") {
  const QLutEncoder q(10, 4, 3);
  const auto y = q.forward(QuantizedF0{{7, 7, 7}, 10});
  REQUIRE(y.shape() == nn::Shape{3, 4});
  for (std::size_t f = 0; f < 4; ++f) {
    CHECK(y.data()[f] == q.table().data()[7 * 4 + f]);
    CHECK(y.data()[4 + f] == y.data()[f]);
    CHECK(y.data()[8 + f] == y.data()[f]);
  }
  const auto a = q.forward(QuantizedF0{{1, 2, 3}, 10});
  const auto b = q.forward(QuantizedF0{{1, 9, 3}, 10});
  for (std::size_t i = 0; i < 12; ++i) {
    if (i / 4 == 1)
      CHECK(a.data()[i] != b.data()[i]);
    else
      CHECK(a.data()[i] == b.data()[i]);
  }
  CHECK_THROWS_AS(q.forward(QuantizedF0{{10}, 10}), std::out_of_range);
}

TEST_CASE("q-lut gradient touches only the rows in use") {
  const QLutEncoder q(8, 4, 5);
  nn::Tensor table = q.table();
  table.zero_grad();
  const auto y = q.forward(QuantizedF0{{2, 5, 2, 0}, 8});
  nn::dot(y, test::random_weights(y.shape(), 9)).backward();
  for (std::size_t r = 0; r < 8; ++r) {
    double mag = 0;
    for (std::size_t f = 0; f < 4; ++f) mag += std::abs(table.grad()[r * 4 + f]);
    if (r == 0 || r == 2 || r == 5)
      CHECK(mag > 0);
    else
      CHECK(mag == 0);
  }
}

TEST_CASE("one-hot layout") {
  const auto m = one_hot(QuantizedF0{{0, 2}, 3}, 3);
  REQUIRE(m.shape() == nn::Shape{2, 3});
  CHECK(std::vector<double>(m.data().begin(), m.data().end()) == std::vector<double>{1, 0, 0, 0, 0, 1});
  const auto e = one_hot(QuantizedF0{{}, 3}, 3);
  CHECK(e.shape() == nn::Shape{0, 3});
}

TEST_CASE("pbtc matches a direct branch sum") {
  const PbtcEncoder enc(EncoderDims{6, 3, 4, 3}, 11);
  Rng rng(4);
  const std::size_t T = 13;
  const auto x = sparse_random(T, 6, rng);
  const auto y = enc.forward(matrix(T, 6, x));
  REQUIRE(y.shape() == nn::Shape{T, 3});
  CHECK(max_diff(y.data(), reference_pbtc(enc, x, T)) < 1e-12);

  // Zero input yields the summed biases on every frame.
  const auto z = enc.forward(matrix(T, 6, std::vector<double>(T * 6, 0.0)));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < 3; ++f) {
      double s = 0;
      for (const auto& br : enc.branches()) s += br.bias.data()[f];
      CHECK(z.data()[t * 3 + f] == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("pbtc superposition and scaling") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const std::size_t L = 3 + rng.below(6), F = 1 + rng.below(5), K = 1 + rng.below(10);
    const std::size_t T = 5 + rng.below(30);
    PbtcEncoder enc(EncoderDims{static_cast<int>(L), static_cast<int>(F), static_cast<int>(K), 3}, seed);
    zero_biases(enc);
    const auto x1 = sparse_random(T, L, rng), x2 = sparse_random(T, L, rng);
    std::vector<double> sum(x1.size()), twice(x1.size());
    for (std::size_t i = 0; i < x1.size(); ++i) {
      sum[i] = x1[i] + x2[i];
      twice[i] = 2.0 * x1[i];
    }
    const auto y1 = enc.forward(matrix(T, L, x1));
    const auto y2 = enc.forward(matrix(T, L, x2));
    const auto ys = enc.forward(matrix(T, L, sum));
    const auto yt = enc.forward(matrix(T, L, twice));
    double sup = 0, scl = 0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      sup = std::max(sup, std::abs(ys.data()[i] - y1.data()[i] - y2.data()[i]));
      scl = std::max(scl, std::abs(yt.data()[i] - 2.0 * y1.data()[i]));
    }
    CHECK(sup < 1e-6);
    CHECK(scl < 1e-6);
  }
}

TEST_CASE("pbtc impulse response support") {
  for (int K : {1, 3, 10}) {
    for (int W : {2, 3}) {
      PbtcEncoder enc(EncoderDims{5, 4, K, W}, static_cast<std::uint64_t>(K * 10 + W));
      zero_biases(enc);
      const std::size_t T = 40;
      const std::size_t reach = static_cast<std::size_t>((W - 1) * K);
      for (std::size_t t0 : {0u, 7u, 30u, 39u}) {
        std::vector<double> x(T * 5, 0.0);
        x[t0 * 5 + 3] = 1.0;
        const auto y = enc.forward(matrix(T, 5, x));
        const std::size_t hi = std::min(T - 1, t0 + reach);
        bool inside = true, reaches_end = false;
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t f = 0; f < 4; ++f) {
            const double v = y.data()[t * 4 + f];
            if ((t < t0 || t > hi) && v != 0.0) inside = false;
            if (t == hi && v != 0.0) reaches_end = true;
          }
        CHECK(inside);
        CHECK(reaches_end);  // the bound is tight
      }
    }
  }
}

TEST_CASE("pbtc interior translation equivariance") {
  PbtcEncoder enc(EncoderDims{6, 4, 10, 3}, 21);
  zero_biases(enc);
  const std::size_t T = 120, reach = 20;
  auto response = [&](std::size_t t0) {
    std::vector<double> x(T * 6, 0.0);
    x[t0 * 6 + 2] = 1.0;
    x[(t0 + 3) * 6 + 5] = -0.5;
    return enc.forward(matrix(T, 6, x));
  };
  const std::size_t a = reach + 1, delta = 37;
  const auto ya = response(a), yb = response(a + delta);
  double worst = 0;
  for (std::size_t t = 0; t + delta < T; ++t)
    for (std::size_t f = 0; f < 4; ++f)
      worst = std::max(worst, std::abs(ya.data()[t * 4 + f] - yb.data()[(t + delta) * 4 + f]));
  CHECK(worst < 1e-6);
}

TEST_CASE("encoder gradients pass finite-difference checks") {
  const std::size_t T = 16;
  QuantizedF0 q;
  q.levels = 8;
  Rng rng(8);
  for (std::size_t t = 0; t < T; ++t) q.bins.push_back(static_cast<int>(rng.below(8)));
  const auto r = test::random_weights({T, 4}, 12);

  SUBCASE("q-lut") {
    const F0Encoder enc(EncoderKind::kQLut, EncoderDims{8, 4, 10, 3}, 1);
    nn::ParamList ps;
    enc.collect(ps, "f0enc");
    const auto res = test::check_gradients(ps, [&] { return nn::dot(enc.forward(q), r); }, 10, 1e-4, 2);
    CHECK(res.checked == 10);
    CHECK(res.worst < 1e-3);
  }
  SUBCASE("pbtc") {
    const F0Encoder enc(EncoderKind::kPbtc, EncoderDims{8, 4, 10, 3}, 1);
    nn::ParamList ps;
    enc.collect(ps, "f0enc");
    CHECK(ps.size() == 20);
    auto loss = [&] {
      const auto y = enc.forward(q);
      return nn::dot(nn::tanh(y), r);
    };
    const auto res = test::check_gradients(ps, loss, 10, 1e-4, 3);
    CHECK(res.checked == 10);
    CHECK(res.worst < 1e-3);
  }
}

TEST_CASE("encoder kind names") {
  CHECK(to_string(EncoderKind::kQLut) == "qlut");
  CHECK(encoder_kind_from_string("pbtc") == EncoderKind::kPbtc);
  CHECK_THROWS(encoder_kind_from_string("lstm"));
}
