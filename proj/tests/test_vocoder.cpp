#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "svc/error.hpp"
#include "svc/nn/ops.hpp"
#include "svc/vocoder.hpp"
#include "synth.hpp"

using namespace svc;

namespace {

nn::Tensor random_const(const nn::Shape& s, std::uint64_t seed, double scale = 1.0) {
  auto t = test::random_weights(s, seed);
  for (double& v : t.mutable_data()) v *= scale;
  return t;
}

GeneratorConfig tiny_gen(int channels) {
  GeneratorConfig g = generator_preset("tiny");
  g.base_channels = channels;
  return g;
}

nn::Tensor wave_tensor(const Waveform& w) {
  return nn::Tensor::constant({1, 1, w.size()}, w.samples);
}

}  // namespace

TEST_CASE("conditioning assembly") {
  const auto f0 = random_const({200, 256}, 1), ct = random_const({200, 64}, 2), sg = random_const({1, 128}, 3);
  const auto c = assemble_conditioning(f0, ct, sg);
  REQUIRE(c.shape() == nn::Shape{1, 448, 200});
  // Channel-major layout [f0 | content | singer], singer constant over time.
  CHECK(c.data()[5 * 200 + 17] == f0.data()[17 * 256 + 5]);
  CHECK(c.data()[(256 + 3) * 200 + 40] == ct.data()[40 * 64 + 3]);
  for (std::size_t t = 0; t < 200; ++t) CHECK(c.data()[(320 + 9) * 200 + t] == sg.data()[9]);

  const auto longer = random_const({204, 64}, 4);
  CHECK(assemble_conditioning(f0, longer, sg).shape() == nn::Shape{1, 448, 200});
  try {
    assemble_conditioning(f0, random_const({250, 64}, 5), sg);
    FAIL("expected misalignment");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("stream misalignment") != std::string::npos);
  }
}

TEST_CASE("conditioning assembly passes gradients to every stream") {
  auto p = [](nn::Shape s, std::uint64_t seed) {
    auto c = test::random_weights(s, seed);
    return nn::Tensor::parameter(s, {c.data().begin(), c.data().end()});
  };
  nn::Tensor f0 = p({9, 3}, 1), ct = p({11, 2}, 2), sg = p({1, 4}, 3);
  const auto r = test::random_weights({1, 9, 9}, 4);
  const auto res = test::check_gradients({{"f0", f0}, {"ct", ct}, {"sg", sg}},
                                         [&] { return nn::dot(assemble_conditioning(f0, ct, sg), r); },
                                         30, 1e-6, 5);
  CHECK(res.worst < 1e-6);
}

TEST_CASE("generator presets and validation") {
  CHECK(generator_preset("desk").hop() == 120);
  CHECK(generator_preset("desk").base_channels == 64);
  CHECK(generator_preset("paper").base_channels == 512);
  const auto lit = generator_preset("paper-literal");
  CHECK(lit.upsample_rates == std::vector<int>{3, 4, 5, 8});
  CHECK(lit.hop() == 480);
  CHECK(lit.conditioning_rate == 50.0);
  CHECK(generator_preset("desk").resblock_kernels == std::vector<int>{3, 7, 11});
  CHECK(generator_preset("desk").resblock_dilations == std::vector<int>{1, 3, 5});
  CHECK_THROWS_AS(generator_preset("huge"), ConfigError);

  GeneratorConfig bad = generator_preset("desk");
  bad.upsample_rates = {3, 4, 5, 8};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = generator_preset("desk");
  bad.base_channels = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = generator_preset("desk");
  bad.resblock_kernels = {3, 4};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generator output length and range") {
  const Generator g(12, tiny_gen(16), 3);
  for (std::size_t T : {1u, 10u, 20u}) {
    const auto y = g.forward(random_const({1, 12, T}, T, 3.0));
    REQUIRE(y.shape() == nn::Shape{1, 1, T * 120});
    for (double v : y.data()) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
  CHECK_THROWS_AS(g.forward(random_const({1, 11, 4}, 1)), std::invalid_argument);

  const Generator lit(448, generator_preset("paper-literal"), 1);
  CHECK(lit.forward(random_const({1, 448, 2}, 2)).shape() == nn::Shape{1, 1, 960});
}

TEST_CASE("generator is shift equivariant in the interior") {
  const Generator g(6, tiny_gen(8), 9);
  const std::size_t T = 40, hop = 120;
  const auto base = random_const({1, 6, T}, 1);
  std::vector<double> shifted(6 * T);
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t t = 0; t < T; ++t) shifted[c * T + t] = base.data()[c * T + (t == 0 ? 0 : t - 1)];
  // The response to all-zero conditioning is itself shift invariant in the
  // interior; removing it leaves the conditioning-driven part.
  const auto z = g.forward(nn::Tensor::zeros({1, 6, T}));
  auto a = g.forward(base);
  auto b = g.forward(nn::Tensor::constant({1, 6, T}, shifted));
  for (std::size_t n = 0; n < a.size(); ++n) {
    a.mutable_data()[n] -= z.data()[n];
    b.mutable_data()[n] -= z.data()[n];
  }

  // Normalized cross-correlation peak over the interior.
  const std::size_t lo = 10 * hop, hi = 30 * hop;
  auto ncc = [&](long lag) {
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t n = lo; n < hi; ++n) {
      const double x = a.data()[n], y = b.data()[static_cast<std::size_t>(static_cast<long>(n) + lag)];
      sab += x * y;
      saa += x * x;
      sbb += y * y;
    }
    return sab / std::sqrt(saa * sbb);
  };
  long best_lag = 0;
  double best = -2.0;
  for (long lag = -2 * static_cast<long>(hop); lag <= 2 * static_cast<long>(hop); ++lag) {
    const double v = ncc(lag);
    if (v > best) {
      best = v;
      best_lag = lag;
    }
  }
  CHECK(best_lag == static_cast<long>(hop));
  double worst = 0;
  for (std::size_t n = lo; n < hi; ++n) worst = std::max(worst, std::abs(a.data()[n] - b.data()[n + hop]));
  CHECK(worst < 1e-12);
}

TEST_CASE("generator gradients pass finite-difference checks") {
  const Generator g(5, tiny_gen(8), 4);
  nn::ParamList ps;
  g.collect(ps, "gen");
  const auto cond = random_const({1, 5, 8}, 2);
  const auto r = test::random_weights({1, 1, 960}, 3);
  const auto res = test::check_gradients(ps, [&] { return nn::dot(g.forward(cond), r); }, 10, 1e-4, 6);
  CHECK(res.checked == 10);
  CHECK(res.worst < 1e-3);
}

TEST_CASE("discriminator structure") {
  const DiscriminatorConfig full;
  CHECK(full.mpd_periods == std::vector<int>{2, 3, 5, 7, 11});
  CHECK(full.msd_scales == std::vector<int>{1, 2, 4});
  const Discriminators d(tiny_discriminators(), 1);
  CHECK(d.count() == 8);
  const auto w = wave_tensor(test::vowel(0.05));
  CHECK(d.forward_mpd(w).size() == 5);
  CHECK(d.forward_msd(w).size() == 3);

  Waveform zero;
  zero.samples.assign(1200, 0.0);
  for (const auto& o : d.forward(wave_tensor(zero)))
    for (double v : o.score.data()) CHECK(std::isfinite(v));

  for (std::size_t len : {1200u, 1201u})
    for (std::size_t p : {2u, 3u, 5u, 7u, 11u}) {
      const auto s = period_fold_shape(len, p);
      CHECK(s.columns == p);
      CHECK(s.rows * p >= len);
      CHECK(s.rows * p < len + p);
    }
  CHECK(period_fold_shape(1200, 3).rows == 400);
  CHECK(period_fold_shape(1201, 2).rows == 601);
  for (std::size_t len : {1200u, 1201u, 17u}) CHECK(pooled_length(len) == (len + 2 - 4) / 2 + 1);

  DiscriminatorConfig bad = tiny_discriminators();
  bad.mpd_periods = {2, 4};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("every discriminator passes gradient to its input") {
  const Discriminators d(tiny_discriminators(), 2);
  const auto src = test::vowel(0.05).samples;
  auto outs_of = [&](std::size_t i, const nn::Tensor& x) {
    auto all = d.forward(x);
    return all[i].score;
  };
  for (std::size_t i = 0; i < d.count(); ++i) {
    nn::Tensor x = nn::Tensor::parameter({1, 1, src.size()}, src);
    const auto s = outs_of(i, x);
    nn::dot(s, test::random_weights(s.shape(), i)).backward();
    double norm = 0;
    for (double g : x.grad()) norm += g * g;
    CHECK(norm > 0);
  }
}

TEST_CASE("loss semantics") {
  const Discriminators d(tiny_discriminators(), 3);
  const MelAnalyzer an(MelConfig{});
  const auto real = wave_tensor(test::vowel(0.1));
  const auto same = gan_losses(real, real, d, an);
  CHECK(same.fm == 0.0);
  CHECK(same.mel == 0.0);
  CHECK(same.adv_d >= 0.0);

  const auto other = wave_tensor(test::sine(300.0, 0.1));
  const auto diff = gan_losses(real, other, d, an);
  CHECK(diff.fm > 0.0);
  CHECK(diff.mel > 0.0);
  CHECK(diff.adv_d >= 0.0);
  CHECK(diff.generator_total(LossWeights{}) ==
        doctest::Approx(diff.adv_g + diff.fm + 40.0 * diff.mel).epsilon(1e-15));

  // Optimal discriminator: real scores 1, fake scores 0.
  std::vector<nn::Tensor> ones, zeros;
  for (std::size_t n : {3u, 7u, 1u}) {
    ones.push_back(nn::Tensor::constant({n}, std::vector<double>(n, 1.0)));
    zeros.push_back(nn::Tensor::constant({n}, std::vector<double>(n, 0.0)));
  }
  CHECK(discriminator_adv_loss(ones, zeros).item() == 0.0);
  CHECK(generator_adv_loss(ones).item() == 0.0);
  CHECK(generator_adv_loss(zeros).item() == doctest::Approx(3.0));
  CHECK(discriminator_adv_loss(zeros, ones).item() == doctest::Approx(6.0));

  Discriminators c(tiny_discriminators(), 4);
  c.set_constant_output(1.0);
  for (const auto& o : c.forward(real))
    for (double v : o.score.data()) CHECK(v == 1.0);

  CHECK_THROWS_AS(gan_losses(real, wave_tensor(test::vowel(0.2)), d, an), std::invalid_argument);
}

TEST_CASE("mel loss gradient reaches the waveform") {
  const MelAnalyzer an(MelConfig{});
  const auto ref = an.compute(test::sine(220.0, 0.04).samples);
  const auto src = test::vowel(0.04).samples;
  nn::Tensor x = nn::Tensor::parameter({1, 1, src.size()}, src);
  const auto res = test::check_gradients({{"x", x}}, [&] { return mel_l1_loss(x, {ref}, an); }, 10, 1e-6, 1);
  CHECK(res.worst < 1e-3);
}
