#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "svc/error.hpp"
#include "svc/pitch.hpp"
#include "synth.hpp"

using namespace svc;

namespace {

F0Contour contour_of(const std::vector<double>& hz) {
  F0Contour c;
  for (double v : hz) {
    c.values.push_back(v);
    c.voiced.push_back(v > 0 ? 1 : 0);
  }
  return c;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("tracker on a 220 Hz sine") {
  const auto c = extract_f0(test::sine(220.0, 1.0));
  CHECK(c.size() >= 199);
  CHECK(c.size() <= 201);
  CHECK(c.frame_rate == 200.0);
  CHECK(static_cast<double>(c.voiced_count()) >= 0.95 * static_cast<double>(c.size()));
  std::vector<double> err;
  for (std::size_t t = 0; t < c.size(); ++t)
    if (c.voiced[t]) err.push_back(std::abs(c.values[t] - 220.0));
  CHECK(median(err) < 1.0);
}

TEST_CASE("tracker follows a linear sweep") {
  const double secs = 1.0;
  const auto c = extract_f0(test::sweep(100.0, 600.0, secs));
  std::size_t voiced = 0, close = 0;
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (!c.voiced[t]) continue;
    ++voiced;
    const double truth = test::sweep_frequency(100.0, 600.0, secs, static_cast<double>(t) / 200.0);
    if (std::abs(c.values[t] - truth) / truth < 0.02) ++close;
  }
  CHECK(voiced > 150);
  CHECK(static_cast<double>(close) >= 0.95 * static_cast<double>(voiced));
}

TEST_CASE("tracker invariants and unvoiced inputs") {
  Waveform silence;
  silence.samples.assign(12000, 0.0);
  const auto s = extract_f0(silence);
  CHECK(s.size() == 100);
  CHECK(s.voiced_count() == 0);
  for (double v : s.values) CHECK(v == 0.0);

  CHECK(extract_f0(test::sine(30.0, 0.5)).voiced_count() == 0);

  Waveform tiny;
  tiny.samples.assign(100, 0.1);
  CHECK(extract_f0(tiny).size() == 0);

  for (double secs : {0.25, 0.7, 1.3}) {
    const auto c = extract_f0(test::vowel(secs));
    CHECK(std::abs(static_cast<double>(c.size()) - secs * 200.0) <= 1.0);
    for (std::size_t t = 0; t < c.size(); ++t) {
      if (c.voiced[t]) {
        CHECK(c.values[t] >= 50.0);
        CHECK(c.values[t] <= 800.0);
      } else {
        CHECK(c.values[t] == 0.0);
      }
    }
  }

  TrackerConfig narrow;
  narrow.fmin = 300.0;
  CHECK(extract_f0(test::sine(220.0, 0.5), narrow).voiced_count() == 0);
}

TEST_CASE("pooled statistics") {
  const auto s = compute_stats(contour_of({100, 0, 200}));
  CHECK(s.mean == 150.0);
  CHECK(s.std == 50.0);
  CHECK(s.voiced_frames == 2);

  const std::vector<F0Contour> two = {contour_of({100, 200}), contour_of({0, 300})};
  const auto p = compute_stats(two);
  // Direct pooled computation over {100, 200, 300}.
  const double mean = (100.0 + 200.0 + 300.0) / 3.0;
  const double var = ((100 - mean) * (100 - mean) + (200 - mean) * (200 - mean) + (300 - mean) * (300 - mean)) / 3.0;
  CHECK(p.mean == doctest::Approx(mean).epsilon(1e-15));
  CHECK(p.std == doctest::Approx(std::sqrt(var)).epsilon(1e-15));
  CHECK(p.std == doctest::Approx(81.6497).epsilon(1e-6));

  CHECK_THROWS_AS(compute_stats(contour_of({0, 0, 0})), DataError);
  CHECK_THROWS_AS(compute_stats(contour_of({0, 120, 0})), DataError);
}

TEST_CASE("normalization endpoints") {
  const F0Stats st{200.0, 20.0, 10};
  const auto n = normalize_f0(contour_of({200, 260, 100, 220, 0}), st);
  CHECK(*n[0] == 0.5);
  CHECK(*n[1] == 1.0);
  CHECK(*n[2] == 0.0);
  CHECK(*n[3] == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(n[4].has_value());
  CHECK_THROWS_AS(normalize_f0(contour_of({100}), F0Stats{100, 0, 3}), std::invalid_argument);
}

TEST_CASE("quantization edges, monotonicity and centre round trip") {
  const std::vector<std::optional<double>> edge = {0.0, 1.0, std::nullopt, 0.5};
  const auto q = quantize_f0(edge, 400);
  CHECK(q.levels == 400);
  CHECK(q.bins == std::vector<int>{1, 399, 0, 200});

  const F0Stats st{220.0, 40.0, 100};
  std::vector<double> hz;
  for (int i = 0; i < 500; ++i) hz.push_back(60.0 + 1.3 * i);
  const auto bins = quantize_f0(normalize_f0(contour_of(hz), st), 400).bins;
  for (std::size_t i = 1; i < bins.size(); ++i) CHECK(bins[i - 1] <= bins[i]);

  for (int levels : {2, 3, 10, 400}) {
    for (int b = 1; b < levels; ++b) {
      const std::vector<std::optional<double>> one = {bin_center(b, levels)};
      CHECK(quantize_f0(one, levels).bins[0] == b);
    }
  }
}

TEST_CASE("decimation keeps every k-th frame") {
  const auto c = contour_of({100, 0, 120, 130, 0, 150, 160});
  const auto d = decimate(c, 3);
  CHECK(d.values == std::vector<double>{100, 130, 160});
  CHECK(d.frame_rate == doctest::Approx(200.0 / 3.0));
}

TEST_CASE("f0 cache round trip is bit exact") {
  const auto dir = test::scratch_dir("pitch_cache");
  const auto c = extract_f0(test::vowel(0.4));
  save_f0_cache(c, TrackerConfig{}, dir / "a.f0");
  CHECK(std::filesystem::exists(dir / "a.f0.json"));
  const auto r = load_f0_cache(dir / "a.f0");
  CHECK(r.voiced == c.voiced);
  CHECK(r.frame_rate == c.frame_rate);
  REQUIRE(r.size() == c.size());
  // Values are stored as float32.
  for (std::size_t t = 0; t < c.size(); ++t)
    CHECK(r.values[t] == static_cast<double>(static_cast<float>(c.values[t])));
  save_f0_cache(r, TrackerConfig{}, dir / "b.f0");
  const auto r2 = load_f0_cache(dir / "b.f0");
  CHECK(r2.values == r.values);
  CHECK_THROWS_AS(load_f0_cache(dir / "missing.f0"), DataError);
}
