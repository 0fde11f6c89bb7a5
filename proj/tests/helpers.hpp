#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "svc/nn/tensor.hpp"
#include "svc/rng.hpp"

namespace svc::test {

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("svc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct GradCheck {
  double worst = 0.0;  // largest relative error seen
  int checked = 0;
};

// Central-difference check of `count` randomly chosen parameter entries.
// `loss` must rebuild the graph from the current parameter values.
inline GradCheck check_gradients(const nn::ParamList& params,
                                 const std::function<nn::Tensor()>& loss,
                                 int count, double h, std::uint64_t seed) {
  for (const auto& p : params) {
    nn::Tensor t = p.tensor;
    t.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params)
    analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());

  Rng rng(seed);
  GradCheck r;
  for (int i = 0; i < count; ++i) {
    const std::size_t pi = rng.below(params.size());
    nn::Tensor t = params[pi].tensor;
    const std::size_t j = rng.below(t.size());
    if (analytic[pi].empty()) continue;
    const double orig = t.data()[j];
    double fp, fm;
    {
      nn::NoGradGuard ng;
      t.mutable_data()[j] = orig + h;
      fp = loss().item();
      t.mutable_data()[j] = orig - h;
      fm = loss().item();
      t.mutable_data()[j] = orig;
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[pi][j];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-7});
    r.worst = std::max(r.worst, std::abs(a - numeric) / denom);
    ++r.checked;
  }
  return r;
}

// Fixed random weights for turning a tensor into a scalar loss.
inline nn::Tensor random_weights(const nn::Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(nn::shape_size(shape));
  for (auto& e : v) e = rng.uniform(-1.0, 1.0);
  return nn::Tensor::constant(shape, std::move(v));
}

}  // namespace svc::test
