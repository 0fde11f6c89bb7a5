#pragma once

#include <cstdint>
#include <vector>

#include "svc/nn/tensor.hpp"

namespace svc::nn {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
};

// Adam over a fixed parameter list. Moments are stored per parameter in the
// list order so they can be checkpointed alongside the parameters.
class Adam {
 public:
  Adam() = default;
  Adam(ParamList params, AdamOptions opt);

  // One update with learning rate `lr` using the gradients currently held by
  // the parameters. Parameters without a gradient are left untouched.
  void step(double lr);
  void zero_grad();

  const ParamList& params() const { return params_; }
  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t s) { steps_ = s; }
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const AdamOptions& options() const { return opt_; }

 private:
  ParamList params_;
  AdamOptions opt_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t steps_ = 0;
};

}  // namespace svc::nn
