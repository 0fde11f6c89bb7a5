#include "svc/nn/adam.hpp"

#include <cmath>

namespace svc::nn {

Adam::Adam(ParamList params, AdamOptions opt)
    : params_(std::move(params)), opt_(opt) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::step(double lr) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_[i].tensor;
    if (!t.has_grad()) continue;
    auto w = t.mutable_data();
    auto g = t.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * g[j];
      v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      w[j] -= lr * mh / (std::sqrt(vh) + opt_.eps);
    }
  }
}

void Adam::zero_grad() { zero_grads(params_); }

}  // namespace svc::nn
