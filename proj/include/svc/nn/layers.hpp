#pragma once

#include <string>

#include "svc/nn/ops.hpp"
#include "svc/rng.hpp"

namespace svc::nn {

// Convolution with weight-normalized kernel w = g * v / ||v|| (per output
// channel) and bias.
class WnConv1d {
 public:
  WnConv1d() = default;
  // Weights ~ N(0, init_std); gains start at ||v|| so the initial effective
  // kernel equals v.
  WnConv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
           const Conv1dOptions& opt, double init_std, Rng& rng);

  Tensor forward(const Tensor& x) const;
  Tensor weight() const { return weight_norm(v_, g_); }
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor& gain() { return g_; }
  Tensor& bias() { return b_; }
  const Conv1dOptions& options() const { return opt_; }

 private:
  Tensor v_, g_, b_;
  Conv1dOptions opt_;
};

// Transposed convolution producing exactly in_len * stride samples, with a
// weight-normalized [Cin, Cout, K] kernel (normalized per input channel).
class WnConvTranspose1d {
 public:
  WnConvTranspose1d() = default;
  WnConvTranspose1d(std::size_t in_ch, std::size_t out_ch, std::size_t stride,
                    double init_std, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  std::size_t stride() const { return stride_; }
  std::size_t kernel() const { return 2 * stride_; }

 private:
  Tensor v_, g_, b_;
  std::size_t stride_ = 1;
};

}  // namespace svc::nn
