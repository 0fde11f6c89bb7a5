#pragma once

#include <cstddef>
#include <vector>

#include "svc/nn/tensor.hpp"

namespace svc::nn {

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
  std::size_t groups = 1;
};

// x: [N, Cin, T], w: [Cout, Cin/groups, K], bias: [Cout] or undefined.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              const Conv1dOptions& opt);

// x: [N, Cin, T], w: [Cin, Cout, K], bias: [Cout] or undefined.
// The full transposed output has length (T-1)*stride + K; `crop` samples
// are dropped from its start and `out_len` samples kept (zero beyond).
Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& bias,
                        std::size_t stride, std::size_t crop,
                        std::size_t out_len);

// w[o, ...] = g[o] * v[o, ...] / ||v[o, ...]||.
Tensor weight_norm(const Tensor& v, const Tensor& g);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor tanh(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// Sum of scalar tensors with weights.
Tensor weighted_sum(const std::vector<Tensor>& terms,
                    const std::vector<double>& weights);

// sum(a * b) over all elements; sizes must match.
Tensor dot(const Tensor& a, const Tensor& b);

// mean((x - target)^2) for a constant target.
Tensor mse_to_constant(const Tensor& x, double target);
// mean(|a - b|); a and b must have identical shapes.
Tensor l1_loss(const Tensor& a, const Tensor& b);

// Average pooling over the last axis of [N, C, T] with zero padding that is
// counted in the divisor.
Tensor avg_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride,
                  std::size_t pad);

// [N, 1, L] -> [N*p, 1, ceil(L/p)]: right reflect-pad to a multiple of the
// period, then column j of the (L/p) x p map becomes batch entry n*p + j.
Tensor period_fold(const Tensor& x, std::size_t period);

// Row lookup: table [R, C], indices -> [len(indices), C].
Tensor embedding(const Tensor& table, const std::vector<int>& indices);

// Rows [start, start+count) of a [R, C] matrix.
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);

// Samples [start, start+count) along the last axis of [N, C, T].
Tensor slice_time(const Tensor& x, std::size_t start, std::size_t count);

// Stacks same-shaped [1, C, T] tensors along the batch axis.
Tensor stack_batch(const std::vector<Tensor>& xs);

Tensor flatten(const Tensor& x);

}  // namespace svc::nn
