#pragma once

// Compute kernels behind the autograd ops and the pitch tracker.
//
// Every kernel exists twice: `serial` is a direct transcription of the
// defining sum, one output element at a time, and is kept as the test
// reference; `parallel` reorders the loops for contiguous inner access and
// distributes independent outputs over OpenMP threads. Each parallel output
// element is owned by exactly one thread and accumulated in a fixed order,
// so results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace svc::kernels {

// Geometry of a batched, grouped, dilated 1-D convolution
//   y[b, co, t] = bias[co] + sum_{ci in group(co), k}
//                 w[co, ci - group_start, k] * x[b, ci, t*stride + k*dilation - pad_left]
// with x read as zero outside [0, in_len).
struct Conv1dGeom {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t in_len = 0;
  std::size_t out_len = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t groups = 1;

  std::size_t in_per_group() const { return in_channels / groups; }
  std::size_t out_per_group() const { return out_channels / groups; }
  std::size_t weight_size() const {
    return out_channels * in_per_group() * kernel;
  }
};

// Output length of a convolution with explicit left/right zero padding.
std::size_t conv1d_out_len(std::size_t in_len, std::size_t kernel,
                           std::size_t stride, std::size_t dilation,
                           std::size_t pad_left, std::size_t pad_right);

// YIN difference function for a batch of frames:
//   d[f, tau] = sum_{j < window} (x[s + j] - x[s + j + tau])^2
// for tau in [0, max_lag], with s = start_f, or s = start_f - floor(tau/2)
// when `centered` (the compared pairs then straddle the same midpoint for
// every lag). Samples outside `signal` read as zero.
struct YinGeom {
  std::size_t frames = 0;
  std::size_t hop = 1;
  long first_start = 0;  // start sample of frame 0 (may be negative)
  std::size_t window = 0;
  std::size_t max_lag = 0;
  bool centered = false;
};

namespace serial {

void conv1d_forward(const Conv1dGeom& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y);
// gx += dL/dx
void conv1d_backward_input(const Conv1dGeom& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx);
// gw += dL/dw, gb += dL/db (gb may be empty)
void conv1d_backward_weight(const Conv1dGeom& g, std::span<const double> gy,
                            std::span<const double> x, std::span<double> gw,
                            std::span<double> gb);

void yin_difference(const YinGeom& g, std::span<const double> signal,
                    std::span<double> out);

}  // namespace serial

namespace parallel {

void conv1d_forward(const Conv1dGeom& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y);
void conv1d_backward_input(const Conv1dGeom& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx);
void conv1d_backward_weight(const Conv1dGeom& g, std::span<const double> gy,
                            std::span<const double> x, std::span<double> gw,
                            std::span<double> gb);

void yin_difference(const YinGeom& g, std::span<const double> signal,
                    std::span<double> out);

}  // namespace parallel

}  // namespace svc::kernels
