#include "svc/nn/ops.hpp"

#include <cmath>
#include <stdexcept>

#include "svc/kernels.hpp"

namespace svc::nn {

namespace k = svc::kernels::parallel;

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool wants(const Node& self, std::size_t i) {
  return i < self.inputs.size() && self.inputs[i]->requires_grad;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              const Conv1dOptions& opt) {
  require(x.rank() == 3 && w.rank() == 3, "conv1d: expected rank-3 x and w");
  kernels::Conv1dGeom g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.in_len = x.dim(2);
  g.out_channels = w.dim(0);
  g.kernel = w.dim(2);
  g.stride = opt.stride;
  g.dilation = opt.dilation;
  g.pad_left = opt.pad_left;
  g.groups = opt.groups;
  require(g.in_channels % g.groups == 0 && g.out_channels % g.groups == 0,
          "conv1d: channels not divisible by groups");
  require(w.dim(1) == g.in_per_group(), "conv1d: weight/input channel mismatch");
  require(!bias.defined() || bias.size() == g.out_channels,
          "conv1d: bias size mismatch");
  g.out_len = kernels::conv1d_out_len(g.in_len, g.kernel, g.stride, g.dilation,
                                      opt.pad_left, opt.pad_right);
  require(g.out_len > 0, "conv1d: input shorter than kernel span");

  std::vector<double> y(g.batch * g.out_channels * g.out_len);
  k::conv1d_forward(g, x.data(), w.data(),
                    bias.defined() ? bias.data() : std::span<const double>{},
                    y);
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(
      {g.batch, g.out_channels, g.out_len}, std::move(y), std::move(inputs),
      [g](Node& self) {
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        if (xn.requires_grad)
          k::conv1d_backward_input(g, self.grad, wn.value, xn.grad_buffer());
        const bool has_bias = self.inputs.size() > 2;
        const bool bias_grad = has_bias && wants(self, 2);
        if (wn.requires_grad) {
          k::conv1d_backward_weight(
              g, self.grad, xn.value, wn.grad_buffer(),
              bias_grad ? self.inputs[2]->grad_buffer() : std::span<double>{});
        } else if (bias_grad) {
          auto gb = self.inputs[2]->grad_buffer();
          for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t c = 0; c < g.out_channels; ++c)
              for (std::size_t t = 0; t < g.out_len; ++t)
                gb[c] += self.grad[(b * g.out_channels + c) * g.out_len + t];
        }
      });
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& bias,
                        std::size_t stride, std::size_t crop,
                        std::size_t out_len) {
  require(x.rank() == 3 && w.rank() == 3,
          "conv_transpose1d: expected rank-3 x and w");
  require(w.dim(0) == x.dim(1), "conv_transpose1d: channel mismatch");
  // A transposed convolution is the input-gradient of the convolution
  // whose weight has the same [Cin_t, Cout_t, K] memory layout.
  kernels::Conv1dGeom g;
  g.batch = x.dim(0);
  g.out_channels = x.dim(1);  // Cin of the transposed op
  g.in_channels = w.dim(1);   // Cout of the transposed op
  g.kernel = w.dim(2);
  g.stride = stride;
  g.dilation = 1;
  g.pad_left = crop;
  g.in_len = out_len;
  g.out_len = x.dim(2);
  const std::size_t cout = g.in_channels;
  require(!bias.defined() || bias.size() == cout,
          "conv_transpose1d: bias size mismatch");

  std::vector<double> y(g.batch * cout * out_len, 0.0);
  k::conv1d_backward_input(g, x.data(), w.data(), y);
  if (bias.defined()) {
    for (std::size_t b = 0; b < g.batch; ++b)
      for (std::size_t c = 0; c < cout; ++c) {
        double* row = y.data() + (b * cout + c) * out_len;
        for (std::size_t t = 0; t < out_len; ++t) row[t] += bias.data()[c];
      }
  }
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(
      {g.batch, cout, out_len}, std::move(y), std::move(inputs),
      [g, cout, out_len](Node& self) {
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        if (xn.requires_grad) {
          std::vector<double> tmp(xn.value.size());
          k::conv1d_forward(g, self.grad, wn.value, {}, tmp);
          auto gx = xn.grad_buffer();
          for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
        }
        if (wn.requires_grad)
          k::conv1d_backward_weight(g, xn.value, self.grad, wn.grad_buffer(),
                                    {});
        if (wants(self, 2)) {
          auto gb = self.inputs[2]->grad_buffer();
          for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t c = 0; c < cout; ++c)
              for (std::size_t t = 0; t < out_len; ++t)
                gb[c] += self.grad[(b * cout + c) * out_len + t];
        }
      });
}

Tensor weight_norm(const Tensor& v, const Tensor& g) {
  const std::size_t rows = v.dim(0);
  require(g.size() == rows, "weight_norm: gain size mismatch");
  const std::size_t cols = v.size() / rows;
  std::vector<double> norms(rows);
  std::vector<double> w(v.size());
  for (std::size_t o = 0; o < rows; ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < cols; ++i) {
      const double e = v.data()[o * cols + i];
      s += e * e;
    }
    norms[o] = std::sqrt(s);
    const double f = norms[o] > 0.0 ? g.data()[o] / norms[o] : 0.0;
    for (std::size_t i = 0; i < cols; ++i)
      w[o * cols + i] = f * v.data()[o * cols + i];
  }
  return make_result(
      v.shape(), std::move(w), {v, g},
      [rows, cols, norms = std::move(norms)](Node& self) {
        Node& vn = *self.inputs[0];
        Node& gn = *self.inputs[1];
        for (std::size_t o = 0; o < rows; ++o) {
          const double n = norms[o];
          if (n <= 0.0) continue;
          const double* gw = self.grad.data() + o * cols;
          const double* vr = vn.value.data() + o * cols;
          double dot = 0.0;
          for (std::size_t i = 0; i < cols; ++i) dot += gw[i] * vr[i];
          if (gn.requires_grad) gn.grad_buffer()[o] += dot / n;
          if (vn.requires_grad) {
            const double gain = gn.value[o];
            double* gv = vn.grad_buffer().data() + o * cols;
            const double a = gain / n;
            const double b = gain * dot / (n * n * n);
            for (std::size_t i = 0; i < cols; ++i)
              gv[i] += a * gw[i] - b * vr[i];
          }
        }
      });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  std::vector<double> y(x.size());
  const auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  return make_result(x.shape(), std::move(y), {x}, [slope](Node& self) {
    Node& xn = *self.inputs[0];
    auto gx = xn.grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += xn.value[i] > 0.0 ? self.grad[i] : slope * self.grad[i];
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> y(x.size());
  const auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(xv[i]);
  return make_result(x.shape(), std::move(y), {x}, [](Node& self) {
    auto gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += self.grad[i] * (1.0 - self.value[i] * self.value[i]);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    for (std::size_t j = 0; j < 2; ++j) {
      if (!self.inputs[j]->requires_grad) continue;
      auto g = self.inputs[j]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s * a.data()[i];
  return make_result(a.shape(), std::move(y), {a}, [s](Node& self) {
    auto g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor weighted_sum(const std::vector<Tensor>& terms,
                    const std::vector<double>& weights) {
  require(terms.size() == weights.size(), "weighted_sum: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i)
    total += weights[i] * terms[i].item();
  return make_result({1}, {total}, terms, [weights](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i)
      if (self.inputs[i]->requires_grad)
        self.inputs[i]->grad_buffer()[0] += weights[i] * self.grad[0];
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return make_result({1}, {s}, {a, b}, [](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    const double up = self.grad[0];
    if (an.requires_grad) {
      auto g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * bn.value[i];
    }
    if (bn.requires_grad) {
      auto g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * an.value[i];
    }
  });
}

Tensor mse_to_constant(const Tensor& x, double target) {
  const std::size_t n = x.size();
  require(n > 0, "mse_to_constant: empty input");
  double s = 0.0;
  for (double v : x.data()) s += (v - target) * (v - target);
  return make_result({1}, {s / static_cast<double>(n)}, {x},
                     [target, n](Node& self) {
                       Node& xn = *self.inputs[0];
                       auto g = xn.grad_buffer();
                       const double f = 2.0 * self.grad[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i)
                         g[i] += f * (xn.value[i] - target);
                     });
}

Tensor l1_loss(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "l1_loss: shape mismatch");
  const std::size_t n = a.size();
  require(n > 0, "l1_loss: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return make_result({1}, {s / static_cast<double>(n)}, {a, b},
                     [n](Node& self) {
                       Node& an = *self.inputs[0];
                       Node& bn = *self.inputs[1];
                       const double f = self.grad[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         const double s = f * sign(an.value[i] - bn.value[i]);
                         if (an.requires_grad) an.grad_buffer()[i] += s;
                         if (bn.requires_grad) bn.grad_buffer()[i] -= s;
                       }
                     });
}

Tensor avg_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride,
                  std::size_t pad) {
  require(x.rank() == 3, "avg_pool1d: expected [N, C, T]");
  const std::size_t rows = x.dim(0) * x.dim(1);
  const std::size_t len = x.dim(2);
  const std::size_t out_len =
      kernels::conv1d_out_len(len, kernel, stride, 1, pad, pad);
  require(out_len > 0, "avg_pool1d: input too short");
  const double inv = 1.0 / static_cast<double>(kernel);
  std::vector<double> y(rows * out_len, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < out_len; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < kernel; ++j) {
        const long i = static_cast<long>(t * stride + j) - static_cast<long>(pad);
        if (i >= 0 && i < static_cast<long>(len)) s += x.data()[r * len + i];
      }
      y[r * out_len + t] = s * inv;
    }
  return make_result(
      {x.dim(0), x.dim(1), out_len}, std::move(y), {x},
      [rows, len, out_len, kernel, stride, pad, inv](Node& self) {
        auto g = self.inputs[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t t = 0; t < out_len; ++t) {
            const double gv = self.grad[r * out_len + t] * inv;
            for (std::size_t j = 0; j < kernel; ++j) {
              const long i =
                  static_cast<long>(t * stride + j) - static_cast<long>(pad);
              if (i >= 0 && i < static_cast<long>(len)) g[r * len + i] += gv;
            }
          }
      });
}

Tensor period_fold(const Tensor& x, std::size_t period) {
  require(x.rank() == 3 && x.dim(1) == 1, "period_fold: expected [N, 1, L]");
  require(period >= 1, "period_fold: period must be positive");
  const std::size_t batch = x.dim(0);
  const std::size_t len = x.dim(2);
  const std::size_t padded = (len + period - 1) / period * period;
  require(padded - len < len, "period_fold: signal too short to reflect");
  const std::size_t height = padded / period;
  // Source index in x for padded position i (reflection without edge repeat).
  auto src = [len](std::size_t i) { return i < len ? i : 2 * len - 2 - i; };
  std::vector<double> y(batch * padded);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t j = 0; j < period; ++j)
      for (std::size_t h = 0; h < height; ++h)
        y[(n * period + j) * height + h] = x.data()[n * len + src(h * period + j)];
  return make_result(
      {batch * period, 1, height}, std::move(y), {x},
      [batch, period, height, len, src](Node& self) {
        auto g = self.inputs[0]->grad_buffer();
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t j = 0; j < period; ++j)
            for (std::size_t h = 0; h < height; ++h)
              g[n * len + src(h * period + j)] +=
                  self.grad[(n * period + j) * height + h];
      });
}

Tensor embedding(const Tensor& table, const std::vector<int>& indices) {
  require(table.rank() == 2, "embedding: expected [R, C] table");
  const std::size_t rows = table.dim(0);
  const std::size_t cols = table.dim(1);
  std::vector<double> y(indices.size() * cols);
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const int idx = indices[t];
    if (idx < 0 || static_cast<std::size_t>(idx) >= rows)
      throw std::out_of_range("embedding: index " + std::to_string(idx) +
                              " outside table of " + std::to_string(rows) +
                              " rows");
    std::copy_n(table.data().begin() + static_cast<std::size_t>(idx) * cols, cols,
                y.begin() + t * cols);
  }
  return make_result({indices.size(), cols}, std::move(y), {table},
                     [indices, cols](Node& self) {
                       auto g = self.inputs[0]->grad_buffer();
                       for (std::size_t t = 0; t < indices.size(); ++t) {
                         const std::size_t base =
                             static_cast<std::size_t>(indices[t]) * cols;
                         for (std::size_t c = 0; c < cols; ++c)
                           g[base + c] += self.grad[t * cols + c];
                       }
                     });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  require(x.rank() == 2, "slice_rows: expected [R, C]");
  require(start + count <= x.dim(0), "slice_rows: range out of bounds");
  const std::size_t cols = x.dim(1);
  std::vector<double> y(x.data().begin() + start * cols,
                        x.data().begin() + (start + count) * cols);
  return make_result({count, cols}, std::move(y), {x},
                     [start, cols](Node& self) {
                       auto g = self.inputs[0]->grad_buffer();
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         g[start * cols + i] += self.grad[i];
                     });
}

Tensor slice_time(const Tensor& x, std::size_t start, std::size_t count) {
  require(x.rank() == 3, "slice_time: expected [N, C, T]");
  const std::size_t len = x.dim(2);
  require(start + count <= len, "slice_time: range out of bounds");
  const std::size_t rows = x.dim(0) * x.dim(1);
  std::vector<double> y(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.data().begin() + r * len + start, count, y.begin() + r * count);
  return make_result({x.dim(0), x.dim(1), count}, std::move(y), {x},
                     [rows, len, start, count](Node& self) {
                       auto g = self.inputs[0]->grad_buffer();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t t = 0; t < count; ++t)
                           g[r * len + start + t] += self.grad[r * count + t];
                     });
}

Tensor stack_batch(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "stack_batch: no inputs");
  const Shape& s0 = xs.front().shape();
  require(s0.size() == 3 && s0[0] == 1, "stack_batch: expected [1, C, T]");
  const std::size_t each = xs.front().size();
  std::vector<double> y;
  y.reserve(each * xs.size());
  for (const auto& x : xs) {
    require(x.shape() == s0, "stack_batch: shape mismatch");
    y.insert(y.end(), x.data().begin(), x.data().end());
  }
  return make_result({xs.size(), s0[1], s0[2]}, std::move(y), xs,
                     [each](Node& self) {
                       for (std::size_t j = 0; j < self.inputs.size(); ++j) {
                         if (!self.inputs[j]->requires_grad) continue;
                         auto g = self.inputs[j]->grad_buffer();
                         for (std::size_t i = 0; i < each; ++i)
                           g[i] += self.grad[j * each + i];
                       }
                     });
}

Tensor flatten(const Tensor& x) {
  std::vector<double> y(x.data().begin(), x.data().end());
  return make_result({x.size()}, std::move(y), {x}, [](Node& self) {
    auto g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

}  // namespace svc::nn
