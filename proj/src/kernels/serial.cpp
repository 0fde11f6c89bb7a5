#include <stdexcept>

#include "svc/kernels.hpp"

namespace svc::kernels {

std::size_t conv1d_out_len(std::size_t in_len, std::size_t kernel,
                           std::size_t stride, std::size_t dilation,
                           std::size_t pad_left, std::size_t pad_right) {
  const std::size_t padded = in_len + pad_left + pad_right;
  const std::size_t span = dilation * (kernel - 1) + 1;
  if (padded < span) return 0;
  return (padded - span) / stride + 1;
}

namespace serial {

namespace {

inline long src_index(const Conv1dGeom& g, std::size_t t, std::size_t k) {
  return static_cast<long>(t * g.stride + k * g.dilation) -
         static_cast<long>(g.pad_left);
}

}  // namespace

void conv1d_forward(const Conv1dGeom& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y) {
  const std::size_t cin_g = g.in_per_group();
  const std::size_t cout_g = g.out_per_group();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const std::size_t grp = co / cout_g;
      for (std::size_t t = 0; t < g.out_len; ++t) {
        double acc = bias.empty() ? 0.0 : bias[co];
        for (std::size_t cl = 0; cl < cin_g; ++cl) {
          const std::size_t ci = grp * cin_g + cl;
          for (std::size_t k = 0; k < g.kernel; ++k) {
            const long s = src_index(g, t, k);
            if (s < 0 || s >= static_cast<long>(g.in_len)) continue;
            acc += w[(co * cin_g + cl) * g.kernel + k] *
                   x[(b * g.in_channels + ci) * g.in_len + s];
          }
        }
        y[(b * g.out_channels + co) * g.out_len + t] = acc;
      }
    }
  }
}

void conv1d_backward_input(const Conv1dGeom& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx) {
  const std::size_t cin_g = g.in_per_group();
  const std::size_t cout_g = g.out_per_group();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const std::size_t grp = co / cout_g;
      for (std::size_t t = 0; t < g.out_len; ++t) {
        const double gv = gy[(b * g.out_channels + co) * g.out_len + t];
        for (std::size_t cl = 0; cl < cin_g; ++cl) {
          const std::size_t ci = grp * cin_g + cl;
          for (std::size_t k = 0; k < g.kernel; ++k) {
            const long s = src_index(g, t, k);
            if (s < 0 || s >= static_cast<long>(g.in_len)) continue;
            gx[(b * g.in_channels + ci) * g.in_len + s] +=
                w[(co * cin_g + cl) * g.kernel + k] * gv;
          }
        }
      }
    }
  }
}

void conv1d_backward_weight(const Conv1dGeom& g, std::span<const double> gy,
                            std::span<const double> x, std::span<double> gw,
                            std::span<double> gb) {
  const std::size_t cin_g = g.in_per_group();
  const std::size_t cout_g = g.out_per_group();
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    const std::size_t grp = co / cout_g;
    for (std::size_t cl = 0; cl < cin_g; ++cl) {
      const std::size_t ci = grp * cin_g + cl;
      for (std::size_t k = 0; k < g.kernel; ++k) {
        double acc = 0.0;
        for (std::size_t b = 0; b < g.batch; ++b) {
          for (std::size_t t = 0; t < g.out_len; ++t) {
            const long s = src_index(g, t, k);
            if (s < 0 || s >= static_cast<long>(g.in_len)) continue;
            acc += gy[(b * g.out_channels + co) * g.out_len + t] *
                   x[(b * g.in_channels + ci) * g.in_len + s];
          }
        }
        gw[(co * cin_g + cl) * g.kernel + k] += acc;
      }
    }
    if (!gb.empty()) {
      double acc = 0.0;
      for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t t = 0; t < g.out_len; ++t)
          acc += gy[(b * g.out_channels + co) * g.out_len + t];
      gb[co] += acc;
    }
  }
}

void yin_difference(const YinGeom& g, std::span<const double> signal,
                    std::span<double> out) {
  const long n = static_cast<long>(signal.size());
  auto at = [&](long i) { return (i < 0 || i >= n) ? 0.0 : signal[i]; };
  for (std::size_t f = 0; f < g.frames; ++f) {
    const long frame_start = g.first_start + static_cast<long>(f * g.hop);
    for (std::size_t tau = 0; tau <= g.max_lag; ++tau) {
      const long start = frame_start - (g.centered ? static_cast<long>(tau / 2) : 0);
      double acc = 0.0;
      for (std::size_t j = 0; j < g.window; ++j) {
        const double d = at(start + static_cast<long>(j)) -
                         at(start + static_cast<long>(j + tau));
        acc += d * d;
      }
      out[f * (g.max_lag + 1) + tau] = acc;
    }
  }
}

}  // namespace serial
}  // namespace svc::kernels
