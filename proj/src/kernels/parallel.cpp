#include <algorithm>
#include <vector>

#include "svc/kernels.hpp"

namespace svc::kernels::parallel {

namespace {

// Range of output positions t with 0 <= t*stride + off < in_len.
struct TRange {
  std::size_t begin;
  std::size_t end;
};

inline TRange valid_range(long off, std::size_t stride, std::size_t in_len,
                          std::size_t out_len) {
  const long s = static_cast<long>(stride);
  long lo = 0;
  if (off < 0) lo = (-off + s - 1) / s;
  long hi = static_cast<long>(in_len) - off;  // need t*s < hi
  hi = hi <= 0 ? 0 : (hi + s - 1) / s;
  hi = std::min<long>(hi, static_cast<long>(out_len));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

void conv1d_forward(const Conv1dGeom& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y) {
  const std::size_t cin_g = g.in_per_group();
  const std::size_t cout_g = g.out_per_group();
  const long rows = static_cast<long>(g.batch * g.out_channels);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const std::size_t b = static_cast<std::size_t>(r) / g.out_channels;
    const std::size_t co = static_cast<std::size_t>(r) % g.out_channels;
    const std::size_t grp = co / cout_g;
    double* yr = y.data() + static_cast<std::size_t>(r) * g.out_len;
    std::fill(yr, yr + g.out_len, bias.empty() ? 0.0 : bias[co]);
    for (std::size_t cl = 0; cl < cin_g; ++cl) {
      const double* xr =
          x.data() + (b * g.in_channels + grp * cin_g + cl) * g.in_len;
      const double* wr = w.data() + (co * cin_g + cl) * g.kernel;
      for (std::size_t k = 0; k < g.kernel; ++k) {
        const double wk = wr[k];
        const long off = static_cast<long>(k * g.dilation) -
                         static_cast<long>(g.pad_left);
        const TRange tr = valid_range(off, g.stride, g.in_len, g.out_len);
        if (g.stride == 1) {
          const double* xs = xr + (static_cast<long>(tr.begin) + off);
          double* yt = yr + tr.begin;
          for (std::size_t i = 0; i < tr.end - tr.begin; ++i) yt[i] += wk * xs[i];
        } else {
          for (std::size_t t = tr.begin; t < tr.end; ++t)
            yr[t] += wk * xr[static_cast<long>(t * g.stride) + off];
        }
      }
    }
  }
}

void conv1d_backward_input(const Conv1dGeom& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx) {
  const std::size_t cin_g = g.in_per_group();
  const std::size_t cout_g = g.out_per_group();
  const long rows = static_cast<long>(g.batch * g.in_channels);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const std::size_t b = static_cast<std::size_t>(r) / g.in_channels;
    const std::size_t ci = static_cast<std::size_t>(r) % g.in_channels;
    const std::size_t grp = ci / cin_g;
    const std::size_t cl = ci % cin_g;
    double* gxr = gx.data() + static_cast<std::size_t>(r) * g.in_len;
    for (std::size_t oc = 0; oc < cout_g; ++oc) {
      const std::size_t co = grp * cout_g + oc;
      const double* gyr = gy.data() + (b * g.out_channels + co) * g.out_len;
      const double* wr = w.data() + (co * cin_g + cl) * g.kernel;
      for (std::size_t k = 0; k < g.kernel; ++k) {
        const double wk = wr[k];
        const long off = static_cast<long>(k * g.dilation) -
                         static_cast<long>(g.pad_left);
        const TRange tr = valid_range(off, g.stride, g.in_len, g.out_len);
        if (g.stride == 1) {
          double* gs = gxr + (static_cast<long>(tr.begin) + off);
          const double* gt = gyr + tr.begin;
          for (std::size_t i = 0; i < tr.end - tr.begin; ++i) gs[i] += wk * gt[i];
        } else {
          for (std::size_t t = tr.begin; t < tr.end; ++t)
            gxr[static_cast<long>(t * g.stride) + off] += wk * gyr[t];
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
  const long cout = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (long co_l = 0; co_l < cout; ++co_l) {
    const std::size_t co = static_cast<std::size_t>(co_l);
    const std::size_t grp = co / cout_g;
    for (std::size_t cl = 0; cl < cin_g; ++cl) {
      for (std::size_t k = 0; k < g.kernel; ++k) {
        const long off = static_cast<long>(k * g.dilation) -
                         static_cast<long>(g.pad_left);
        const TRange tr = valid_range(off, g.stride, g.in_len, g.out_len);
        double acc = 0.0;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const double* gyr = gy.data() + (b * g.out_channels + co) * g.out_len;
          const double* xr =
              x.data() + (b * g.in_channels + grp * cin_g + cl) * g.in_len;
          if (g.stride == 1) {
            const double* xs = xr + (static_cast<long>(tr.begin) + off);
            const double* gt = gyr + tr.begin;
            for (std::size_t i = 0; i < tr.end - tr.begin; ++i)
              acc += gt[i] * xs[i];
          } else {
            for (std::size_t t = tr.begin; t < tr.end; ++t)
              acc += gyr[t] * xr[static_cast<long>(t * g.stride) + off];
          }
        }
        gw[(co * cin_g + cl) * g.kernel + k] += acc;
      }
    }
    if (!gb.empty()) {
      double acc = 0.0;
      for (std::size_t b = 0; b < g.batch; ++b) {
        const double* gyr = gy.data() + (b * g.out_channels + co) * g.out_len;
        for (std::size_t t = 0; t < g.out_len; ++t) acc += gyr[t];
      }
      gb[co] += acc;
    }
  }
}

void yin_difference(const YinGeom& g, std::span<const double> signal,
                    std::span<double> out) {
  const long n = static_cast<long>(signal.size());
  const std::size_t back = g.centered ? g.max_lag / 2 : 0;
  const std::size_t span = back + g.window + g.max_lag;
  const long frames = static_cast<long>(g.frames);
#pragma omp parallel
  {
    std::vector<double> buf(span);
#pragma omp for schedule(static)
    for (long f = 0; f < frames; ++f) {
      const long start = g.first_start + f * static_cast<long>(g.hop) - static_cast<long>(back);
      for (std::size_t j = 0; j < span; ++j) {
        const long i = start + static_cast<long>(j);
        buf[j] = (i < 0 || i >= n) ? 0.0 : signal[i];
      }
      double* row = out.data() + static_cast<std::size_t>(f) * (g.max_lag + 1);
      for (std::size_t tau = 0; tau <= g.max_lag; ++tau) {
        const double* a = buf.data() + back - (g.centered ? tau / 2 : 0);
        const double* b = a + tau;
        double acc = 0.0;
        for (std::size_t j = 0; j < g.window; ++j) {
          const double d = a[j] - b[j];
          acc += d * d;
        }
        row[tau] = acc;
      }
    }
  }
}

}  // namespace svc::kernels::parallel
