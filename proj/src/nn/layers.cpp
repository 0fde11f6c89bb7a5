#include "svc/nn/layers.hpp"

#include <cmath>

namespace svc::nn {

namespace {

// Row norms of a [rows, ...] tensor, used as initial weight-norm gains.
std::vector<double> row_norms(const std::vector<double>& v, std::size_t rows) {
  const std::size_t cols = v.size() / rows;
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += v[r * cols + c] * v[r * cols + c];
    out[r] = std::sqrt(s);
  }
  return out;
}

}  // namespace

WnConv1d::WnConv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                   const Conv1dOptions& opt, double init_std, Rng& rng)
    : opt_(opt) {
  const std::size_t n = out_ch * (in_ch / opt.groups) * kernel;
  std::vector<double> v(n);
  for (auto& e : v) e = rng.normal(0.0, init_std);
  g_ = Tensor::parameter({out_ch}, row_norms(v, out_ch));
  v_ = Tensor::parameter({out_ch, in_ch / opt.groups, kernel}, std::move(v));
  // Bias follows the usual uniform(+-1/sqrt(fan_in)) rule.
  const double bound = 1.0 / std::sqrt(static_cast<double>(n / out_ch));
  std::vector<double> b(out_ch);
  for (auto& e : b) e = rng.uniform(-bound, bound);
  b_ = Tensor::parameter({out_ch}, std::move(b));
}

Tensor WnConv1d::forward(const Tensor& x) const {
  return conv1d(x, weight_norm(v_, g_), b_, opt_);
}

void WnConv1d::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".v", v_});
  out.push_back({prefix + ".g", g_});
  out.push_back({prefix + ".b", b_});
}

WnConvTranspose1d::WnConvTranspose1d(std::size_t in_ch, std::size_t out_ch,
                                     std::size_t stride, double init_std,
                                     Rng& rng)
    : stride_(stride) {
  const std::size_t k = 2 * stride;
  std::vector<double> v(in_ch * out_ch * k);
  for (auto& e : v) e = rng.normal(0.0, init_std);
  g_ = Tensor::parameter({in_ch}, row_norms(v, in_ch));
  v_ = Tensor::parameter({in_ch, out_ch, k}, std::move(v));
  const double bound = 1.0 / std::sqrt(static_cast<double>(out_ch * k));
  std::vector<double> b(out_ch);
  for (auto& e : b) e = rng.uniform(-bound, bound);
  b_ = Tensor::parameter({out_ch}, std::move(b));
}

Tensor WnConvTranspose1d::forward(const Tensor& x) const {
  // Kernel 2u with crop ceil(u/2) centres the kernel and yields T*u samples.
  const std::size_t crop = (stride_ + 1) / 2;
  return conv_transpose1d(x, weight_norm(v_, g_), b_, stride_, crop,
                          x.dim(2) * stride_);
}

void WnConvTranspose1d::collect(ParamList& out,
                                const std::string& prefix) const {
  out.push_back({prefix + ".v", v_});
  out.push_back({prefix + ".g", g_});
  out.push_back({prefix + ".b", b_});
}

}  // namespace svc::nn
