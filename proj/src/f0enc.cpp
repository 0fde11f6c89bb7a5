#include "svc/f0enc.hpp"

#include <cmath>
#include <stdexcept>

#include "svc/nn/ops.hpp"
#include "svc/rng.hpp"

namespace svc {

std::string to_string(EncoderKind k) {
  return k == EncoderKind::kQLut ? "qlut" : "pbtc";
}

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "qlut") return EncoderKind::kQLut;
  if (s == "pbtc") return EncoderKind::kPbtc;
  throw std::invalid_argument("unknown f0 encoder kind: " + s);
}

namespace {

std::vector<double> uniform_init(std::size_t n, double fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::vector<double> v(n);
  for (auto& e : v) e = rng.uniform(-bound, bound);
  return v;
}

}  // namespace

QLutEncoder::QLutEncoder(int levels, int dim, std::uint64_t seed)
    : levels_(levels), dim_(dim) {
  if (levels < 2 || dim < 1)
    throw std::invalid_argument("QLutEncoder: dims must be positive");
  Rng rng(mix_seed(seed, 0x51u));
  table_ = nn::Tensor::parameter(
      {static_cast<std::size_t>(levels), static_cast<std::size_t>(dim)},
      uniform_init(static_cast<std::size_t>(levels) * dim, levels, rng));
}

nn::Tensor QLutEncoder::forward(const QuantizedF0& q) const {
  for (int b : q.bins)
    if (b < 0 || b >= levels_)
      throw std::out_of_range("qlut: bin " + std::to_string(b) +
                              " out of range for " + std::to_string(levels_) +
                              " levels");
  return nn::embedding(table_, q.bins);
}

void QLutEncoder::collect(nn::ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".table", table_});
}

nn::Tensor one_hot(const QuantizedF0& q, int levels) {
  const std::size_t L = static_cast<std::size_t>(levels);
  std::vector<double> m(q.bins.size() * L, 0.0);
  for (std::size_t t = 0; t < q.bins.size(); ++t) {
    const int b = q.bins[t];
    if (b < 0 || b >= levels)
      throw std::out_of_range("one_hot: bin " + std::to_string(b) +
                              " out of range");
    m[t * L + static_cast<std::size_t>(b)] = 1.0;
  }
  return nn::Tensor::constant({q.bins.size(), L}, std::move(m));
}

PbtcEncoder::PbtcEncoder(const EncoderDims& dims, std::uint64_t seed)
    : levels_(dims.levels), dim_(dims.dim), width_(dims.width) {
  if (dims.levels < 2 || dims.dim < 1 || dims.branches < 1 || dims.width < 1)
    throw std::invalid_argument("PbtcEncoder: dims must be positive");
  Rng rng(mix_seed(seed, 0x9b7cu));
  const std::size_t L = static_cast<std::size_t>(levels_);
  const std::size_t F = static_cast<std::size_t>(dim_);
  const std::size_t W = static_cast<std::size_t>(width_);
  const double fan_in = static_cast<double>(L * W);
  for (int k = 1; k <= dims.branches; ++k) {
    PbtcBranch br;
    br.dilation = k;
    br.weight = nn::Tensor::parameter({L, F, W}, uniform_init(L * F * W, fan_in, rng));
    br.bias = nn::Tensor::parameter({F}, uniform_init(F, fan_in, rng));
    branches_.push_back(std::move(br));
  }
}

int PbtcEncoder::reach() const {
  return branches_.empty() ? 0 : branches_.back().dilation * (width_ - 1);
}

nn::Tensor PbtcEncoder::forward(const nn::Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != static_cast<std::size_t>(levels_))
    throw std::invalid_argument("pbtc: expected [T, " + std::to_string(levels_) +
                                "] input, got " + nn::shape_str(x.shape()));
  const std::size_t T = x.dim(0);
  const std::size_t L = static_cast<std::size_t>(levels_);
  const std::size_t F = static_cast<std::size_t>(dim_);
  const std::size_t W = static_cast<std::size_t>(width_);
  const std::size_t K = branches_.size();

  // Nonzero entries of x per frame; a one-hot input has exactly one.
  struct Entry {
    std::size_t t, l;
    double v;
  };
  std::vector<Entry> nz;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t l = 0; l < L; ++l)
      if (const double v = x.data()[t * L + l]; v != 0.0) nz.push_back({t, l, v});

  std::vector<double> y(T * F, 0.0);
  for (const auto& br : branches_) {
    const auto b = br.bias.data();
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) y[t * F + f] += b[f];
  }
  for (const auto& br : branches_) {
    const auto w = br.weight.data();
    const std::size_t d = static_cast<std::size_t>(br.dilation);
    for (const auto& e : nz)
      for (std::size_t j = 0; j < W; ++j) {
        const std::size_t dst = e.t + j * d;
        if (dst >= T) break;
        double* yr = y.data() + dst * F;
        const double* wr = w.data() + e.l * F * W + j;
        for (std::size_t f = 0; f < F; ++f) yr[f] += e.v * wr[f * W];
      }
  }

  std::vector<nn::Tensor> inputs{x};
  for (const auto& br : branches_) {
    inputs.push_back(br.weight);
    inputs.push_back(br.bias);
  }
  std::vector<int> dilations;
  for (const auto& br : branches_) dilations.push_back(br.dilation);

  return nn::make_result(
      {T, F}, std::move(y), std::move(inputs),
      [T, L, F, W, K, nz = std::move(nz), dilations](nn::Node& self) {
        const auto& g = self.grad;
        for (std::size_t k = 0; k < K; ++k) {
          nn::Node& wn = *self.inputs[1 + 2 * k];
          nn::Node& bn = *self.inputs[2 + 2 * k];
          const std::size_t d = static_cast<std::size_t>(dilations[k]);
          if (bn.requires_grad) {
            auto gb = bn.grad_buffer();
            for (std::size_t t = 0; t < T; ++t)
              for (std::size_t f = 0; f < F; ++f) gb[f] += g[t * F + f];
          }
          if (wn.requires_grad) {
            auto gw = wn.grad_buffer();
            for (const auto& e : nz)
              for (std::size_t j = 0; j < W; ++j) {
                const std::size_t dst = e.t + j * d;
                if (dst >= T) break;
                double* gr = gw.data() + e.l * F * W + j;
                const double* gy = g.data() + dst * F;
                for (std::size_t f = 0; f < F; ++f) gr[f * W] += e.v * gy[f];
              }
          }
        }
        nn::Node& xn = *self.inputs[0];
        if (!xn.requires_grad) return;
        auto gx = xn.grad_buffer();
        for (std::size_t k = 0; k < K; ++k) {
          const auto& w = self.inputs[1 + 2 * k]->value;
          const std::size_t d = static_cast<std::size_t>(dilations[k]);
          for (std::size_t t = 0; t < T; ++t)
            for (std::size_t j = 0; j < W && t + j * d < T; ++j) {
              const double* gy = g.data() + (t + j * d) * F;
              for (std::size_t l = 0; l < L; ++l) {
                const double* wr = w.data() + l * F * W + j;
                double acc = 0.0;
                for (std::size_t f = 0; f < F; ++f) acc += wr[f * W] * gy[f];
                gx[t * L + l] += acc;
              }
            }
        }
      });
}

void PbtcEncoder::collect(nn::ParamList& out, const std::string& prefix) const {
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const std::string p = prefix + ".branch" + std::to_string(k);
    out.push_back({p + ".weight", branches_[k].weight});
    out.push_back({p + ".bias", branches_[k].bias});
  }
}

F0Encoder::F0Encoder(EncoderKind kind, const EncoderDims& dims,
                     std::uint64_t seed)
    : kind_(kind) {
  if (kind == EncoderKind::kQLut)
    qlut_ = QLutEncoder(dims.levels, dims.dim, seed);
  else
    pbtc_ = PbtcEncoder(dims, seed);
}

int F0Encoder::levels() const {
  return kind_ == EncoderKind::kQLut ? qlut_.levels() : pbtc_.levels();
}

int F0Encoder::dim() const {
  return kind_ == EncoderKind::kQLut ? qlut_.dim() : pbtc_.dim();
}

nn::Tensor F0Encoder::forward(const QuantizedF0& q) const {
  return kind_ == EncoderKind::kQLut ? qlut_.forward(q) : pbtc_.forward(q);
}

void F0Encoder::collect(nn::ParamList& out, const std::string& prefix) const {
  if (kind_ == EncoderKind::kQLut)
    qlut_.collect(out, prefix + ".qlut");
  else
    pbtc_.collect(out, prefix + ".pbtc");
}

}  // namespace svc
