#pragma once

// Learnable f0 feature encoders. Both map a quantized f0 sequence of length
// T to a T x F feature matrix that enters the generator conditioning.

#include <cstdint>
#include <string>
#include <vector>

#include "svc/nn/tensor.hpp"
#include "svc/pitch.hpp"

namespace svc {

enum class EncoderKind { kQLut, kPbtc };

std::string to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);

struct EncoderDims {
  int levels = 400;   // quantizer bins L
  int dim = 256;      // feature size F
  int branches = 10;  // PBTC branch count K
  int width = 3;      // PBTC kernel taps W
};

// Embedding table indexed by quantized f0 bin.
class QLutEncoder {
 public:
  QLutEncoder() = default;
  QLutEncoder(int levels, int dim, std::uint64_t seed);

  // [T, F]; throws std::out_of_range for a bin >= levels.
  nn::Tensor forward(const QuantizedF0& q) const;

  int levels() const { return levels_; }
  int dim() const { return dim_; }
  const nn::Tensor& table() const { return table_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  int levels_ = 0;
  int dim_ = 0;
  nn::Tensor table_;  // [L, F]
};

// [T, L] one-hot matrix with a 1 at column bins[t] of row t.
nn::Tensor one_hot(const QuantizedF0& q, int levels);

struct PbtcBranch {
  nn::Tensor weight;  // [L, F, W]
  nn::Tensor bias;    // [F]
  int dilation = 1;
};

// Parallel bank of stride-1 transposed convolutions over the one-hot f0
// map. Branch k has dilation k; each branch output is truncated to the
// first T frames and the branches are summed. There is no nonlinearity, so
// the bank is affine in its input.
class PbtcEncoder {
 public:
  PbtcEncoder() = default;
  PbtcEncoder(const EncoderDims& dims, std::uint64_t seed);

  // x: [T, L] (normally one-hot, but any matrix is accepted; zero entries
  // are skipped). Returns [T, F].
  nn::Tensor forward(const nn::Tensor& x) const;
  nn::Tensor forward(const QuantizedF0& q) const {
    return forward(one_hot(q, levels_));
  }

  int levels() const { return levels_; }
  int dim() const { return dim_; }
  int width() const { return width_; }
  std::size_t branch_count() const { return branches_.size(); }
  const std::vector<PbtcBranch>& branches() const { return branches_; }
  std::vector<PbtcBranch>& branches() { return branches_; }
  // Largest dilation times (W - 1): how far one input frame spreads forward.
  int reach() const;
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  int levels_ = 0;
  int dim_ = 0;
  int width_ = 0;
  std::vector<PbtcBranch> branches_;
};

// Either encoder behind one interface, as selected by the run config.
class F0Encoder {
 public:
  F0Encoder() = default;
  F0Encoder(EncoderKind kind, const EncoderDims& dims, std::uint64_t seed);

  EncoderKind kind() const { return kind_; }
  int levels() const;
  int dim() const;
  nn::Tensor forward(const QuantizedF0& q) const;
  void collect(nn::ParamList& out, const std::string& prefix) const;

  const QLutEncoder& qlut() const { return qlut_; }
  const PbtcEncoder& pbtc() const { return pbtc_; }

 private:
  EncoderKind kind_ = EncoderKind::kPbtc;
  QLutEncoder qlut_;
  PbtcEncoder pbtc_;
};

}  // namespace svc
