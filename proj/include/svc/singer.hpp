#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svc/nn/tensor.hpp"
#include "svc/pitch.hpp"

namespace svc {

struct SingerProfile {
  int id = 0;
  std::string name;
  F0Stats stats;

  bool operator==(const SingerProfile& o) const {
    return id == o.id && name == o.name && stats.mean == o.stats.mean &&
           stats.std == o.stats.std && stats.voiced_frames == o.stats.voiced_frames;
  }
};

// Learned N x S singer table.
class SingerEmbedding {
 public:
  SingerEmbedding() = default;
  SingerEmbedding(std::size_t singers, std::size_t dim, std::uint64_t seed);

  // Row `id` as a [1, S] tensor; throws std::out_of_range for id >= N.
  nn::Tensor embed(int id) const;

  std::size_t singers() const { return table_.dim(0); }
  std::size_t dim() const { return table_.dim(1); }
  const nn::Tensor& table() const { return table_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  nn::Tensor table_;
};

struct ShiftedContour {
  F0Contour contour;
  std::size_t clamped = 0;  // voiced frames pulled back into [fmin, fmax]
};

// Scale-and-shift of voiced frames from the source to the target Gaussian
// f0 profile: f' = (tgt.std / src.std) * (f - src.mean) + tgt.mean.
// Unvoiced frames stay 0. Throws std::invalid_argument if src.std == 0.
ShiftedContour shift_f0(const F0Contour& c, const F0Stats& src,
                        const F0Stats& tgt, double fmin = 50.0,
                        double fmax = 800.0);

// singers.json: [{id, name, mean_hz, std_hz, voiced_frames}].
void save_registry(const std::vector<SingerProfile>& profiles,
                   const std::filesystem::path& path);
// Throws DataError on duplicate ids. Profiles are returned sorted by id.
std::vector<SingerProfile> load_registry(const std::filesystem::path& path);

const SingerProfile& find_singer(const std::vector<SingerProfile>& registry,
                                 const std::string& name_or_id);

}  // namespace svc
