#include "svc/singer.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "svc/error.hpp"
#include "svc/nn/ops.hpp"
#include "svc/rng.hpp"

namespace svc {

SingerEmbedding::SingerEmbedding(std::size_t singers, std::size_t dim,
                                 std::uint64_t seed) {
  if (singers == 0 || dim == 0)
    throw std::invalid_argument("SingerEmbedding: dims must be positive");
  Rng rng(mix_seed(seed, 0x5146u));
  std::vector<double> v(singers * dim);
  for (auto& e : v) e = rng.normal();
  table_ = nn::Tensor::parameter({singers, dim}, std::move(v));
}

nn::Tensor SingerEmbedding::embed(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= singers())
    throw std::out_of_range("singer id " + std::to_string(id) +
                            " outside registry of " + std::to_string(singers()));
  return nn::embedding(table_, {id});
}

void SingerEmbedding::collect(nn::ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".table", table_});
}

ShiftedContour shift_f0(const F0Contour& c, const F0Stats& src,
                        const F0Stats& tgt, double fmin, double fmax) {
  if (!(src.std > 0.0))
    throw std::invalid_argument("shift_f0: source std must be positive");
  const double ratio = tgt.std / src.std;
  // ratio*f + offset keeps the identity (ratio 1, offset 0) exact.
  const double offset = tgt.mean - ratio * src.mean;
  ShiftedContour out;
  out.contour = c;
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (!c.voiced[t]) continue;
    double v = ratio * c.values[t] + offset;
    if (v < fmin || v > fmax) {
      v = std::clamp(v, fmin, fmax);
      ++out.clamped;
    }
    out.contour.values[t] = v;
  }
  return out;
}

void save_registry(const std::vector<SingerProfile>& profiles,
                   const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : profiles)
    arr.push_back({{"id", p.id},
                   {"name", p.name},
                   {"mean_hz", p.stats.mean},
                   {"std_hz", p.stats.std},
                   {"voiced_frames", p.stats.voiced_frames}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write singer registry: " + path.string());
  out << arr.dump(2) << '\n';
}

std::vector<SingerProfile> load_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open singer registry: " + path.string());
  std::vector<SingerProfile> out;
  try {
    nlohmann::json arr;
    in >> arr;
    if (!arr.is_array()) throw DataError("singer registry must be a JSON array");
    std::set<int> ids;
    for (const auto& e : arr) {
      SingerProfile p;
      p.id = e.at("id").get<int>();
      p.name = e.at("name").get<std::string>();
      p.stats.mean = e.at("mean_hz").get<double>();
      p.stats.std = e.at("std_hz").get<double>();
      p.stats.voiced_frames = e.at("voiced_frames").get<std::size_t>();
      if (!ids.insert(p.id).second)
        throw DataError("duplicate singer id " + std::to_string(p.id) + " in " +
                        path.string());
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid singer registry " + path.string() + ": " + e.what());
  }
  std::sort(out.begin(), out.end(),
            [](const SingerProfile& a, const SingerProfile& b) { return a.id < b.id; });
  return out;
}

const SingerProfile& find_singer(const std::vector<SingerProfile>& registry,
                                 const std::string& name_or_id) {
  for (const auto& p : registry)
    if (p.name == name_or_id) return p;
  try {
    std::size_t used = 0;
    const int id = std::stoi(name_or_id, &used);
    if (used == name_or_id.size())
      for (const auto& p : registry)
        if (p.id == id) return p;
  } catch (const std::exception&) {
  }
  throw DataError("unknown singer: " + name_or_id);
}

}  // namespace svc
