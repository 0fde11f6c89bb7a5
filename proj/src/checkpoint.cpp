#include "svc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "svc/error.hpp"

namespace svc {

namespace {

constexpr char kMagic[8] = {'S', 'V', 'C', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 8);
}

std::uint64_t get_u64(const char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

struct Blob {
  std::string name;
  nn::Shape shape;
  std::span<const double> data;
};

void append(std::vector<char>& payload, std::span<const double> v) {
  const std::size_t at = payload.size();
  payload.resize(at + v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t u;
    std::memcpy(&u, &v[i], 8);
    for (int b = 0; b < 8; ++b) payload[at + i * 8 + b] = static_cast<char>(u >> (8 * b));
  }
}

struct Loaded {
  CheckpointHeader header;
  std::vector<char> payload;
  std::map<std::string, std::pair<std::size_t, std::size_t>> index;  // offset, count
};

Loaded read_file(const std::filesystem::path& path, bool with_payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char head[16];
  if (!in.read(head, 16) || std::memcmp(head, kMagic, 8) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  const std::uint64_t hlen = get_u64(head + 8);
  std::string js(hlen, '\0');
  if (!in.read(js.data(), static_cast<std::streamsize>(hlen)))
    throw DataError("truncated checkpoint header: " + path.string());
  Loaded l;
  try {
    const auto j = nlohmann::json::parse(js);
    l.header.step = j.at("step").get<std::int64_t>();
    l.header.fingerprint = std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
    l.header.adam_g_steps = j.at("adam_g_steps").get<std::int64_t>();
    l.header.adam_d_steps = j.at("adam_d_steps").get<std::int64_t>();
    l.header.config = j.at("config");
    l.header.blobs = j.at("blobs");
    for (const auto& b : l.header.blobs)
      l.index[b.at("name").get<std::string>()] = {b.at("offset").get<std::size_t>(),
                                                  b.at("count").get<std::size_t>()};
  } catch (const std::exception& e) {
    throw DataError("invalid checkpoint header in " + path.string() + ": " + e.what());
  }
  if (with_payload)
    l.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return l;
}

void restore(const Loaded& l, const std::string& name, std::span<double> dst) {
  const auto it = l.index.find(name);
  if (it == l.index.end()) throw DataError("checkpoint lacks blob " + name);
  const auto [offset, count] = it->second;
  if (count != dst.size())
    throw DataError("checkpoint blob " + name + " has " + std::to_string(count) +
                    " values, expected " + std::to_string(dst.size()));
  if ((offset + count) * 8 > l.payload.size())
    throw DataError("truncated checkpoint payload at blob " + name);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = get_u64(l.payload.data() + (offset + i) * 8);
    std::memcpy(&dst[i], &u, 8);
  }
}

void verify(const RunConfig& cfg, const CheckpointHeader& h,
            const std::filesystem::path& path) {
  const std::uint64_t fp = fingerprint(cfg);
  if (fp != h.fingerprint)
    throw ConfigError("config fingerprint mismatch: config " + fingerprint_hex(fp) +
                      ", checkpoint " + path.string() + " " +
                      fingerprint_hex(h.fingerprint));
}

void restore_params(const Loaded& l, const nn::ParamList& params) {
  for (const auto& p : params) {
    nn::Tensor t = p.tensor;
    restore(l, "param/" + p.name, t.mutable_data());
  }
}

}  // namespace

void save_checkpoint(const Trainer& trainer, const std::filesystem::path& path) {
  auto& tr = const_cast<Trainer&>(trainer);
  std::vector<Blob> blobs;
  const nn::ParamList gp = tr.adam_g().params();
  const nn::ParamList dp = tr.adam_d().params();
  for (const auto* list : {&gp, &dp})
    for (const auto& p : *list) blobs.push_back({"param/" + p.name, p.tensor.shape(), p.tensor.data()});
  auto moments = [&blobs](nn::Adam& a, const std::string& tag) {
    for (std::size_t i = 0; i < a.params().size(); ++i) {
      const auto& p = a.params()[i];
      blobs.push_back({tag + ".m/" + p.name, p.tensor.shape(), a.first_moments()[i]});
      blobs.push_back({tag + ".v/" + p.name, p.tensor.shape(), a.second_moments()[i]});
    }
  };
  moments(tr.adam_g(), "adam_g");
  moments(tr.adam_d(), "adam_d");

  std::vector<char> payload;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& b : blobs) {
    table.push_back({{"name", b.name},
                     {"shape", b.shape},
                     {"offset", payload.size() / 8},
                     {"count", b.data.size()}});
    append(payload, b.data);
  }
  nlohmann::json header = {{"format", 1},
                           {"step", trainer.steps_done()},
                           {"fingerprint", fingerprint_hex(fingerprint(trainer.config()))},
                           {"adam_g_steps", tr.adam_g().steps()},
                           {"adam_d_steps", tr.adam_d().steps()},
                           {"config", to_json(trainer.config())},
                           {"blobs", table}};
  const std::string hs = header.dump();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(kMagic, 8);
    put_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("failed writing checkpoint: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  return read_file(path, false).header;
}

RunConfig resolve_config(const RunConfig& cfg, const CheckpointHeader& header) {
  RunConfig out = cfg;
  if (!(out.normalization.std > 0.0)) {
    const RunConfig saved = config_from_json(header.config);
    out.normalization = saved.normalization;
  }
  return out;
}

void load_checkpoint(Trainer& trainer, const std::filesystem::path& path) {
  const Loaded l = read_file(path, true);
  verify(trainer.config(), l.header, path);
  restore_params(l, trainer.adam_g().params());
  restore_params(l, trainer.adam_d().params());
  auto moments = [&l](nn::Adam& a, const std::string& tag) {
    for (std::size_t i = 0; i < a.params().size(); ++i) {
      const auto& name = a.params()[i].name;
      restore(l, tag + ".m/" + name, a.first_moments()[i]);
      restore(l, tag + ".v/" + name, a.second_moments()[i]);
    }
  };
  moments(trainer.adam_g(), "adam_g");
  moments(trainer.adam_d(), "adam_d");
  trainer.adam_g().set_steps(l.header.adam_g_steps);
  trainer.adam_d().set_steps(l.header.adam_d_steps);
  trainer.set_steps_done(l.header.step);
}

Model load_model(const RunConfig& cfg, const std::filesystem::path& path) {
  const Loaded l = read_file(path, true);
  verify(cfg, l.header, path);
  Model m = build_model(cfg);
  restore_params(l, m.generator_params());
  restore_params(l, m.discriminator_params());
  return m;
}

}  // namespace svc
