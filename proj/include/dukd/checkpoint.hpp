#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "dukd/error.hpp"
#include "dukd/model.hpp"

namespace dukd {

// Checkpoint container, little-endian:
//   "DUKDCKPT" | u32 version | u64 header_len | header (JSON) |
//   u32 tensor_count | { u32 name_len | name | u32 ndim | u32 dims[ndim] | f32 data[] }* |
//   u64 FNV-1a of every preceding byte
// The header holds the model config under "config" and free-form metadata under "meta".

inline constexpr char kCheckpointMagic[8] = {'D', 'U', 'K', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline nlohmann::json to_json(const SRModelConfig& c) {
  return {{"channels", c.channels}, {"blocks", c.blocks}, {"scale", c.scale}, {"residual_scaling", c.residual_scaling}};
}

inline SRModelConfig model_config_from_json(const nlohmann::json& j) {
  SRModelConfig c;
  c.channels = j.at("channels").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.scale = j.at("scale").get<int>();
  c.residual_scaling = j.value("residual_scaling", 1.0);
  c.validate();
  return c;
}

struct StoredTensor {
  std::vector<int> shape;
  std::vector<float> data;
};

struct CheckpointFile {
  SRModelConfig config;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, StoredTensor> tensors;
};

namespace detail {

class ByteWriter {
 public:
  template <class V>
  void put(const V& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(V));
  }
  void put_bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& buf, std::size_t limit) : buf_(buf), limit_(limit) {}
  template <class V>
  V get() {
    V v;
    get_bytes(&v, sizeof(V));
    return v;
  }
  void get_bytes(void* dst, std::size_t n) {
    if (n > limit_ - pos_) throw FormatError("checkpoint truncated");
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<char>& buf_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Writes `tensors` (model parameters plus any extra state) under `config`.
template <class T>
void write_checkpoint(const std::string& path, const SRModelConfig& config, const std::vector<Param<T>>& tensors,
                      const nlohmann::json& meta = nlohmann::json::object()) {
  detail::ByteWriter w;
  w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put(kCheckpointVersion);
  const std::string header = nlohmann::json{{"config", to_json(config)}, {"meta", meta}}.dump();
  w.put(static_cast<std::uint64_t>(header.size()));
  w.put_bytes(header.data(), header.size());
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.put(static_cast<std::uint32_t>(t.name.size()));
    w.put_bytes(t.name.data(), t.name.size());
    w.put(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.put(static_cast<std::uint32_t>(d));
    for (T v : t.value) w.put(static_cast<float>(v));
  }
  const auto& bytes = w.bytes();
  const std::uint64_t checksum = fnv1a(bytes.data(), bytes.size());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  if (!out) throw DataError("write to '" + path + "' failed");
}

template <class T>
void save_checkpoint(const SRModel<T>& model, const std::string& path,
                     const nlohmann::json& meta = nlohmann::json::object()) {
  write_checkpoint(path, model.config(), model.params(), meta);
}

inline CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kCheckpointMagic) + sizeof(std::uint64_t) ||
      std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw FormatError("'" + path + "' is not a checkpoint (bad magic)");
  const std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));
  if (stored != fnv1a(buf.data(), body)) throw FormatError("checkpoint '" + path + "' is corrupted (checksum)");

  detail::ByteReader r(buf, body);
  char magic[8];
  r.get_bytes(magic, sizeof(magic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = r.get<std::uint64_t>();
  if (header_len > body) throw FormatError("checkpoint header length out of range");
  std::string header(header_len, '\0');
  r.get_bytes(header.data(), header.size());

  CheckpointFile f;
  try {
    const auto j = nlohmann::json::parse(header);
    f.config = model_config_from_json(j.at("config"));
    f.meta = j.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.get<std::uint32_t>(), '\0');
    r.get_bytes(name.data(), name.size());
    StoredTensor t;
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) throw FormatError("tensor '" + name + "' has implausible rank");
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(static_cast<int>(r.get<std::uint32_t>()));
      n *= static_cast<std::size_t>(t.shape.back());
    }
    if (n > (body - r.pos()) / sizeof(float)) throw FormatError("tensor '" + name + "' exceeds file size");
    t.data.resize(n);
    r.get_bytes(t.data.data(), n * sizeof(float));
    f.tensors.emplace(std::move(name), std::move(t));
  }
  if (r.pos() != body) throw FormatError("trailing bytes in checkpoint '" + path + "'");
  return f;
}

struct LoadReport {
  std::vector<std::string> copied;
  std::vector<std::string> reinitialized;
};

inline bool is_upsampler_tensor(const std::string& name) { return name.rfind("upsampler.", 0) == 0; }

/// Copies parameters from `file` into `model`. When the stored scale differs
/// (e.g. a x2 checkpoint seeding a x4 model) every upsampler tensor is
/// re-initialized from `reinit_rng`; any other missing or mismatched tensor
/// is an error.
template <class T>
LoadReport load_into(SRModel<T>& model, const CheckpointFile& file, Rng& reinit_rng) {
  LoadReport report;
  const bool cross_scale = file.config.scale != model.config().scale;
  bool reinit = false;
  for (auto& p : model.params()) {
    const auto it = file.tensors.find(p.name);
    const bool shape_ok = it != file.tensors.end() && it->second.shape == p.shape;
    if (is_upsampler_tensor(p.name) && (cross_scale || !shape_ok)) {
      report.reinitialized.push_back(p.name);
      reinit = true;
      continue;
    }
    if (it == file.tensors.end()) throw FormatError("checkpoint lacks tensor '" + p.name + "'");
    if (!shape_ok) throw ShapeError("checkpoint tensor '" + p.name + "' has incompatible shape");
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = static_cast<T>(it->second.data[i]);
    report.copied.push_back(p.name);
  }
  if (reinit) model.reinit_upsampler(reinit_rng);
  return report;
}

template <class T>
SRModel<T> load_checkpoint(const std::string& path) {
  const CheckpointFile f = read_checkpoint(path);
  Rng rng(0);
  SRModel<T> model(f.config, rng);
  const auto report = load_into(model, f, rng);
  if (!report.reinitialized.empty()) throw FormatError("checkpoint '" + path + "' is missing upsampler tensors");
  return model;
}

}  // namespace dukd
