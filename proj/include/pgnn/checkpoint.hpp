#pragma once
// Training checkpoints: a little-endian, versioned binary container with
// named sections (exact byte layout in docs/formats.md). A checkpoint holds
// everything needed to resume a run exactly: the canonical config text, the
// parameter registry as named arrays, optimizer moments, the shuffle RNG
// cursor, and the next epoch index. serialize(deserialize(bytes)) == bytes.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/io.hpp"
#include "pgnn/net.hpp"
#include "pgnn/train.hpp"

namespace pgnn::ckpt {

inline constexpr char kMagic[8] = {'P', 'G', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kVersion = 1;

struct ParamArray {
  std::string name;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint32_t version = kVersion;
  std::uint64_t seed = 0;        // run seed the trajectory belongs to
  std::uint64_t next_epoch = 0;  // first epoch still to run
  std::string config_text;       // canonical config echo
  std::vector<ParamArray> params;
  train::OptimizerState optimizer;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t shuffle_counter = 0;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void put_blob(std::string& out, const std::string& bytes) {
  put_u64(out, bytes.size());
  out += bytes;
}

class Cursor {
 public:
  explicit Cursor(const std::string& buf) : buf_(buf) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string bytes(std::size_t n) {
    need(n);
    std::string v = buf_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  std::string blob() {
    const std::uint64_t n = u64();
    return bytes(static_cast<std::size_t>(n));
  }

  bool exhausted() const { return pos_ == buf_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n)
      throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
};

inline std::string meta_section(const Checkpoint& c) {
  std::string s;
  put_u64(s, c.seed);
  put_u64(s, c.next_epoch);
  return s;
}

inline std::string params_section(const Checkpoint& c) {
  std::string s;
  put_u64(s, c.params.size());
  for (const ParamArray& p : c.params) {
    put_u32(s, static_cast<std::uint32_t>(p.name.size()));
    s += p.name;
    put_u64(s, p.values.size());
    for (double v : p.values) put_f64(s, v);
  }
  return s;
}

inline std::string moment_block(const std::vector<std::vector<double>>& slots) {
  std::string s;
  put_u64(s, slots.size());
  for (const auto& slot : slots) {
    put_u64(s, slot.size());
    for (double v : slot) put_f64(s, v);
  }
  return s;
}

inline std::string optimizer_section(const Checkpoint& c) {
  std::string s;
  put_u64(s, c.optimizer.t);
  s += moment_block(c.optimizer.m);
  s += moment_block(c.optimizer.v);
  return s;
}

inline std::string rng_section(const Checkpoint& c) {
  std::string s;
  put_u64(s, c.shuffle_seed);
  put_u64(s, c.shuffle_counter);
  return s;
}

inline std::vector<std::vector<double>> read_moment_block(Cursor& cur) {
  std::vector<std::vector<double>> slots(static_cast<std::size_t>(cur.u64()));
  for (auto& slot : slots) {
    slot.resize(static_cast<std::size_t>(cur.u64()));
    for (double& v : slot) v = cur.f64();
  }
  return slots;
}

}  // namespace detail

inline std::string serialize(const Checkpoint& c) {
  // fixed section order keeps serialization canonical (round-trip is byte-identical)
  const std::pair<const char*, std::string> sections[] = {
      {"meta", detail::meta_section(c)},
      {"config", c.config_text},
      {"params", detail::params_section(c)},
      {"optimizer", detail::optimizer_section(c)},
      {"rng", detail::rng_section(c)},
  };
  std::string out(kMagic, sizeof(kMagic));
  detail::put_u32(out, c.version);
  detail::put_u32(out, static_cast<std::uint32_t>(std::size(sections)));
  for (const auto& [name, payload] : sections) {
    const std::string n(name);
    detail::put_u32(out, static_cast<std::uint32_t>(n.size()));
    out += n;
    detail::put_blob(out, payload);
  }
  return out;
}

inline Checkpoint deserialize(const std::string& bytes) {
  detail::Cursor cur(bytes);
  if (cur.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw IoError("not a checkpoint file (bad magic)");
  Checkpoint c;
  c.version = cur.u32();
  if (c.version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(c.version) +
                  " (expected " + std::to_string(kVersion) + ")");
  const std::uint32_t n_sections = cur.u32();
  bool seen[5] = {};
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    const std::string name = cur.bytes(static_cast<std::size_t>(cur.u32()));
    const std::string payload = cur.blob();
    detail::Cursor body(payload);
    if (name == "meta") {
      seen[0] = true;
      c.seed = body.u64();
      c.next_epoch = body.u64();
    } else if (name == "config") {
      seen[1] = true;
      c.config_text = payload;
      continue;  // raw text, no cursor to check
    } else if (name == "params") {
      seen[2] = true;
      c.params.resize(static_cast<std::size_t>(body.u64()));
      for (ParamArray& p : c.params) {
        p.name = body.bytes(static_cast<std::size_t>(body.u32()));
        p.values.resize(static_cast<std::size_t>(body.u64()));
        for (double& v : p.values) v = body.f64();
      }
    } else if (name == "optimizer") {
      seen[3] = true;
      c.optimizer.t = body.u64();
      c.optimizer.m = detail::read_moment_block(body);
      c.optimizer.v = detail::read_moment_block(body);
    } else if (name == "rng") {
      seen[4] = true;
      c.shuffle_seed = body.u64();
      c.shuffle_counter = body.u64();
    } else {
      throw IoError("unknown checkpoint section '" + name + "'");
    }
    if (!body.exhausted())
      throw IoError("trailing bytes in checkpoint section '" + name + "'");
  }
  for (bool s : seen)
    if (!s) throw IoError("checkpoint is missing a required section");
  if (!cur.exhausted())
    throw IoError("trailing bytes after checkpoint sections at byte " +
                  std::to_string(cur.pos()));
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  io::write_file(path, serialize(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

// Snapshot a model + train state mid-run (between epochs).
template <class ModelT>
Checkpoint capture(const std::string& config_text, std::uint64_t seed, ModelT& model,
                   const train::TrainState& st) {
  Checkpoint c;
  c.seed = seed;
  c.next_epoch = st.next_epoch;
  c.config_text = config_text;
  for (const net::ParamView& view : model.parameter_views())
    c.params.push_back(
        ParamArray{view.name, std::vector<double>(view.data, view.data + view.size)});
  c.optimizer = st.opt;
  c.shuffle_seed = st.shuffle_seed;
  c.shuffle_counter = st.shuffle_counter;
  return c;
}

// Load a snapshot back into a freshly built model of the same architecture.
// Parameters are matched positionally and verified by name + size.
template <class ModelT>
void restore(const Checkpoint& c, ModelT& model, train::TrainState& st) {
  const std::vector<net::ParamView> views = model.parameter_views();
  if (views.size() != c.params.size())
    throw ValidationError("checkpoint holds " + std::to_string(c.params.size()) +
                          " parameter arrays but the model has " +
                          std::to_string(views.size()));
  for (std::size_t i = 0; i < views.size(); ++i) {
    const ParamArray& p = c.params[i];
    if (p.name != views[i].name)
      throw ValidationError("checkpoint parameter '" + p.name +
                            "' does not match model parameter '" + views[i].name + "'");
    if (p.values.size() != views[i].size)
      throw ValidationError("checkpoint parameter '" + p.name + "' has " +
                            std::to_string(p.values.size()) + " values, model expects " +
                            std::to_string(views[i].size));
    for (std::size_t k = 0; k < p.values.size(); ++k) views[i].data[k] = p.values[k];
  }
  st.opt = c.optimizer;
  st.shuffle_seed = c.shuffle_seed;
  st.shuffle_counter = c.shuffle_counter;
  st.next_epoch = static_cast<std::size_t>(c.next_epoch);
  st.initialized = true;
}

}  // namespace pgnn::ckpt
