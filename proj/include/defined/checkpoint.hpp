#pragma once

// Versioned binary checkpoint: a small header (magic, format version, model
// config, tensor shape table) followed by every parameter tensor in declared
// order as little-endian 32-bit floats, column-major.

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "defined/net.hpp"

namespace defined {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace detail {

inline constexpr char kCkptMagic[4] = {'D', 'F', 'N', 'D'};
inline constexpr std::uint32_t kCkptVersion = 1;

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated header");
  return v;
}

inline void write_config(std::ostream& os, const ModelConfig& cfg) {
  write_u32(os, static_cast<std::uint32_t>(cfg.mod));
  write_u32(os, static_cast<std::uint32_t>(cfg.n_t));
  write_u32(os, static_cast<std::uint32_t>(cfg.n_r));
  write_u32(os, static_cast<std::uint32_t>(cfg.d_e));
  write_u32(os, static_cast<std::uint32_t>(cfg.n_layers));
  write_u32(os, static_cast<std::uint32_t>(cfg.n_heads));
  write_u32(os, static_cast<std::uint32_t>(cfg.d_ff));
  write_u32(os, static_cast<std::uint32_t>(cfg.T_max));
}

inline ModelConfig read_config(std::istream& is) {
  ModelConfig cfg;
  cfg.mod = static_cast<Modulation>(read_u32(is));
  cfg.n_t = static_cast<int>(read_u32(is));
  cfg.n_r = static_cast<int>(read_u32(is));
  cfg.d_e = static_cast<int>(read_u32(is));
  cfg.n_layers = static_cast<int>(read_u32(is));
  cfg.n_heads = static_cast<int>(read_u32(is));
  cfg.d_ff = static_cast<int>(read_u32(is));
  cfg.T_max = static_cast<int>(read_u32(is));
  cfg.validate();
  return cfg;
}

}  // namespace detail

template <class S>
void save_checkpoint(const std::string& path, const Params<S>& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  os.write(detail::kCkptMagic, 4);
  detail::write_u32(os, detail::kCkptVersion);
  detail::write_config(os, params.cfg);

  std::vector<TensorRef<const S>> tensors;
  params.for_each_tensor([&tensors](const TensorRef<const S>& t) { tensors.push_back(t); });
  detail::write_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    detail::write_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(t.rows));
    detail::write_u32(os, static_cast<std::uint32_t>(t.cols));
  }
  std::vector<float> buf;
  for (const auto& t : tensors) {
    buf.resize(static_cast<std::size_t>(t.size()));
    for (long i = 0; i < t.size(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(t.data[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline ModelConfig peek_checkpoint_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(detail::kCkptMagic, 4))
    throw std::runtime_error("checkpoint: bad magic: " + path);
  std::uint32_t version = detail::read_u32(is);
  if (version != detail::kCkptVersion)
    throw std::runtime_error("checkpoint: unsupported format version");
  return detail::read_config(is);
}

template <class S>
Params<S> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(detail::kCkptMagic, 4))
    throw std::runtime_error("checkpoint: bad magic: " + path);
  std::uint32_t version = detail::read_u32(is);
  if (version != detail::kCkptVersion)
    throw std::runtime_error("checkpoint: unsupported format version");
  ModelConfig cfg = detail::read_config(is);

  Params<S> params = Params<S>::zeros(cfg);
  std::vector<TensorRef<S>> tensors;
  params.for_each_tensor([&tensors](const TensorRef<S>& t) { tensors.push_back(t); });

  std::uint32_t n_tensors = detail::read_u32(is);
  if (n_tensors != tensors.size())
    throw std::runtime_error("checkpoint: tensor count mismatch");
  for (const auto& t : tensors) {
    std::uint32_t name_len = detail::read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    std::uint32_t rows = detail::read_u32(is);
    std::uint32_t cols = detail::read_u32(is);
    if (!is || name != t.name || rows != static_cast<std::uint32_t>(t.rows) ||
        cols != static_cast<std::uint32_t>(t.cols))
      throw std::runtime_error("checkpoint: shape table mismatch at tensor " + name);
  }
  std::vector<float> buf;
  for (const auto& t : tensors) {
    buf.resize(static_cast<std::size_t>(t.size()));
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
    for (long i = 0; i < t.size(); ++i) t.data[i] = static_cast<S>(buf[static_cast<std::size_t>(i)]);
  }
  return params;
}

}  // namespace defined
