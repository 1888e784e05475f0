#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "swinlstm/detail/bytes.hpp"
#include "swinlstm/errors.hpp"
#include "swinlstm/model.hpp"
#include "swinlstm/rng.hpp"

namespace swinlstm {

template <typename T>
class Adam;

// Checkpoint file: little-endian binary, magic "SWLS", then
//   u32 version
//   u64 parameter count (re-derived from the config on load)
//   u32 config length + configuration text
//   u64 tensor count, then per parameter: u32 name length + name, u8 dtype
//     (4 = f32, 8 = f64), u32 rank, u64 dims, raw values
//   per parameter: raw first-moment values, raw second-moment values
//   u64 optimizer step counter
//   u64 RNG key, u64 RNG state
// Every multi-byte value is serialized byte by byte, so files are portable
// across hosts regardless of native endianness.

namespace ckpt {

inline constexpr char kMagic[4] = {'S', 'W', 'L', 'S'};
inline constexpr std::uint32_t kVersion = 1;

using bytes::get_u32;
using bytes::get_u64;
using bytes::get_values;
using bytes::put_u32;
using bytes::put_u64;
using bytes::put_values;

[[noreturn]] inline void truncated(const std::string& path) {
  throw CheckpointError(CheckpointError::Kind::truncated, path + ": file ends mid-record");
}

}  // namespace ckpt

template <typename T>
void save_checkpoint(const std::string& path, const Predictor<T>& net, const Adam<T>& opt,
                     const Rng& rng) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");

  out.write(ckpt::kMagic, 4);
  ckpt::put_u32(out, ckpt::kVersion);
  ckpt::put_u64(out, static_cast<std::uint64_t>(net.param_count()));
  const std::string cfg_text = net.cfg.to_text();
  ckpt::put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

  const NamedParams<T> params = net.parameters();
  ckpt::put_u64(out, params.size());
  for (const auto& [name, p] : params) {
    ckpt::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.put(static_cast<char>(sizeof(T)));
    ckpt::put_u32(out, static_cast<std::uint32_t>(p.rank()));
    for (int d = 0; d < p.rank(); ++d)
      ckpt::put_u64(out, static_cast<std::uint64_t>(p.dim(d)));
    ckpt::put_values<T>(out, p.data());
  }
  for (const auto& mo : opt.moments()) {
    ckpt::put_values<T>(out, mo.m.data());
    ckpt::put_values<T>(out, mo.v.data());
  }
  ckpt::put_u64(out, static_cast<std::uint64_t>(opt.step_count()));
  ckpt::put_u64(out, rng.key());
  ckpt::put_u64(out, rng.state());
  if (!out) throw IoError(path, "write failed");
}

// Reads just the embedded configuration text so a caller can build a
// matching model before loading the full state.
inline std::string peek_checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  char magic[4];
  if (!in.read(magic, 4)) ckpt::truncated(path);
  if (std::string_view(magic, 4) != std::string_view(ckpt::kMagic, 4))
    throw CheckpointError(CheckpointError::Kind::bad_magic, path + ": not a checkpoint file");
  std::uint32_t version = 0;
  if (!ckpt::get_u32(in, version)) ckpt::truncated(path);
  if (version != ckpt::kVersion)
    throw CheckpointError(CheckpointError::Kind::version_mismatch,
                          path + ": format version " + std::to_string(version) +
                              ", expected " + std::to_string(ckpt::kVersion));
  std::uint64_t declared = 0;
  if (!ckpt::get_u64(in, declared)) ckpt::truncated(path);
  std::uint32_t len = 0;
  if (!ckpt::get_u32(in, len)) ckpt::truncated(path);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) ckpt::truncated(path);
  return text;
}

// Restores parameters, optimizer moments, step counter, and RNG state into
// an already-built model of the exact same configuration.
template <typename T>
void load_checkpoint(const std::string& path, Predictor<T>& net, Adam<T>& opt, Rng& rng) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");

  char magic[4];
  if (!in.read(magic, 4)) ckpt::truncated(path);
  if (std::string_view(magic, 4) != std::string_view(ckpt::kMagic, 4))
    throw CheckpointError(CheckpointError::Kind::bad_magic, path + ": not a checkpoint file");
  std::uint32_t version = 0;
  if (!ckpt::get_u32(in, version)) ckpt::truncated(path);
  if (version != ckpt::kVersion)
    throw CheckpointError(CheckpointError::Kind::version_mismatch,
                          path + ": format version " + std::to_string(version) +
                              ", expected " + std::to_string(ckpt::kVersion));
  std::uint64_t declared_params = 0;
  if (!ckpt::get_u64(in, declared_params)) ckpt::truncated(path);
  std::uint32_t cfg_len = 0;
  if (!ckpt::get_u32(in, cfg_len)) ckpt::truncated(path);
  std::string cfg_text(cfg_len, '\0');
  if (!in.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len))) ckpt::truncated(path);
  if (cfg_text != net.cfg.to_text())
    throw CheckpointError(CheckpointError::Kind::config_mismatch,
                          path + ": stored configuration does not match the model");
  if (declared_params != static_cast<std::uint64_t>(net.param_count()))
    throw CheckpointError(CheckpointError::Kind::config_mismatch,
                          path + ": stored parameter count " + std::to_string(declared_params) +
                              ", model has " + std::to_string(net.param_count()));

  NamedParams<T> params = net.parameters();
  std::uint64_t count = 0;
  if (!ckpt::get_u64(in, count)) ckpt::truncated(path);
  if (count != params.size())
    throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                          path + ": " + std::to_string(count) + " tensors for " +
                              std::to_string(params.size()) + " parameters");
  for (auto& [name, p] : params) {
    std::uint32_t name_len = 0;
    if (!ckpt::get_u32(in, name_len)) ckpt::truncated(path);
    std::string got_name(name_len, '\0');
    if (!in.read(got_name.data(), static_cast<std::streamsize>(name_len)))
      ckpt::truncated(path);
    if (got_name != name)
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            path + ": tensor '" + got_name + "' where '" + name +
                                "' was expected");
    const int dtype = in.get();
    if (dtype == std::ifstream::traits_type::eof()) ckpt::truncated(path);
    if (dtype != static_cast<int>(sizeof(T)))
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            path + ": tensor '" + name + "' holds " + std::to_string(dtype) +
                                "-byte values, expected " + std::to_string(sizeof(T)));
    std::uint32_t rank = 0;
    if (!ckpt::get_u32(in, rank)) ckpt::truncated(path);
    Shape dims;
    for (std::uint32_t d = 0; d < rank; ++d) {
      std::uint64_t extent = 0;
      if (!ckpt::get_u64(in, extent)) ckpt::truncated(path);
      dims.push_back(static_cast<std::int64_t>(extent));
    }
    if (dims != p.shape())
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            path + ": tensor '" + name + "' has a different shape");
    if (!ckpt::get_values<T>(in, p.data())) ckpt::truncated(path);
  }
  for (auto& mo : opt.moments()) {
    if (!ckpt::get_values<T>(in, mo.m.data())) ckpt::truncated(path);
    if (!ckpt::get_values<T>(in, mo.v.data())) ckpt::truncated(path);
  }
  std::uint64_t step = 0, key = 0, state = 0;
  if (!ckpt::get_u64(in, step)) ckpt::truncated(path);
  if (!ckpt::get_u64(in, key)) ckpt::truncated(path);
  if (!ckpt::get_u64(in, state)) ckpt::truncated(path);
  opt.set_step_count(static_cast<std::int64_t>(step));
  rng = Rng(key);
  rng.set_state(state);
}

}  // namespace swinlstm
