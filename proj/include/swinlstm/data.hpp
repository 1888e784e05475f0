#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "swinlstm/detail/bytes.hpp"
#include "swinlstm/errors.hpp"
#include "swinlstm/rng.hpp"
#include "swinlstm/tensor.hpp"

namespace swinlstm {

// A bank of grayscale sprite bitmaps in [0, 1], either decoded from an IDX
// image file or synthesized procedurally when no such file is available.
struct DigitBank {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::vector<double>> bitmaps;
  bool procedural = false;
};

// IDX image file (big-endian magic 0x00000803, count, rows, cols, bytes);
// pixel bytes are scaled to [0, 1] by 1/255.
DigitBank load_idx(const std::string& images_path);
// IDX label file (big-endian magic 0x00000801, count, bytes).
std::vector<std::uint8_t> load_idx_labels(const std::string& labels_path);

// Offline fallback sprites: filled ellipses of random size, eccentricity,
// and edge softness, deterministic in the generator state.
DigitBank procedural_glyphs(Rng& rng, int count);

// One axis of bouncing motion: the tentative position p is mirrored about
// the violated bound and the velocity component is negated. bound is the
// largest valid position (canvas minus sprite extent).
inline void reflect_axis(double& p, double& v, double bound) {
  if (p < 0.0) {
    p = -p;
    v = -v;
  } else if (p > bound) {
    p = 2.0 * bound - p;
    v = -v;
  }
}

// Per-frame sprite telemetry captured during generation, for tests.
struct SpriteTrack {
  std::vector<double> x, y, vx, vy;
};

struct SequenceSpec {
  int length = 20;
  std::int64_t canvas = 64;
  double min_speed = 3.0;
  double max_speed = 5.0;
};

// Max-composites a bitmap onto the frame at sub-pixel position (x, y),
// rounded to the nearest integer pixel. The frame is (1, canvas, canvas).
template <typename T>
void render_sprite(Tensor<T>& frame, std::span<const double> bitmap, std::int64_t rows,
                   std::int64_t cols, double x, double y) {
  const std::int64_t h = frame.dim(1), w = frame.dim(2);
  const std::int64_t px = std::llround(x), py = std::llround(y);
  if (px < 0 || py < 0 || px + cols > w || py + rows > h)
    throw Error("render_sprite: sprite leaves the canvas");
  auto fv = frame.data();
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) {
      T& cell = fv[(py + i) * w + (px + j)];
      cell = std::max(cell, static_cast<T>(bitmap[static_cast<std::size_t>(i * cols + j)]));
    }
}

// Moving-sprite sequence: both digits get a position uniform over the valid
// range, a direction uniform in [0, 2pi), and a speed uniform in
// [min_speed, max_speed], constant except for sign flips at the walls.
// Frame t renders the state after t moves; the two sprites combine by
// per-pixel maximum. Draw order per digit: x, y, angle, speed.
template <typename T>
std::vector<Tensor<T>> generate_sequence(Rng& rng, std::span<const double> digit_a,
                                         std::span<const double> digit_b, std::int64_t rows,
                                         std::int64_t cols, const SequenceSpec& spec = {},
                                         std::vector<SpriteTrack>* tracks = nullptr) {
  if (spec.canvas < rows || spec.canvas < cols)
    throw Error("generate_sequence: sprite does not fit the canvas");
  if (spec.length < 1) throw Error("generate_sequence: need at least one frame");
  const double bound_x = static_cast<double>(spec.canvas - cols);
  const double bound_y = static_cast<double>(spec.canvas - rows);

  struct State {
    std::span<const double> bitmap;
    double x, y, vx, vy;
  };
  std::array<State, 2> sprites{State{digit_a, 0, 0, 0, 0}, State{digit_b, 0, 0, 0, 0}};
  for (State& s : sprites) {
    s.x = rng.uniform(0.0, bound_x);
    s.y = rng.uniform(0.0, bound_y);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double speed = rng.uniform(spec.min_speed, spec.max_speed);
    s.vx = speed * std::cos(angle);
    s.vy = speed * std::sin(angle);
  }
  if (tracks != nullptr) tracks->assign(2, SpriteTrack{});

  std::vector<Tensor<T>> frames;
  frames.reserve(static_cast<std::size_t>(spec.length));
  for (int t = 0; t < spec.length; ++t) {
    if (t > 0)
      for (State& s : sprites) {
        s.x += s.vx;
        s.y += s.vy;
        reflect_axis(s.x, s.vx, bound_x);
        reflect_axis(s.y, s.vy, bound_y);
      }
    Tensor<T> frame = Tensor<T>::zeros({1, spec.canvas, spec.canvas});
    for (std::size_t k = 0; k < sprites.size(); ++k) {
      render_sprite(frame, sprites[k].bitmap, rows, cols, sprites[k].x, sprites[k].y);
      if (tracks != nullptr) {
        (*tracks)[k].x.push_back(sprites[k].x);
        (*tracks)[k].y.push_back(sprites[k].y);
        (*tracks)[k].vx.push_back(sprites[k].vx);
        (*tracks)[k].vy.push_back(sprites[k].vy);
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

// Sequence dataset file: magic "SWDS", u32 version, u32 count, u16 frames,
// u16 channels, u16 height, u16 width, u8 dtype size (4 or 8), u8 source
// flag (1 = procedural sprites), then the little-endian frame payload in
// sequence-major order.
struct DatasetHeader {
  std::uint32_t count = 0;
  std::uint16_t frames = 0;
  std::uint16_t channels = 0;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::uint8_t dtype = 0;
  std::uint8_t procedural = 0;

  std::int64_t values_per_sequence() const {
    return std::int64_t(frames) * channels * height * width;
  }
};

namespace swds {

inline constexpr char kMagic[4] = {'S', 'W', 'D', 'S'};
inline constexpr std::uint32_t kVersion = 1;

[[noreturn]] inline void truncated(const std::string& path) {
  throw DataFileError(DataFileError::Kind::truncated, path + ": file ends mid-record");
}

}  // namespace swds

// Incremental writer: the header is written up front, sequences append in
// index order.
template <typename T>
class DatasetWriter {
 public:
  DatasetWriter(const std::string& path, DatasetHeader header)
      : path_(path), header_(header), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError(path, "cannot open for writing");
    header_.dtype = sizeof(T);
    out_.write(swds::kMagic, 4);
    bytes::put_u32(out_, swds::kVersion);
    bytes::put_u32(out_, header_.count);
    bytes::put_u16(out_, header_.frames);
    bytes::put_u16(out_, header_.channels);
    bytes::put_u16(out_, header_.height);
    bytes::put_u16(out_, header_.width);
    out_.put(static_cast<char>(header_.dtype));
    out_.put(static_cast<char>(header_.procedural));
  }

  void append(const std::vector<Tensor<T>>& frames) {
    if (static_cast<std::uint16_t>(frames.size()) != header_.frames)
      throw Error("dataset writer: sequence holds " + std::to_string(frames.size()) +
                  " frames, header says " + std::to_string(header_.frames));
    for (const Tensor<T>& f : frames) {
      if (f.shape() != Shape{header_.channels, header_.height, header_.width})
        throw Error("dataset writer: frame shape does not match the header");
      bytes::put_values<T>(out_, f.data());
    }
    ++written_;
  }

  void finish() {
    if (written_ != header_.count)
      throw Error("dataset writer: wrote " + std::to_string(written_) + " of " +
                  std::to_string(header_.count) + " sequences");
    out_.flush();
    if (!out_) throw IoError(path_, "write failed");
  }

 private:
  std::string path_;
  DatasetHeader header_;
  std::ofstream out_;
  std::uint32_t written_ = 0;
};

// Random-access reader; sequences decode on demand so large files never sit
// fully in memory.
template <typename T>
class DatasetFile {
 public:
  explicit DatasetFile(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError(path, "cannot open for reading");
    char magic[4];
    if (!in_.read(magic, 4)) swds::truncated(path);
    if (std::string_view(magic, 4) != std::string_view(swds::kMagic, 4))
      throw DataFileError(DataFileError::Kind::bad_magic, path + ": not a dataset file");
    std::uint32_t version = 0;
    if (!bytes::get_u32(in_, version)) swds::truncated(path);
    if (version != swds::kVersion)
      throw DataFileError(DataFileError::Kind::bad_header,
                          path + ": format version " + std::to_string(version));
    if (!bytes::get_u32(in_, header_.count) || !bytes::get_u16(in_, header_.frames) ||
        !bytes::get_u16(in_, header_.channels) || !bytes::get_u16(in_, header_.height) ||
        !bytes::get_u16(in_, header_.width))
      swds::truncated(path);
    const int dtype = in_.get();
    const int procedural = in_.get();
    if (dtype == std::ifstream::traits_type::eof() ||
        procedural == std::ifstream::traits_type::eof())
      swds::truncated(path);
    header_.dtype = static_cast<std::uint8_t>(dtype);
    header_.procedural = static_cast<std::uint8_t>(procedural);
    if (header_.frames == 0 || header_.channels == 0 || header_.height == 0 ||
        header_.width == 0)
      throw DataFileError(DataFileError::Kind::bad_header, path + ": zero-sized dimensions");
    if (header_.dtype != sizeof(T))
      throw DataFileError(DataFileError::Kind::bad_header,
                          path + ": holds " + std::to_string(header_.dtype) +
                              "-byte values, reader expects " + std::to_string(sizeof(T)));
    payload_ = in_.tellg();
    in_.seekg(0, std::ios::end);
    const std::streamoff size = in_.tellg() - payload_;
    const std::streamoff want = std::streamoff(header_.count) *
                                header_.values_per_sequence() *
                                std::streamoff(header_.dtype);
    if (size != want)
      throw DataFileError(DataFileError::Kind::truncated,
                          path + ": payload is " + std::to_string(size) + " bytes, header needs " +
                              std::to_string(want));
  }

  const DatasetHeader& header() const { return header_; }

  // Frames (channels, height, width) of one sequence.
  std::vector<Tensor<T>> sequence(std::uint32_t index) {
    if (index >= header_.count)
      throw Error("dataset: sequence " + std::to_string(index) + " out of range (count " +
                  std::to_string(header_.count) + ")");
    in_.clear();
    in_.seekg(payload_ + std::streamoff(index) * header_.values_per_sequence() *
                             std::streamoff(sizeof(T)));
    std::vector<Tensor<T>> frames;
    frames.reserve(header_.frames);
    for (std::uint16_t t = 0; t < header_.frames; ++t) {
      Tensor<T> f = Tensor<T>::zeros({header_.channels, header_.height, header_.width});
      if (!bytes::get_values<T>(in_, f.data())) swds::truncated(path_);
      frames.push_back(std::move(f));
    }
    return frames;
  }

  std::vector<std::vector<Tensor<T>>> load_all() {
    std::vector<std::vector<Tensor<T>>> out;
    out.reserve(header_.count);
    for (std::uint32_t i = 0; i < header_.count; ++i) out.push_back(sequence(i));
    return out;
  }

 private:
  std::string path_;
  std::ifstream in_;
  DatasetHeader header_;
  std::streamoff payload_ = 0;
};

// Generates `count` sequences of two sprites each and writes them to path.
// Sequence i derives its own stream from (seed, i), so content depends only
// on the seed and index, never on generation order. Draws per sequence: the
// two sprite indices, then the motion parameters.
template <typename T>
void build_dataset(const std::string& path, std::uint64_t seed, std::uint32_t count,
                   const DigitBank& bank, const SequenceSpec& spec = {}) {
  if (bank.bitmaps.empty()) throw Error("build_dataset: empty sprite bank");
  DatasetHeader header;
  header.count = count;
  header.frames = static_cast<std::uint16_t>(spec.length);
  header.channels = 1;
  header.height = static_cast<std::uint16_t>(spec.canvas);
  header.width = static_cast<std::uint16_t>(spec.canvas);
  header.procedural = bank.procedural ? 1 : 0;
  DatasetWriter<T> writer(path, header);
  const Rng base = Rng::from_seed(seed, "data.sequence");
  for (std::uint32_t i = 0; i < count; ++i) {
    Rng rng = base.substream(i);
    const auto& a = bank.bitmaps[rng.uniform_index(bank.bitmaps.size())];
    const auto& b = bank.bitmaps[rng.uniform_index(bank.bitmaps.size())];
    writer.append(generate_sequence<T>(rng, a, b, bank.rows, bank.cols, spec));
  }
  writer.finish();
}

// 8-bit binary PGM snapshot of one frame; values are clamped to [0, 1].
template <typename T>
void write_pgm(const std::string& path, const Tensor<T>& frame) {
  if (frame.rank() != 2 && !(frame.rank() == 3 && frame.dim(0) == 1))
    throw Error("write_pgm: expected (height, width) or (1, height, width)");
  const std::int64_t h = frame.dim(frame.rank() - 2), w = frame.dim(frame.rank() - 1);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  for (T v : frame.data()) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    out.put(static_cast<char>(std::lround(c * 255.0)));
  }
  if (!out) throw IoError(path, "write failed");
}

}  // namespace swinlstm
