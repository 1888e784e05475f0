#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "swinlstm/data.hpp"

namespace sw = swinlstm;
using sw::Shape;
using sw::Tensor;

namespace {

template <typename A, typename B>
bool bit_equal(std::span<A> a, std::span<B> b) {
  static_assert(sizeof(A) == sizeof(B));
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(A)) == 0;
}

std::string temp_path(const std::string& name) { return "/tmp/swinlstm_data_" + name; }

std::vector<char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

void write_all(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void push_be_u32(std::vector<char>& v, std::uint32_t x) {
  v.push_back(static_cast<char>(x >> 24));
  v.push_back(static_cast<char>(x >> 16));
  v.push_back(static_cast<char>(x >> 8));
  v.push_back(static_cast<char>(x));
}

}  // namespace

TEST_CASE("idx image loader scales bytes to the unit interval") {
  std::vector<char> file;
  push_be_u32(file, 0x00000803u);
  push_be_u32(file, 2);  // images
  push_be_u32(file, 2);  // rows
  push_be_u32(file, 3);  // cols
  const unsigned char pixels[12] = {0, 255, 128, 7, 1, 2, 10, 11, 12, 13, 14, 15};
  for (unsigned char p : pixels) file.push_back(static_cast<char>(p));
  const std::string path = temp_path("images.idx");
  write_all(path, file);

  auto bank = sw::load_idx(path);
  CHECK(bank.rows == 2);
  CHECK(bank.cols == 3);
  CHECK(bank.procedural == false);
  REQUIRE(bank.bitmaps.size() == 2);
  REQUIRE(bank.bitmaps[0].size() == 6);
  CHECK(bank.bitmaps[0][0] == 0.0);
  CHECK(bank.bitmaps[0][1] == 1.0);  // byte 255 maps to exactly one
  CHECK(bank.bitmaps[0][2] == 128.0 / 255.0);
  CHECK(bank.bitmaps[1][5] == 15.0 / 255.0);

  // Wrong magic.
  auto bad = file;
  bad[3] = 0x01;
  write_all(path, bad);
  CHECK_THROWS_AS(sw::load_idx(path), sw::DataFileError);
  try {
    sw::load_idx(path);
  } catch (const sw::DataFileError& e) {
    CHECK(e.kind == sw::DataFileError::Kind::bad_magic);
  }

  // Payload cut short.
  auto cut = file;
  cut.resize(cut.size() - 4);
  write_all(path, cut);
  try {
    sw::load_idx(path);
    CHECK(false);
  } catch (const sw::DataFileError& e) {
    CHECK(e.kind == sw::DataFileError::Kind::truncated);
  }

  // Zero-sized dimension.
  std::vector<char> zero;
  push_be_u32(zero, 0x00000803u);
  push_be_u32(zero, 1);
  push_be_u32(zero, 0);
  push_be_u32(zero, 3);
  write_all(path, zero);
  try {
    sw::load_idx(path);
    CHECK(false);
  } catch (const sw::DataFileError& e) {
    CHECK(e.kind == sw::DataFileError::Kind::bad_header);
  }
  std::remove(path.c_str());
}

TEST_CASE("idx label loader reads the raw byte list") {
  std::vector<char> file;
  push_be_u32(file, 0x00000801u);
  push_be_u32(file, 3);
  file.push_back(7);
  file.push_back(2);
  file.push_back(9);
  const std::string path = temp_path("labels.idx");
  write_all(path, file);
  auto labels = sw::load_idx_labels(path);
  CHECK(labels == std::vector<std::uint8_t>{7, 2, 9});

  auto bad = file;
  bad[3] = 0x03;
  write_all(path, bad);
  try {
    sw::load_idx_labels(path);
    CHECK(false);
  } catch (const sw::DataFileError& e) {
    CHECK(e.kind == sw::DataFileError::Kind::bad_magic);
  }
  std::remove(path.c_str());
}

TEST_CASE("procedural glyphs are deterministic unit-range sprites") {
  auto rng1 = sw::Rng::from_seed(4, "glyphs");
  auto rng2 = sw::Rng::from_seed(4, "glyphs");
  auto a = sw::procedural_glyphs(rng1, 6);
  auto b = sw::procedural_glyphs(rng2, 6);
  CHECK(a.procedural);
  CHECK(a.rows == 28);
  CHECK(a.cols == 28);
  REQUIRE(a.bitmaps.size() == 6);
  for (std::size_t g = 0; g < 6; ++g) {
    REQUIRE(a.bitmaps[g].size() == 28 * 28);
    CHECK(bit_equal(std::span<const double>(a.bitmaps[g]),
                    std::span<const double>(b.bitmaps[g])));
    double mass = 0.0;
    for (double v : a.bitmaps[g]) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      mass += v;
    }
    CHECK(mass > 10.0);  // a visible blob, not an empty sprite
  }
  // Different draws give different silhouettes.
  CHECK_FALSE(bit_equal(std::span<const double>(a.bitmaps[0]),
                        std::span<const double>(a.bitmaps[1])));
}

TEST_CASE("axis reflection mirrors about the violated bound") {
  double p = 38.0, v = 3.0;
  sw::reflect_axis(p, v, 36.0);
  CHECK(p == 34.0);
  CHECK(v == -3.0);

  p = -2.0;
  v = -3.0;
  sw::reflect_axis(p, v, 36.0);
  CHECK(p == 2.0);
  CHECK(v == 3.0);

  // In-bounds positions pass through, including the exact edges and a
  // resting sprite.
  for (double at : {0.0, 17.3, 36.0}) {
    p = at;
    v = 1.5;
    sw::reflect_axis(p, v, 36.0);
    CHECK(p == at);
    CHECK(v == 1.5);
  }
  p = 10.0;
  v = 0.0;
  sw::reflect_axis(p, v, 36.0);
  CHECK(p == 10.0);
  CHECK(v == 0.0);
}

TEST_CASE("sprite trajectories match an independent reflection replay") {
  auto glyph_rng = sw::Rng::from_seed(11, "glyphs");
  auto bank = sw::procedural_glyphs(glyph_rng, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = sw::Rng::from_seed(500 + seed, "seq");
    std::vector<sw::SpriteTrack> tracks;
    auto frames = sw::generate_sequence<double>(rng, bank.bitmaps[0], bank.bitmaps[1], 28, 28,
                                                sw::SequenceSpec{}, &tracks);
    REQUIRE(frames.size() == 20);
    REQUIRE(tracks.size() == 2);
    for (const auto& tr : tracks) {
      REQUIRE(tr.x.size() == 20);
      // Replay the bounce from the recorded initial state.
      double x = tr.x[0], y = tr.y[0], vx = tr.vx[0], vy = tr.vy[0];
      const double speed0 = std::hypot(vx, vy);
      for (std::size_t t = 0; t < 20; ++t) {
        if (t > 0) {
          x += vx;
          y += vy;
          if (x < 0.0) {
            x = -x;
            vx = -vx;
          } else if (x > 36.0) {
            x = 72.0 - x;
            vx = -vx;
          }
          if (y < 0.0) {
            y = -y;
            vy = -vy;
          } else if (y > 36.0) {
            y = 72.0 - y;
            vy = -vy;
          }
        }
        REQUIRE(std::abs(tr.x[t] - x) < 1e-12);
        REQUIRE(std::abs(tr.y[t] - y) < 1e-12);
        REQUIRE(std::abs(tr.vx[t] - vx) < 1e-12);
        REQUIRE(std::abs(tr.vy[t] - vy) < 1e-12);
        // Positions stay inside the valid band and speed never changes.
        REQUIRE(tr.x[t] >= 0.0);
        REQUIRE(tr.x[t] <= 36.0);
        REQUIRE(tr.y[t] >= 0.0);
        REQUIRE(tr.y[t] <= 36.0);
        REQUIRE(std::abs(std::hypot(tr.vx[t], tr.vy[t]) - speed0) < 1e-9);
        REQUIRE(std::abs(std::abs(tr.vx[t]) - std::abs(tr.vx[0])) < 1e-9);
        REQUIRE(std::abs(std::abs(tr.vy[t]) - std::abs(tr.vy[0])) < 1e-9);
      }
    }
    // Every pixel of every frame sits in the unit interval.
    for (const auto& f : frames) {
      REQUIRE(f.shape() == Shape({1, 64, 64}));
      for (double v : f.data()) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
      }
    }
  }
}

TEST_CASE("rendering composes sprites by a symmetric per-pixel maximum") {
  auto glyph_rng = sw::Rng::from_seed(12, "glyphs");
  auto bank = sw::procedural_glyphs(glyph_rng, 2);

  auto ab = Tensor<double>::zeros({1, 64, 64});
  sw::render_sprite(ab, bank.bitmaps[0], 28, 28, 5.4, 20.0);
  sw::render_sprite(ab, bank.bitmaps[1], 28, 28, 18.0, 9.7);
  auto ba = Tensor<double>::zeros({1, 64, 64});
  sw::render_sprite(ba, bank.bitmaps[1], 28, 28, 18.0, 9.7);
  sw::render_sprite(ba, bank.bitmaps[0], 28, 28, 5.4, 20.0);
  CHECK(bit_equal(ab.data(), ba.data()));

  // Support stays inside the union of the two sprite boxes.
  for (std::int64_t i = 0; i < 64; ++i)
    for (std::int64_t j = 0; j < 64; ++j) {
      const bool in_a = i >= 20 && i < 48 && j >= 5 && j < 33;
      const bool in_b = i >= 10 && i < 38 && j >= 18 && j < 46;
      if (!in_a && !in_b) REQUIRE(ab.at({0, i, j}) == 0.0);
    }

  // A sprite that would leave the canvas is rejected.
  auto frame = Tensor<double>::zeros({1, 64, 64});
  CHECK_THROWS_AS(sw::render_sprite(frame, bank.bitmaps[0], 28, 28, 37.0, 0.0), sw::Error);
}

TEST_CASE("zero speed produces a static sequence") {
  auto glyph_rng = sw::Rng::from_seed(13, "glyphs");
  auto bank = sw::procedural_glyphs(glyph_rng, 2);
  sw::SequenceSpec spec;
  spec.min_speed = 0.0;
  spec.max_speed = 0.0;
  spec.length = 6;
  auto rng = sw::Rng::from_seed(77, "seq");
  auto frames = sw::generate_sequence<double>(rng, bank.bitmaps[0], bank.bitmaps[1], 28, 28, spec);
  REQUIRE(frames.size() == 6);
  for (std::size_t t = 1; t < frames.size(); ++t)
    CHECK(bit_equal(frames[0].data(), frames[t].data()));
}

TEST_CASE("dataset files round-trip bit-exactly and deterministically") {
  auto glyph_rng = sw::Rng::from_seed(14, "glyphs");
  auto bank = sw::procedural_glyphs(glyph_rng, 5);
  sw::SequenceSpec spec;
  spec.length = 4;
  const std::string path = temp_path("set.swds");
  sw::build_dataset<double>(path, 3, 3, bank, spec);

  sw::DatasetFile<double> reader(path);
  CHECK(reader.header().count == 3);
  CHECK(reader.header().frames == 4);
  CHECK(reader.header().channels == 1);
  CHECK(reader.header().height == 64);
  CHECK(reader.header().width == 64);
  CHECK(reader.header().dtype == 8);
  CHECK(reader.header().procedural == 1);

  // Stored sequences equal an in-place regeneration from the same streams.
  const auto base = sw::Rng::from_seed(3, "data.sequence");
  for (std::uint32_t i = 0; i < 3; ++i) {
    auto rng = base.substream(i);
    const auto& a = bank.bitmaps[rng.uniform_index(bank.bitmaps.size())];
    const auto& b = bank.bitmaps[rng.uniform_index(bank.bitmaps.size())];
    auto want = sw::generate_sequence<double>(rng, a, b, 28, 28, spec);
    auto got = reader.sequence(i);
    REQUIRE(got.size() == want.size());
    for (std::size_t t = 0; t < got.size(); ++t)
      REQUIRE(bit_equal(got[t].data(), want[t].data()));
  }
  CHECK(reader.load_all().size() == 3);
  CHECK_THROWS_AS(reader.sequence(3), sw::Error);

  // Same seed, second build: byte-identical file.
  const std::string path2 = temp_path("set2.swds");
  sw::build_dataset<double>(path2, 3, 3, bank, spec);
  CHECK(read_all(path) == read_all(path2));
  std::remove(path2.c_str());

  // Error kinds: foreign magic, version bump, dtype mismatch, truncation.
  const std::vector<char> good = read_all(path);
  auto wrong_magic = good;
  wrong_magic[0] = 'X';
  write_all(path2, wrong_magic);
  try {
    sw::DatasetFile<double> r(path2);
    CHECK(false);
  } catch (const sw::DataFileError& e) {
    CHECK(e.kind == sw::DataFileError::Kind::bad_magic);
  }
  auto wrong_version = good;
  wrong_version[4] = 9;
  write_all(path2, wrong_version);
  try {
    sw::DatasetFile<double> r(path2);
    CHECK(false);
  } catch (const sw::DataFileError& e) {
    CHECK(e.kind == sw::DataFileError::Kind::bad_header);
  }
  try {
    sw::DatasetFile<float> r(path);
    CHECK(false);
  } catch (const sw::DataFileError& e) {
    CHECK(e.kind == sw::DataFileError::Kind::bad_header);
  }
  auto cut = good;
  cut.resize(cut.size() - 11);
  write_all(path2, cut);
  try {
    sw::DatasetFile<double> r(path2);
    CHECK(false);
  } catch (const sw::DataFileError& e) {
    CHECK(e.kind == sw::DataFileError::Kind::truncated);
  }
  std::remove(path2.c_str());
  std::remove(path.c_str());
}

TEST_CASE("pgm writer emits the expected binary image") {
  const std::string path = temp_path("frame.pgm");
  auto frame = Tensor<double>::from_data({1, 2, 3}, {0.0, 0.5, 1.0, -0.2, 1.5, 0.25});
  sw::write_pgm(path, frame);
  auto bytes = read_all(path);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(header.size())) ==
        header);
  const unsigned char* px = reinterpret_cast<const unsigned char*>(bytes.data()) + header.size();
  CHECK(px[0] == 0);
  CHECK(px[1] == 128);
  CHECK(px[2] == 255);
  CHECK(px[3] == 0);    // clamped from below
  CHECK(px[4] == 255);  // clamped from above
  CHECK(px[5] == 64);
  std::remove(path.c_str());

  CHECK_THROWS_AS(sw::write_pgm(path, Tensor<double>::zeros({2, 4, 4})), sw::Error);
}
