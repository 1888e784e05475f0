#include "swinlstm/data.hpp"

namespace swinlstm {
namespace {

bool get_be_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = std::uint32_t(b[0]) << 24 | std::uint32_t(b[1]) << 16 | std::uint32_t(b[2]) << 8 |
      std::uint32_t(b[3]);
  return true;
}

}  // namespace

DigitBank load_idx(const std::string& images_path) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) throw IoError(images_path, "cannot open for reading");
  std::uint32_t magic = 0, count = 0, rows = 0, cols = 0;
  if (!get_be_u32(in, magic))
    throw DataFileError(DataFileError::Kind::truncated, images_path + ": file ends mid-header");
  if (magic != 0x00000803u)
    throw DataFileError(DataFileError::Kind::bad_magic,
                        images_path + ": not an IDX image file");
  if (!get_be_u32(in, count) || !get_be_u32(in, rows) || !get_be_u32(in, cols))
    throw DataFileError(DataFileError::Kind::truncated, images_path + ": file ends mid-header");
  if (count == 0 || rows == 0 || cols == 0)
    throw DataFileError(DataFileError::Kind::bad_header,
                        images_path + ": zero-sized dimensions");

  DigitBank bank;
  bank.rows = rows;
  bank.cols = cols;
  bank.bitmaps.reserve(count);
  std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
      throw DataFileError(DataFileError::Kind::truncated,
                          images_path + ": payload ends inside image " + std::to_string(i));
    std::vector<double> bitmap(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) bitmap[k] = raw[k] / 255.0;
    bank.bitmaps.push_back(std::move(bitmap));
  }
  return bank;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& labels_path) {
  std::ifstream in(labels_path, std::ios::binary);
  if (!in) throw IoError(labels_path, "cannot open for reading");
  std::uint32_t magic = 0, count = 0;
  if (!get_be_u32(in, magic))
    throw DataFileError(DataFileError::Kind::truncated, labels_path + ": file ends mid-header");
  if (magic != 0x00000801u)
    throw DataFileError(DataFileError::Kind::bad_magic,
                        labels_path + ": not an IDX label file");
  if (!get_be_u32(in, count))
    throw DataFileError(DataFileError::Kind::truncated, labels_path + ": file ends mid-header");
  std::vector<std::uint8_t> labels(count);
  if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count)))
    throw DataFileError(DataFileError::Kind::truncated, labels_path + ": payload ends early");
  return labels;
}

DigitBank procedural_glyphs(Rng& rng, int count) {
  if (count < 1) throw Error("procedural_glyphs: need at least one glyph");
  DigitBank bank;
  bank.rows = 28;
  bank.cols = 28;
  bank.procedural = true;
  bank.bitmaps.reserve(static_cast<std::size_t>(count));
  for (int g = 0; g < count; ++g) {
    // Filled ellipse with a soft rim; the center jitter and axis draw give
    // each glyph a distinct silhouette. Draws: cx, cy, rx, ry, softness.
    const double cx = rng.uniform(11.0, 16.0);
    const double cy = rng.uniform(11.0, 16.0);
    const double rx = rng.uniform(5.0, 11.0);
    const double ry = rng.uniform(5.0, 11.0);
    const double soft = rng.uniform(1.5, 4.0);
    std::vector<double> bitmap(28 * 28, 0.0);
    for (int i = 0; i < 28; ++i)
      for (int j = 0; j < 28; ++j) {
        const double dx = (j - cx) / rx, dy = (i - cy) / ry;
        const double r = std::sqrt(dx * dx + dy * dy);
        bitmap[static_cast<std::size_t>(i * 28 + j)] = std::clamp(soft * (1.0 - r), 0.0, 1.0);
      }
    bank.bitmaps.push_back(std::move(bitmap));
  }
  return bank;
}

}  // namespace swinlstm
