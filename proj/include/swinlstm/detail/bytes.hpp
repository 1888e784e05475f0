#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>

namespace swinlstm::bytes {

// Little-endian scalar serialization, composed byte by byte so files read
// and write identically on any host.

inline void put_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
               static_cast<char>(v >> 24)};
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline bool get_u16(std::istream& in, std::uint16_t& v) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) return false;
  v = static_cast<std::uint16_t>(std::uint16_t(b[0]) | std::uint16_t(b[1]) << 8);
  return true;
}

inline bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
      std::uint32_t(b[3]) << 24;
  return true;
}

inline bool get_u64(std::istream& in, std::uint64_t& v) {
  std::uint32_t lo = 0, hi = 0;
  if (!get_u32(in, lo) || !get_u32(in, hi)) return false;
  v = std::uint64_t(lo) | std::uint64_t(hi) << 32;
  return true;
}

template <typename T>
void put_values(std::ostream& out, std::span<const T> v) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  for (T x : v) {
    if constexpr (sizeof(T) == 4)
      put_u32(out, std::bit_cast<std::uint32_t>(x));
    else
      put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
}

template <typename T>
bool get_values(std::istream& in, std::span<T> v) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  for (T& x : v) {
    if constexpr (sizeof(T) == 4) {
      std::uint32_t b = 0;
      if (!get_u32(in, b)) return false;
      x = std::bit_cast<T>(b);
    } else {
      std::uint64_t b = 0;
      if (!get_u64(in, b)) return false;
      x = std::bit_cast<T>(b);
    }
  }
  return true;
}

}  // namespace swinlstm::bytes
