// SPDX-License-Identifier: Apache-2.0
#pragma once

// Little-endian primitive I/O shared by the checkpoint and feature-video formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "tdet/error.hpp"

namespace tdet::io {

template <typename U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const std::string& what) {
  unsigned char b[sizeof(U)];
  is.read(reinterpret_cast<char*>(b), sizeof(U));
  TDET_CHECK(is.gcount() == static_cast<std::streamsize>(sizeof(U)), ErrorCode::kParse,
             "truncated file while reading " + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

inline void put_f32(std::ostream& os, float f) { put_le(os, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(get_le<std::uint32_t>(is, what));
}

}  // namespace tdet::io
