#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "tacnn/core/error.hpp"

namespace tacnn::io {

// Little-endian primitives, independent of host byte order.

template <typename U>
void write_le(std::ostream& out, U v) {
  static_assert(std::is_unsigned_v<U>);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = char((v >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(U));
}

template <typename U>
U read_le(std::istream& in, const char* what) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw FormatError(std::string("truncated ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(bytes[i]) << (8 * i);
  return v;
}

inline void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& in, const char* what) { return std::bit_cast<float>(read_le<std::uint32_t>(in, what)); }

inline void write_string16(std::ostream& out, const std::string& s) {
  if (s.size() > 0xffff) throw FormatError("string longer than 65535 bytes: " + s.substr(0, 32) + "...");
  write_le(out, std::uint16_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_bytes(std::istream& in, std::size_t n, const char* what) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), std::streamsize(n))) throw FormatError(std::string("truncated ") + what);
  return s;
}

inline std::string read_string16(std::istream& in, const char* what) {
  return read_bytes(in, read_le<std::uint16_t>(in, what), what);
}

inline void expect_magic(std::istream& in, const std::string& magic) {
  const std::string got = read_bytes(in, magic.size(), "magic");
  if (got != magic) throw FormatError("bad magic: expected " + magic);
}

}  // namespace tacnn::io
