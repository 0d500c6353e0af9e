#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "holmes/errors.hpp"

namespace holmes::io {

// Little-endian scalar encoding used by every binary file in a run directory.

template <typename UInt>
UInt to_little(UInt v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    UInt out = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) out |= ((v >> (8 * i)) & 0xFF) << (8 * (sizeof(UInt) - 1 - i));
    return out;
  }
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& os, double d) { write_u64(os, std::bit_cast<std::uint64_t>(d)); }
inline void write_f32(std::ostream& os, float f) { write_u32(os, std::bit_cast<std::uint32_t>(f)); }

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& is, void* dst, std::size_t n) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw ValidationError("unexpected end of binary file");
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v;
  read_exact(is, &v, sizeof v);
  return to_little(v);
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v;
  read_exact(is, &v, sizeof v);
  return to_little(v);
}

inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }
inline float read_f32(std::istream& is) { return std::bit_cast<float>(read_u32(is)); }

inline std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  read_exact(is, s.data(), n);
  return s;
}

inline void write_f32s(std::ostream& os, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float f : values) write_f32(os, f);
  }
}

inline void read_f32s(std::istream& is, std::span<float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    read_exact(is, values.data(), values.size_bytes());
  } else {
    for (float& f : values) f = read_f32(is);
  }
}

inline void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char got[4];
  read_exact(is, got, 4);
  if (std::memcmp(got, magic, 4) != 0) throw ValidationError(std::string("bad file magic, expected ") + magic);
}

}  // namespace holmes::io
