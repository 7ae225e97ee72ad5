#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pevade {

using ByteBuf = std::vector<std::uint8_t>;

// Little-endian scalar access into a byte buffer. Callers are responsible
// for bounds; the helpers assert-check in debug builds only.
inline std::uint16_t get_u16(const ByteBuf& b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}
inline std::uint32_t get_u32(const ByteBuf& b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}
inline std::uint64_t get_u64(const ByteBuf& b, std::size_t off) {
  return static_cast<std::uint64_t>(get_u32(b, off)) | (static_cast<std::uint64_t>(get_u32(b, off + 4)) << 32);
}

inline void put_u16(ByteBuf& b, std::size_t off, std::uint16_t v) {
  b[off] = static_cast<std::uint8_t>(v & 0xff);
  b[off + 1] = static_cast<std::uint8_t>(v >> 8);
}
inline void put_u32(ByteBuf& b, std::size_t off, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[off + i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
}
inline void put_u64(ByteBuf& b, std::size_t off, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b[off + i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
}

inline void append_u16(ByteBuf& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void append_u32(ByteBuf& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
inline void append_u64(ByteBuf& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
inline void append_bytes(ByteBuf& b, const ByteBuf& src) { b.insert(b.end(), src.begin(), src.end()); }
inline void append_cstr(ByteBuf& b, std::string_view s) {
  b.insert(b.end(), s.begin(), s.end());
  b.push_back(0);
}

ByteBuf read_file(const std::string& path);
void write_file(const std::string& path, const ByteBuf& data);

}  // namespace pevade
