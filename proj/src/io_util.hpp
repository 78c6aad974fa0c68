#pragma once

// Internal serialization helpers shared by the file-format code. All integer
// and float payloads are little-endian regardless of host order.

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "m3l/error.hpp"

namespace m3l::detail {

inline void write_u32(std::ostream& out, uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

inline bool read_u32(std::istream& in, uint32_t& v) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
  v = static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
      (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
  return true;
}

inline void write_f32(std::ostream& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(out, bits);
}

inline bool read_f32(std::istream& in, float& f) {
  uint32_t bits;
  if (!read_u32(in, bits)) return false;
  std::memcpy(&f, &bits, 4);
  return true;
}

inline void write_u8(std::ostream& out, uint8_t v) { out.put(static_cast<char>(v)); }

inline bool read_u8(std::istream& in, uint8_t& v) {
  int c = in.get();
  if (c == EOF) return false;
  v = static_cast<uint8_t>(c);
  return true;
}

inline void write_lp_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline bool read_lp_string(std::istream& in, std::string& s) {
  uint32_t n;
  if (!read_u32(in, n)) return false;
  s.resize(n);
  return n == 0 || static_cast<bool>(in.read(s.data(), n));
}

// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    fail(ErrorCode::parse_error, "bad number '" + std::string(s) + "' in " + context);
  }
  return v;
}

inline long long parse_int(std::string_view s, const std::string& context) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    fail(ErrorCode::parse_error, "bad integer '" + std::string(s) + "' in " + context);
  }
  return v;
}

// Writes through a temp file in the same directory and renames into place,
// so a failed run never leaves a partial file behind.
inline void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& body,
                         std::ios::openmode mode = std::ios::binary) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, mode | std::ios::trunc);
    if (!out) fail(ErrorCode::io_write, "cannot open for writing: " + tmp.string());
    body(out);
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(ErrorCode::io_write, "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::io_write, "cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      parts.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace m3l::detail
