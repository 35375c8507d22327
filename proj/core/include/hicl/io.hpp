#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace hicl {

std::string read_text_file(const std::filesystem::path& file);

/// Writes to a sibling temp file, fsyncs, then renames over the target.
void write_file_atomic(const std::filesystem::path& file, std::string_view bytes);

/// Appends one line and fsyncs before returning.
void append_line_durable(const std::filesystem::path& file, std::string_view line);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);
std::uint32_t crc32(std::string_view bytes);

/// 64-bit FNV-1a over the bytes.
std::uint64_t fingerprint64(std::string_view bytes);
/// fingerprint64 as 16 lowercase hex digits.
std::string fingerprint(std::string_view bytes);
std::string to_hex(std::uint64_t value);
std::string file_fingerprint(const std::filesystem::path& file);

/// Little-endian append-only byte sink.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u32(bits);
  }
  void bytes(std::string_view b) { buf_.append(b); }

  const std::string& data() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

/// Little-endian reader over a byte buffer; throws FormatError on truncation.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string_view bytes(std::size_t n);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::uint64_t get(int n);
  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace hicl
