#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <fstream>
#include <sstream>

#include "hicl/error.hpp"
#include "hicl/io.hpp"
#include "text_util.hpp"

namespace hicl {

namespace {

void write_all(int fd, std::string_view bytes, const std::filesystem::path& file) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      ::close(fd);
      throw Error("write failed: " + file.string());
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& file, std::string_view bytes) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::filesystem::path tmp = file;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw ConfigError("cannot write file: " + tmp.string());
  write_all(fd, bytes, tmp);
  ::fsync(fd);
  ::close(fd);
  std::filesystem::rename(tmp, file);
}

void append_line_durable(const std::filesystem::path& file, std::string_view line) {
  int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw ConfigError("cannot open for append: " + file.string());
  std::string buf(line);
  buf.push_back('\n');
  write_all(fd, buf, file);
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw Error("fsync failed: " + file.string());
  }
  ::close(fd);
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = ::crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32(std::string_view bytes) {
  return crc32(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::uint64_t fingerprint64(std::string_view bytes) { return detail::fnv1a64(bytes); }

std::string fingerprint(std::string_view bytes) { return detail::hex64(detail::fnv1a64(bytes)); }

std::string to_hex(std::uint64_t value) { return detail::hex64(value); }

std::string file_fingerprint(const std::filesystem::path& file) { return fingerprint(read_text_file(file)); }

std::string_view ByteReader::bytes(std::size_t n) {
  if (remaining() < n) throw FormatError(what_ + ": truncated at offset " + std::to_string(pos_));
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint64_t ByteReader::get(int n) {
  auto b = bytes(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

}  // namespace hicl
