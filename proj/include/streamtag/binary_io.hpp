#ifndef STREAMTAG_BINARY_IO_HPP_
#define STREAMTAG_BINARY_IO_HPP_

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace streamtag::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian primitive writer/reader used by every binary container.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void magic(std::string_view tag) { os_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  void put(std::uint64_t v, int bytes) {
    std::array<char, 8> buf{};
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os_.write(buf.data(), bytes);
  }
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}

  void expect_magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    is_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!is_ || got != tag) throw FormatError("bad magic, expected '" + std::string(tag) + "'");
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    is_.read(s.data(), n);
    if (!is_) throw FormatError("truncated string");
    return s;
  }
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::uint64_t get(int bytes) {
    std::array<unsigned char, 8> buf{};
    is_.read(reinterpret_cast<char*>(buf.data()), bytes);
    if (!is_) throw FormatError("unexpected end of binary stream");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& is_;
};

}  // namespace streamtag::io

#endif  // STREAMTAG_BINARY_IO_HPP_
