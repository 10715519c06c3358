#pragma once

// Versioned little-endian container shared by gallery and checkpoint files:
//
//   "NSSR" | 4-byte kind tag | u32 version | payload
//
// Integers are fixed-width little-endian, reals are IEEE-754 binary64.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "nssr/error.hpp"

namespace nssr::binary {

inline constexpr std::array<char, 4> kMagic{'N', 'S', 'S', 'R'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  template <typename Range>
  void f64s(const Range& r) {
    for (double v : r) f64(v);
  }

  void header(std::string_view kind, std::uint32_t version) {
    bytes(kMagic.data(), kMagic.size());
    bytes(kind.data(), 4);
    u32(version);
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write failed for " + path.string());
  }

  const std::vector<unsigned char>& buffer() const noexcept { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> data) : buf_(std::move(data)) {}

  static Reader open(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return Reader(std::move(data));
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

  std::uint8_t u8() {
    need(1, "u8");
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s(std::size_t n) {
    if (n > remaining() / 8) throw FormatError("truncated file: expected " + std::to_string(n) + " reals", pos_);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }

  // Returns the version after checking magic and kind tag.
  std::uint32_t header(std::string_view kind) {
    need(8, "header");
    if (std::memcmp(buf_.data() + pos_, kMagic.data(), 4) != 0) throw FormatError("bad magic", pos_);
    pos_ += 4;
    if (std::memcmp(buf_.data() + pos_, kind.data(), 4) != 0)
      throw FormatError("wrong file kind, expected '" + std::string(kind) + "'", pos_);
    pos_ += 4;
    return u32();
  }

  void expect_end() const {
    if (pos_ != buf_.size())
      throw FormatError(std::to_string(remaining()) + " trailing bytes after declared content", pos_);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated file while reading ") + what, pos_);
  }

  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace nssr::binary
