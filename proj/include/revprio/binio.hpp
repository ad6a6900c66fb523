#pragma once

// Little-endian binary writer/reader used by the parameter and index formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <iterator>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "revprio/error.hpp"

namespace revprio::binio {

class Writer {
 public:
  template <typename U>
    requires std::is_unsigned_v<U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }

  void put_bytes(std::string_view bytes) { buf_.append(bytes); }

  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }

  const std::string& bytes() const noexcept { return buf_; }

  // Written to a sibling temp file first so a failed write never leaves a
  // half-written artifact under the final name.
  void save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write " + tmp);
      out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
      if (!out) throw IoError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move " + tmp + " to " + path);
  }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes, std::string origin = "<memory>")
      : buf_(std::move(bytes)), origin_(std::move(origin)) {}

  static Reader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(bytes), path);
  }

  template <typename U>
    requires std::is_unsigned_v<U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string get_string() { return get_bytes(get<std::uint32_t>()); }

  std::size_t remaining() const noexcept { return buf_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == buf_.size(); }
  const std::string& origin() const noexcept { return origin_; }

  // Guards element counts read from headers before allocating for them.
  void need(std::size_t n) const {
    if (n > remaining()) throw FormatError(origin_ + ": truncated or corrupt file");
  }

 private:
  std::string buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace revprio::binio
