#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "kwslab/errors.hpp"
#include "kwslab/random.hpp"

namespace kws::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  template <typename T>
  void put_array(const T* data, std::size_t n) {
    const auto* p = reinterpret_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n * sizeof(T));
  }
  std::uint64_t checksum() const { return fnv1a(std::string_view(bytes_.data(), bytes_.size())); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

/// Bounds-checked little-endian reader; errors carry the byte offset.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  void get_array(T* out, std::size_t n) {
    need(n * sizeof(T));
    std::memcpy(out, bytes_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(origin_ + ": " + what + " at byte offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) fail("unexpected end of data");
  }
  std::string_view bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace kws::detail
