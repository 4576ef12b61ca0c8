#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace canopy {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

Bytes to_bytes(std::string_view s);
std::string to_string(ByteSpan b);

std::string to_hex(ByteSpan b);
Bytes from_hex(std::string_view hex);  // throws Error{decode_failure} on bad input
bool is_lower_hex(std::string_view s);

void put_u32_be(Bytes& out, std::uint32_t v);
void put_u64_be(Bytes& out, std::uint64_t v);
Bytes u64_be(std::uint64_t v);
std::uint64_t read_u64_be(ByteSpan b);  // b.size() must be >= 8

// Length-prefixed field helpers for the wire formats: u32 big-endian length
// followed by the raw bytes.
void put_field(Bytes& out, ByteSpan field);
void put_field(Bytes& out, std::string_view field);

// Sequential reader over a byte buffer. All methods throw
// Error{decode_failure} when the buffer is too short.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32_be();
  std::uint64_t u64_be();
  Bytes take(std::size_t n);
  Bytes field();                 // u32 length prefix + bytes
  std::string string_field();    // field() as utf-8 string
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;
  ByteSpan data_;
  std::size_t pos_ = 0;
};

}  // namespace canopy
