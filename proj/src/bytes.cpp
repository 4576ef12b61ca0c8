#include "canopy/bytes.hpp"

#include "canopy/error.hpp"

namespace canopy {

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_string(ByteSpan b) { return std::string(b.begin(), b.end()); }

std::string to_hex(ByteSpan b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (std::uint8_t byte : b) {
    out.push_back(kDigits[byte >> 4]);
    out.push_back(kDigits[byte & 0xf]);
  }
  return out;
}

namespace {

int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) raise(Errc::decode_failure, "odd-length hex string");
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_nibble(hex[i]);
    int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) raise(Errc::decode_failure, "non-hex character");
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

bool is_lower_hex(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (hex_nibble(c) < 0) return false;
  }
  return true;
}

void put_u32_be(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u64_be(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

Bytes u64_be(std::uint64_t v) {
  Bytes out;
  out.reserve(8);
  put_u64_be(out, v);
  return out;
}

std::uint64_t read_u64_be(ByteSpan b) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = v << 8 | b[i];
  return v;
}

void put_field(Bytes& out, ByteSpan field) {
  put_u32_be(out, static_cast<std::uint32_t>(field.size()));
  out.insert(out.end(), field.begin(), field.end());
}

void put_field(Bytes& out, std::string_view field) {
  put_u32_be(out, static_cast<std::uint32_t>(field.size()));
  out.insert(out.end(), field.begin(), field.end());
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) raise(Errc::decode_failure, "truncated input");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t ByteReader::u32_be() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_++];
  return v;
}

std::uint64_t ByteReader::u64_be() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | data_[pos_++];
  return v;
}

Bytes ByteReader::take(std::size_t n) {
  need(n);
  Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
            data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

Bytes ByteReader::field() {
  std::uint32_t len = u32_be();
  return take(len);
}

std::string ByteReader::string_field() {
  Bytes b = field();
  return std::string(b.begin(), b.end());
}

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::key_exchange_failure: return "key-exchange-failure";
    case Errc::key_epoch_mismatch: return "key-epoch-mismatch";
    case Errc::decode_failure: return "decode-failure";
    case Errc::config_error: return "config-error";
    case Errc::catalog_miss: return "catalog-miss";
    case Errc::total_conflict: return "total-conflict";
    case Errc::insufficient_neighbors: return "insufficient-neighbors";
    case Errc::no_data: return "no-data";
    case Errc::no_ach_entry: return "no-ach-entry";
    case Errc::chain_corrupt: return "chain-corrupt";
    case Errc::sync_refused: return "sync-refused";
    case Errc::not_owner: return "not-owner";
    case Errc::io_error: return "io-error";
    case Errc::schema_mismatch: return "schema-mismatch";
  }
  return "unknown";
}

}  // namespace canopy
