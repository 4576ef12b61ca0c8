#include "canopy/crypto/digest.hpp"

#include <openssl/evp.h>

#include "canopy/error.hpp"

namespace canopy::crypto {

DigestKind digest_kind_from_name(std::string_view name) {
  if (name == "sha256") return DigestKind::sha256;
  if (name == "fnv64") return DigestKind::fnv64;
  raise(Errc::config_error, "unknown digest '" + std::string(name) + "'");
}

std::string_view digest_name(DigestKind kind) {
  switch (kind) {
    case DigestKind::sha256: return "sha256";
    case DigestKind::fnv64: return "fnv64";
  }
  return "?";
}

std::size_t digest_size(DigestKind kind) {
  switch (kind) {
    case DigestKind::sha256: return 32;
    case DigestKind::fnv64: return 8;
  }
  return 0;
}

namespace {

Bytes sha256(ByteSpan data) {
  Bytes out(32);
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != 32) {
    raise(Errc::invalid_argument, "sha256 failed");
  }
  return out;
}

Bytes fnv64(ByteSpan data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return u64_be(h);
}

}  // namespace

Bytes digest(DigestKind kind, ByteSpan data) {
  switch (kind) {
    case DigestKind::sha256: return sha256(data);
    case DigestKind::fnv64: return fnv64(data);
  }
  raise(Errc::invalid_argument, "bad digest kind");
}

Bytes digest(DigestKind kind, std::string_view data) {
  return digest(kind, ByteSpan(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

Bytes digest_cat(DigestKind kind, std::initializer_list<ByteSpan> parts) {
  Bytes all;
  std::size_t total = 0;
  for (const ByteSpan& p : parts) total += p.size();
  all.reserve(total);
  for (const ByteSpan& p : parts) all.insert(all.end(), p.begin(), p.end());
  return digest(kind, all);
}

}  // namespace canopy::crypto
