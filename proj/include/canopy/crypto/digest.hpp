#pragma once

#include <initializer_list>
#include <string_view>

#include "canopy/bytes.hpp"

namespace canopy::crypto {

// Every digest in the system goes through this switch so scenarios can swap
// the hash family. sha256 is the default; fnv64 is a cheap non-cryptographic
// stand-in for tests.
enum class DigestKind { sha256, fnv64 };

DigestKind digest_kind_from_name(std::string_view name);  // throws config_error
std::string_view digest_name(DigestKind kind);
std::size_t digest_size(DigestKind kind);

Bytes digest(DigestKind kind, ByteSpan data);
Bytes digest(DigestKind kind, std::string_view data);

// H(a || b || ...) without building the concatenation by hand at call sites.
Bytes digest_cat(DigestKind kind, std::initializer_list<ByteSpan> parts);

}  // namespace canopy::crypto
