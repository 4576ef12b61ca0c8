#pragma once

#include <string>

#include "canopy/crypto/dh.hpp"

namespace canopy::crypto {

struct NodeIdentity {
  Bytes public_key;
  Bytes private_key;  // never serialized outward
  std::string node_id;

  std::uint64_t public_value() const;
  std::uint64_t secret_value() const;
};

// node id = lowercase hex of the configured digest of the public key.
std::string derive_node_id(DigestKind kind, ByteSpan public_key);

// sensor/output id = node id immediately followed by the pin label.
std::string derive_sensor_id(const std::string& node_id, const std::string& pin);

// Identity keys live in the same group as DH: secret x, public g^x.
NodeIdentity make_identity(DigestKind kind, const DhParams& params, std::uint64_t secret);

}  // namespace canopy::crypto
