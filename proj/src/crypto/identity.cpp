#include "canopy/crypto/identity.hpp"

#include "canopy/error.hpp"

namespace canopy::crypto {

std::uint64_t NodeIdentity::public_value() const { return read_u64_be(public_key); }

std::uint64_t NodeIdentity::secret_value() const { return read_u64_be(private_key); }

std::string derive_node_id(DigestKind kind, ByteSpan public_key) {
  if (public_key.empty()) raise(Errc::invalid_argument, "empty public key");
  return to_hex(digest(kind, public_key));
}

std::string derive_sensor_id(const std::string& node_id, const std::string& pin) {
  if (pin.empty()) raise(Errc::invalid_argument, "empty pin label");
  if (node_id.size() % 2 != 0 || !is_lower_hex(node_id)) {
    raise(Errc::invalid_argument, "malformed node id '" + node_id + "'");
  }
  return node_id + pin;
}

NodeIdentity make_identity(DigestKind kind, const DhParams& params, std::uint64_t secret) {
  if (!valid_group_element(params, secret % params.prime)) {
    raise(Errc::invalid_argument, "identity secret outside group range");
  }
  Bytes pub = u64_be(dh_public(params, secret));
  std::string id = derive_node_id(kind, pub);
  return NodeIdentity{std::move(pub), u64_be(secret), std::move(id)};
}

}  // namespace canopy::crypto
