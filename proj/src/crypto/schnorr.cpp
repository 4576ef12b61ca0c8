#include "canopy/crypto/schnorr.hpp"

#include "canopy/error.hpp"

namespace canopy::crypto {

namespace {

constexpr std::string_view kNonceTag = "schnorr-nonce";
constexpr std::string_view kCertTag = "txkey-cert";

std::uint64_t to_exponent(DigestKind kind, ByteSpan data, std::uint64_t order) {
  Bytes d = digest(kind, data);
  // fnv64 yields 8 bytes, sha256 more; the leading 8 are enough either way.
  return read_u64_be(d) % order;
}

}  // namespace

Bytes schnorr_sign(DigestKind kind, const DhParams& params, std::uint64_t secret,
                   ByteSpan message) {
  const std::uint64_t order = params.prime - 1;
  Bytes nonce_input = u64_be(secret);
  nonce_input.insert(nonce_input.end(), message.begin(), message.end());
  nonce_input.insert(nonce_input.end(), kNonceTag.begin(), kNonceTag.end());
  std::uint64_t k = to_exponent(kind, nonce_input, order);
  if (k == 0) k = 1;

  std::uint64_t commitment = mod_pow(params.generator, k, params.prime);
  Bytes challenge_input = u64_be(commitment);
  challenge_input.insert(challenge_input.end(), message.begin(), message.end());
  std::uint64_t e = to_exponent(kind, challenge_input, order);
  std::uint64_t s = (k + mod_mul(e, secret % order, order)) % order;

  Bytes sig = u64_be(e);
  put_u64_be(sig, s);
  return sig;
}

bool schnorr_verify(DigestKind kind, const DhParams& params, std::uint64_t public_value,
                    ByteSpan message, ByteSpan signature) {
  if (signature.size() != 16) return false;
  if (!valid_group_element(params, public_value)) return false;
  const std::uint64_t order = params.prime - 1;
  std::uint64_t e = read_u64_be(signature);
  std::uint64_t s = read_u64_be(signature.subspan(8));
  if (e >= order || s >= order) return false;

  // r' = g^s * y^(order - e); y^order = 1, so r' equals the signer's commitment.
  std::uint64_t r = mod_mul(mod_pow(params.generator, s, params.prime),
                            mod_pow(public_value, order - e, params.prime), params.prime);
  Bytes challenge_input = u64_be(r);
  challenge_input.insert(challenge_input.end(), message.begin(), message.end());
  return to_exponent(kind, challenge_input, order) == e;
}

std::uint64_t derive_tx_secret(DigestKind kind, const DhParams& params, ByteSpan root_private,
                               std::uint64_t counter) {
  Bytes input(root_private.begin(), root_private.end());
  put_u64_be(input, counter);
  static constexpr std::string_view tag = "txkey";
  input.insert(input.end(), tag.begin(), tag.end());
  Bytes d = digest(kind, input);
  return 2 + read_u64_be(d) % (params.prime - 3);
}

Bytes make_key_cert(DigestKind kind, const DhParams& params, std::uint64_t root_secret,
                    ByteSpan tx_public_key) {
  Bytes msg(tx_public_key.begin(), tx_public_key.end());
  msg.insert(msg.end(), kCertTag.begin(), kCertTag.end());
  return schnorr_sign(kind, params, root_secret, msg);
}

bool verify_key_cert(DigestKind kind, const DhParams& params, std::uint64_t root_public,
                     ByteSpan tx_public_key, ByteSpan cert) {
  Bytes msg(tx_public_key.begin(), tx_public_key.end());
  msg.insert(msg.end(), kCertTag.begin(), kCertTag.end());
  return schnorr_verify(kind, params, root_public, msg, cert);
}

}  // namespace canopy::crypto
