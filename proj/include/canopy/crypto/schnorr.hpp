#pragma once

#include "canopy/crypto/dh.hpp"

namespace canopy::crypto {

// Schnorr signatures over the configured group, exponents mod p-1, with
// deterministic nonces so simulation runs replay exactly. Signature is
// u64be(challenge) || u64be(response), 16 bytes.
Bytes schnorr_sign(DigestKind kind, const DhParams& params, std::uint64_t secret,
                   ByteSpan message);
bool schnorr_verify(DigestKind kind, const DhParams& params, std::uint64_t public_value,
                    ByteSpan message, ByteSpan signature);

// Per-transaction key derivation from a root identity secret; result is a
// valid group secret in [2, p-2].
std::uint64_t derive_tx_secret(DigestKind kind, const DhParams& params, ByteSpan root_private,
                               std::uint64_t counter);

// Root-signed certificate over a per-transaction public key. The certificate
// is transport metadata: it is checked on submission and never persisted, so
// ledger entries stay unlinkable to the root identity.
Bytes make_key_cert(DigestKind kind, const DhParams& params, std::uint64_t root_secret,
                    ByteSpan tx_public_key);
bool verify_key_cert(DigestKind kind, const DhParams& params, std::uint64_t root_public,
                     ByteSpan tx_public_key, ByteSpan cert);

}  // namespace canopy::crypto
