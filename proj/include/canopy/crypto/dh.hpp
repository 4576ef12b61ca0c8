#pragma once

#include <cstdint>
#include <string>

#include "canopy/crypto/digest.hpp"

namespace canopy::crypto {

// Diffie-Hellman over a small safe-prime group. The group is scenario
// configuration; the default below is a 61-bit safe prime, plenty for a
// deterministic desk-scale deployment and cheap enough to exchange keys for
// every channel in a simulation.
struct DhParams {
  std::uint64_t prime = 0;
  std::uint64_t generator = 0;
};

// p = 2305843009213691579 is a safe prime ((p-1)/2 prime); g = 4 generates
// the prime-order quadratic-residue subgroup.
DhParams default_dh_params();

std::uint64_t mod_mul(std::uint64_t a, std::uint64_t b, std::uint64_t mod);
std::uint64_t mod_pow(std::uint64_t base, std::uint64_t exp, std::uint64_t mod);

// Group element sanity: rejects 0, the identity, p-1 (order two) and
// anything outside the field.
bool valid_group_element(const DhParams& params, std::uint64_t x);

std::uint64_t dh_public(const DhParams& params, std::uint64_t secret);

// remote_public^local_secret mod p; throws key_exchange_failure on a
// degenerate remote element.
std::uint64_t dh_shared_secret(const DhParams& params, std::uint64_t local_secret,
                               std::uint64_t remote_public);

struct SharedKey {
  Bytes key_bytes;
  std::string established_with;
  std::uint64_t epoch = 0;

  bool operator==(const SharedKey&) const = default;
};

// Full exchange: shared secret run through the key-derivation digest.
SharedKey dh_establish(DigestKind kind, const DhParams& params, std::uint64_t local_secret,
                       std::uint64_t remote_public, std::string remote_node_id,
                       std::uint64_t epoch);

}  // namespace canopy::crypto
