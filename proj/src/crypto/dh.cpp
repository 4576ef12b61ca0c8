#include "canopy/crypto/dh.hpp"

#include "canopy/error.hpp"

namespace canopy::crypto {

DhParams default_dh_params() { return DhParams{2305843009213691579ull, 4}; }

std::uint64_t mod_mul(std::uint64_t a, std::uint64_t b, std::uint64_t mod) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % mod);
}

std::uint64_t mod_pow(std::uint64_t base, std::uint64_t exp, std::uint64_t mod) {
  std::uint64_t result = 1 % mod;
  base %= mod;
  while (exp > 0) {
    if (exp & 1) result = mod_mul(result, base, mod);
    base = mod_mul(base, base, mod);
    exp >>= 1;
  }
  return result;
}

bool valid_group_element(const DhParams& params, std::uint64_t x) {
  return x >= 2 && x <= params.prime - 2;
}

std::uint64_t dh_public(const DhParams& params, std::uint64_t secret) {
  return mod_pow(params.generator, secret, params.prime);
}

std::uint64_t dh_shared_secret(const DhParams& params, std::uint64_t local_secret,
                               std::uint64_t remote_public) {
  if (!valid_group_element(params, remote_public)) {
    raise(Errc::key_exchange_failure, "degenerate remote public value");
  }
  return mod_pow(remote_public, local_secret, params.prime);
}

SharedKey dh_establish(DigestKind kind, const DhParams& params, std::uint64_t local_secret,
                       std::uint64_t remote_public, std::string remote_node_id,
                       std::uint64_t epoch) {
  std::uint64_t secret = dh_shared_secret(params, local_secret, remote_public);
  // Epoch-salted KDF so rotations yield fresh key material from static pairs.
  Bytes input = u64_be(secret);
  put_u64_be(input, epoch);
  return SharedKey{digest(kind, input), std::move(remote_node_id), epoch};
}

}  // namespace canopy::crypto
