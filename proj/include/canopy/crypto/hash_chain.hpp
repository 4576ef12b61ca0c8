#pragma once

#include <cstdint>
#include <string>

#include "canopy/crypto/dh.hpp"
#include "canopy/crypto/packet.hpp"

namespace canopy::crypto {

// One-time key: root of a two-leaf hash tree over H(private_key) and
// H(nonce).
Bytes generate_otk(DigestKind kind, ByteSpan private_key, ByteSpan nonce);

struct HashChainState {
  Bytes otk;
  Bytes prehash;  // all zeros for sequence 0
  std::uint64_t sequence = 0;

  bool operator==(const HashChainState&) const = default;
};

HashChainState initial_chain_state(DigestKind kind, Bytes otk);

// prehash' = H(prehash || u64be(timestamp_ms) || data || error_message).
// Both ends advance with the packet's canonical timestamp (the admin's
// receipt time, fed back to the LP with the acknowledgement).
HashChainState advance_chain(DigestKind kind, const HashChainState& state,
                             std::uint64_t timestamp_ms, ByteSpan data, ByteSpan error_message);

Bytes compute_khash(DigestKind kind, const HashChainState& state);  // H(otk || prehash)
Bytes compute_fhash(DigestKind kind, ByteSpan khash, ByteSpan dhash);

// Keystream cipher keyed by (channel key, sender node id, sequence).
// Confidentiality only: integrity comes from the FHash chain, and binding the
// node id and sequence into the keystream makes their mutation detectable
// through it.
Bytes stream_crypt(DigestKind kind, const SharedKey& key, std::string_view node_id,
                   std::uint64_t sequence, ByteSpan data);

struct PacketMeta {
  std::string lp_ip;
  std::string node_id;
  Bytes ach_ref;
};

struct SealResult {
  SensorPacket packet;
  HashChainState next;
};

// Throws key_epoch_mismatch if the supplied key is stale for the channel.
SealResult seal_packet(DigestKind kind, const HashChainState& state, const SharedKey& key,
                       std::uint64_t channel_epoch, ByteSpan sensor_data, const PacketMeta& meta,
                       std::uint64_t timestamp_ms, ByteSpan error_message = {});

struct OpenResult {
  bool verified = false;
  Bytes data;            // decrypted payload (meaningful when verified)
  HashChainState next;   // advanced iff verified, otherwise the input state
};

OpenResult open_packet(DigestKind kind, const SensorPacket& packet, const SharedKey& key,
                       const HashChainState& expected, std::uint64_t timestamp_ms,
                       ByteSpan error_message = {});

}  // namespace canopy::crypto
