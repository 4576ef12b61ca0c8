#include "canopy/crypto/hash_chain.hpp"

#include "canopy/error.hpp"

namespace canopy::crypto {

Bytes generate_otk(DigestKind kind, ByteSpan private_key, ByteSpan nonce) {
  if (private_key.empty()) raise(Errc::invalid_argument, "empty private key");
  if (nonce.empty()) raise(Errc::invalid_argument, "empty nonce");
  Bytes left = digest(kind, private_key);
  Bytes right = digest(kind, nonce);
  return digest_cat(kind, {left, right});
}

HashChainState initial_chain_state(DigestKind kind, Bytes otk) {
  return HashChainState{std::move(otk), Bytes(digest_size(kind), 0), 0};
}

HashChainState advance_chain(DigestKind kind, const HashChainState& state,
                             std::uint64_t timestamp_ms, ByteSpan data, ByteSpan error_message) {
  Bytes next = digest_cat(kind, {state.prehash, u64_be(timestamp_ms), data, error_message});
  return HashChainState{state.otk, std::move(next), state.sequence + 1};
}

Bytes compute_khash(DigestKind kind, const HashChainState& state) {
  return digest_cat(kind, {state.otk, state.prehash});
}

Bytes compute_fhash(DigestKind kind, ByteSpan khash, ByteSpan dhash) {
  return digest_cat(kind, {khash, dhash});
}

Bytes stream_crypt(DigestKind kind, const SharedKey& key, std::string_view node_id,
                   std::uint64_t sequence, ByteSpan data) {
  Bytes out;
  out.reserve(data.size());
  Bytes seed = key.key_bytes;
  seed.insert(seed.end(), node_id.begin(), node_id.end());
  put_u64_be(seed, sequence);
  std::uint32_t counter = 0;
  std::size_t produced = 0;
  Bytes block;
  while (produced < data.size()) {
    Bytes block_input = seed;
    put_u32_be(block_input, counter++);
    block = digest(kind, block_input);
    for (std::size_t i = 0; i < block.size() && produced < data.size(); ++i, ++produced) {
      out.push_back(data[produced] ^ block[i]);
    }
  }
  return out;
}

SealResult seal_packet(DigestKind kind, const HashChainState& state, const SharedKey& key,
                       std::uint64_t channel_epoch, ByteSpan sensor_data, const PacketMeta& meta,
                       std::uint64_t timestamp_ms, ByteSpan error_message) {
  if (key.epoch != channel_epoch) {
    raise(Errc::key_epoch_mismatch, "key epoch " + std::to_string(key.epoch) +
                                        " vs channel epoch " + std::to_string(channel_epoch));
  }
  SensorPacket packet;
  packet.encrypted_data = stream_crypt(kind, key, meta.node_id, state.sequence, sensor_data);
  Bytes dhash = digest(kind, sensor_data);
  packet.fhash = compute_fhash(kind, compute_khash(kind, state), dhash);
  packet.lp_ip = meta.lp_ip;
  packet.node_id = meta.node_id;
  packet.sequence = state.sequence;
  packet.ach_ref = meta.ach_ref;
  return SealResult{std::move(packet),
                    advance_chain(kind, state, timestamp_ms, sensor_data, error_message)};
}

OpenResult open_packet(DigestKind kind, const SensorPacket& packet, const SharedKey& key,
                       const HashChainState& expected, std::uint64_t timestamp_ms,
                       ByteSpan error_message) {
  Bytes data = stream_crypt(kind, key, packet.node_id, packet.sequence, packet.encrypted_data);
  Bytes dhash = digest(kind, data);
  Bytes fhash = compute_fhash(kind, compute_khash(kind, expected), dhash);
  OpenResult result;
  if (fhash == packet.fhash) {
    result.verified = true;
    result.next = advance_chain(kind, expected, timestamp_ms, data, error_message);
    result.data = std::move(data);
  } else {
    result.verified = false;
    result.next = expected;
  }
  return result;
}

}  // namespace canopy::crypto
