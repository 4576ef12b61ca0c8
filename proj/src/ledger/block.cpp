#include "canopy/ledger/block.hpp"

#include "canopy/error.hpp"

namespace canopy::ledger {

const char* tx_kind_name(TxKind kind) {
  switch (kind) {
    case TxKind::genesis_add: return "genesis_add";
    case TxKind::remove: return "remove";
    case TxKind::write: return "write";
    case TxKind::read: return "read";
  }
  return "?";
}

namespace {

void encode_tx_body(Bytes& out, const Transaction& tx, bool with_block_no, bool with_signature) {
  out.push_back(static_cast<std::uint8_t>(tx.kind));
  put_u64_be(out, with_block_no ? tx.block_no : 0);
  put_field(out, tx.payload_hash);
  put_field(out, tx.public_key);
  put_u64_be(out, tx.timestamp_ms);
  put_field(out, tx.output_ref);
  put_field(out, tx.policy_rules);
  if (with_signature) put_field(out, tx.signature);
}

}  // namespace

Bytes encode_tx(const Transaction& tx) {
  Bytes out;
  encode_tx_body(out, tx, true, true);
  return out;
}

Bytes tx_signing_bytes(const Transaction& tx) {
  Bytes out;
  encode_tx_body(out, tx, false, false);
  return out;
}

Transaction decode_tx(ByteReader& reader) {
  Transaction tx;
  std::uint8_t kind = reader.u8();
  if (kind > static_cast<std::uint8_t>(TxKind::read)) {
    raise(Errc::decode_failure, "bad transaction kind");
  }
  tx.kind = static_cast<TxKind>(kind);
  tx.block_no = reader.u64_be();
  tx.payload_hash = reader.field();
  tx.public_key = reader.field();
  tx.timestamp_ms = reader.u64_be();
  tx.output_ref = reader.string_field();
  tx.policy_rules = reader.field();
  tx.signature = reader.field();
  return tx;
}

namespace {

Bytes block_hash_input(const Block& block) {
  Bytes out;
  put_field(out, block.header.prev_policy_pointer);
  put_field(out, block.header.prev_block_hash);
  put_field(out, block.header.ach_digest);
  put_u64_be(out, block.height);
  put_u32_be(out, static_cast<std::uint32_t>(block.transactions.size()));
  for (const Transaction& tx : block.transactions) {
    Bytes tx_bytes = encode_tx(tx);
    out.insert(out.end(), tx_bytes.begin(), tx_bytes.end());
  }
  return out;
}

}  // namespace

Bytes compute_block_hash(crypto::DigestKind kind, const Block& block) {
  return crypto::digest(kind, block_hash_input(block));
}

Bytes encode_block(const Block& block) {
  Bytes out = block_hash_input(block);
  put_field(out, block.block_hash);
  return out;
}

Block decode_block(ByteReader& reader) {
  Block block;
  block.header.prev_policy_pointer = reader.field();
  block.header.prev_block_hash = reader.field();
  block.header.ach_digest = reader.field();
  block.height = reader.u64_be();
  std::uint32_t count = reader.u32_be();
  block.transactions.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    block.transactions.push_back(decode_tx(reader));
  }
  block.block_hash = reader.field();
  return block;
}

}  // namespace canopy::ledger
