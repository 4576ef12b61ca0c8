#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canopy/bytes.hpp"
#include "canopy/crypto/digest.hpp"

namespace canopy::ledger {

enum class TxKind : std::uint8_t { genesis_add = 0, remove = 1, write = 2, read = 3 };

const char* tx_kind_name(TxKind kind);

struct Transaction {
  TxKind kind = TxKind::write;
  std::uint64_t block_no = 0;  // height of the enclosing block, set at seal
  Bytes payload_hash;
  Bytes public_key;  // subject key for genesis_add/remove, signing key otherwise
  std::uint64_t timestamp_ms = 0;
  std::string output_ref;  // sensor/output id this transaction touches, if any
  Bytes policy_rules;      // canonical ACH snapshot
  Bytes signature;         // public tier only; empty on the private tier

  bool operator==(const Transaction&) const = default;
};

Bytes encode_tx(const Transaction& tx);
Transaction decode_tx(ByteReader& reader);

// Canonical bytes covered by signatures: everything except block_no (unknown
// at submission) and the signature itself.
Bytes tx_signing_bytes(const Transaction& tx);

struct BlockHeader {
  Bytes prev_policy_pointer;  // digest of the previous block's policy header
  Bytes prev_block_hash;
  Bytes ach_digest;  // digest of the ACH version in force at seal time

  bool operator==(const BlockHeader&) const = default;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> transactions;
  std::uint64_t height = 0;
  Bytes block_hash;

  bool operator==(const Block&) const = default;
};

Bytes encode_block(const Block& block);
Block decode_block(ByteReader& reader);

Bytes compute_block_hash(crypto::DigestKind kind, const Block& block);

}  // namespace canopy::ledger
