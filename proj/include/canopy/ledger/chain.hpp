#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <vector>

#include "canopy/crypto/dh.hpp"
#include "canopy/ledger/block.hpp"
#include "canopy/ledger/keylist.hpp"

namespace canopy::ledger {

// Append-only block sequence. Linkage rules:
//   block.height starts at 1;
//   prev_block_hash(h)      = block_hash(h-1), all zeros for the genesis block;
//   prev_policy_pointer(h)  = digest(ach_digest(h-1)), all zeros for genesis;
//   block_hash              = digest of the serialized block body.
class ChainStore {
 public:
  explicit ChainStore(crypto::DigestKind kind) : kind_(kind) {}

  crypto::DigestKind digest_kind() const { return kind_; }
  std::uint64_t height() const { return blocks_.size(); }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block* tip() const { return blocks_.empty() ? nullptr : &blocks_.back(); }

  // Seals `transactions` (already carrying block_no = height()+1) into the
  // next block with correct linkage.
  const Block& seal(std::vector<Transaction> transactions, const Bytes& ach_digest);

  // Test hook: direct mutable access so corruption can be injected.
  std::vector<Block>& mutable_blocks() { return blocks_; }

  Bytes serialize() const;
  static ChainStore deserialize(crypto::DigestKind kind, ByteSpan data);

  void save(const std::filesystem::path& path) const;
  static ChainStore load(const std::filesystem::path& path);

 private:
  crypto::DigestKind kind_;
  std::vector<Block> blocks_;
};

struct VerifyResult {
  bool valid = true;
  std::optional<std::uint64_t> first_bad_height;
};

// Recomputes every block hash and both linkage pointers. Corruption is a
// result, not an error.
VerifyResult verify_chain(const ChainStore& chain);

enum class AppendStatus {
  accepted,
  rejected_unauthorized,
  rejected_quorum,
  rejected_appending,
};

const char* append_status_name(AppendStatus status);

struct AppendResult {
  AppendStatus status = AppendStatus::accepted;
  std::uint64_t staged_height = 0;  // height the transaction will seal into
};

// Block-admin private ledger: no proof of work, no per-packet signatures
// (possession of the channel KHash already authenticated the sender).
// Transactions stage into an open batch; flush() seals one block per batch.
class PrivateLedger {
 public:
  PrivateLedger(crypto::DigestKind kind, std::int64_t flush_interval_ms = 1000);

  KeyList& keylist() { return keylist_; }
  const KeyList& keylist() const { return keylist_; }
  const ChainStore& chain() const { return chain_; }
  ChainStore& chain() { return chain_; }

  void set_ach_digest(Bytes digest) { ach_digest_ = std::move(digest); }
  const Bytes& ach_digest() const { return ach_digest_; }

  // Access-control gating is the caller's job for write/read transactions;
  // key-list membership is enforced here.
  AppendResult append(const Transaction& tx);

  // Seals the open batch into one block; no-op when nothing is staged.
  std::optional<Block> flush();
  std::size_t pending() const { return batch_.size(); }

 private:
  crypto::DigestKind kind_;
  std::int64_t flush_interval_ms_;
  ChainStore chain_;
  KeyList keylist_;
  Bytes ach_digest_;
  std::vector<Transaction> batch_;
  std::uint64_t batch_open_ms_ = 0;
};

struct MemberSignature {
  std::string member_id;
  Bytes signature;
};

struct PublicAppendResult {
  AppendStatus status = AppendStatus::accepted;
  int valid_signatures = 0;
  int forged_signatures = 0;
  std::uint64_t staged_height = 0;
};

// Group-head public ledger: quorum-validated appends. A transaction is
// accepted when its signatures check out and at least ceil(n/2) of the n
// group members co-signed it.
class PublicLedger {
 public:
  PublicLedger(crypto::DigestKind kind, crypto::DhParams dh,
               std::int64_t flush_interval_ms = 1000);

  KeyList& keylist() { return keylist_; }
  const KeyList& keylist() const { return keylist_; }
  const ChainStore& chain() const { return chain_; }
  ChainStore& chain() { return chain_; }

  void set_ach_digest(Bytes digest) { ach_digest_ = std::move(digest); }

  // Test-only defence switches; both default on.
  void set_enforce_signatures(bool on) { enforce_signatures_ = on; }
  void set_enforce_quorum(bool on) { enforce_quorum_ = on; }

  // `submitter_id` names the group member responsible for the transaction.
  // For write/read transactions `key_cert` is the submitter's root-key
  // certificate over tx.public_key; genesis_add/remove are signed by the
  // submitter's root key directly.
  PublicAppendResult append(const Transaction& tx, const std::vector<MemberSignature>& signatures,
                            const std::string& submitter_id, ByteSpan key_cert);

  std::optional<Block> flush();
  std::size_t pending() const { return batch_.size(); }

  std::uint64_t quorum_threshold() const;

  bool already_synced(const Bytes& private_block_hash) const;
  void mark_synced(Bytes private_block_hash);

 private:
  crypto::DigestKind kind_;
  crypto::DhParams dh_;
  std::int64_t flush_interval_ms_;
  ChainStore chain_;
  KeyList keylist_;
  Bytes ach_digest_;
  std::vector<Transaction> batch_;
  std::uint64_t batch_open_ms_ = 0;
  bool enforce_signatures_ = true;
  bool enforce_quorum_ = true;
  std::set<Bytes> synced_;
};

// Signing context for summarizing private blocks onto the public tier.
struct SyncContext {
  crypto::DigestKind kind;
  crypto::DhParams dh;
  std::string admin_id;       // submitting member
  Bytes admin_root_private;   // certifies per-transaction keys
  std::uint64_t* tx_counter;  // per-transaction key derivation counter
  bool per_tx_keys = true;    // test-only: off reuses the root key (linkable)
  // Honest co-signers: (member id, root secret) pairs used to gather quorum.
  std::vector<std::pair<std::string, std::uint64_t>> cosigners;
};

struct SyncOutcome {
  int appended = 0;
  int skipped = 0;
  int rejected = 0;
};

// Each verified private block becomes one public write transaction carrying
// the block digest. Re-syncing the same blocks adds nothing. Throws
// sync_refused when the private segment fails verification.
SyncOutcome sync_private_to_public(const ChainStore& private_chain, PublicLedger& target,
                                   const SyncContext& context);

// Builds a fully signed public submission for `tx` (per-transaction key,
// certificate, signature). Returns the certificate through `cert_out`.
Transaction sign_public_tx(Transaction tx, const SyncContext& context, Bytes& cert_out);

}  // namespace canopy::ledger
