#include "canopy/ledger/chain.hpp"

#include <fstream>

#include "canopy/crypto/identity.hpp"
#include "canopy/crypto/schnorr.hpp"
#include "canopy/error.hpp"

namespace canopy::ledger {

const char* append_status_name(AppendStatus status) {
  switch (status) {
    case AppendStatus::accepted: return "accepted";
    case AppendStatus::rejected_unauthorized: return "rejected-unauthorized";
    case AppendStatus::rejected_quorum: return "rejected-quorum";
    case AppendStatus::rejected_appending: return "rejected-appending";
  }
  return "?";
}

const Block& ChainStore::seal(std::vector<Transaction> transactions, const Bytes& ach_digest) {
  Block block;
  block.height = height() + 1;
  const std::size_t hash_len = crypto::digest_size(kind_);
  if (const Block* prev = tip()) {
    block.header.prev_block_hash = prev->block_hash;
    block.header.prev_policy_pointer = crypto::digest(kind_, prev->header.ach_digest);
  } else {
    block.header.prev_block_hash = Bytes(hash_len, 0);
    block.header.prev_policy_pointer = Bytes(hash_len, 0);
  }
  block.header.ach_digest = ach_digest;
  block.transactions = std::move(transactions);
  block.block_hash = compute_block_hash(kind_, block);
  blocks_.push_back(std::move(block));
  return blocks_.back();
}

Bytes ChainStore::serialize() const {
  Bytes out;
  for (const Block& block : blocks_) {
    put_field(out, encode_block(block));
  }
  return out;
}

ChainStore ChainStore::deserialize(crypto::DigestKind kind, ByteSpan data) {
  ChainStore chain(kind);
  ByteReader reader(data);
  while (!reader.done()) {
    Bytes block_bytes = reader.field();
    ByteReader block_reader(block_bytes);
    chain.blocks_.push_back(decode_block(block_reader));
    if (!block_reader.done()) raise(Errc::decode_failure, "trailing bytes inside block record");
  }
  return chain;
}

namespace {

constexpr char kChainMagic[] = "CNPYCHN1";

}  // namespace

void ChainStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  out.write(kChainMagic, 8);
  char kind_byte = static_cast<char>(kind_);
  out.write(&kind_byte, 1);
  Bytes body = serialize();
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) raise(Errc::io_error, "short write to " + path.string());
}

ChainStore ChainStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.size() < 9 || content.compare(0, 8, kChainMagic) != 0) {
    raise(Errc::decode_failure, "not a chain file: " + path.string());
  }
  auto kind_byte = static_cast<std::uint8_t>(content[8]);
  if (kind_byte > static_cast<std::uint8_t>(crypto::DigestKind::fnv64)) {
    raise(Errc::decode_failure, "bad digest kind in chain file");
  }
  ByteSpan body(reinterpret_cast<const std::uint8_t*>(content.data()) + 9, content.size() - 9);
  return deserialize(static_cast<crypto::DigestKind>(kind_byte), body);
}

VerifyResult verify_chain(const ChainStore& chain) {
  const auto kind = chain.digest_kind();
  const Bytes zeros(crypto::digest_size(kind), 0);
  const std::vector<Block>& blocks = chain.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& block = blocks[i];
    const std::uint64_t at = i + 1;
    if (block.height != at) return {false, at};
    if (compute_block_hash(kind, block) != block.block_hash) return {false, at};
    const Bytes& want_prev = i == 0 ? zeros : blocks[i - 1].block_hash;
    if (block.header.prev_block_hash != want_prev) return {false, at};
    const Bytes want_policy = i == 0 ? zeros : crypto::digest(kind, blocks[i - 1].header.ach_digest);
    if (block.header.prev_policy_pointer != want_policy) return {false, at};
  }
  return {true, std::nullopt};
}

PrivateLedger::PrivateLedger(crypto::DigestKind kind, std::int64_t flush_interval_ms)
    : kind_(kind), flush_interval_ms_(flush_interval_ms), chain_(kind) {}

AppendResult PrivateLedger::append(const Transaction& tx) {
  if (!batch_.empty() &&
      tx.timestamp_ms >= batch_open_ms_ + static_cast<std::uint64_t>(flush_interval_ms_)) {
    flush();
  }
  const std::uint64_t staged_height = chain_.height() + 1;
  const std::string subject = crypto::derive_node_id(kind_, tx.public_key);
  switch (tx.kind) {
    case TxKind::genesis_add:
      if (keylist_.contains(subject)) return {AppendStatus::rejected_unauthorized, 0};
      keylist_.add(subject, tx.public_key, staged_height);
      break;
    case TxKind::remove:
      if (!keylist_.contains(subject)) return {AppendStatus::rejected_unauthorized, 0};
      keylist_.remove(subject, staged_height);
      break;
    case TxKind::write:
    case TxKind::read:
      if (!keylist_.contains(subject)) return {AppendStatus::rejected_unauthorized, 0};
      break;
  }
  Transaction staged = tx;
  staged.block_no = staged_height;
  if (batch_.empty()) batch_open_ms_ = tx.timestamp_ms;
  batch_.push_back(std::move(staged));
  return {AppendStatus::accepted, staged_height};
}

std::optional<Block> PrivateLedger::flush() {
  if (batch_.empty()) return std::nullopt;
  Block sealed = chain_.seal(std::move(batch_), ach_digest_);
  batch_.clear();
  return sealed;
}

PublicLedger::PublicLedger(crypto::DigestKind kind, crypto::DhParams dh,
                           std::int64_t flush_interval_ms)
    : kind_(kind), dh_(dh), flush_interval_ms_(flush_interval_ms), chain_(kind) {}

std::uint64_t PublicLedger::quorum_threshold() const { return (keylist_.size() + 1) / 2; }

PublicAppendResult PublicLedger::append(const Transaction& tx,
                                        const std::vector<MemberSignature>& signatures,
                                        const std::string& submitter_id, ByteSpan key_cert) {
  if (!batch_.empty() &&
      tx.timestamp_ms >= batch_open_ms_ + static_cast<std::uint64_t>(flush_interval_ms_)) {
    flush();
  }
  PublicAppendResult result;
  const Bytes signing = tx_signing_bytes(tx);

  if (enforce_signatures_) {
    bool ok = false;
    if (tx.kind == TxKind::genesis_add || tx.kind == TxKind::remove) {
      const Bytes* root = keylist_.find(submitter_id);
      if (root == nullptr && tx.kind == TxKind::genesis_add && keylist_.size() == 0) {
        // Bootstrap: the very first member self-signs its own admission.
        root = &tx.public_key;
      }
      ok = root != nullptr &&
           crypto::schnorr_verify(kind_, dh_, read_u64_be(*root), signing, tx.signature);
    } else {
      const Bytes* root = keylist_.find(submitter_id);
      ok = root != nullptr &&
           crypto::verify_key_cert(kind_, dh_, read_u64_be(*root), tx.public_key, key_cert) &&
           crypto::schnorr_verify(kind_, dh_, read_u64_be(tx.public_key), signing, tx.signature);
    }
    if (!ok) {
      result.status = AppendStatus::rejected_appending;
      return result;
    }
  }

  std::set<std::string> counted;
  for (const MemberSignature& sig : signatures) {
    const Bytes* member_key = keylist_.find(sig.member_id);
    if (member_key != nullptr && !counted.count(sig.member_id) &&
        crypto::schnorr_verify(kind_, dh_, read_u64_be(*member_key), signing, sig.signature)) {
      counted.insert(sig.member_id);
      ++result.valid_signatures;
    } else {
      ++result.forged_signatures;
    }
  }

  if (enforce_quorum_ &&
      static_cast<std::uint64_t>(result.valid_signatures) < quorum_threshold()) {
    result.status = AppendStatus::rejected_quorum;
    return result;
  }

  const std::uint64_t staged_height = chain_.height() + 1;
  const std::string subject = crypto::derive_node_id(kind_, tx.public_key);
  switch (tx.kind) {
    case TxKind::genesis_add:
      if (keylist_.contains(subject)) {
        result.status = AppendStatus::rejected_unauthorized;
        return result;
      }
      keylist_.add(subject, tx.public_key, staged_height);
      break;
    case TxKind::remove:
      if (!keylist_.contains(subject)) {
        result.status = AppendStatus::rejected_unauthorized;
        return result;
      }
      keylist_.remove(subject, staged_height);
      break;
    case TxKind::write:
    case TxKind::read:
      break;
  }

  Transaction staged = tx;
  staged.block_no = staged_height;
  if (batch_.empty()) batch_open_ms_ = tx.timestamp_ms;
  batch_.push_back(std::move(staged));
  result.status = AppendStatus::accepted;
  result.staged_height = staged_height;
  return result;
}

std::optional<Block> PublicLedger::flush() {
  if (batch_.empty()) return std::nullopt;
  Block sealed = chain_.seal(std::move(batch_), ach_digest_);
  batch_.clear();
  return sealed;
}

bool PublicLedger::already_synced(const Bytes& private_block_hash) const {
  return synced_.count(private_block_hash) > 0;
}

void PublicLedger::mark_synced(Bytes private_block_hash) {
  synced_.insert(std::move(private_block_hash));
}

Transaction sign_public_tx(Transaction tx, const SyncContext& context, Bytes& cert_out) {
  const std::uint64_t root_secret = read_u64_be(context.admin_root_private);
  std::uint64_t signing_secret = root_secret;
  if (context.per_tx_keys) {
    signing_secret =
        crypto::derive_tx_secret(context.kind, context.dh, context.admin_root_private,
                                 (*context.tx_counter)++);
  }
  tx.public_key = u64_be(crypto::dh_public(context.dh, signing_secret));
  cert_out = crypto::make_key_cert(context.kind, context.dh, root_secret, tx.public_key);
  tx.signature = crypto::schnorr_sign(context.kind, context.dh, signing_secret,
                                      tx_signing_bytes(tx));
  return tx;
}

SyncOutcome sync_private_to_public(const ChainStore& private_chain, PublicLedger& target,
                                   const SyncContext& context) {
  VerifyResult verdict = verify_chain(private_chain);
  if (!verdict.valid) {
    raise(Errc::sync_refused,
          "private segment fails verification at height " +
              std::to_string(verdict.first_bad_height.value_or(0)));
  }
  SyncOutcome outcome;
  for (const Block& block : private_chain.blocks()) {
    if (target.already_synced(block.block_hash)) {
      ++outcome.skipped;
      continue;
    }
    Transaction tx;
    tx.kind = TxKind::write;
    tx.payload_hash = block.block_hash;
    tx.timestamp_ms = block.transactions.empty() ? 0 : block.transactions.back().timestamp_ms;
    Bytes cert;
    tx = sign_public_tx(std::move(tx), context, cert);

    const Bytes signing = tx_signing_bytes(tx);
    std::vector<MemberSignature> sigs;
    sigs.reserve(context.cosigners.size());
    for (const auto& [member, secret] : context.cosigners) {
      sigs.push_back({member, crypto::schnorr_sign(context.kind, context.dh, secret, signing)});
    }

    PublicAppendResult result = target.append(tx, sigs, context.admin_id, cert);
    if (result.status == AppendStatus::accepted) {
      target.mark_synced(block.block_hash);
      ++outcome.appended;
    } else {
      ++outcome.rejected;
    }
  }
  return outcome;
}

}  // namespace canopy::ledger
