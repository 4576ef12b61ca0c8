#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

#include "canopy/crypto/identity.hpp"
#include "canopy/crypto/schnorr.hpp"
#include "canopy/error.hpp"
#include "canopy/ledger/chain.hpp"
#include "canopy/sim/rng.hpp"
#include "doctest.h"

using namespace canopy;
using namespace canopy::ledger;

namespace {

constexpr crypto::DigestKind kKind = crypto::DigestKind::sha256;
const crypto::DhParams kDh = crypto::default_dh_params();

crypto::NodeIdentity make_id(std::uint64_t seed) {
  sim::Rng rng(seed);
  return crypto::make_identity(kKind, kDh, rng.range(2, kDh.prime - 2));
}

Transaction make_tx(TxKind kind, const Bytes& public_key, std::uint64_t ts,
                    const std::string& output_ref = {}) {
  Transaction tx;
  tx.kind = kind;
  tx.public_key = public_key;
  tx.timestamp_ms = ts;
  tx.output_ref = output_ref;
  tx.payload_hash = crypto::digest(kKind, output_ref);
  return tx;
}

// Independent linkage oracle: recomputes every hash with its own composition
// of the primitive digest rather than going through verify_chain.
bool oracle_chain_valid(const ChainStore& chain) {
  Bytes prev_hash(crypto::digest_size(kKind), 0);
  Bytes prev_policy(crypto::digest_size(kKind), 0);
  std::uint64_t height = 0;
  for (const Block& block : chain.blocks()) {
    ++height;
    if (block.height != height) return false;
    if (block.header.prev_block_hash != prev_hash) return false;
    if (block.header.prev_policy_pointer != prev_policy) return false;
    Bytes body;
    put_field(body, block.header.prev_policy_pointer);
    put_field(body, block.header.prev_block_hash);
    put_field(body, block.header.ach_digest);
    put_u64_be(body, block.height);
    put_u32_be(body, static_cast<std::uint32_t>(block.transactions.size()));
    for (const Transaction& tx : block.transactions) {
      Bytes tx_bytes = encode_tx(tx);
      body.insert(body.end(), tx_bytes.begin(), tx_bytes.end());
    }
    if (crypto::digest(kKind, body) != block.block_hash) return false;
    prev_hash = block.block_hash;
    prev_policy = crypto::digest(kKind, block.header.ach_digest);
  }
  return true;
}

}  // namespace

TEST_CASE("keylist is the fold of its history") {
  KeyList list;
  list.add("a", to_bytes("ka"), 1);
  list.add("b", to_bytes("kb"), 1);
  list.remove("a", 2);
  list.add("a", to_bytes("ka2"), 3);  // fresh genesis after removal is fine
  CHECK(list.active() == KeyList::replay(list.history()));
  CHECK(list.contains("a"));
  CHECK(*list.find("a") == to_bytes("ka2"));
  CHECK_THROWS_AS(list.add("a", to_bytes("x"), 4), Error);
  CHECK_THROWS_AS(list.remove("zz", 4), Error);
}

TEST_CASE("private ledger genesis and gating") {
  auto lp = make_id(1);
  PrivateLedger ledger(kKind);
  ledger.set_ach_digest(crypto::digest(kKind, std::string_view("policy-v0")));

  SUBCASE("empty chain + genesis_add -> height 1, key active") {
    auto result = ledger.append(make_tx(TxKind::genesis_add, lp.public_key, 0));
    CHECK(result.status == AppendStatus::accepted);
    CHECK(ledger.flush().has_value());
    CHECK(ledger.chain().height() == 1);
    CHECK(ledger.keylist().contains(lp.node_id));
    CHECK(ledger.keylist().active().size() == 1);
  }

  SUBCASE("write from a removed key is rejected") {
    ledger.append(make_tx(TxKind::genesis_add, lp.public_key, 0));
    ledger.append(make_tx(TxKind::remove, lp.public_key, 10));
    auto result = ledger.append(make_tx(TxKind::write, lp.public_key, 20));
    CHECK(result.status == AppendStatus::rejected_unauthorized);
  }

  SUBCASE("write from an unknown key is rejected") {
    auto stranger = make_id(77);
    CHECK(ledger.append(make_tx(TxKind::write, stranger.public_key, 0)).status ==
          AppendStatus::rejected_unauthorized);
  }

  SUBCASE("duplicate genesis is rejected") {
    ledger.append(make_tx(TxKind::genesis_add, lp.public_key, 0));
    CHECK(ledger.append(make_tx(TxKind::genesis_add, lp.public_key, 1)).status ==
          AppendStatus::rejected_unauthorized);
  }
}

TEST_CASE("100 sequential writes verify against the linkage oracle") {
  auto lp = make_id(2);
  PrivateLedger ledger(kKind, /*flush_interval_ms=*/1000);
  ledger.set_ach_digest(crypto::digest(kKind, std::string_view("policy")));
  ledger.append(make_tx(TxKind::genesis_add, lp.public_key, 0));
  for (int i = 0; i < 100; ++i) {
    auto result =
        ledger.append(make_tx(TxKind::write, lp.public_key, 1000ull * (i + 1), "sensorA0"));
    REQUIRE(result.status == AppendStatus::accepted);
  }
  ledger.flush();
  // One block per 1s flush window.
  CHECK(ledger.chain().height() == 101);
  CHECK(verify_chain(ledger.chain()).valid);
  CHECK(oracle_chain_valid(ledger.chain()));
}

TEST_CASE("verify_chain localizes corruption") {
  auto lp = make_id(3);
  PrivateLedger ledger(kKind);
  ledger.set_ach_digest(crypto::digest(kKind, std::string_view("p")));
  ledger.append(make_tx(TxKind::genesis_add, lp.public_key, 0));
  for (int i = 1; i < 50; ++i) {
    ledger.append(make_tx(TxKind::write, lp.public_key, 1000ull * i));
  }
  ledger.flush();
  REQUIRE(ledger.chain().height() == 50);
  REQUIRE(verify_chain(ledger.chain()).valid);

  SUBCASE("mutated transaction at height 10") {
    ChainStore chain = ledger.chain();
    chain.mutable_blocks()[9].transactions[0].payload_hash[0] ^= 0x40;
    auto verdict = verify_chain(chain);
    CHECK_FALSE(verdict.valid);
    CHECK(verdict.first_bad_height == 10);
    CHECK_FALSE(oracle_chain_valid(chain));
  }

  SUBCASE("swapped blocks break at the swap point") {
    ChainStore chain = ledger.chain();
    std::swap(chain.mutable_blocks()[19], chain.mutable_blocks()[20]);
    auto verdict = verify_chain(chain);
    CHECK_FALSE(verdict.valid);
    CHECK(verdict.first_bad_height == 20);
  }
}

TEST_CASE("replay determinism: same transactions give byte-identical chains") {
  auto build = [] {
    auto lp = make_id(4);
    PrivateLedger ledger(kKind);
    ledger.set_ach_digest(crypto::digest(kKind, std::string_view("pol")));
    ledger.append(make_tx(TxKind::genesis_add, lp.public_key, 0));
    for (int i = 1; i <= 30; ++i) {
      ledger.append(make_tx(TxKind::write, lp.public_key, 500ull * i, "s" + std::to_string(i % 3)));
    }
    ledger.flush();
    return ledger.chain().serialize();
  };
  CHECK(build() == build());
}

TEST_CASE("chain file save/load round trip and truncation") {
  auto lp = make_id(5);
  PrivateLedger ledger(kKind);
  ledger.set_ach_digest(crypto::digest(kKind, std::string_view("x")));
  ledger.append(make_tx(TxKind::genesis_add, lp.public_key, 0));
  ledger.append(make_tx(TxKind::write, lp.public_key, 2000));
  ledger.flush();

  auto path = std::filesystem::temp_directory_path() / "canopy_chain_test.chain";
  ledger.chain().save(path);
  ChainStore loaded = ChainStore::load(path);
  CHECK(loaded.serialize() == ledger.chain().serialize());
  CHECK(verify_chain(loaded).valid);

  // Truncated file fails to decode.
  auto truncated = std::filesystem::temp_directory_path() / "canopy_chain_trunc.chain";
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(truncated, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  CHECK_THROWS_AS(ChainStore::load(truncated), Error);
  std::filesystem::remove(path);
  std::filesystem::remove(truncated);
}

namespace {

struct Group {
  PublicLedger ledger{kKind, kDh};
  std::vector<crypto::NodeIdentity> members;
  std::vector<std::uint64_t> secrets;

  explicit Group(int n) {
    sim::Rng rng(900);
    for (int i = 0; i < n; ++i) {
      std::uint64_t secret = rng.range(2, kDh.prime - 2);
      secrets.push_back(secret);
      members.push_back(crypto::make_identity(kKind, kDh, secret));
      ledger.keylist().add(members.back().node_id, members.back().public_key, 0);
    }
  }

  Transaction signed_write(int submitter, std::uint64_t ts, Bytes& cert_out,
                           std::uint64_t* counter) {
    SyncContext ctx{kKind, kDh, members[submitter].node_id, members[submitter].private_key,
                    counter, true, {}};
    Transaction tx;
    tx.kind = TxKind::write;
    tx.payload_hash = crypto::digest(kKind, std::string_view("payload"));
    tx.timestamp_ms = ts;
    return sign_public_tx(std::move(tx), ctx, cert_out);
  }

  std::vector<MemberSignature> cosign(const Transaction& tx, std::vector<int> indices) {
    Bytes signing = tx_signing_bytes(tx);
    std::vector<MemberSignature> sigs;
    for (int i : indices) {
      sigs.push_back({members[i].node_id,
                      crypto::schnorr_sign(kKind, kDh, secrets[i], signing)});
    }
    return sigs;
  }
};

}  // namespace

TEST_CASE("public quorum rule: at least half the group must sign") {
  std::uint64_t counter = 0;
  SUBCASE("group of 4, 2 valid signatures accepted") {
    Group group(4);
    Bytes cert;
    Transaction tx = group.signed_write(0, 100, cert, &counter);
    auto result = group.ledger.append(tx, group.cosign(tx, {1, 2}), group.members[0].node_id, cert);
    CHECK(result.status == AppendStatus::accepted);
    CHECK(result.valid_signatures == 2);
  }
  SUBCASE("group of 4, 1 valid signature rejected") {
    Group group(4);
    Bytes cert;
    Transaction tx = group.signed_write(0, 100, cert, &counter);
    CHECK(group.ledger.append(tx, group.cosign(tx, {1}), group.members[0].node_id, cert).status ==
          AppendStatus::rejected_quorum);
  }
  SUBCASE("group of 5, 3 signatures with one forged -> effective 2 < 3") {
    Group group(5);
    Bytes cert;
    Transaction tx = group.signed_write(0, 100, cert, &counter);
    auto sigs = group.cosign(tx, {1, 2, 3});
    sigs[2].signature[9] ^= 0x10;  // forge one member signature
    auto result = group.ledger.append(tx, sigs, group.members[0].node_id, cert);
    CHECK(result.status == AppendStatus::rejected_quorum);
    CHECK(result.valid_signatures == 2);
    CHECK(result.forged_signatures == 1);
  }
  SUBCASE("duplicate member signatures count once") {
    Group group(4);
    Bytes cert;
    Transaction tx = group.signed_write(0, 100, cert, &counter);
    auto sigs = group.cosign(tx, {1, 1, 1});
    CHECK(group.ledger.append(tx, sigs, group.members[0].node_id, cert).status ==
          AppendStatus::rejected_quorum);
  }
  SUBCASE("quorum monotonicity: a superset of an accepting set accepts") {
    sim::Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
      int n = 2 + static_cast<int>(rng.below(5));
      Group accept_group(n);
      std::uint64_t c1 = 0, c2 = 0;
      Bytes cert;
      Transaction tx = accept_group.signed_write(0, 100, cert, &c1);
      std::vector<int> base;
      for (int i = 0; i < n && std::cmp_less(base.size(), accept_group.ledger.quorum_threshold());
           ++i) {
        base.push_back(i);
      }
      auto r1 = accept_group.ledger.append(tx, accept_group.cosign(tx, base),
                                           accept_group.members[0].node_id, cert);
      REQUIRE(r1.status == AppendStatus::accepted);
      Group super_group(n);
      Bytes cert2;
      Transaction tx2 = super_group.signed_write(0, 100, cert2, &c2);
      std::vector<int> all;
      for (int i = 0; i < n; ++i) all.push_back(i);
      CHECK(super_group.ledger.append(tx2, super_group.cosign(tx2, all),
                                      super_group.members[0].node_id, cert2).status ==
            AppendStatus::accepted);
    }
  }
}

TEST_CASE("forged submitter identity is an appending rejection") {
  Group group(3);
  std::uint64_t counter = 0;
  Bytes cert;
  Transaction tx = group.signed_write(0, 50, cert, &counter);
  SUBCASE("unknown submitter") {
    CHECK(group.ledger.append(tx, group.cosign(tx, {1, 2}), "nobody", cert).status ==
          AppendStatus::rejected_appending);
  }
  SUBCASE("bad certificate") {
    Bytes bad = cert;
    bad[0] ^= 1;
    CHECK(group.ledger.append(tx, group.cosign(tx, {1, 2}), group.members[0].node_id, bad).status ==
          AppendStatus::rejected_appending);
  }
  SUBCASE("bad transaction signature") {
    Transaction bad = tx;
    bad.signature[2] ^= 4;
    CHECK(group.ledger.append(bad, group.cosign(bad, {1, 2}), group.members[0].node_id, cert)
              .status == AppendStatus::rejected_appending);
  }
}

TEST_CASE("sync private blocks to the public tier") {
  auto lp = make_id(6);
  PrivateLedger priv(kKind);
  priv.set_ach_digest(crypto::digest(kKind, std::string_view("ach")));
  priv.append(make_tx(TxKind::genesis_add, lp.public_key, 0));
  for (int i = 1; i <= 4; ++i) {
    priv.append(make_tx(TxKind::write, lp.public_key, 1000ull * i));
  }
  priv.flush();
  REQUIRE(priv.chain().height() == 5);

  Group group(3);
  std::uint64_t counter = 0;
  SyncContext ctx{kKind, kDh, group.members[0].node_id, group.members[0].private_key,
                  &counter, true,
                  {{group.members[1].node_id, group.secrets[1]},
                   {group.members[2].node_id, group.secrets[2]}}};

  SUBCASE("each block becomes one public transaction; re-sync is idempotent") {
    auto outcome = sync_private_to_public(priv.chain(), group.ledger, ctx);
    CHECK(outcome.appended == 5);
    group.ledger.flush();
    std::uint64_t height_after = group.ledger.chain().height();
    auto again = sync_private_to_public(priv.chain(), group.ledger, ctx);
    CHECK(again.appended == 0);
    CHECK(again.skipped == 5);
    group.ledger.flush();
    CHECK(group.ledger.chain().height() == height_after);
  }

  SUBCASE("tampered private segment refuses to sync") {
    ChainStore tampered = priv.chain();
    tampered.mutable_blocks()[2].transactions[0].timestamp_ms ^= 1;
    CHECK_THROWS_AS(sync_private_to_public(tampered, group.ledger, ctx), Error);
  }

  SUBCASE("per-transaction keys never repeat across synced transactions") {
    sync_private_to_public(priv.chain(), group.ledger, ctx);
    group.ledger.flush();
    std::set<Bytes> keys;
    for (const Block& block : group.ledger.chain().blocks()) {
      for (const Transaction& tx : block.transactions) {
        CHECK(keys.insert(tx.public_key).second);
      }
    }
  }
}
