#include <set>
#include <string>

#include "canopy/crypto/dh.hpp"
#include "canopy/crypto/digest.hpp"
#include "canopy/crypto/hash_chain.hpp"
#include "canopy/crypto/identity.hpp"
#include "canopy/crypto/packet.hpp"
#include "canopy/crypto/schnorr.hpp"
#include "canopy/error.hpp"
#include "canopy/sim/rng.hpp"
#include "doctest.h"

using namespace canopy;
using namespace canopy::crypto;

namespace {
constexpr DigestKind kKind = DigestKind::sha256;
}

TEST_CASE("sha256 digest matches reference vectors") {
  CHECK(to_hex(digest(kKind, std::string_view(""))) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(to_hex(digest(kKind, std::string_view("abc"))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(digest_size(DigestKind::sha256) == 32);
  CHECK(digest_size(DigestKind::fnv64) == 8);
  CHECK(digest(DigestKind::fnv64, std::string_view("abc")).size() == 8);
}

TEST_CASE("derive_node_id") {
  SUBCASE("rejects empty key") {
    CHECK_THROWS_AS(derive_node_id(kKind, ByteSpan{}), Error);
  }
  SUBCASE("deterministic") {
    Bytes pk = to_bytes("some-public-key");
    CHECK(derive_node_id(kKind, pk) == derive_node_id(kKind, pk));
  }
  SUBCASE("golden value from reference sha256") {
    CHECK(derive_node_id(kKind, to_bytes("test-key-01")) ==
          "3e521503e29b574d356712ce5765e0966238130b62b793169dc5590950aea466");
  }
  SUBCASE("injective over a corpus of distinct keys") {
    sim::Rng rng(7);
    std::set<std::string> seen;
    for (std::uint64_t i = 0; i < 2000; ++i) {
      Bytes key = u64_be(i);  // distinct by construction
      Bytes salt = rng.bytes(rng.below(24));
      key.insert(key.end(), salt.begin(), salt.end());
      CHECK(seen.insert(derive_node_id(kKind, key)).second);
    }
  }
}

TEST_CASE("derive_sensor_id concatenates node id and pin") {
  CHECK(derive_sensor_id("1234567890abcdef", "A0") == "1234567890abcdefA0");
  CHECK(derive_sensor_id("ffff0000ffff0000", "D7") == "ffff0000ffff0000D7");
  CHECK_THROWS_AS(derive_sensor_id("1234567890abcdef", ""), Error);
  CHECK_THROWS_AS(derive_sensor_id("not hex!", "A0"), Error);
  CHECK_THROWS_AS(derive_sensor_id("abc", "A0"), Error);  // odd length
}

TEST_CASE("diffie-hellman") {
  SUBCASE("hand-computed toy group") {
    // p=23, g=5, a=6, b=15: 5^6 mod 23 = 8, 8^15 mod 23 = 2.
    DhParams params{23, 5};
    CHECK(dh_public(params, 6) == 8);
    CHECK(dh_public(params, 15) == 19);
    CHECK(dh_shared_secret(params, 15, 8) == 2);
    CHECK(dh_shared_secret(params, 6, 19) == 2);
  }
  SUBCASE("symmetry with default group") {
    DhParams params = default_dh_params();
    sim::Rng rng(11);
    for (int i = 0; i < 20; ++i) {
      std::uint64_t a = rng.range(2, params.prime - 2);
      std::uint64_t b = rng.range(2, params.prime - 2);
      SharedKey ka = dh_establish(kKind, params, a, dh_public(params, b), "b", 1);
      SharedKey kb = dh_establish(kKind, params, b, dh_public(params, a), "a", 1);
      CHECK(ka.key_bytes == kb.key_bytes);
      CHECK(ka.key_bytes.size() == digest_size(kKind));
    }
  }
  SUBCASE("degenerate remote elements rejected") {
    DhParams params = default_dh_params();
    CHECK_THROWS_AS(dh_shared_secret(params, 5, 0), Error);
    CHECK_THROWS_AS(dh_shared_secret(params, 5, 1), Error);  // group identity
    CHECK_THROWS_AS(dh_shared_secret(params, 5, params.prime - 1), Error);
    CHECK_THROWS_AS(dh_shared_secret(params, 5, params.prime), Error);
  }
}

TEST_CASE("one-time key") {
  Bytes key = to_bytes("k1");
  Bytes nonce = to_bytes("n1");
  SUBCASE("deterministic") { CHECK(generate_otk(kKind, key, nonce) == generate_otk(kKind, key, nonce)); }
  SUBCASE("nonce changes the key") {
    CHECK(generate_otk(kKind, key, nonce) != generate_otk(kKind, key, to_bytes("n2")));
  }
  SUBCASE("golden two-leaf tree root") {
    CHECK(to_hex(generate_otk(kKind, key, nonce)) ==
          "b2b280380511b275a58d87f6e561403ef0eb00a9c58c44319ac2e494da8f5a0d");
  }
  SUBCASE("empty inputs rejected") {
    CHECK_THROWS_AS(generate_otk(kKind, ByteSpan{}, nonce), Error);
    CHECK_THROWS_AS(generate_otk(kKind, key, ByteSpan{}), Error);
  }
}

namespace {

struct Channel {
  SharedKey key;
  HashChainState sender;
  HashChainState receiver;
  PacketMeta meta;
};

Channel make_channel(std::uint64_t seed = 42) {
  sim::Rng rng(seed);
  DhParams params = default_dh_params();
  std::uint64_t a = rng.range(2, params.prime - 2);
  std::uint64_t b = rng.range(2, params.prime - 2);
  Channel ch;
  ch.key = dh_establish(kKind, params, a, dh_public(params, b), "admin", 1);
  Bytes otk = generate_otk(kKind, rng.bytes(16), rng.bytes(16));
  ch.sender = initial_chain_state(kKind, otk);
  ch.receiver = initial_chain_state(kKind, otk);
  ch.meta = PacketMeta{"10.0.0.7", "aabbccdd00112233", to_bytes("ach-ref")};
  return ch;
}

}  // namespace

TEST_CASE("seal/open round trip") {
  Channel ch = make_channel();
  Bytes data = to_bytes("25.0");
  SealResult sealed = seal_packet(kKind, ch.sender, ch.key, 1, data, ch.meta, 1000);
  OpenResult opened = open_packet(kKind, sealed.packet, ch.key, ch.receiver, 1000);
  CHECK(opened.verified);
  CHECK(opened.data == data);
  CHECK(opened.next == sealed.next);
  CHECK(sealed.next.sequence == 1);
}

TEST_CASE("open with a different key fails verification") {
  Channel ch = make_channel();
  SealResult sealed = seal_packet(kKind, ch.sender, ch.key, 1, to_bytes("data"), ch.meta, 5);
  SharedKey other = ch.key;
  other.key_bytes[0] ^= 0xff;
  OpenResult opened = open_packet(kKind, sealed.packet, other, ch.receiver, 5);
  CHECK_FALSE(opened.verified);
  CHECK(opened.next == ch.receiver);  // state unchanged on failure
}

TEST_CASE("tampered fields fail verification") {
  Channel ch = make_channel();
  SealResult sealed = seal_packet(kKind, ch.sender, ch.key, 1, to_bytes("21.375"), ch.meta, 5);
  SUBCASE("flipped bit in encrypted data") {
    SensorPacket p = sealed.packet;
    p.encrypted_data[0] ^= 0x01;
    CHECK_FALSE(open_packet(kKind, p, ch.key, ch.receiver, 5).verified);
  }
  SUBCASE("tampered fhash with intact data") {
    SensorPacket p = sealed.packet;
    p.fhash[3] ^= 0x80;
    CHECK_FALSE(open_packet(kKind, p, ch.key, ch.receiver, 5).verified);
  }
  SUBCASE("tampered sequence") {
    SensorPacket p = sealed.packet;
    p.sequence ^= 1;
    CHECK_FALSE(open_packet(kKind, p, ch.key, ch.receiver, 5).verified);
  }
  SUBCASE("tampered node id") {
    SensorPacket p = sealed.packet;
    p.node_id[0] = p.node_id[0] == 'a' ? 'b' : 'a';
    CHECK_FALSE(open_packet(kKind, p, ch.key, ch.receiver, 5).verified);
  }
}

TEST_CASE("lockstep prehash over a packet sequence") {
  Channel ch = make_channel(99);
  sim::Rng rng(123);
  for (int i = 0; i < 64; ++i) {
    Bytes data = rng.bytes(1 + rng.below(40));
    std::uint64_t ts = 1000 * static_cast<std::uint64_t>(i + 1);
    SealResult sealed = seal_packet(kKind, ch.sender, ch.key, 1, data, ch.meta, ts);
    OpenResult opened = open_packet(kKind, sealed.packet, ch.key, ch.receiver, ts);
    REQUIRE(opened.verified);
    REQUIRE(opened.next.prehash == sealed.next.prehash);
    REQUIRE(opened.next.sequence == sealed.next.sequence);
    ch.sender = sealed.next;
    ch.receiver = opened.next;
  }
}

TEST_CASE("initial prehash is all zeros and khash follows the chain rule") {
  Bytes otk = generate_otk(kKind, to_bytes("k1"), to_bytes("n1"));
  HashChainState state = initial_chain_state(kKind, otk);
  CHECK(state.prehash == Bytes(32, 0));
  CHECK(state.sequence == 0);
  // Golden composition pinned from the reference digest implementation:
  // fhash = H(H(otk || zeros) || H("25.0")).
  Bytes dhash = digest(kKind, std::string_view("25.0"));
  Bytes fh = compute_fhash(kKind, compute_khash(kKind, state), dhash);
  CHECK(to_hex(fh) == "7f63edcf3c6e99810130cbddebefd98e9dbf9df56f4145eb5fe65803c17fe383");
}

TEST_CASE("stale key epoch is an error") {
  Channel ch = make_channel();
  CHECK_THROWS_AS(seal_packet(kKind, ch.sender, ch.key, 2, to_bytes("x"), ch.meta, 0), Error);
  try {
    seal_packet(kKind, ch.sender, ch.key, 2, to_bytes("x"), ch.meta, 0);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::key_epoch_mismatch);
  }
}

TEST_CASE("packet wire format") {
  SUBCASE("encode/decode is an exact inverse on random packets") {
    sim::Rng rng(31337);
    for (int i = 0; i < 500; ++i) {
      SensorPacket p;
      p.encrypted_data = rng.bytes(rng.below(64));
      p.fhash = rng.bytes(32);
      p.lp_ip = "10.0." + std::to_string(rng.below(256)) + "." + std::to_string(rng.below(256));
      p.node_id = to_hex(rng.bytes(16));
      p.sequence = rng.next_u64();
      p.ach_ref = rng.bytes(rng.below(40));
      CHECK(decode_packet(encode_packet(p)) == p);
    }
  }
  SUBCASE("truncation fails to decode") {
    SensorPacket p;
    p.fhash = Bytes(32, 1);
    p.lp_ip = "10.0.0.1";
    p.node_id = "ab";
    Bytes wire = encode_packet(p);
    wire.pop_back();
    CHECK_THROWS_AS(decode_packet(wire), Error);
  }
  SUBCASE("trailing bytes fail to decode") {
    Bytes wire = encode_packet(SensorPacket{{}, Bytes(8, 2), "ip", "ab", 7, {}});
    wire.push_back(0);
    CHECK_THROWS_AS(decode_packet(wire), Error);
  }
}

TEST_CASE("schnorr signatures") {
  DhParams params = default_dh_params();
  sim::Rng rng(5);
  SUBCASE("sign/verify round trip and forgery rejection") {
    for (int i = 0; i < 20; ++i) {
      std::uint64_t secret = rng.range(2, params.prime - 2);
      std::uint64_t pub = dh_public(params, secret);
      Bytes msg = rng.bytes(1 + rng.below(60));
      Bytes sig = schnorr_sign(kKind, params, secret, msg);
      CHECK(schnorr_verify(kKind, params, pub, msg, sig));
      Bytes bad = sig;
      bad[15] ^= 1;
      CHECK_FALSE(schnorr_verify(kKind, params, pub, msg, bad));
      Bytes other_msg = msg;
      other_msg[0] ^= 1;
      CHECK_FALSE(schnorr_verify(kKind, params, pub, other_msg, sig));
      CHECK_FALSE(schnorr_verify(kKind, params, pub, msg, rng.bytes(16)));
      CHECK_FALSE(schnorr_verify(kKind, params, pub, msg, rng.bytes(5)));
    }
  }
  SUBCASE("per-transaction keys are distinct and certifiable") {
    Bytes root_private = u64_be(rng.range(2, params.prime - 2));
    std::uint64_t root_secret = read_u64_be(root_private);
    std::uint64_t root_public = dh_public(params, root_secret);
    std::set<std::uint64_t> seen;
    for (std::uint64_t counter = 0; counter < 200; ++counter) {
      std::uint64_t tx_secret = derive_tx_secret(kKind, params, root_private, counter);
      CHECK(seen.insert(tx_secret).second);
      Bytes tx_public = u64_be(dh_public(params, tx_secret));
      Bytes cert = make_key_cert(kKind, params, root_secret, tx_public);
      CHECK(verify_key_cert(kKind, params, root_public, tx_public, cert));
      CHECK_FALSE(verify_key_cert(kKind, params, dh_public(params, root_secret + 1), tx_public, cert));
    }
  }
}

TEST_CASE("fnv64 digest kind drives the whole scheme") {
  Channel ch = [] {
    sim::Rng rng(4);
    DhParams params = default_dh_params();
    Channel c;
    c.key = dh_establish(DigestKind::fnv64, params, 5, dh_public(params, 9), "admin", 1);
    Bytes otk = generate_otk(DigestKind::fnv64, rng.bytes(8), rng.bytes(8));
    c.sender = initial_chain_state(DigestKind::fnv64, otk);
    c.receiver = c.sender;
    c.meta = PacketMeta{"ip", "00ff", {}};
    return c;
  }();
  CHECK(ch.sender.prehash == Bytes(8, 0));
  SealResult sealed = seal_packet(DigestKind::fnv64, ch.sender, ch.key, 1, to_bytes("v"), ch.meta, 1);
  CHECK(open_packet(DigestKind::fnv64, sealed.packet, ch.key, ch.receiver, 1).verified);
}
