#include "canopy/access/ach.hpp"
#include "canopy/error.hpp"
#include "canopy/sim/rng.hpp"
#include "doctest.h"

using namespace canopy;
using namespace canopy::access;

namespace {

constexpr crypto::DigestKind kKind = crypto::DigestKind::sha256;

struct Fixture {
  AccessControlHeader ach;
  ledger::KeyList keylist;
  std::string sensor = "aabb0011A0";
  std::string reader = "reader-node";
  std::string writer = "writer-node";

  Fixture() {
    AchEntry entry;
    entry.readers = {reader};
    entry.writers = {writer};
    entry.min_freq_ms = 60'000;
    entry.noftr_cutoff = 3;
    ach.set_entry(sensor, entry);
    keylist.add(reader, to_bytes("rk"), 1);
    keylist.add(writer, to_bytes("wk"), 1);
  }
};

}  // namespace

TEST_CASE("evaluate applies checks in fixed order") {
  Fixture f;
  SUBCASE("authorized reader with valid signature is granted") {
    auto d = evaluate(f.ach, f.reader, f.sensor, Direction::read, f.keylist,
                      SignatureCheck::passed);
    CHECK(d.granted);
    CHECK(d.reason == DecisionReason::ok);
    REQUIRE(d.consulted_entry.has_value());
    CHECK(d.consulted_entry->min_freq_ms == 60'000);
  }
  SUBCASE("requester missing from the keylist") {
    auto d = evaluate(f.ach, "stranger", f.sensor, Direction::read, f.keylist,
                      SignatureCheck::passed);
    CHECK_FALSE(d.granted);
    CHECK(d.reason == DecisionReason::not_in_keylist);
  }
  SUBCASE("blocked requester is treated as unlisted") {
    auto d = evaluate(f.ach, f.reader, f.sensor, Direction::read, f.keylist,
                      SignatureCheck::passed, {f.reader});
    CHECK(d.reason == DecisionReason::not_in_keylist);
  }
  SUBCASE("unknown target") {
    auto d = evaluate(f.ach, f.reader, "no-such-target", Direction::read, f.keylist,
                      SignatureCheck::passed);
    CHECK(d.reason == DecisionReason::no_entry);
  }
  SUBCASE("write by a reader-only principal") {
    auto d = evaluate(f.ach, f.reader, f.sensor, Direction::write, f.keylist,
                      SignatureCheck::passed);
    CHECK(d.reason == DecisionReason::wrong_direction);
  }
  SUBCASE("failed signature loses last") {
    auto d = evaluate(f.ach, f.writer, f.sensor, Direction::write, f.keylist,
                      SignatureCheck::failed);
    CHECK(d.reason == DecisionReason::bad_signature);
    // keylist failure wins over signature failure
    auto d2 = evaluate(f.ach, "stranger", f.sensor, Direction::write, f.keylist,
                       SignatureCheck::failed);
    CHECK(d2.reason == DecisionReason::not_in_keylist);
  }
  SUBCASE("granted iff reason ok, over random requests") {
    sim::Rng rng(3);
    for (int i = 0; i < 300; ++i) {
      std::string requester = rng.below(2) ? f.reader : "other";
      std::string target = rng.below(2) ? f.sensor : "ghost" + std::to_string(rng.below(4));
      Direction dir = rng.below(2) ? Direction::read : Direction::write;
      SignatureCheck sig = rng.below(2) ? SignatureCheck::passed : SignatureCheck::failed;
      auto d = evaluate(f.ach, requester, target, dir, f.keylist, sig);
      CHECK(d.granted == (d.reason == DecisionReason::ok));
      if (target != f.sensor) CHECK_FALSE(d.granted);  // deny-by-default
    }
  }
}

TEST_CASE("amend produces a new version through the owner") {
  Fixture f;
  const std::string owner = "admin-node";
  SUBCASE("admin adds a reader; subsequent evaluate grants") {
    f.keylist.add("newcomer", to_bytes("nk"), 2);
    AchChange change{AchChange::Kind::add_reader, f.sensor, "newcomer"};
    AmendResult result = amend(f.ach, change, owner, owner);
    REQUIRE(result.ok);
    CHECK(result.next.version() == f.ach.version() + 1);
    auto d = evaluate(result.next, "newcomer", f.sensor, Direction::read, f.keylist,
                      SignatureCheck::passed);
    CHECK(d.granted);
    // the old version is untouched
    CHECK_FALSE(evaluate(f.ach, "newcomer", f.sensor, Direction::read, f.keylist,
                         SignatureCheck::passed).granted);
  }
  SUBCASE("non-owner is denied") {
    AchChange change{AchChange::Kind::add_reader, f.sensor, "intruder"};
    CHECK_FALSE(amend(f.ach, change, "lp-node", owner).ok);
  }
  SUBCASE("amendment of a missing target is an error") {
    AchChange change{AchChange::Kind::add_writer, "ghost", "x"};
    CHECK_THROWS_AS(amend(f.ach, change, owner, owner), Error);
  }
}

TEST_CASE("canonical bytes are stable and version-sensitive") {
  Fixture f;
  CHECK(f.ach.canonical_bytes() == f.ach.canonical_bytes());
  CHECK(f.ach.digest(kKind) == f.ach.digest(kKind));

  AccessControlHeader reordered;
  // same entries inserted in a different order serialize identically
  AchEntry e1;
  e1.readers = {"r"};
  e1.min_freq_ms = 5;
  AchEntry e2;
  e2.writers = {"w"};
  e2.min_freq_ms = 7;
  AccessControlHeader a;
  a.set_entry("t1", e1);
  a.set_entry("t2", e2);
  AccessControlHeader b;
  b.set_entry("t2", e2);
  b.set_entry("t1", e1);
  CHECK(a.canonical_bytes() == b.canonical_bytes());

  AmendResult amended =
      amend(f.ach, {AchChange::Kind::add_reader, f.sensor, "zz"}, "o", "o");
  CHECK(amended.next.digest(kKind) != f.ach.digest(kKind));
}

TEST_CASE("entry bounds are validated") {
  AccessControlHeader ach;
  AchEntry bad;
  bad.min_freq_ms = 0;
  CHECK_THROWS_AS(ach.set_entry("t", bad), Error);
  bad.min_freq_ms = 1;
  bad.noftr_cutoff = 0;
  CHECK_THROWS_AS(ach.set_entry("t", bad), Error);
}
