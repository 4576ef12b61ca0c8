#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "canopy/crypto/digest.hpp"
#include "canopy/ledger/keylist.hpp"

namespace canopy::access {

struct AchEntry {
  std::set<std::string> readers;
  std::set<std::string> writers;
  std::int64_t min_freq_ms = 1;             // > 0
  int noftr_cutoff = 1;                     // >= 1
  std::int64_t tolerable_latency_ms = 0;    // 0 = no bound ("on demand")

  bool operator==(const AchEntry&) const = default;
};

enum class Direction { read, write };

enum class DecisionReason { ok, no_entry, not_in_keylist, wrong_direction, bad_signature };

const char* decision_reason_name(DecisionReason reason);

struct AccessDecision {
  bool granted = false;
  DecisionReason reason = DecisionReason::no_entry;
  std::optional<AchEntry> consulted_entry;
};

enum class SignatureCheck { passed, failed, not_required };

// Immutable per-version policy map keyed by rendered sensor/output id.
// Amendments produce a new version through the owning actor.
class AccessControlHeader {
 public:
  void set_entry(const std::string& target, AchEntry entry);  // validates bounds
  const AchEntry* find(const std::string& target) const;
  const std::map<std::string, AchEntry>& entries() const { return entries_; }

  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  // Canonical sorted-key binary form; digest of this is the block-header
  // ach_digest. Documented byte-exactly in docs/formats.md.
  Bytes canonical_bytes() const;
  Bytes digest(crypto::DigestKind kind) const;

  bool operator==(const AccessControlHeader&) const = default;

 private:
  std::map<std::string, AchEntry> entries_;
  std::uint64_t version_ = 0;
};

// Gate checks in fixed order; the first failure wins as the reason:
// key list -> entry existence -> direction permission -> signature.
// `blocked` is the penalty overlay: node ids blocked by the respondent are
// treated as absent from the key list until their block expires.
AccessDecision evaluate(const AccessControlHeader& ach, const std::string& requester,
                        const std::string& target, Direction direction,
                        const ledger::KeyList& keylist, SignatureCheck signature,
                        const std::set<std::string>& blocked = {});

struct AchChange {
  enum class Kind { add_reader, remove_reader, add_writer, remove_writer };
  Kind kind;
  std::string target;
  std::string principal;
};

struct AmendRecord {
  std::string authority;
  AchChange change;
  std::uint64_t new_version = 0;
};

struct AmendResult {
  bool ok = false;  // false: authority is not the owner
  AccessControlHeader next;
  AmendRecord audit;
};

// Only the owning block admin (private tier) or group head (public tier) may
// amend. The caller logs the audit record as a ledger transaction so policy
// history stays chained.
AmendResult amend(const AccessControlHeader& ach, const AchChange& change,
                  const std::string& authority, const std::string& owner);

}  // namespace canopy::access
