#include "canopy/access/ach.hpp"

#include "canopy/error.hpp"

namespace canopy::access {

const char* decision_reason_name(DecisionReason reason) {
  switch (reason) {
    case DecisionReason::ok: return "ok";
    case DecisionReason::no_entry: return "no-entry";
    case DecisionReason::not_in_keylist: return "not-in-keylist";
    case DecisionReason::wrong_direction: return "wrong-direction";
    case DecisionReason::bad_signature: return "bad-signature";
  }
  return "?";
}

void AccessControlHeader::set_entry(const std::string& target, AchEntry entry) {
  if (target.empty()) raise(Errc::invalid_argument, "empty ACH target");
  if (entry.min_freq_ms <= 0) raise(Errc::invalid_argument, "min_freq must be positive");
  if (entry.noftr_cutoff < 1) raise(Errc::invalid_argument, "noftr_cutoff must be >= 1");
  entries_[target] = std::move(entry);
}

const AchEntry* AccessControlHeader::find(const std::string& target) const {
  auto it = entries_.find(target);
  return it == entries_.end() ? nullptr : &it->second;
}

Bytes AccessControlHeader::canonical_bytes() const {
  Bytes out;
  put_u32_be(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [target, entry] : entries_) {  // std::map iterates sorted
    put_field(out, target);
    put_u32_be(out, static_cast<std::uint32_t>(entry.readers.size()));
    for (const std::string& reader : entry.readers) put_field(out, reader);
    put_u32_be(out, static_cast<std::uint32_t>(entry.writers.size()));
    for (const std::string& writer : entry.writers) put_field(out, writer);
    put_u64_be(out, static_cast<std::uint64_t>(entry.min_freq_ms));
    put_u32_be(out, static_cast<std::uint32_t>(entry.noftr_cutoff));
    put_u64_be(out, static_cast<std::uint64_t>(entry.tolerable_latency_ms));
  }
  put_u64_be(out, version_);
  return out;
}

Bytes AccessControlHeader::digest(crypto::DigestKind kind) const {
  return crypto::digest(kind, canonical_bytes());
}

AccessDecision evaluate(const AccessControlHeader& ach, const std::string& requester,
                        const std::string& target, Direction direction,
                        const ledger::KeyList& keylist, SignatureCheck signature,
                        const std::set<std::string>& blocked) {
  AccessDecision decision;
  if (!keylist.contains(requester) || blocked.count(requester) > 0) {
    decision.reason = DecisionReason::not_in_keylist;
    return decision;
  }
  const AchEntry* entry = ach.find(target);
  if (entry == nullptr) {
    decision.reason = DecisionReason::no_entry;
    return decision;
  }
  decision.consulted_entry = *entry;
  const std::set<std::string>& allowed =
      direction == Direction::read ? entry->readers : entry->writers;
  if (allowed.count(requester) == 0) {
    decision.reason = DecisionReason::wrong_direction;
    return decision;
  }
  if (signature == SignatureCheck::failed) {
    decision.reason = DecisionReason::bad_signature;
    return decision;
  }
  decision.granted = true;
  decision.reason = DecisionReason::ok;
  return decision;
}

AmendResult amend(const AccessControlHeader& ach, const AchChange& change,
                  const std::string& authority, const std::string& owner) {
  AmendResult result;
  result.audit = AmendRecord{authority, change, ach.version()};
  if (authority != owner) {
    result.ok = false;
    return result;
  }
  AccessControlHeader next = ach;
  const AchEntry* existing = next.find(change.target);
  if (existing == nullptr) {
    raise(Errc::invalid_argument, "no ACH entry for target '" + change.target + "'");
  }
  AchEntry entry = *existing;
  switch (change.kind) {
    case AchChange::Kind::add_reader: entry.readers.insert(change.principal); break;
    case AchChange::Kind::remove_reader: entry.readers.erase(change.principal); break;
    case AchChange::Kind::add_writer: entry.writers.insert(change.principal); break;
    case AchChange::Kind::remove_writer: entry.writers.erase(change.principal); break;
  }
  next.set_entry(change.target, std::move(entry));
  next.bump_version();
  result.ok = true;
  result.audit.new_version = next.version();
  result.next = std::move(next);
  return result;
}

}  // namespace canopy::access
