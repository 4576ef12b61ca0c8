#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "canopy/misbehaviour/detectors.hpp"
#include "canopy/sim/scenario.hpp"

namespace canopy::sim {

struct AttackTally {
  std::uint64_t attempts = 0;
  std::uint64_t detected = 0;
  std::uint64_t succeeded = 0;
  std::uint64_t ignored = 0;  // ignored-by-design

  bool consistent() const { return attempts == detected + succeeded + ignored; }
};

struct LatencyStats {
  std::vector<std::int64_t> samples_ms;  // sorted at finalize
  std::int64_t tolerable_ms = 0;         // 0: on demand, no bound

  std::int64_t percentile(double p) const;  // samples must be sorted
  bool within_tolerance() const;
};

struct PmSample {
  std::int64_t time_ms = 0;
  double pm = 0;
};

struct ChainSummary {
  std::uint64_t height = 0;
  std::uint64_t transactions = 0;
  bool valid = false;
  std::uint64_t first_bad_height = 0;  // meaningful when !valid
};

struct MetricsReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::int64_t duration_ms = 0;

  std::map<std::string, AttackTally> attacks;  // keyed by attack kind name

  // Conservation over honestly emitted packets: every packet ends in exactly
  // one bucket.
  std::uint64_t packets_emitted = 0;
  std::uint64_t accepted_first_try = 0;
  std::uint64_t accepted_after_retransmit = 0;
  std::uint64_t rejected = 0;
  std::uint64_t retransmissions = 0;

  std::map<std::string, LatencyStats> latency_by_service;
  std::map<std::string, std::vector<PmSample>> pm_history;        // sensor id -> samples
  std::map<std::string, misbehaviour::NetworkReliability> reliability_by_node;
  std::map<std::string, ChainSummary> ledgers;  // actor name -> chain audit

  std::uint64_t penalties_applied = 0;
  std::uint64_t reads_granted = 0;
  std::uint64_t reads_denied = 0;
  std::uint64_t attest_checks = 0;
  std::uint64_t attest_failures = 0;
  std::uint64_t reprovisions = 0;
  std::uint64_t rehomes = 0;
  std::uint64_t key_rotations = 0;
  std::uint64_t conflict_anomalies = 0;
  std::uint64_t linking_key_reuses = 0;

  std::uint64_t total_attack_succeeded() const;
  bool all_ledgers_valid() const;
  bool all_latency_within_tolerance() const;

  std::string to_json_text() const;   // machine-readable, stable field order
  std::string summary_text() const;   // human-readable table
};

}  // namespace canopy::sim
