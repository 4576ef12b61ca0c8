#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "canopy/codegen/manifest.hpp"
#include "canopy/crypto/dh.hpp"
#include "canopy/misbehaviour/detectors.hpp"

namespace canopy::sim {

struct LinkDelays {
  std::int64_t lp_admin_ms = 50;
  std::int64_t admin_head_ms = 200;
  std::int64_t processing_ms = 5;
};

// Per-service defaults follow the shipped service table: emission cadence,
// tolerable ledger-acceptance latency (0 = on demand, unbounded), and the
// rate bounds the ACH carries.
struct ServiceProfile {
  std::int64_t interval_ms = 60'000;
  std::int64_t tolerable_latency_ms = 0;
  std::int64_t min_freq_ms = 1000;
  int noftr_cutoff = 3;
  double dnm_threshold = 0;  // 0: use the global default
};

enum class AttackKind {
  dos,
  ddos,
  injection,
  appending,
  consensus_period,
  dropping,
  linking,
  routing,
};

const char* attack_kind_name(AttackKind kind);
AttackKind attack_kind_from_name(const std::string& name);

struct AttackScript {
  AttackKind kind = AttackKind::injection;
  std::string target;  // admin name (dos/ddos/injection/appending/consensus/routing),
                       // head name (dropping), group head for linking analysis
  std::int64_t start_ms = 0;
  std::int64_t stop_ms = 0;
  std::int64_t interval_ms = 1000;
  int sources = 1;            // ddos: number of attacker identities
  int tamper_every = 10;      // routing: every k-th delivery in the window
  std::int64_t listed_flood_interval_ms = 0;  // dos: extra flood from a listed node
  std::string expected_defence;  // the defence switch this script demonstrates
};

struct Defences {
  bool keylist_gate = true;      // admission control (dos/ddos/injection)
  bool signature_check = true;   // public-tier signature + certificate checks
  bool quorum_check = true;      // >= ceil(n/2) co-signatures
  bool fhash_check = true;       // hash-chain packet verification
  bool rehoming = true;          // dropped members pick a fallback head
  bool per_tx_keys = true;       // fresh public key per public transaction
  bool time_penalty = true;      // rate-threshold penalty enforcement
};

struct Gates {
  bool no_attack_succeeded = true;
  bool ledgers_valid = true;
  bool latency_within_tolerance = false;
};

struct LpSpec {
  std::string name;
  codegen::NodeManifest manifest;
  misbehaviour::GeoPoint position;
  std::string ip;
};

struct BlockSpec {
  std::string admin;
  std::vector<LpSpec> lps;
};

struct GroupSpec {
  std::string head;
  std::vector<std::string> admins;
  std::vector<std::string> users;
  std::vector<std::string> fallback_heads;
};

struct CodeMutation {
  std::string target;  // lp name
  std::int64_t at_ms = 0;
};

struct ScenarioConfig {
  std::string name;
  crypto::DigestKind digest = crypto::DigestKind::sha256;
  crypto::DhParams dh = crypto::default_dh_params();
  std::int64_t duration_ms = 3'600'000;
  LinkDelays delays;
  std::int64_t ledger_flush_interval_ms = 1000;
  std::int64_t sync_interval_ms = 300'000;
  std::int64_t ota_attest_interval_ms = 0;   // 0: no periodic attestation
  std::int64_t key_rotate_interval_ms = 0;   // 0: no rotation
  std::int64_t read_request_interval_ms = 0; // 0: users issue no reads
  std::int64_t response_timeout_ms = 1000;
  int rehome_failure_threshold = 3;
  int max_submission_attempts = 5;
  int max_retransmits = 5;

  misbehaviour::PmConfig pm;
  double dnm_arm = 0.02;
  double dnm_threshold = 50.0;
  bool dnm_normalize = false;

  std::map<std::string, ServiceProfile> services;
  std::map<std::string, misbehaviour::GaussianClassModel> models;
  std::string model_file;  // as given in the scenario, resolved when loading

  std::vector<BlockSpec> blocks;
  std::vector<GroupSpec> groups;
  std::vector<AttackScript> attacks;
  std::vector<CodeMutation> code_mutations;
  Defences defences;
  Gates gates;
};

// Built-in service table defaults (GPS, health structure, weather, air
// quality, smart light, camera, traffic light).
std::map<std::string, ServiceProfile> default_service_profiles();

// Loads and validates a scenario file (JSON). Throws config_error with the
// path of the offending field. Relative model_file paths resolve against the
// scenario file's directory.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& json_text, const std::string& origin,
                              const std::string& base_dir);

// Structural validation shared by every entry point (topology invariants,
// ACH coverage of manifests, model availability).
void validate_scenario(const ScenarioConfig& config);

}  // namespace canopy::sim
