#include "canopy/sim/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <deque>
#include <optional>
#include <queue>
#include <set>
#include <variant>

#include "canopy/access/ach.hpp"
#include "canopy/codegen/generator.hpp"
#include "canopy/crypto/hash_chain.hpp"
#include "canopy/crypto/identity.hpp"
#include "canopy/crypto/schnorr.hpp"
#include "canopy/error.hpp"
#include "canopy/sim/rng.hpp"

namespace canopy::sim {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

std::string format_value(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6f", v);
  return buffer;
}

// Payload of a sensor write: "<sensor_id>|<feature>=<value>|...".
// Payload of an output read request: "read|<output_id>".
std::string build_write_payload(const std::string& sensor_id,
                                const std::vector<std::pair<std::string, double>>& features) {
  std::string payload = sensor_id;
  for (const auto& [name, value] : features) {
    payload += "|" + name + "=" + format_value(value);
  }
  return payload;
}

struct ParsedPayload {
  bool ok = false;
  bool is_read = false;
  std::string target;  // sensor or output id
  std::vector<std::pair<std::string, double>> features;
};

ParsedPayload parse_payload(const Bytes& data) {
  ParsedPayload parsed;
  std::string text = to_string(data);
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t bar = text.find('|', start);
    if (bar == std::string::npos) {
      parts.push_back(text.substr(start));
      break;
    }
    parts.push_back(text.substr(start, bar - start));
    start = bar + 1;
  }
  if (parts.empty() || parts[0].empty()) return parsed;
  if (parts[0] == "read") {
    if (parts.size() != 2 || parts[1].empty()) return parsed;
    parsed.is_read = true;
    parsed.target = parts[1];
    parsed.ok = true;
    return parsed;
  }
  parsed.target = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) {
    std::size_t eq = parts[i].find('=');
    if (eq == std::string::npos || eq == 0) return parsed;
    double value = 0;
    const char* begin = parts[i].data() + eq + 1;
    const char* end = parts[i].data() + parts[i].size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) return parsed;
    parsed.features.emplace_back(parts[i].substr(0, eq), value);
  }
  parsed.ok = !parsed.features.empty();
  return parsed;
}

}  // namespace

// ---------------------------------------------------------------------------
// Events

namespace {

struct EvSensorEmit {
  std::size_t lp;
  std::size_t binding;
  bool flood = false;
  std::size_t script = kNone;
};
struct EvOutputRead {
  std::size_t lp;
  std::size_t binding;
};
struct EvPacketDeliver {
  std::size_t admin;
  std::size_t source_lp = kNone;  // kNone: raw (channel-less) attacker packet
  Bytes wire;
  std::int64_t emit_ms = 0;
  int attempt = 1;
  bool flood = false;
  std::size_t script = kNone;
};
struct EvAck {
  std::size_t lp;
  std::uint64_t seq;
  enum Kind { ok, retry, abandon } kind;
};
struct EvFlush {
  bool is_head;
  std::size_t index;
};
struct EvSync {
  std::size_t admin;
};
struct EvSubmissionDeliver {
  std::size_t head;
  bool from_user = false;
  std::size_t submitter = kNone;  // admin or user index
  std::uint64_t submission_id = 0;
  ledger::Transaction tx;
  Bytes cert;
  std::string submitter_node_id;
  bool gather_cosigners = true;
  std::vector<ledger::MemberSignature> sigs;
  std::size_t script = kNone;
  std::string read_target;
  std::size_t read_admin = kNone;
};
struct EvSubmissionResponse {
  bool to_user = false;
  std::size_t submitter = kNone;
  std::uint64_t submission_id = 0;
  bool ok = false;
};
struct EvSubmissionTimeout {
  std::size_t admin;
  std::uint64_t submission_id;
};
struct EvReadRequest {
  std::size_t user;
};
struct EvAdminReadLog {
  std::size_t admin;
  std::string sensor_id;
  std::string reader_id;
};
struct EvAttestQuery {
  std::size_t admin;
  std::size_t lp;
};
struct EvAttestReply {
  std::size_t admin;
  std::size_t lp;
  std::string observed;
};
struct EvProvision {
  std::size_t lp;
  std::string code;
  bool reprovision = false;
};
struct EvKeyRotate {
  std::size_t admin;
  std::size_t lp;
};
struct EvAttackFire {
  std::size_t script;
};
struct EvCodeMutate {
  std::size_t lp;
};

using EventPayload =
    std::variant<EvSensorEmit, EvOutputRead, EvPacketDeliver, EvAck, EvFlush, EvSync,
                 EvSubmissionDeliver, EvSubmissionResponse, EvSubmissionTimeout, EvReadRequest,
                 EvAdminReadLog, EvAttestQuery, EvAttestReply, EvProvision, EvKeyRotate,
                 EvAttackFire, EvCodeMutate>;

struct Event {
  std::int64_t time;
  std::uint64_t seq;
  EventPayload payload;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Actor runtimes

namespace {

struct PendingPayload {
  Bytes data;
  std::int64_t emit_ms = 0;
  bool flood = false;
  std::size_t script = kNone;
};

struct InFlight {
  PendingPayload payload;
  std::uint64_t seq = 0;
  crypto::HashChainState next;
  int attempts = 1;
};

struct LpRt {
  std::string name;
  crypto::NodeIdentity identity;
  std::uint64_t secret = 0;
  codegen::NodeManifest manifest;
  misbehaviour::GeoPoint position;
  std::size_t admin = kNone;
  std::string ip;
  crypto::SharedKey key;
  std::uint64_t epoch = 1;
  crypto::HashChainState chain;
  Rng rng{0};
  std::string running_code;
  Bytes ach_ref;
  std::deque<PendingPayload> send_queue;
  std::optional<InFlight> in_flight;
  bool is_attacker = false;
  std::size_t script = kNone;
};

struct ChannelRt {
  crypto::SharedKey key;
  std::uint64_t epoch = 1;
  crypto::HashChainState chain;
  misbehaviour::NetworkReliability reliability;
  std::map<std::string, misbehaviour::TimeState> time_state;
  std::int64_t blocked_until = -1;
};

struct SensorInfo {
  std::string type;
  misbehaviour::GeoPoint position;
  bool is_output = false;
  double primary = 0;
  bool has_value = false;
  std::string lp_node_id;
};

struct PendingSubmission {
  ledger::Transaction tx;
  Bytes cert;
  Bytes private_block_hash;
  int attempts = 0;
  bool resolved = false;
};

struct AdminRt {
  std::string name;
  crypto::NodeIdentity identity;
  std::uint64_t secret = 0;
  ledger::PrivateLedger ledger;
  access::AccessControlHeader ach;
  std::map<std::string, ChannelRt> channels;       // by lp node id
  std::map<std::string, SensorInfo> registry;      // by sensor/output id
  std::map<std::string, Bytes> lp_private_keys;    // provisioning keystore
  std::size_t group = kNone;
  std::size_t current_head = kNone;
  std::vector<std::size_t> fallback_heads;
  int consecutive_failures = 0;
  std::uint64_t tx_counter = 0;
  std::map<std::uint64_t, PendingSubmission> submissions;
  std::set<Bytes> blocks_in_flight;
  std::set<Bytes> blocks_synced;
  std::uint64_t next_submission_id = 1;
  std::map<std::string, codegen::GeneratedCode> provisioned;  // by lp node id
  Rng rng{0};

  AdminRt(crypto::DigestKind kind, std::int64_t flush_ms) : ledger(kind, flush_ms) {}
};

struct HeadRt {
  std::string name;
  crypto::NodeIdentity identity;
  std::uint64_t secret = 0;
  ledger::PublicLedger ledger;
  std::size_t group = kNone;
  bool drop_enabled = false;
  std::int64_t drop_start = 0;
  std::int64_t drop_stop = 0;
  std::set<std::string> drop_victims;  // admin node ids
  Rng rng{0};

  HeadRt(crypto::DigestKind kind, crypto::DhParams dh, std::int64_t flush_ms)
      : ledger(kind, dh, flush_ms) {}
};

struct UserRt {
  std::string name;
  crypto::NodeIdentity identity;
  std::uint64_t secret = 0;
  std::size_t group = kNone;
  std::uint64_t tx_counter = 0;
  std::size_t read_cursor = 0;
  Rng rng{0};
};

struct GroupRt {
  std::size_t head = kNone;
  std::vector<std::size_t> admins;
  std::vector<std::size_t> users;
  std::vector<std::pair<std::string, std::size_t>> read_targets;  // (sensor id, admin idx)
};

struct AttackerRt {
  std::size_t script = kNone;
  int source = 0;
  bool admission_attempted = false;
  bool admitted = false;
  std::size_t lp = kNone;            // runtime index once admitted
  crypto::NodeIdentity identity;     // self-made identity when not admitted
  std::uint64_t secret = 0;
  std::uint64_t raw_seq = 0;
  Rng rng{0};
};

}  // namespace

// ---------------------------------------------------------------------------

struct SimImpl {
  ScenarioConfig config;
  std::uint64_t seed;
  crypto::DigestKind kind;
  crypto::DhParams dh;
  MetricsReport metrics;

  std::priority_queue<Event, std::vector<Event>, EventLater> queue;
  std::uint64_t event_seq = 0;
  std::int64_t now = 0;
  bool ran = false;

  std::vector<LpRt> lps;
  std::vector<AdminRt> admins;
  std::vector<HeadRt> heads;
  std::vector<UserRt> users;
  std::vector<GroupRt> groups;
  std::vector<AttackerRt> attackers;  // one per (script, source)

  std::map<std::string, std::size_t> lp_by_node_id;
  std::map<std::string, std::size_t> admin_by_name;
  std::map<std::string, std::size_t> head_by_name;
  std::map<std::string, std::size_t> lp_name_by_node_id_cache;
  std::map<std::size_t, std::uint64_t> routing_transit_counter;  // per script

  SimImpl(ScenarioConfig cfg, std::uint64_t sd)
      : config(std::move(cfg)), seed(sd), kind(config.digest), dh(config.dh) {}

  void schedule(std::int64_t time, EventPayload payload) {
    queue.push(Event{time, event_seq++, std::move(payload)});
  }

  AttackTally& tally(std::size_t script) {
    return metrics.attacks[attack_kind_name(config.attacks[script].kind)];
  }

  const ServiceProfile& profile(const std::string& type) const {
    return config.services.at(type);
  }

  std::string display_name(const LpRt& lp) const { return lp.name; }

  // ------------------------------------------------------------------ setup

  void init() {
    metrics.scenario = config.name;
    metrics.seed = seed;
    metrics.duration_ms = config.duration_ms;
    for (const AttackScript& script : config.attacks) {
      metrics.attacks[attack_kind_name(script.kind)];  // materialize the row
    }

    // Groups and heads first: admins register with their head at init.
    for (std::size_t g = 0; g < config.groups.size(); ++g) {
      const GroupSpec& spec = config.groups[g];
      HeadRt head(kind, dh, config.ledger_flush_interval_ms);
      head.name = spec.head;
      Rng rng = Rng::for_actor(seed, "head:" + spec.head);
      head.secret = rng.range(2, dh.prime - 2);
      head.rng = std::move(rng);
      head.identity = crypto::make_identity(kind, dh, head.secret);
      head.group = g;
      head.ledger.set_enforce_signatures(config.defences.signature_check);
      head.ledger.set_enforce_quorum(config.defences.quorum_check);
      head_by_name[head.name] = heads.size();
      heads.push_back(std::move(head));
      groups.push_back(GroupRt{head_by_name[spec.head], {}, {}, {}});
    }

    // Group-head bootstrap: the head admits itself to its own key list.
    for (HeadRt& head : heads) {
      public_genesis(head, head.identity, head.name, /*submitter=*/head, /*bootstrap=*/true);
    }

    for (std::size_t b = 0; b < config.blocks.size(); ++b) {
      const BlockSpec& spec = config.blocks[b];
      AdminRt admin(kind, config.ledger_flush_interval_ms);
      admin.name = spec.admin;
      Rng rng = Rng::for_actor(seed, "admin:" + spec.admin);
      admin.secret = rng.range(2, dh.prime - 2);
      admin.rng = std::move(rng);
      admin.identity = crypto::make_identity(kind, dh, admin.secret);
      admin_by_name[admin.name] = admins.size();
      admins.push_back(std::move(admin));
    }

    for (std::size_t g = 0; g < config.groups.size(); ++g) {
      const GroupSpec& spec = config.groups[g];
      for (const std::string& admin_name : spec.admins) {
        std::size_t a = admin_by_name.at(admin_name);
        admins[a].group = g;
        admins[a].current_head = groups[g].head;
        for (const std::string& fallback : spec.fallback_heads) {
          admins[a].fallback_heads.push_back(head_by_name.at(fallback));
        }
        // Admission is co-signed by the members present so far.
        public_genesis(heads[groups[g].head], admins[a].identity, admin_name,
                       heads[groups[g].head], false);
        groups[g].admins.push_back(a);
      }
      for (const std::string& user_name : spec.users) {
        UserRt user;
        user.name = user_name;
        Rng rng = Rng::for_actor(seed, "user:" + user_name);
        user.secret = rng.range(2, dh.prime - 2);
        user.rng = std::move(rng);
        user.identity = crypto::make_identity(kind, dh, user.secret);
        user.group = g;
        public_genesis(heads[groups[g].head], user.identity, user_name,
                       heads[groups[g].head], false);
        groups[g].users.push_back(users.size());
        users.push_back(std::move(user));
      }
    }

    // Smart blocks: LP identities, key lists, ACH entries, channels, firmware.
    for (std::size_t b = 0; b < config.blocks.size(); ++b) {
      const BlockSpec& spec = config.blocks[b];
      std::size_t a = admin_by_name.at(spec.admin);
      AdminRt& admin = admins[a];

      // The admin is a principal in its own ledger (it signs read-grant
      // audit entries).
      add_node_private(admin, admin.identity, std::nullopt);

      for (const LpSpec& lp_spec : spec.lps) {
        LpRt lp;
        lp.name = lp_spec.name;
        Rng rng = Rng::for_actor(seed, "lp:" + lp_spec.name);
        lp.secret = rng.range(2, dh.prime - 2);
        lp.rng = std::move(rng);
        lp.identity = crypto::make_identity(kind, dh, lp.secret);
        lp.manifest = lp_spec.manifest;
        lp.position = lp_spec.position;
        lp.admin = a;
        lp.ip = lp_spec.ip;
        install_lp(admin, lp, /*provision_at=*/0);
        lp_by_node_id[lp.identity.node_id] = lps.size();
        lps.push_back(std::move(lp));
      }
      admin.ledger.set_ach_digest(admin.ach.digest(kind));
    }

    // Read-target round robin per group, stable order.
    for (GroupRt& group : groups) {
      for (std::size_t a : group.admins) {
        for (const auto& [sensor_id, info] : admins[a].registry) {
          if (!info.is_output) group.read_targets.emplace_back(sensor_id, a);
        }
      }
    }

    // Latency rows for every service present in the topology.
    for (const BlockSpec& block : config.blocks) {
      for (const LpSpec& lp : block.lps) {
        for (const codegen::Binding& s : lp.manifest.sensors) {
          metrics.latency_by_service[s.type].tolerable_ms = profile(s.type).tolerable_latency_ms;
        }
        for (const codegen::Binding& o : lp.manifest.outputs) {
          metrics.latency_by_service[o.type].tolerable_ms = profile(o.type).tolerable_latency_ms;
        }
      }
    }

    // Emission schedules: first packet one full interval in.
    for (std::size_t l = 0; l < lps.size(); ++l) {
      for (std::size_t s = 0; s < lps[l].manifest.sensors.size(); ++s) {
        const std::int64_t interval = profile(lps[l].manifest.sensors[s].type).interval_ms;
        for (std::int64_t t = interval; t <= config.duration_ms; t += interval) {
          schedule(t, EvSensorEmit{l, s, false, kNone});
        }
      }
      for (std::size_t o = 0; o < lps[l].manifest.outputs.size(); ++o) {
        const std::int64_t interval = profile(lps[l].manifest.outputs[o].type).interval_ms;
        for (std::int64_t t = interval; t <= config.duration_ms; t += interval) {
          schedule(t, EvOutputRead{l, o});
        }
      }
    }

    for (std::size_t a = 0; a < admins.size(); ++a) {
      schedule(config.ledger_flush_interval_ms, EvFlush{false, a});
      if (config.sync_interval_ms > 0) schedule(config.sync_interval_ms, EvSync{a});
    }
    for (std::size_t h = 0; h < heads.size(); ++h) {
      schedule(config.ledger_flush_interval_ms, EvFlush{true, h});
    }
    if (config.ota_attest_interval_ms > 0) {
      for (std::size_t l = 0; l < lps.size(); ++l) {
        schedule(config.ota_attest_interval_ms, EvAttestQuery{lps[l].admin, l});
      }
    }
    if (config.key_rotate_interval_ms > 0) {
      for (std::size_t l = 0; l < lps.size(); ++l) {
        schedule(config.key_rotate_interval_ms, EvKeyRotate{lps[l].admin, l});
      }
    }
    if (config.read_request_interval_ms > 0) {
      for (std::size_t u = 0; u < users.size(); ++u) {
        schedule(config.read_request_interval_ms, EvReadRequest{u});
      }
    }

    for (const CodeMutation& mutation : config.code_mutations) {
      for (std::size_t l = 0; l < lps.size(); ++l) {
        if (lps[l].name == mutation.target) schedule(mutation.at_ms, EvCodeMutate{l});
      }
    }

    init_attacks();
  }

  void init_attacks() {
    for (std::size_t s = 0; s < config.attacks.size(); ++s) {
      const AttackScript& script = config.attacks[s];
      const std::int64_t stop = std::min(script.stop_ms, config.duration_ms);
      switch (script.kind) {
        case AttackKind::dos:
        case AttackKind::ddos:
        case AttackKind::injection: {
          const int sources = script.kind == AttackKind::ddos ? std::max(1, script.sources) : 1;
          for (int i = 0; i < sources; ++i) {
            AttackerRt attacker;
            attacker.script = s;
            attacker.source = i;
            std::string label =
                "attacker:" + std::to_string(s) + ":" + std::to_string(i);
            Rng rng = Rng::for_actor(seed, label);
            attacker.secret = rng.range(2, dh.prime - 2);
            attacker.rng = std::move(rng);
            attacker.identity = crypto::make_identity(kind, dh, attacker.secret);
            attackers.push_back(std::move(attacker));
          }
          for (std::int64_t t = script.start_ms; t <= stop; t += script.interval_ms) {
            schedule(t, EvAttackFire{s});
          }
          if (script.kind == AttackKind::dos && script.listed_flood_interval_ms > 0) {
            // A listed-but-rogue node floods its own sensor channel.
            std::size_t a = admin_by_name.at(script.target);
            for (std::size_t l = 0; l < lps.size(); ++l) {
              if (lps[l].admin != a || lps[l].manifest.sensors.empty()) continue;
              for (std::int64_t t = script.start_ms; t <= stop;
                   t += script.listed_flood_interval_ms) {
                schedule(t, EvSensorEmit{l, 0, true, s});
              }
              break;
            }
          }
          break;
        }
        case AttackKind::appending:
        case AttackKind::consensus_period:
          for (std::int64_t t = script.start_ms; t <= stop; t += script.interval_ms) {
            schedule(t, EvAttackFire{s});
          }
          break;
        case AttackKind::dropping: {
          HeadRt& head = heads[head_by_name.at(script.target)];
          head.drop_enabled = true;
          head.drop_start = script.start_ms;
          head.drop_stop = stop;
          for (std::size_t a : groups[head.group].admins) {
            head.drop_victims.insert(admins[a].identity.node_id);
          }
          break;
        }
        case AttackKind::linking:
          break;  // analysis runs at finalize
        case AttackKind::routing:
          routing_transit_counter[s] = 0;
          break;  // applied per transit inside packet delivery
      }
    }
  }

  // Appends a public genesis transaction for `member` to `head`'s ledger,
  // co-signed by the current group members.
  void public_genesis(HeadRt& head, const crypto::NodeIdentity& member,
                      const std::string& member_name, HeadRt& submitter, bool bootstrap) {
    ledger::Transaction tx;
    tx.kind = ledger::TxKind::genesis_add;
    tx.public_key = member.public_key;
    tx.payload_hash = crypto::digest(kind, member_name);
    tx.timestamp_ms = 0;
    tx.policy_rules = {};
    tx.signature = crypto::schnorr_sign(
        kind, dh, bootstrap ? read_u64_be(member.private_key) : submitter.secret,
        ledger::tx_signing_bytes(tx));
    std::vector<ledger::MemberSignature> sigs = cosign(head.group, tx);
    auto result = head.ledger.append(tx, sigs, submitter.identity.node_id, {});
    if (result.status != ledger::AppendStatus::accepted) {
      raise(Errc::config_error, "bootstrap admission rejected for " + member_name);
    }
  }

  std::vector<ledger::MemberSignature> cosign(std::size_t group_idx,
                                              const ledger::Transaction& tx) {
    Bytes signing = ledger::tx_signing_bytes(tx);
    std::vector<ledger::MemberSignature> sigs;
    const GroupRt& group = groups[group_idx];
    const HeadRt& head = heads[group.head];
    sigs.push_back({head.identity.node_id,
                    crypto::schnorr_sign(kind, dh, head.secret, signing)});
    for (std::size_t a : group.admins) {
      sigs.push_back({admins[a].identity.node_id,
                      crypto::schnorr_sign(kind, dh, admins[a].secret, signing)});
    }
    for (std::size_t u : group.users) {
      sigs.push_back({users[u].identity.node_id,
                      crypto::schnorr_sign(kind, dh, users[u].secret, signing)});
    }
    return sigs;
  }

  // Honest members refuse to co-sign submissions that fail the signature
  // rules (unless that defence is switched off for the run).
  bool submission_checks_out(const HeadRt& head, const ledger::Transaction& tx,
                             const std::string& submitter_id, const Bytes& cert) {
    if (!config.defences.signature_check) return true;
    const Bytes* root = head.ledger.keylist().find(submitter_id);
    if (root == nullptr) return false;
    Bytes signing = ledger::tx_signing_bytes(tx);
    if (tx.kind == ledger::TxKind::genesis_add || tx.kind == ledger::TxKind::remove) {
      return crypto::schnorr_verify(kind, dh, read_u64_be(*root), signing, tx.signature);
    }
    return crypto::verify_key_cert(kind, dh, read_u64_be(*root), tx.public_key, cert) &&
           crypto::schnorr_verify(kind, dh, read_u64_be(tx.public_key), signing, tx.signature);
  }

  // Private-tier node admission: key pair joins the key list via a genesis
  // transaction; ACH entries are created for every binding.
  void add_node_private(AdminRt& admin, const crypto::NodeIdentity& identity,
                        std::optional<const codegen::NodeManifest*> manifest) {
    ledger::Transaction tx;
    tx.kind = ledger::TxKind::genesis_add;
    tx.public_key = identity.public_key;
    tx.payload_hash = crypto::digest(kind, identity.node_id);
    tx.timestamp_ms = static_cast<std::uint64_t>(std::max<std::int64_t>(now, 0));
    tx.policy_rules = admin.ach.canonical_bytes();
    auto result = admin.ledger.append(tx);
    if (result.status != ledger::AppendStatus::accepted) {
      raise(Errc::config_error, "private admission rejected for " + identity.node_id);
    }
    (void)manifest;
  }

  // Builds the ACH entries, channel state, registry rows and firmware for a
  // new LP under `admin`. Shared by scenario nodes and attacker admissions.
  void install_lp(AdminRt& admin, LpRt& lp, std::int64_t provision_at) {
    add_node_private(admin, lp.identity, &lp.manifest);
    admin.lp_private_keys[lp.identity.node_id] = lp.identity.private_key;

    std::set<std::string> user_readers;
    if (admin.group != kNone) {
      for (std::size_t u : groups[admin.group].users) {
        user_readers.insert(users[u].identity.node_id);
      }
    }

    for (const codegen::Binding& binding : lp.manifest.sensors) {
      const std::string sensor_id = crypto::derive_sensor_id(lp.identity.node_id, binding.pin);
      const ServiceProfile& svc = profile(binding.type);
      access::AchEntry entry;
      entry.writers = {lp.identity.node_id};
      entry.readers = user_readers;
      entry.readers.insert(admin.identity.node_id);
      entry.min_freq_ms = svc.min_freq_ms;
      entry.noftr_cutoff = svc.noftr_cutoff;
      entry.tolerable_latency_ms = svc.tolerable_latency_ms;
      admin.ach.set_entry(sensor_id, entry);
      admin.registry[sensor_id] =
          SensorInfo{binding.type, lp.position, false, 0, false, lp.identity.node_id};
    }
    for (const codegen::Binding& binding : lp.manifest.outputs) {
      const std::string output_id = crypto::derive_sensor_id(lp.identity.node_id, binding.pin);
      const ServiceProfile& svc = profile(binding.type);
      access::AchEntry entry;
      entry.readers = {lp.identity.node_id};
      entry.writers = {admin.identity.node_id};
      entry.min_freq_ms = svc.min_freq_ms;
      entry.noftr_cutoff = svc.noftr_cutoff;
      entry.tolerable_latency_ms = svc.tolerable_latency_ms;
      admin.ach.set_entry(output_id, entry);
      admin.registry[output_id] =
          SensorInfo{binding.type, lp.position, true, 0, false, lp.identity.node_id};
    }
    admin.ach.bump_version();
    admin.ledger.set_ach_digest(admin.ach.digest(kind));

    // Channel keys: DH exchange plus an admin-generated one-time key derived
    // from the node's private key and a fresh nonce.
    ChannelRt channel;
    channel.key = crypto::dh_establish(kind, dh, admin.secret, lp.identity.public_value(),
                                       lp.identity.node_id, 1);
    lp.key = crypto::dh_establish(kind, dh, lp.secret, admin.identity.public_value(),
                                  admin.identity.node_id, 1);
    Bytes nonce = lp.rng.bytes(16);
    Bytes otk = crypto::generate_otk(kind, lp.identity.private_key, nonce);
    channel.chain = crypto::initial_chain_state(kind, otk);
    lp.chain = crypto::initial_chain_state(kind, otk);
    admin.channels[lp.identity.node_id] = std::move(channel);

    lp.ach_ref = admin.ach.digest(kind);
    codegen::GeneratedCode code =
        codegen::generate_lp(lp.manifest, codegen::TemplateCatalog::builtin(), kind);
    admin.provisioned[lp.identity.node_id] = code;
    schedule(provision_at + config.delays.lp_admin_ms,
             EvProvision{lps.size(), code.rendered, false});
  }

  // ----------------------------------------------------------------- LP side

  void pump(std::size_t l) {
    LpRt& lp = lps[l];
    if (lp.in_flight.has_value() || lp.send_queue.empty()) return;
    PendingPayload payload = std::move(lp.send_queue.front());
    lp.send_queue.pop_front();
    send_payload(l, std::move(payload), 1);
  }

  void send_payload(std::size_t l, PendingPayload payload, int attempt) {
    LpRt& lp = lps[l];
    const std::int64_t delivery = now + config.delays.lp_admin_ms;
    crypto::PacketMeta meta{lp.ip, lp.identity.node_id, lp.ach_ref};
    crypto::SealResult sealed =
        crypto::seal_packet(kind, lp.chain, lp.key, lp.epoch, payload.data, meta,
                            static_cast<std::uint64_t>(delivery));
    InFlight in_flight;
    in_flight.seq = sealed.packet.sequence;
    in_flight.next = sealed.next;
    in_flight.attempts = attempt;
    Bytes wire = crypto::encode_packet(sealed.packet);
    EvPacketDeliver deliver{lp.admin, l,       std::move(wire), payload.emit_ms,
                            attempt,  payload.flood, payload.script};
    in_flight.payload = std::move(payload);
    lp.in_flight = std::move(in_flight);
    schedule(delivery, std::move(deliver));
  }

  void on(EvSensorEmit& ev) {
    LpRt& lp = lps[ev.lp];
    const codegen::Binding& binding = lp.manifest.sensors[ev.binding];
    const std::string sensor_id = crypto::derive_sensor_id(lp.identity.node_id, binding.pin);
    const auto& model = config.models.at(binding.type);
    std::vector<std::pair<std::string, double>> features;
    for (const std::string& feature : model.feature_order) {
      const auto& fm = model.features.at(feature);
      // A rate-flooding compromised node pushes fabricated readings; honest
      // emissions track the normal class.
      const misbehaviour::ClassStats& cls = ev.flood ? fm.faulty : fm.normal;
      features.emplace_back(feature, cls.mu + cls.sigma * 0.3 * lp.rng.gauss());
    }
    PendingPayload payload;
    payload.data = to_bytes(build_write_payload(sensor_id, features));
    payload.emit_ms = now;
    payload.flood = ev.flood;
    payload.script = ev.script;
    ++metrics.packets_emitted;
    if (ev.flood) ++tally(ev.script).attempts;
    lp.send_queue.push_back(std::move(payload));
    pump(ev.lp);
  }

  void on(EvOutputRead& ev) {
    LpRt& lp = lps[ev.lp];
    const codegen::Binding& binding = lp.manifest.outputs[ev.binding];
    const std::string output_id = crypto::derive_sensor_id(lp.identity.node_id, binding.pin);
    PendingPayload payload;
    payload.data = to_bytes("read|" + output_id);
    payload.emit_ms = now;
    ++metrics.packets_emitted;
    lp.send_queue.push_back(std::move(payload));
    pump(ev.lp);
  }

  void on(EvAck& ev) {
    LpRt& lp = lps[ev.lp];
    if (!lp.in_flight.has_value() || lp.in_flight->seq != ev.seq) return;
    switch (ev.kind) {
      case EvAck::ok:
        lp.chain = lp.in_flight->next;
        lp.in_flight.reset();
        break;
      case EvAck::retry: {
        InFlight current = std::move(*lp.in_flight);
        lp.in_flight.reset();
        if (current.attempts < 1 + config.max_retransmits) {
          ++metrics.retransmissions;
          send_payload(ev.lp, std::move(current.payload), current.attempts + 1);
          return;
        }
        resolve_rejected(current.payload);
        break;
      }
      case EvAck::abandon:
        resolve_rejected(lp.in_flight->payload);
        lp.in_flight.reset();
        break;
    }
    pump(ev.lp);
  }

  // Terminal rejection of a channel packet (reached via the ack path so each
  // packet lands in exactly one conservation bucket).
  void resolve_rejected(const PendingPayload& payload) {
    ++metrics.rejected;
    if (payload.script != kNone) ++tally(payload.script).detected;
  }

  // --------------------------------------------------------------- admin side

  // Applies active routing scripts to a transiting packet. Returns the
  // script index when this transit was tampered with.
  std::size_t maybe_tamper(std::size_t admin_idx, Bytes& wire) {
    for (std::size_t s = 0; s < config.attacks.size(); ++s) {
      const AttackScript& script = config.attacks[s];
      if (script.kind != AttackKind::routing) continue;
      if (admin_by_name.at(script.target) != admin_idx) continue;
      if (now < script.start_ms || now > script.stop_ms) continue;
      std::uint64_t n = routing_transit_counter[s]++;
      if (script.tamper_every > 0 &&
          n % static_cast<std::uint64_t>(script.tamper_every) == 0) {
        // Flip a bit inside the first length-prefixed field (the ciphertext).
        if (wire.size() > 4) {
          wire[4] ^= 0x01;
          ++tally(s).attempts;
          return s;
        }
      }
    }
    return kNone;
  }

  void ack(std::size_t source_lp, std::uint64_t seq, EvAck::Kind ack_kind,
           std::int64_t processing_done) {
    if (source_lp == kNone) return;
    schedule(processing_done + config.delays.lp_admin_ms,
             EvAck{source_lp, seq, ack_kind});
  }

  void on(EvPacketDeliver& ev) {
    AdminRt& admin = admins[ev.admin];
    const std::int64_t receipt = now;
    const std::int64_t done = now + config.delays.processing_ms;

    std::size_t tampered_by = maybe_tamper(ev.admin, ev.wire);

    crypto::SensorPacket packet;
    try {
      packet = crypto::decode_packet(ev.wire);
    } catch (const Error&) {
      if (ev.source_lp != kNone) {
        auto channel = admin.channels.find(lps[ev.source_lp].identity.node_id);
        if (channel != admin.channels.end()) ++channel->second.reliability.misses;
        if (tampered_by != kNone) ++tally(tampered_by).detected;
        ack(ev.source_lp, lps[ev.source_lp].in_flight ? lps[ev.source_lp].in_flight->seq : 0,
            EvAck::retry, done);
      } else {
        ++metrics.rejected;
        if (ev.script != kNone) ++tally(ev.script).detected;
      }
      return;
    }

    // Key-list gate: unknown or blocked senders are turned away before any
    // crypto runs.
    const bool listed = admin.ledger.keylist().contains(packet.node_id);
    auto channel_it = admin.channels.find(packet.node_id);
    if (!listed || channel_it == admin.channels.end()) {
      // A channel-less sender gets no response; terminal here.
      ++metrics.rejected;
      if (ev.script != kNone) ++tally(ev.script).detected;
      return;
    }
    ChannelRt& channel = channel_it->second;
    if (channel.blocked_until > now) {
      if (ev.script != kNone) {
        ++tally(ev.script).detected;
        clear_flood_flag(ev.source_lp);
      }
      ack(ev.source_lp, packet.sequence, EvAck::abandon, done);
      return;
    }

    // Hash-chain verification.
    crypto::OpenResult opened;
    if (config.defences.fhash_check) {
      opened = crypto::open_packet(kind, packet, channel.key, channel.chain,
                                   static_cast<std::uint64_t>(receipt));
    } else {
      opened.verified = true;
      opened.data = crypto::stream_crypt(kind, channel.key, packet.node_id, packet.sequence,
                                         packet.encrypted_data);
      opened.next = crypto::advance_chain(kind, channel.chain,
                                          static_cast<std::uint64_t>(receipt), opened.data, {});
    }
    if (!opened.verified) {
      ++channel.reliability.misses;
      if (tampered_by != kNone) ++tally(tampered_by).detected;
      ack(ev.source_lp, packet.sequence, EvAck::retry, done);
      return;
    }
    ++channel.reliability.hits;
    channel.chain = opened.next;

    ParsedPayload payload = parse_payload(opened.data);
    if (!payload.ok) {
      // Only reachable with verification disabled and the payload garbled.
      if (tampered_by != kNone) ++tally(tampered_by).succeeded;
      accept_packet(ev, admin, packet, receipt, done, "", nullptr);
      return;
    }

    auto registry_it = admin.registry.find(payload.target);
    const SensorInfo* info =
        registry_it == admin.registry.end() ? nullptr : &registry_it->second;

    access::AccessDecision decision = access::evaluate(
        admin.ach, packet.node_id, payload.target,
        payload.is_read ? access::Direction::read : access::Direction::write,
        admin.ledger.keylist(), access::SignatureCheck::not_required, blocked_set(admin));
    if (!decision.granted) {
      if (ev.script != kNone) {
        ++tally(ev.script).detected;
        clear_flood_flag(ev.source_lp);
      }
      ack(ev.source_lp, packet.sequence, EvAck::abandon, done);
      return;
    }

    if (payload.is_read) {
      // An output polling its value: log the read grant, answer the node.
      ledger::Transaction tx;
      tx.kind = ledger::TxKind::read;
      tx.public_key = *admin.ledger.keylist().find(packet.node_id);
      tx.payload_hash = crypto::digest(kind, payload.target);
      tx.timestamp_ms = static_cast<std::uint64_t>(receipt);
      tx.output_ref = payload.target;
      tx.policy_rules = admin.ach.canonical_bytes();
      admin.ledger.append(tx);
      record_latency(info, done - ev.emit_ms);
      record_accept_bucket(ev.attempt);
      ack(ev.source_lp, packet.sequence, EvAck::ok, done);
      return;
    }

    // Misbehaviour detectors run before the transaction is granted.
    const access::AchEntry& entry = *decision.consulted_entry;
    misbehaviour::TimeConfig time_config{entry.min_freq_ms, entry.noftr_cutoff};
    misbehaviour::TimeState& time_state = channel.time_state[payload.target];
    misbehaviour::TimeCheck time_check = misbehaviour::check_time(time_state, receipt, time_config);
    time_state = time_check.next;

    bool central_flag = false;
    bool conflict = false;
    if (info != nullptr && config.models.count(info->type)) {
      const auto& model = config.models.at(info->type);
      std::vector<std::pair<std::string, double>> observations;
      for (const auto& [name, value] : payload.features) {
        if (model.features.count(name)) observations.emplace_back(name, value);
      }
      if (!observations.empty()) {
        try {
          central_flag = misbehaviour::classify_central(model, observations).faulty;
        } catch (const Error& e) {
          if (e.code() != Errc::total_conflict) throw;
          conflict = true;
          central_flag = true;
          ++metrics.conflict_anomalies;
        }
      }
    }

    bool distributed_flag = false;
    if (info != nullptr && !payload.features.empty()) {
      const double primary = payload.features.front().second;
      misbehaviour::NeighborWindow window;
      window.center = info->position;
      window.arm = config.dnm_arm;
      window.own_reading = primary;
      for (const auto& [other_id, other] : admin.registry) {
        if (other_id == payload.target || other.is_output || !other.has_value ||
            other.type != info->type) {
          continue;
        }
        window.neighbors.push_back({other.lp_node_id, other.position, other.primary});
      }
      const ServiceProfile& svc = profile(info->type);
      misbehaviour::DnmConfig dnm_config{
          svc.dnm_threshold > 0 ? svc.dnm_threshold : config.dnm_threshold,
          config.dnm_normalize};
      try {
        distributed_flag = misbehaviour::dnm(window, dnm_config).compromised;
      } catch (const Error& e) {
        if (e.code() != Errc::insufficient_neighbors) throw;
      }
    }

    misbehaviour::PmComponents components;
    components.time = time_check.compromised;
    components.data_central = central_flag;
    components.data_distributed = distributed_flag;
    components.reliability = misbehaviour::network_reliability(channel.reliability);
    misbehaviour::PMReport pm = misbehaviour::assess_pm(components, config.pm);
    (void)conflict;

    std::string lp_label =
        lp_by_node_id.count(packet.node_id) ? lps[lp_by_node_id.at(packet.node_id)].name
                                            : packet.node_id;
    metrics.pm_history[lp_label + "/" + payload.target].push_back(
        PmSample{receipt, pm.pm});

    if (pm.penalty_ms.has_value() && config.defences.time_penalty) {
      channel.blocked_until = now + *pm.penalty_ms;
      ++metrics.penalties_applied;
      // reset-on-penalty for the tripping sensor's counter
      channel.time_state[payload.target].noftr = 0;
      if (ev.script != kNone) {
        ++tally(ev.script).detected;
        clear_flood_flag(ev.source_lp);
      }
      ack(ev.source_lp, packet.sequence, EvAck::abandon, done);
      return;
    }

    // Accept: ledger write, registry update, latency sample, acknowledgement.
    if (info != nullptr && registry_it != admin.registry.end() && !payload.features.empty()) {
      registry_it->second.primary = payload.features.front().second;
      registry_it->second.has_value = true;
    }
    accept_packet(ev, admin, packet, receipt, done, payload.target, info);

    if (ev.flood) {
      // A rate-flood packet that the detectors should have stopped counts as
      // a success for the attacker; below the cutoff it is indistinguishable
      // from honest traffic.
      if (time_state.noftr >= entry.noftr_cutoff) {
        ++tally(ev.script).succeeded;
      } else {
        ++tally(ev.script).ignored;
      }
      clear_flood_flag(ev.source_lp);
    } else if (ev.script != kNone) {
      ++tally(ev.script).succeeded;  // admitted attacker landed a transaction
      clear_flood_flag(ev.source_lp);
    }
  }

  void clear_flood_flag(std::size_t source_lp) {
    // The packet's attack outcome is tallied exactly once; the ack path must
    // not double-count it as detected.
    if (source_lp != kNone && lps[source_lp].in_flight.has_value()) {
      lps[source_lp].in_flight->payload.flood = false;
      lps[source_lp].in_flight->payload.script = kNone;
    }
  }

  void accept_packet(const EvPacketDeliver& ev, AdminRt& admin,
                     const crypto::SensorPacket& packet, std::int64_t receipt, std::int64_t done,
                     const std::string& target, const SensorInfo* info) {
    ledger::Transaction tx;
    tx.kind = ledger::TxKind::write;
    tx.public_key = *admin.ledger.keylist().find(packet.node_id);
    tx.payload_hash = crypto::digest(kind, packet.encrypted_data);
    tx.timestamp_ms = static_cast<std::uint64_t>(receipt);
    tx.output_ref = target;
    tx.policy_rules = admin.ach.canonical_bytes();
    admin.ledger.append(tx);
    record_latency(info, done - ev.emit_ms);
    record_accept_bucket(ev.attempt);
    ack(ev.source_lp, packet.sequence, EvAck::ok, done);
  }

  void record_latency(const SensorInfo* info, std::int64_t latency) {
    if (info == nullptr) return;
    metrics.latency_by_service[info->type].samples_ms.push_back(latency);
  }

  void record_accept_bucket(int attempt) {
    if (attempt <= 1) {
      ++metrics.accepted_first_try;
    } else {
      ++metrics.accepted_after_retransmit;
    }
  }

  std::set<std::string> blocked_set(const AdminRt& admin) const {
    std::set<std::string> blocked;
    for (const auto& [node_id, channel] : admin.channels) {
      if (channel.blocked_until > now) blocked.insert(node_id);
    }
    return blocked;
  }

  // ------------------------------------------------------------ ledger events

  void on(EvFlush& ev) {
    if (ev.is_head) {
      heads[ev.index].ledger.flush();
    } else {
      admins[ev.index].ledger.flush();
    }
    const std::int64_t next = now + config.ledger_flush_interval_ms;
    if (next <= config.duration_ms) schedule(next, EvFlush{ev.is_head, ev.index});
  }

  void on(EvSync& ev) {
    AdminRt& admin = admins[ev.admin];
    const auto& blocks = admin.ledger.chain().blocks();
    for (const ledger::Block& block : blocks) {
      if (admin.blocks_in_flight.count(block.block_hash)) continue;
      if (admin.blocks_synced.count(block.block_hash)) continue;
      ledger::Transaction tx;
      tx.kind = ledger::TxKind::write;
      tx.payload_hash = block.block_hash;
      tx.timestamp_ms = block.transactions.empty() ? 0 : block.transactions.back().timestamp_ms;
      submit_to_head(ev.admin, std::move(tx), block.block_hash);
    }
    const std::int64_t next = now + config.sync_interval_ms;
    if (next <= config.duration_ms) schedule(next, EvSync{ev.admin});
  }

  void submit_to_head(std::size_t admin_idx, ledger::Transaction tx, Bytes block_hash) {
    AdminRt& admin = admins[admin_idx];
    ledger::SyncContext ctx{kind,
                            dh,
                            admin.identity.node_id,
                            admin.identity.private_key,
                            &admin.tx_counter,
                            config.defences.per_tx_keys,
                            {}};
    Bytes cert;
    tx = ledger::sign_public_tx(std::move(tx), ctx, cert);
    const std::uint64_t id = admin.next_submission_id++;
    PendingSubmission pending;
    pending.tx = tx;
    pending.cert = cert;
    pending.private_block_hash = block_hash;
    pending.attempts = 1;
    admin.submissions[id] = pending;
    if (!block_hash.empty()) admin.blocks_in_flight.insert(block_hash);
    EvSubmissionDeliver deliver;
    deliver.head = admin.current_head;
    deliver.submitter = admin_idx;
    deliver.submission_id = id;
    deliver.tx = std::move(tx);
    deliver.cert = std::move(cert);
    deliver.submitter_node_id = admin.identity.node_id;
    schedule(now + config.delays.admin_head_ms, std::move(deliver));
    schedule(now + config.response_timeout_ms, EvSubmissionTimeout{admin_idx, id});
  }

  void on(EvSubmissionDeliver& ev) {
    HeadRt& head = heads[ev.head];
    if (head.drop_enabled && now >= head.drop_start && now <= head.drop_stop &&
        head.drop_victims.count(ev.submitter_node_id) > 0 && !ev.from_user) {
      return;  // silently dropped; the submitter's timeout will notice
    }

    // Read requests pass the access gate before anything is appended.
    if (ev.from_user) {
      const bool checks = submission_checks_out(head, ev.tx, ev.submitter_node_id, ev.cert);
      AdminRt& owner = admins[ev.read_admin];
      access::AccessDecision decision = access::evaluate(
          owner.ach, ev.submitter_node_id, ev.read_target, access::Direction::read,
          head.ledger.keylist(),
          checks ? access::SignatureCheck::passed : access::SignatureCheck::failed);
      bool ok = decision.granted;
      if (ok) {
        auto sigs = ev.gather_cosigners ? cosign_checked(head, ev.tx, ev.submitter_node_id,
                                                         ev.cert)
                                        : ev.sigs;
        auto result = head.ledger.append(ev.tx, sigs, ev.submitter_node_id, ev.cert);
        ok = result.status == ledger::AppendStatus::accepted;
      }
      if (ok) {
        ++metrics.reads_granted;
        schedule(now + config.delays.admin_head_ms,
                 EvAdminReadLog{ev.read_admin, ev.read_target, ev.submitter_node_id});
      } else {
        ++metrics.reads_denied;
      }
      schedule(now + config.delays.admin_head_ms,
               EvSubmissionResponse{true, ev.submitter, ev.submission_id, ok});
      return;
    }

    auto sigs = ev.gather_cosigners ? cosign_checked(head, ev.tx, ev.submitter_node_id, ev.cert)
                                    : ev.sigs;
    auto result = head.ledger.append(ev.tx, sigs, ev.submitter_node_id, ev.cert);
    const bool ok = result.status == ledger::AppendStatus::accepted;

    if (ev.script != kNone) {
      if (ok) {
        ++tally(ev.script).succeeded;
      } else {
        ++tally(ev.script).detected;
      }
      return;  // attackers get no courtesy response
    }
    schedule(now + config.delays.admin_head_ms,
             EvSubmissionResponse{false, ev.submitter, ev.submission_id, ok});
  }

  std::vector<ledger::MemberSignature> cosign_checked(const HeadRt& head,
                                                      const ledger::Transaction& tx,
                                                      const std::string& submitter_id,
                                                      const Bytes& cert) {
    if (!submission_checks_out(head, tx, submitter_id, cert)) return {};
    return cosign(head.group, tx);
  }

  void on(EvSubmissionResponse& ev) {
    if (ev.to_user) return;  // users just observe the outcome
    AdminRt& admin = admins[ev.submitter];
    auto it = admin.submissions.find(ev.submission_id);
    if (it == admin.submissions.end() || it->second.resolved) return;
    it->second.resolved = true;
    if (!it->second.private_block_hash.empty()) {
      admin.blocks_in_flight.erase(it->second.private_block_hash);
      if (ev.ok) admin.blocks_synced.insert(it->second.private_block_hash);
    }
    if (ev.ok) admin.consecutive_failures = 0;
  }

  void on(EvSubmissionTimeout& ev) {
    AdminRt& admin = admins[ev.admin];
    auto it = admin.submissions.find(ev.submission_id);
    if (it == admin.submissions.end() || it->second.resolved) return;
    PendingSubmission& submission = it->second;
    submission.resolved = true;  // this attempt is dead; a retry is a new one
    ++admin.consecutive_failures;

    std::size_t dropping_script = kNone;
    const HeadRt& head = heads[admin.current_head];
    for (std::size_t s = 0; s < config.attacks.size(); ++s) {
      if (config.attacks[s].kind == AttackKind::dropping &&
          head_by_name.at(config.attacks[s].target) == admin.current_head) {
        dropping_script = s;
      }
    }
    if (dropping_script != kNone) ++tally(dropping_script).attempts;
    (void)head;

    const bool can_rehome = config.defences.rehoming && !admin.fallback_heads.empty() &&
                            admin.consecutive_failures >= config.rehome_failure_threshold;
    if (can_rehome) {
      rehome(ev.admin);
      if (dropping_script != kNone) ++tally(dropping_script).detected;
      resubmit(ev.admin, submission);
      return;
    }
    if (submission.attempts < config.max_submission_attempts) {
      if (dropping_script != kNone) ++tally(dropping_script).detected;
      resubmit(ev.admin, submission, submission.attempts + 1);
      return;
    }
    // Abandoned: the transaction never reached any ledger.
    if (dropping_script != kNone) ++tally(dropping_script).succeeded;
    if (!submission.private_block_hash.empty()) {
      admin.blocks_in_flight.erase(submission.private_block_hash);
    }
  }

  void resubmit(std::size_t admin_idx, const PendingSubmission& previous, int attempts = 1) {
    AdminRt& admin = admins[admin_idx];
    const std::uint64_t id = admin.next_submission_id++;
    PendingSubmission fresh = previous;
    fresh.resolved = false;
    fresh.attempts = attempts;
    admin.submissions[id] = fresh;
    EvSubmissionDeliver deliver;
    deliver.head = admin.current_head;
    deliver.submitter = admin_idx;
    deliver.submission_id = id;
    deliver.tx = fresh.tx;
    deliver.cert = fresh.cert;
    deliver.submitter_node_id = admin.identity.node_id;
    schedule(now + config.delays.admin_head_ms, std::move(deliver));
    schedule(now + config.response_timeout_ms, EvSubmissionTimeout{admin_idx, id});
  }

  void rehome(std::size_t admin_idx) {
    AdminRt& admin = admins[admin_idx];
    const std::size_t new_head = admin.fallback_heads.front();
    admin.fallback_heads.erase(admin.fallback_heads.begin());
    // Move group membership: the fallback head admits the member.
    GroupRt& old_group = groups[heads[admin.current_head].group];
    old_group.admins.erase(
        std::remove(old_group.admins.begin(), old_group.admins.end(), admin_idx),
        old_group.admins.end());
    HeadRt& target = heads[new_head];
    if (!target.ledger.keylist().contains(admin.identity.node_id)) {
      ledger::Transaction tx;
      tx.kind = ledger::TxKind::genesis_add;
      tx.public_key = admin.identity.public_key;
      tx.payload_hash = crypto::digest(kind, admin.name);
      tx.timestamp_ms = static_cast<std::uint64_t>(now);
      tx.signature =
          crypto::schnorr_sign(kind, dh, target.secret, ledger::tx_signing_bytes(tx));
      auto sigs = cosign(target.group, tx);
      target.ledger.append(tx, sigs, target.identity.node_id, {});
    }
    groups[target.group].admins.push_back(admin_idx);
    admin.group = target.group;
    admin.current_head = new_head;
    admin.consecutive_failures = 0;
    ++metrics.rehomes;
  }

  // --------------------------------------------------------------- user reads

  void on(EvReadRequest& ev) {
    UserRt& user = users[ev.user];
    const GroupRt& group = groups[user.group];
    if (!group.read_targets.empty()) {
      const auto& [sensor_id, owner] =
          group.read_targets[user.read_cursor % group.read_targets.size()];
      ++user.read_cursor;
      ledger::Transaction tx;
      tx.kind = ledger::TxKind::read;
      tx.payload_hash = crypto::digest(kind, sensor_id);
      tx.timestamp_ms = static_cast<std::uint64_t>(now);
      tx.output_ref = sensor_id;
      ledger::SyncContext ctx{kind,
                              dh,
                              user.identity.node_id,
                              user.identity.private_key,
                              &user.tx_counter,
                              config.defences.per_tx_keys,
                              {}};
      Bytes cert;
      tx = ledger::sign_public_tx(std::move(tx), ctx, cert);
      EvSubmissionDeliver deliver;
      deliver.head = group.head;
      deliver.from_user = true;
      deliver.submitter = ev.user;
      deliver.submission_id = user.tx_counter;
      deliver.tx = std::move(tx);
      deliver.cert = std::move(cert);
      deliver.submitter_node_id = user.identity.node_id;
      deliver.read_target = sensor_id;
      deliver.read_admin = owner;
      schedule(now + config.delays.admin_head_ms, std::move(deliver));
    }
    const std::int64_t next = now + config.read_request_interval_ms;
    if (next <= config.duration_ms) schedule(next, EvReadRequest{ev.user});
  }

  void on(EvAdminReadLog& ev) {
    AdminRt& admin = admins[ev.admin];
    ledger::Transaction tx;
    tx.kind = ledger::TxKind::read;
    tx.public_key = admin.identity.public_key;  // owner-signed audit entry
    tx.payload_hash = crypto::digest(kind, ev.reader_id);
    tx.timestamp_ms = static_cast<std::uint64_t>(now);
    tx.output_ref = ev.sensor_id;
    tx.policy_rules = admin.ach.canonical_bytes();
    admin.ledger.append(tx);
  }

  // ------------------------------------------------------------ firmware, keys

  void on(EvProvision& ev) {
    if (ev.lp >= lps.size()) return;
    lps[ev.lp].running_code = ev.code;
    if (ev.reprovision) ++metrics.reprovisions;
  }

  void on(EvCodeMutate& ev) {
    LpRt& lp = lps[ev.lp];
    if (lp.running_code.empty()) return;
    lp.running_code[lp.running_code.size() / 2] ^= 0x01;
  }

  void on(EvAttestQuery& ev) {
    // Round trip: the admin asks, the node answers with its running code.
    schedule(now + config.delays.lp_admin_ms,
             EvAttestReply{ev.admin, ev.lp, lps[ev.lp].running_code});
    const std::int64_t next = now + config.ota_attest_interval_ms;
    if (next <= config.duration_ms) schedule(next, EvAttestQuery{ev.admin, ev.lp});
  }

  void on(EvAttestReply& ev) {
    AdminRt& admin = admins[ev.admin];
    const LpRt& lp = lps[ev.lp];
    auto it = admin.provisioned.find(lp.identity.node_id);
    if (it == admin.provisioned.end()) return;
    ++metrics.attest_checks;
    if (!codegen::attest(it->second, ev.observed)) {
      ++metrics.attest_failures;
      schedule(now + config.delays.lp_admin_ms,
               EvProvision{ev.lp, it->second.rendered, true});
    }
  }

  void on(EvKeyRotate& ev) {
    AdminRt& admin = admins[ev.admin];
    LpRt& lp = lps[ev.lp];
    auto it = admin.channels.find(lp.identity.node_id);
    if (it != admin.channels.end()) {
      const std::uint64_t epoch = it->second.epoch + 1;
      it->second.key = crypto::dh_establish(kind, dh, admin.secret, lp.identity.public_value(),
                                            lp.identity.node_id, epoch);
      it->second.epoch = epoch;
      lp.key = crypto::dh_establish(kind, dh, lp.secret, admin.identity.public_value(),
                                    admin.identity.node_id, epoch);
      lp.epoch = epoch;
      ++metrics.key_rotations;
    }
    const std::int64_t next = now + config.key_rotate_interval_ms;
    if (next <= config.duration_ms) schedule(next, EvKeyRotate{ev.admin, ev.lp});
  }

  // ----------------------------------------------------------------- attacks

  AttackerRt* attacker_for(std::size_t script, int source) {
    for (AttackerRt& attacker : attackers) {
      if (attacker.script == script && attacker.source == source) return &attacker;
    }
    return nullptr;
  }

  void on(EvAttackFire& ev) {
    const AttackScript& script = config.attacks[ev.script];
    switch (script.kind) {
      case AttackKind::dos:
      case AttackKind::ddos:
      case AttackKind::injection: {
        const int sources = script.kind == AttackKind::ddos ? std::max(1, script.sources) : 1;
        for (int i = 0; i < sources; ++i) {
          fire_packet_attack(ev.script, i);
        }
        break;
      }
      case AttackKind::appending: fire_appending(ev.script); break;
      case AttackKind::consensus_period: fire_consensus(ev.script); break;
      default: break;
    }
  }

  void fire_packet_attack(std::size_t script_idx, int source) {
    const AttackScript& script = config.attacks[script_idx];
    AttackerRt* attacker = attacker_for(script_idx, source);
    if (attacker == nullptr) return;
    std::size_t admin_idx = admin_by_name.at(script.target);
    AdminRt& admin = admins[admin_idx];

    if (!attacker->admission_attempted) {
      attacker->admission_attempted = true;
      // Admission control is the defence: with the gate off, the admin's
      // add-node runs for an unknown requester and hands it credentials.
      if (!config.defences.keylist_gate) {
        LpRt lp;
        lp.name = "attacker-" + std::to_string(script_idx) + "-" + std::to_string(source);
        lp.rng = Rng(attacker->rng.next_u64());
        lp.secret = attacker->rng.range(2, dh.prime - 2);
        lp.identity = crypto::make_identity(kind, dh, lp.secret);
        // mimics the smart block's first node so windows and models line up
        const LpRt& mimic = lps[first_lp_of(admin_idx)];
        codegen::Binding binding = mimic.manifest.sensors.empty()
                                       ? codegen::Binding{"X0", "weather", 1000}
                                       : mimic.manifest.sensors.front();
        binding.pin = "X0";
        lp.manifest.node = lp.name;
        lp.manifest.board = "esp-class";
        lp.manifest.sensors = {binding};
        lp.position = mimic.position;
        lp.admin = admin_idx;
        lp.ip = "10.66.6." + std::to_string(source);
        lp.is_attacker = true;
        lp.script = script_idx;
        install_lp(admin, lp, now);
        attacker->admitted = true;
        attacker->lp = lps.size();
        lp_by_node_id[lp.identity.node_id] = lps.size();
        lps.push_back(std::move(lp));
      }
    }

    ++tally(script_idx).attempts;
    ++metrics.packets_emitted;
    if (attacker->admitted) {
      LpRt& lp = lps[attacker->lp];
      const codegen::Binding& binding = lp.manifest.sensors.front();
      const std::string sensor_id = crypto::derive_sensor_id(lp.identity.node_id, binding.pin);
      const auto& model = config.models.at(binding.type);
      std::vector<std::pair<std::string, double>> features;
      for (const std::string& feature : model.feature_order) {
        const auto& fm = model.features.at(feature);
        features.emplace_back(feature,
                              fm.normal.mu + fm.normal.sigma * 0.3 * lp.rng.gauss());
      }
      PendingPayload payload;
      payload.data = to_bytes(build_write_payload(sensor_id, features));
      payload.emit_ms = now;
      payload.script = script_idx;
      lp.send_queue.push_back(std::move(payload));
      pump(attacker->lp);
    } else {
      // No credentials: a self-signed packet that must bounce off the gate.
      crypto::SensorPacket packet;
      packet.encrypted_data = attacker->rng.bytes(24);
      packet.fhash = attacker->rng.bytes(crypto::digest_size(kind));
      packet.lp_ip = "10.66.6." + std::to_string(source);
      packet.node_id = attacker->identity.node_id;
      packet.sequence = attacker->raw_seq++;
      packet.ach_ref = attacker->rng.bytes(8);
      EvPacketDeliver deliver{admin_idx, kNone, crypto::encode_packet(packet), now, 1, false,
                              script_idx};
      schedule(now + config.delays.lp_admin_ms, std::move(deliver));
    }
  }

  std::size_t first_lp_of(std::size_t admin_idx) const {
    for (std::size_t l = 0; l < lps.size(); ++l) {
      if (lps[l].admin == admin_idx && !lps[l].is_attacker) return l;
    }
    return 0;
  }

  void fire_appending(std::size_t script_idx) {
    const AttackScript& script = config.attacks[script_idx];
    HeadRt& head = heads[head_by_name.at(script.target)];
    const GroupRt& group = groups[head.group];
    if (group.admins.empty()) return;
    // Forged transaction: claims to come from a real member but is signed
    // with the attacker's own key.
    Rng rng = Rng::for_actor(seed, "appending:" + std::to_string(script_idx) +
                                       ":" + std::to_string(now));
    std::uint64_t fake_secret = rng.range(2, dh.prime - 2);
    ledger::Transaction tx;
    tx.kind = ledger::TxKind::write;
    tx.public_key = u64_be(crypto::dh_public(dh, fake_secret));
    tx.payload_hash = crypto::digest(kind, std::string_view("forged-reputation"));
    tx.timestamp_ms = static_cast<std::uint64_t>(now);
    tx.signature = crypto::schnorr_sign(kind, dh, fake_secret, ledger::tx_signing_bytes(tx));
    Bytes cert = rng.bytes(16);  // not a valid certificate

    ++tally(script_idx).attempts;
    EvSubmissionDeliver deliver;
    deliver.head = head_by_name.at(script.target);
    deliver.submitter = kNone;
    deliver.tx = std::move(tx);
    deliver.cert = std::move(cert);
    deliver.submitter_node_id = admins[group.admins.front()].identity.node_id;
    deliver.script = script_idx;
    schedule(now + config.delays.admin_head_ms, std::move(deliver));
  }

  void fire_consensus(std::size_t script_idx) {
    const AttackScript& script = config.attacks[script_idx];
    // A compromised member forges reputation on its own: valid certificate
    // and signature, but no co-signers. Only the quorum rule stands.
    std::size_t admin_idx = admin_by_name.at(script.target);
    AdminRt& rogue = admins[admin_idx];
    ledger::Transaction tx;
    tx.kind = ledger::TxKind::write;
    tx.payload_hash = crypto::digest(kind, std::string_view("self-reputation"));
    tx.timestamp_ms = static_cast<std::uint64_t>(now);
    ledger::SyncContext ctx{kind,
                            dh,
                            rogue.identity.node_id,
                            rogue.identity.private_key,
                            &rogue.tx_counter,
                            config.defences.per_tx_keys,
                            {}};
    Bytes cert;
    tx = ledger::sign_public_tx(std::move(tx), ctx, cert);
    std::vector<ledger::MemberSignature> own_sig{
        {rogue.identity.node_id,
         crypto::schnorr_sign(kind, dh, rogue.secret, ledger::tx_signing_bytes(tx))}};

    ++tally(script_idx).attempts;
    EvSubmissionDeliver deliver;
    deliver.head = rogue.current_head;
    deliver.submitter = kNone;
    deliver.tx = std::move(tx);
    deliver.cert = std::move(cert);
    deliver.submitter_node_id = rogue.identity.node_id;
    deliver.gather_cosigners = false;
    deliver.sigs = std::move(own_sig);
    deliver.script = script_idx;
    schedule(now + config.delays.admin_head_ms, std::move(deliver));
  }

  // ---------------------------------------------------------------- finalize

  void finalize() {
    for (AdminRt& admin : admins) admin.ledger.flush();
    for (HeadRt& head : heads) head.ledger.flush();

    for (const AdminRt& admin : admins) {
      metrics.ledgers[admin.name] = summarize(admin.ledger.chain());
      for (const auto& [node_id, channel] : admin.channels) {
        std::string label = lp_by_node_id.count(node_id) ? lps[lp_by_node_id.at(node_id)].name
                                                         : node_id;
        metrics.reliability_by_node[label] = channel.reliability;
      }
    }
    for (const HeadRt& head : heads) {
      metrics.ledgers[head.name] = summarize(head.ledger.chain());
    }

    for (auto& [service, stats] : metrics.latency_by_service) {
      std::sort(stats.samples_ms.begin(), stats.samples_ms.end());
    }

    // Linking analysis: does any public transaction key recur?
    for (std::size_t s = 0; s < config.attacks.size(); ++s) {
      if (config.attacks[s].kind != AttackKind::linking) continue;
      const HeadRt& head = heads[head_by_name.at(config.attacks[s].target)];
      std::map<Bytes, std::uint64_t> uses;
      std::uint64_t analyzed = 0;
      for (const ledger::Block& block : head.ledger.chain().blocks()) {
        for (const ledger::Transaction& tx : block.transactions) {
          if (tx.kind != ledger::TxKind::write && tx.kind != ledger::TxKind::read) continue;
          ++analyzed;
          ++uses[tx.public_key];
        }
      }
      std::uint64_t linkable = 0;
      for (const auto& [key, count] : uses) {
        if (count >= 2) linkable += count;
      }
      AttackTally& t = tally(s);
      t.attempts += analyzed;
      t.succeeded += linkable;
      t.ignored += analyzed - linkable;
      metrics.linking_key_reuses += linkable;
    }

    // Attack tallies must balance; anything not explicitly attributed was
    // ignored by design.
    for (auto& [kind_name, t] : metrics.attacks) {
      const std::uint64_t attributed = t.detected + t.succeeded + t.ignored;
      if (attributed < t.attempts) t.ignored += t.attempts - attributed;
    }
  }

  ChainSummary summarize(const ledger::ChainStore& chain) {
    ChainSummary summary;
    summary.height = chain.height();
    for (const ledger::Block& block : chain.blocks()) {
      summary.transactions += block.transactions.size();
    }
    ledger::VerifyResult verdict = ledger::verify_chain(chain);
    summary.valid = verdict.valid;
    summary.first_bad_height = verdict.first_bad_height.value_or(0);
    return summary;
  }

  MetricsReport run() {
    if (ran) raise(Errc::invalid_argument, "simulation already ran");
    ran = true;
    init();
    while (!queue.empty()) {
      Event event = queue.top();
      queue.pop();
      now = event.time;
      std::visit([this](auto& payload) { this->on(payload); }, event.payload);
    }
    finalize();
    return metrics;
  }
};

Simulation::Simulation(ScenarioConfig config, std::uint64_t seed)
    : impl_(std::make_unique<SimImpl>(std::move(config), seed)) {}

Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

MetricsReport Simulation::run() { return impl_->run(); }

std::vector<Simulation::ChainRef> Simulation::chains() const {
  std::vector<ChainRef> refs;
  for (const AdminRt& admin : impl_->admins) {
    refs.push_back({admin.name, false, &admin.ledger.chain()});
  }
  for (const HeadRt& head : impl_->heads) {
    refs.push_back({head.name, true, &head.ledger.chain()});
  }
  return refs;
}

MetricsReport run_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  Simulation simulation(config, seed);
  return simulation.run();
}

}  // namespace canopy::sim
