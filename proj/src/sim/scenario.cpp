#include "canopy/sim/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "canopy/error.hpp"
#include "json.hpp"

namespace canopy::sim {

using nlohmann::json;

const char* attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::dos: return "dos";
    case AttackKind::ddos: return "ddos";
    case AttackKind::injection: return "injection";
    case AttackKind::appending: return "appending";
    case AttackKind::consensus_period: return "consensus_period";
    case AttackKind::dropping: return "dropping";
    case AttackKind::linking: return "linking";
    case AttackKind::routing: return "routing";
  }
  return "?";
}

AttackKind attack_kind_from_name(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(AttackKind::routing); ++i) {
    auto kind = static_cast<AttackKind>(i);
    if (name == attack_kind_name(kind)) return kind;
  }
  raise(Errc::config_error, "unknown attack kind '" + name + "'");
}

std::map<std::string, ServiceProfile> default_service_profiles() {
  const std::int64_t minute = 60'000;
  std::map<std::string, ServiceProfile> services;
  services["gps"] = {30 * minute, 30 * minute, 30 * minute, 3, 0};
  services["health_structure"] = {10 * minute, 30 * minute, 10 * minute, 3, 0};
  services["weather"] = {1 * minute, 1 * minute, 5'000, 3, 0};
  services["air_quality"] = {30 * minute, 5 * minute, 30 * minute, 3, 0};
  services["smart_light"] = {1 * minute, 1 * minute, 5'000, 3, 0};
  services["camera"] = {1 * minute, 0, 5'000, 3, 0};
  services["traffic_light"] = {30 * minute, 0, 30 * minute, 3, 0};
  return services;
}

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& why) {
  raise(Errc::config_error, path + ": " + why);
}

const json& need(const json& node, const std::string& key, const std::string& path) {
  auto it = node.find(key);
  if (it == node.end()) bad(path + "/" + key, "missing required field");
  return *it;
}

std::int64_t need_int(const json& node, const std::string& key, const std::string& path) {
  const json& v = need(node, key, path);
  if (!v.is_number_integer()) bad(path + "/" + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::int64_t opt_int(const json& node, const std::string& key, std::int64_t fallback,
                     const std::string& path) {
  auto it = node.find(key);
  if (it == node.end()) return fallback;
  if (!it->is_number_integer()) bad(path + "/" + key, "expected an integer");
  return it->get<std::int64_t>();
}

double opt_double(const json& node, const std::string& key, double fallback,
                  const std::string& path) {
  auto it = node.find(key);
  if (it == node.end()) return fallback;
  if (!it->is_number()) bad(path + "/" + key, "expected a number");
  return it->get<double>();
}

bool opt_bool(const json& node, const std::string& key, bool fallback, const std::string& path) {
  auto it = node.find(key);
  if (it == node.end()) return fallback;
  if (!it->is_boolean()) bad(path + "/" + key, "expected a boolean");
  return it->get<bool>();
}

std::string need_string(const json& node, const std::string& key, const std::string& path) {
  const json& v = need(node, key, path);
  if (!v.is_string()) bad(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

std::string opt_string(const json& node, const std::string& key, const std::string& fallback,
                       const std::string& path) {
  auto it = node.find(key);
  if (it == node.end()) return fallback;
  if (!it->is_string()) bad(path + "/" + key, "expected a string");
  return it->get<std::string>();
}

codegen::Binding parse_binding(const json& node, const std::string& path) {
  codegen::Binding binding;
  binding.pin = need_string(node, "pin", path);
  binding.type = need_string(node, "type", path);
  binding.delay_ms = opt_int(node, "delay_ms", 1000, path);
  return binding;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text, const std::string& origin,
                              const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    raise(Errc::config_error, origin + ": " + e.what());
  }
  if (!root.is_object()) bad(origin, "scenario must be a JSON object");

  ScenarioConfig config;
  config.name = opt_string(root, "name", "scenario", origin);
  config.digest = crypto::digest_kind_from_name(opt_string(root, "digest", "sha256", origin));
  config.duration_ms = need_int(root, "duration_ms", origin);
  if (config.duration_ms <= 0) bad(origin + "/duration_ms", "must be positive");

  if (auto it = root.find("dh"); it != root.end()) {
    config.dh.prime = static_cast<std::uint64_t>(need_int(*it, "prime", origin + "/dh"));
    config.dh.generator = static_cast<std::uint64_t>(need_int(*it, "generator", origin + "/dh"));
    if (config.dh.prime < 5 || config.dh.generator < 2 ||
        config.dh.generator >= config.dh.prime) {
      bad(origin + "/dh", "degenerate group parameters");
    }
  }

  if (auto it = root.find("delays"); it != root.end()) {
    config.delays.lp_admin_ms = opt_int(*it, "lp_admin_ms", 50, origin + "/delays");
    config.delays.admin_head_ms = opt_int(*it, "admin_head_ms", 200, origin + "/delays");
    config.delays.processing_ms = opt_int(*it, "processing_ms", 5, origin + "/delays");
  }

  config.ledger_flush_interval_ms =
      opt_int(root, "ledger_flush_interval_ms", 1000, origin);
  config.sync_interval_ms = opt_int(root, "sync_interval_ms", 300'000, origin);
  config.ota_attest_interval_ms = opt_int(root, "ota_attest_interval_ms", 0, origin);
  config.key_rotate_interval_ms = opt_int(root, "key_rotate_interval_ms", 0, origin);
  config.read_request_interval_ms = opt_int(root, "read_request_interval_ms", 0, origin);
  config.response_timeout_ms = opt_int(root, "response_timeout_ms", 1000, origin);
  config.rehome_failure_threshold =
      static_cast<int>(opt_int(root, "rehome_failure_threshold", 3, origin));
  config.max_submission_attempts =
      static_cast<int>(opt_int(root, "max_submission_attempts", 5, origin));
  config.max_retransmits = static_cast<int>(opt_int(root, "max_retransmits", 5, origin));

  if (auto it = root.find("pm"); it != root.end()) {
    const std::string path = origin + "/pm";
    if (auto w = it->find("weights"); w != it->end()) {
      config.pm.weights.time = opt_double(*w, "time", 0.25, path + "/weights");
      config.pm.weights.data_central = opt_double(*w, "data_central", 0.25, path + "/weights");
      config.pm.weights.data_distributed =
          opt_double(*w, "data_distributed", 0.25, path + "/weights");
      config.pm.weights.network = opt_double(*w, "network", 0.25, path + "/weights");
    }
    config.pm.trigger_pct = opt_double(*it, "trigger_pct", 50.0, path);
    config.pm.base_block_ms = opt_int(*it, "base_block_ms", 60'000, path);
    config.pm.reliability_floor = opt_double(*it, "reliability_floor", 0.95, path);
  }

  if (auto it = root.find("dnm"); it != root.end()) {
    config.dnm_arm = opt_double(*it, "arm", 0.02, origin + "/dnm");
    config.dnm_threshold = opt_double(*it, "threshold", 50.0, origin + "/dnm");
    config.dnm_normalize = opt_bool(*it, "normalize", false, origin + "/dnm");
  }

  config.services = default_service_profiles();
  if (auto it = root.find("services"); it != root.end()) {
    for (const auto& [type, node] : it->items()) {
      const std::string path = origin + "/services/" + type;
      ServiceProfile profile = config.services.count(type) ? config.services[type]
                                                           : ServiceProfile{};
      profile.interval_ms = opt_int(node, "interval_ms", profile.interval_ms, path);
      profile.tolerable_latency_ms =
          opt_int(node, "tolerable_latency_ms", profile.tolerable_latency_ms, path);
      profile.min_freq_ms = opt_int(node, "min_freq_ms", profile.min_freq_ms, path);
      profile.noftr_cutoff =
          static_cast<int>(opt_int(node, "noftr_cutoff", profile.noftr_cutoff, path));
      profile.dnm_threshold = opt_double(node, "dnm_threshold", profile.dnm_threshold, path);
      if (profile.interval_ms <= 0) bad(path + "/interval_ms", "must be positive");
      if (profile.min_freq_ms <= 0) bad(path + "/min_freq_ms", "must be positive");
      config.services[type] = profile;
    }
  }

  config.model_file = opt_string(root, "model_file", "", origin);
  if (!config.model_file.empty()) {
    std::filesystem::path model_path(config.model_file);
    if (model_path.is_relative() && !base_dir.empty()) {
      model_path = std::filesystem::path(base_dir) / model_path;
    }
    config.models = misbehaviour::load_model_file(model_path.string());
  }

  const json& blocks = need(root, "blocks", origin);
  if (!blocks.is_array() || blocks.empty()) bad(origin + "/blocks", "expected a non-empty array");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string path = origin + "/blocks/" + std::to_string(b);
    BlockSpec block;
    block.admin = need_string(blocks[b], "admin", path);
    const json& lps = need(blocks[b], "lps", path);
    if (!lps.is_array() || lps.empty()) bad(path + "/lps", "expected a non-empty array");
    for (std::size_t l = 0; l < lps.size(); ++l) {
      const std::string lp_path = path + "/lps/" + std::to_string(l);
      const json& node = lps[l];
      LpSpec lp;
      lp.name = need_string(node, "name", lp_path);
      lp.manifest.node = lp.name;
      lp.manifest.board = opt_string(node, "board", "esp-class", lp_path);
      lp.ip = opt_string(node, "ip",
                         "10." + std::to_string(b) + "." + std::to_string(l) + ".1", lp_path);
      if (auto pos = node.find("position"); pos != node.end()) {
        if (!pos->is_array() || pos->size() != 2) bad(lp_path + "/position", "expected [lat, lon]");
        lp.position.latitude = (*pos)[0].get<double>();
        lp.position.longitude = (*pos)[1].get<double>();
      } else {
        // auto grid, tight enough that block members fall in one another's window
        lp.position.latitude = 10.0 + 0.001 * static_cast<double>(l);
        lp.position.longitude = 20.0 + 0.001 * static_cast<double>(b);
      }
      if (auto sensors = node.find("sensors"); sensors != node.end()) {
        for (std::size_t s = 0; s < sensors->size(); ++s) {
          lp.manifest.sensors.push_back(
              parse_binding((*sensors)[s], lp_path + "/sensors/" + std::to_string(s)));
        }
      }
      if (auto outputs = node.find("outputs"); outputs != node.end()) {
        for (std::size_t o = 0; o < outputs->size(); ++o) {
          lp.manifest.outputs.push_back(
              parse_binding((*outputs)[o], lp_path + "/outputs/" + std::to_string(o)));
        }
      }
      block.lps.push_back(std::move(lp));
    }
    config.blocks.push_back(std::move(block));
  }

  const json& groups = need(root, "groups", origin);
  if (!groups.is_array() || groups.empty()) bad(origin + "/groups", "expected a non-empty array");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::string path = origin + "/groups/" + std::to_string(g);
    GroupSpec group;
    group.head = need_string(groups[g], "head", path);
    const json& admins = need(groups[g], "admins", path);
    for (const auto& a : admins) group.admins.push_back(a.get<std::string>());
    if (auto it = groups[g].find("users"); it != groups[g].end()) {
      for (const auto& u : *it) group.users.push_back(u.get<std::string>());
    }
    if (auto it = groups[g].find("fallback_heads"); it != groups[g].end()) {
      for (const auto& f : *it) group.fallback_heads.push_back(f.get<std::string>());
    }
    config.groups.push_back(std::move(group));
  }

  if (auto it = root.find("defences"); it != root.end()) {
    const std::string path = origin + "/defences";
    config.defences.keylist_gate = opt_bool(*it, "keylist_gate", true, path);
    config.defences.signature_check = opt_bool(*it, "signature_check", true, path);
    config.defences.quorum_check = opt_bool(*it, "quorum_check", true, path);
    config.defences.fhash_check = opt_bool(*it, "fhash_check", true, path);
    config.defences.rehoming = opt_bool(*it, "rehoming", true, path);
    config.defences.per_tx_keys = opt_bool(*it, "per_tx_keys", true, path);
    config.defences.time_penalty = opt_bool(*it, "time_penalty", true, path);
  }

  if (auto it = root.find("attacks"); it != root.end()) {
    if (!it->is_array()) bad(origin + "/attacks", "expected an array");
    for (std::size_t a = 0; a < it->size(); ++a) {
      const std::string path = origin + "/attacks/" + std::to_string(a);
      const json& node = (*it)[a];
      AttackScript script;
      script.kind = attack_kind_from_name(need_string(node, "kind", path));
      script.target = need_string(node, "target", path);
      script.start_ms = opt_int(node, "start_ms", 0, path);
      script.stop_ms = opt_int(node, "stop_ms", config.duration_ms, path);
      script.interval_ms = opt_int(node, "interval_ms", 1000, path);
      script.sources = static_cast<int>(opt_int(node, "sources", 1, path));
      script.tamper_every = static_cast<int>(opt_int(node, "tamper_every", 10, path));
      script.listed_flood_interval_ms = opt_int(node, "listed_flood_interval_ms", 0, path);
      script.expected_defence = opt_string(node, "expected_defence", "", path);
      if (script.interval_ms <= 0) bad(path + "/interval_ms", "must be positive");
      if (script.stop_ms < script.start_ms) bad(path + "/stop_ms", "ends before it starts");
      config.attacks.push_back(std::move(script));
    }
  }

  if (auto it = root.find("code_mutations"); it != root.end()) {
    for (std::size_t m = 0; m < it->size(); ++m) {
      const std::string path = origin + "/code_mutations/" + std::to_string(m);
      CodeMutation mutation;
      mutation.target = need_string((*it)[m], "target", path);
      mutation.at_ms = need_int((*it)[m], "at_ms", path);
      config.code_mutations.push_back(std::move(mutation));
    }
  }

  if (auto it = root.find("gates"); it != root.end()) {
    const std::string path = origin + "/gates";
    config.gates.no_attack_succeeded = opt_bool(*it, "no_attack_succeeded", true, path);
    config.gates.ledgers_valid = opt_bool(*it, "ledgers_valid", true, path);
    config.gates.latency_within_tolerance =
        opt_bool(*it, "latency_within_tolerance", false, path);
  }

  validate_scenario(config);
  return config;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::config_error, "cannot read scenario file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_scenario(text, path, std::filesystem::path(path).parent_path().string());
}

void validate_scenario(const ScenarioConfig& config) {
  std::set<std::string> names;
  auto unique_name = [&](const std::string& name, const std::string& what) {
    if (name.empty()) bad(config.name, what + " with empty name");
    if (!names.insert(name).second) {
      bad(config.name, "duplicate actor name '" + name + "'");
    }
  };

  std::set<std::string> admins;
  for (const BlockSpec& block : config.blocks) {
    unique_name(block.admin, "admin");
    admins.insert(block.admin);
    for (const LpSpec& lp : block.lps) {
      unique_name(lp.name, "lp");
      try {
        codegen::validate_manifest(lp.manifest);
      } catch (const Error& e) {
        bad(config.name + "/" + lp.name, e.what());
      }
      for (const codegen::Binding& b : lp.manifest.sensors) {
        if (!config.services.count(b.type)) {
          bad(config.name + "/" + lp.name, "no service profile for sensor type '" + b.type + "'");
        }
        if (!config.models.count(b.type)) {
          bad(config.name + "/" + lp.name, "no model for sensor type '" + b.type + "'");
        }
      }
      for (const codegen::Binding& b : lp.manifest.outputs) {
        if (!config.services.count(b.type)) {
          bad(config.name + "/" + lp.name, "no service profile for output type '" + b.type + "'");
        }
      }
    }
  }

  std::set<std::string> grouped_admins;
  std::set<std::string> heads;
  for (const GroupSpec& group : config.groups) {
    unique_name(group.head, "head");
    heads.insert(group.head);
    for (const std::string& admin : group.admins) {
      if (!admins.count(admin)) bad(config.name, "group lists unknown admin '" + admin + "'");
      if (!grouped_admins.insert(admin).second) {
        bad(config.name, "admin '" + admin + "' appears in more than one group");
      }
    }
    for (const std::string& user : group.users) unique_name(user, "user");
  }
  for (const std::string& admin : admins) {
    if (!grouped_admins.count(admin)) {
      bad(config.name, "admin '" + admin + "' belongs to no group");
    }
  }
  for (const GroupSpec& group : config.groups) {
    for (const std::string& fallback : group.fallback_heads) {
      if (!heads.count(fallback)) {
        bad(config.name, "unknown fallback head '" + fallback + "'");
      }
    }
  }

  for (const AttackScript& script : config.attacks) {
    const std::string what = attack_kind_name(script.kind);
    switch (script.kind) {
      case AttackKind::dos:
      case AttackKind::ddos:
      case AttackKind::injection:
      case AttackKind::consensus_period:
      case AttackKind::routing:
        if (!admins.count(script.target)) {
          bad(config.name, std::string(what) + " attack targets unknown admin '" +
                               script.target + "'");
        }
        break;
      case AttackKind::appending:
      case AttackKind::dropping:
      case AttackKind::linking:
        if (!heads.count(script.target)) {
          bad(config.name,
              std::string(what) + " attack targets unknown head '" + script.target + "'");
        }
        break;
    }
  }

  for (const CodeMutation& mutation : config.code_mutations) {
    bool found = false;
    for (const BlockSpec& block : config.blocks) {
      for (const LpSpec& lp : block.lps) found = found || lp.name == mutation.target;
    }
    if (!found) bad(config.name, "code mutation targets unknown lp '" + mutation.target + "'");
  }
}

}  // namespace canopy::sim
