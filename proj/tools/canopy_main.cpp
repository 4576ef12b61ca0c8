#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "canopy/codegen/generator.hpp"
#include "canopy/error.hpp"
#include "canopy/ledger/chain.hpp"
#include "canopy/sim/detect_trace.hpp"
#include "canopy/sim/simulation.hpp"
#include "json.hpp"

namespace {

using namespace canopy;

constexpr int kExitOk = 0;
constexpr int kExitAssertionFailed = 1;
constexpr int kExitUsage = 2;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::config_error:
    case Errc::io_error:
    case Errc::decode_failure:
    case Errc::schema_mismatch:
    case Errc::invalid_argument:
    case Errc::catalog_miss:
      return kExitUsage;
    default:
      return kExitAssertionFailed;
  }
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  out << content;
}

int cmd_run(const std::string& scenario_path, std::uint64_t seed, std::string out_dir,
            const std::string& format, bool verbose) {
  sim::ScenarioConfig config = sim::load_scenario(scenario_path);
  if (out_dir.empty()) {
    if (const char* env = std::getenv("CANOPY_OUTPUT_DIR")) out_dir = env;
  }
  if (verbose) {
    std::cerr << "running scenario '" << config.name << "' seed " << seed << "\n";
  }
  sim::Simulation simulation(config, seed);
  sim::MetricsReport report = simulation.run();

  if (!out_dir.empty()) {
    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir / "ledgers");
    write_file(dir / "report.json", report.to_json_text());
    write_file(dir / "report.txt", report.summary_text());
    for (const auto& ref : simulation.chains()) {
      ref.chain->save(dir / "ledgers" / (ref.name + ".chain"));
    }
    if (verbose) std::cerr << "report and ledgers written to " << dir << "\n";
  }

  std::cout << (format == "structured" ? report.to_json_text() : report.summary_text());

  bool gates_ok = true;
  auto gate = [&](bool enabled, bool held, const char* name) {
    if (!enabled) return;
    if (!held) {
      std::cerr << "gate failed: " << name << "\n";
      gates_ok = false;
    }
  };
  gate(config.gates.no_attack_succeeded, report.total_attack_succeeded() == 0,
       "no-attack-succeeded");
  gate(config.gates.ledgers_valid, report.all_ledgers_valid(), "ledgers-valid");
  gate(config.gates.latency_within_tolerance, report.all_latency_within_tolerance(),
       "latency-within-tolerance");
  return gates_ok ? kExitOk : kExitAssertionFailed;
}

int cmd_ledger_verify(const std::string& path) {
  ledger::ChainStore chain = ledger::ChainStore::load(path);
  ledger::VerifyResult verdict = ledger::verify_chain(chain);
  if (verdict.valid) {
    std::cout << "valid: " << chain.height() << " blocks\n";
    return kExitOk;
  }
  std::cout << "corrupt at height " << *verdict.first_bad_height << "\n";
  return kExitAssertionFailed;
}

int cmd_codegen_lp(const std::string& manifest_path, const std::string& out_path) {
  codegen::NodeManifest manifest = codegen::load_manifest(manifest_path);
  codegen::GeneratedCode code = codegen::generate_lp(
      manifest, codegen::TemplateCatalog::builtin(), crypto::DigestKind::sha256);
  if (out_path.empty()) {
    std::cout << code.rendered;
    std::cerr << "code_hash " << to_hex(code.code_hash) << "\n";
  } else {
    write_file(out_path, code.rendered);
    std::cout << to_hex(code.code_hash) << "  " << out_path << "\n";
  }
  return kExitOk;
}

int cmd_codegen_hp(const std::string& manifest_path, const std::string& out_dir) {
  codegen::NodeManifest manifest = codegen::load_manifest(manifest_path);
  auto units = codegen::generate_hp(manifest, codegen::TemplateCatalog::builtin(),
                                    crypto::DigestKind::sha256);
  if (out_dir.empty()) {
    for (const auto& unit : units) std::cout << unit.rendered << "\n";
  } else {
    std::filesystem::create_directories(out_dir);
    for (const auto& unit : units) {
      std::string file_name = unit.unit;
      for (char& c : file_name) {
        if (c == ':') c = '_';
      }
      std::filesystem::path path = std::filesystem::path(out_dir) / (file_name + ".hp.txt");
      write_file(path, unit.rendered);
      std::cout << to_hex(unit.code_hash) << "  " << path.string() << "\n";
    }
  }
  std::cerr << units.size() << " hp units\n";
  return kExitOk;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int cmd_codegen_attest(const std::string& code_path, const std::string& observed_path) {
  const std::string code_text = read_file(code_path);
  const std::string observed = read_file(observed_path);
  codegen::GeneratedCode reference;
  reference.digest_kind = crypto::DigestKind::sha256;
  reference.rendered = code_text;
  reference.code_hash = crypto::digest(reference.digest_kind, code_text);
  if (codegen::attest(reference, observed)) {
    std::cout << "match\n";
    return kExitOk;
  }
  std::cout << "mismatch\n";
  return kExitAssertionFailed;
}

int cmd_detect(const std::string& trace_path, const std::string& model_path,
               const std::string& config_path, const std::string& format) {
  sim::DetectConfig config = sim::load_detect_config(config_path);
  auto models = misbehaviour::load_model_file(model_path);
  auto model_it = models.find(config.sensor_type);
  if (model_it == models.end()) {
    raise(Errc::config_error, "model file has no sensor type '" + config.sensor_type + "'");
  }
  auto trace = sim::load_trace(trace_path);
  auto verdicts = sim::detect_trace(trace, model_it->second, config);
  if (format == "table") {
    std::cout << "time_ms node sensor value time central distributed pm penalty\n";
    for (const auto& v : verdicts) {
      std::cout << v.record.time_ms << " " << v.record.node_id << " " << v.record.sensor_id
                << " " << v.record.value << " " << (v.time_flag ? 1 : 0) << " "
                << (v.central_flag ? 1 : 0) << " " << (v.distributed_flag ? 1 : 0) << " " << v.pm
                << " " << (v.penalty ? 1 : 0) << "\n";
    }
  } else {
    for (const auto& v : verdicts) {
      nlohmann::json row = {{"time_ms", v.record.time_ms},
                            {"node", v.record.node_id},
                            {"sensor", v.record.sensor_id},
                            {"value", v.record.value},
                            {"time_flag", v.time_flag},
                            {"time_frequent", v.time_frequent},
                            {"central_flag", v.central_flag},
                            {"distributed_flag", v.distributed_flag},
                            {"pm", v.pm},
                            {"penalty", v.penalty}};
      std::cout << row.dump() << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-tier blockchain IoT access-control simulator"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a scenario and write its report");
  std::string scenario_path, out_dir, run_format = "summary";
  std::uint64_t seed = 1;
  bool verbose = false;
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_option("--seed", seed, "simulation seed");
  run->add_option("--out", out_dir, "output directory (or CANOPY_OUTPUT_DIR)");
  run->add_option("--format", run_format, "report format: summary or structured")
      ->check(CLI::IsMember({"summary", "structured"}));
  run->add_flag("-v,--verbose", verbose, "progress to stderr");

  // ledger verify
  auto* ledger_cmd = app.add_subcommand("ledger", "ledger inspection");
  ledger_cmd->require_subcommand(1);
  auto* ledger_verify = ledger_cmd->add_subcommand("verify", "audit a chain file");
  std::string chain_path;
  ledger_verify->add_option("file", chain_path, "chain file")->required();

  // codegen
  auto* codegen_cmd = app.add_subcommand("codegen", "node code generation");
  codegen_cmd->require_subcommand(1);
  auto* lp = codegen_cmd->add_subcommand("lp", "generate LP node code from a manifest");
  std::string lp_manifest, lp_out;
  lp->add_option("manifest", lp_manifest, "manifest file")->required();
  lp->add_option("--out", lp_out, "write code to this file");
  auto* hp = codegen_cmd->add_subcommand("hp", "generate per-binding HP pipelines");
  std::string hp_manifest, hp_out_dir;
  hp->add_option("manifest", hp_manifest, "manifest file")->required();
  hp->add_option("--out-dir", hp_out_dir, "write units into this directory");
  auto* attest = codegen_cmd->add_subcommand("attest", "compare generated code with observed");
  std::string attest_code, attest_observed;
  attest->add_option("code", attest_code, "generated code file")->required();
  attest->add_option("observed", attest_observed, "observed code file")->required();

  // detect
  auto* detect = app.add_subcommand("detect", "run the detectors over a recorded trace");
  std::string trace_path, model_path, detect_config_path, detect_format = "jsonl";
  detect->add_option("--trace", trace_path, "trace file")->required();
  detect->add_option("--model", model_path, "training model file")->required();
  detect->add_option("--config", detect_config_path, "detector config (json)")->required();
  detect->add_option("--format", detect_format, "jsonl or table")
      ->check(CLI::IsMember({"jsonl", "table"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(scenario_path, seed, out_dir, run_format, verbose);
    if (*ledger_verify) return cmd_ledger_verify(chain_path);
    if (*lp) return cmd_codegen_lp(lp_manifest, lp_out);
    if (*hp) return cmd_codegen_hp(hp_manifest, hp_out_dir);
    if (*attest) return cmd_codegen_attest(attest_code, attest_observed);
    if (*detect) return cmd_detect(trace_path, model_path, detect_config_path, detect_format);
  } catch (const canopy::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
