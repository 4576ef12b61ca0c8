#include "canopy/sim/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace canopy::sim {

using nlohmann::json;

std::int64_t LatencyStats::percentile(double p) const {
  if (samples_ms.empty()) return 0;
  const auto n = static_cast<double>(samples_ms.size());
  auto index = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  if (index == 0) index = 1;
  return samples_ms[index - 1];
}

bool LatencyStats::within_tolerance() const {
  if (tolerable_ms <= 0) return true;  // on demand, no bound
  if (samples_ms.empty()) return true;
  return percentile(99.0) <= tolerable_ms;
}

std::uint64_t MetricsReport::total_attack_succeeded() const {
  std::uint64_t total = 0;
  for (const auto& [kind, tally] : attacks) total += tally.succeeded;
  return total;
}

bool MetricsReport::all_ledgers_valid() const {
  for (const auto& [name, summary] : ledgers) {
    if (!summary.valid) return false;
  }
  return true;
}

bool MetricsReport::all_latency_within_tolerance() const {
  for (const auto& [service, stats] : latency_by_service) {
    if (!stats.within_tolerance()) return false;
  }
  return true;
}

std::string MetricsReport::to_json_text() const {
  json root;
  root["scenario"] = scenario;
  root["seed"] = seed;
  root["duration_ms"] = duration_ms;

  json attacks_json = json::object();
  for (const auto& [kind, tally] : attacks) {
    attacks_json[kind] = {{"attempts", tally.attempts},
                          {"detected", tally.detected},
                          {"succeeded", tally.succeeded},
                          {"ignored_by_design", tally.ignored}};
  }
  root["attacks"] = attacks_json;

  root["packets"] = {{"emitted", packets_emitted},
                     {"accepted_first_try", accepted_first_try},
                     {"accepted_after_retransmit", accepted_after_retransmit},
                     {"rejected", rejected},
                     {"retransmissions", retransmissions}};

  json latency_json = json::object();
  for (const auto& [service, stats] : latency_by_service) {
    latency_json[service] = {{"count", stats.samples_ms.size()},
                             {"p50_ms", stats.percentile(50.0)},
                             {"p99_ms", stats.percentile(99.0)},
                             {"max_ms", stats.samples_ms.empty() ? 0 : stats.samples_ms.back()},
                             {"tolerable_ms", stats.tolerable_ms},
                             {"within_tolerance", stats.within_tolerance()}};
  }
  root["latency_by_service"] = latency_json;

  json pm_json = json::object();
  for (const auto& [sensor, samples] : pm_history) {
    json list = json::array();
    for (const PmSample& sample : samples) {
      list.push_back({{"time_ms", sample.time_ms}, {"pm", sample.pm}});
    }
    pm_json[sensor] = list;
  }
  root["pm_history"] = pm_json;

  json reliability_json = json::object();
  for (const auto& [node, r] : reliability_by_node) {
    const std::uint64_t total = r.hits + r.misses;
    reliability_json[node] = {
        {"hits", r.hits},
        {"misses", r.misses},
        {"ratio", total == 0 ? 1.0 : static_cast<double>(r.hits) / static_cast<double>(total)}};
  }
  root["reliability_by_node"] = reliability_json;

  json ledgers_json = json::object();
  for (const auto& [name, summary] : ledgers) {
    json entry = {{"height", summary.height},
                  {"transactions", summary.transactions},
                  {"valid", summary.valid}};
    if (!summary.valid) entry["first_bad_height"] = summary.first_bad_height;
    ledgers_json[name] = entry;
  }
  root["ledgers"] = ledgers_json;

  root["counters"] = {{"penalties_applied", penalties_applied},
                      {"reads_granted", reads_granted},
                      {"reads_denied", reads_denied},
                      {"attest_checks", attest_checks},
                      {"attest_failures", attest_failures},
                      {"reprovisions", reprovisions},
                      {"rehomes", rehomes},
                      {"key_rotations", key_rotations},
                      {"conflict_anomalies", conflict_anomalies},
                      {"linking_key_reuses", linking_key_reuses}};

  return root.dump(2) + "\n";
}

std::string MetricsReport::summary_text() const {
  std::ostringstream out;
  out << "scenario " << scenario << " (seed " << seed << ", " << duration_ms << " ms simulated)\n";
  out << "\npackets: emitted " << packets_emitted << ", accepted " << accepted_first_try
      << " first-try + " << accepted_after_retransmit << " after retransmit, rejected "
      << rejected << " (" << retransmissions << " retransmissions)\n";

  if (!attacks.empty()) {
    out << "\nattacks:\n";
    for (const auto& [kind, tally] : attacks) {
      out << "  " << kind << ": attempts " << tally.attempts << ", detected " << tally.detected
          << ", succeeded " << tally.succeeded << ", ignored-by-design " << tally.ignored << "\n";
    }
  }

  out << "\nlatency (p99 vs tolerable):\n";
  for (const auto& [service, stats] : latency_by_service) {
    out << "  " << service << ": n=" << stats.samples_ms.size() << " p99=" << stats.percentile(99)
        << " ms";
    if (stats.tolerable_ms > 0) {
      out << " / " << stats.tolerable_ms << " ms "
          << (stats.within_tolerance() ? "[ok]" : "[exceeded]");
    } else {
      out << " / on-demand";
    }
    out << "\n";
  }

  out << "\nledgers:\n";
  for (const auto& [name, summary] : ledgers) {
    out << "  " << name << ": height " << summary.height << ", " << summary.transactions
        << " txs, " << (summary.valid ? "valid" : "CORRUPT at " +
                        std::to_string(summary.first_bad_height)) << "\n";
  }

  out << "\ncounters: penalties " << penalties_applied << ", reads granted " << reads_granted
      << " / denied " << reads_denied << ", attest " << attest_checks << " checks / "
      << attest_failures << " failures / " << reprovisions << " reprovisions, rehomes "
      << rehomes << ", key rotations " << key_rotations << ", linking reuses "
      << linking_key_reuses << "\n";
  return out.str();
}

}  // namespace canopy::sim
