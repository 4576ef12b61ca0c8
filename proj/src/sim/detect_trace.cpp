#include "canopy/sim/detect_trace.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "canopy/error.hpp"
#include "json.hpp"

namespace canopy::sim {

std::vector<TraceRecord> parse_trace(std::string_view text, std::string_view origin) {
  std::vector<TraceRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    TraceRecord record;
    if (!(fields >> record.time_ms)) continue;  // blank line
    if (!(fields >> record.node_id >> record.sensor_id >> record.position.latitude >>
          record.position.longitude >> record.value)) {
      raise(Errc::schema_mismatch,
            std::string(origin) + ":" + std::to_string(line_no) +
                ": expected 'time node sensor lat lon value'");
    }
    records.push_back(std::move(record));
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const TraceRecord& a, const TraceRecord& b) { return a.time_ms < b.time_ms; });
  return records;
}

std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_error, "cannot read trace " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_trace(text, path);
}

DetectConfig load_detect_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::config_error, "cannot read detect config " + path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    raise(Errc::config_error, path + ": " + e.what());
  }
  DetectConfig config;
  if (!root.contains("sensor_type") || !root["sensor_type"].is_string()) {
    raise(Errc::config_error, path + "/sensor_type: missing required field");
  }
  config.sensor_type = root["sensor_type"].get<std::string>();
  config.time.min_freq_ms = root.value("min_freq_ms", std::int64_t{1000});
  config.time.noftr_cutoff = root.value("noftr_cutoff", 3);
  config.dnm_arm = root.value("dnm_arm", 0.02);
  config.dnm_threshold = root.value("dnm_threshold", 50.0);
  config.dnm_normalize = root.value("dnm_normalize", false);
  if (root.contains("pm")) {
    const auto& pm = root["pm"];
    if (pm.contains("weights")) {
      const auto& w = pm["weights"];
      config.pm.weights.time = w.value("time", 0.25);
      config.pm.weights.data_central = w.value("data_central", 0.25);
      config.pm.weights.data_distributed = w.value("data_distributed", 0.25);
      config.pm.weights.network = w.value("network", 0.25);
    }
    config.pm.trigger_pct = pm.value("trigger_pct", 50.0);
    config.pm.base_block_ms = pm.value("base_block_ms", std::int64_t{60'000});
    config.pm.reliability_floor = pm.value("reliability_floor", 0.95);
  }
  return config;
}

std::vector<TraceVerdict> detect_trace(const std::vector<TraceRecord>& trace,
                                       const misbehaviour::GaussianClassModel& model,
                                       const DetectConfig& config) {
  if (model.feature_order.size() != 1) {
    raise(Errc::config_error,
          "trace detection needs a single-feature model for '" + config.sensor_type + "'");
  }
  const misbehaviour::FeatureModel& feature = model.features.at(model.feature_order.front());

  std::vector<TraceVerdict> verdicts;
  verdicts.reserve(trace.size());
  std::map<std::string, misbehaviour::TimeState> time_states;
  struct Latest {
    misbehaviour::GeoPoint position;
    double value = 0;
  };
  std::map<std::string, Latest> latest;  // by sensor id

  for (const TraceRecord& record : trace) {
    TraceVerdict verdict;
    verdict.record = record;

    misbehaviour::TimeState& state = time_states[record.sensor_id];
    misbehaviour::TimeCheck check = misbehaviour::check_time(state, record.time_ms, config.time);
    state = check.next;
    verdict.time_frequent = check.frequent;
    verdict.time_flag = check.compromised;

    verdict.central_flag = misbehaviour::classify_central({{feature, record.value}}).faulty;

    misbehaviour::NeighborWindow window;
    window.center = record.position;
    window.arm = config.dnm_arm;
    window.own_reading = record.value;
    for (const auto& [sensor_id, info] : latest) {
      if (sensor_id == record.sensor_id) continue;
      window.neighbors.push_back({sensor_id, info.position, info.value});
    }
    try {
      verdict.distributed_flag =
          misbehaviour::dnm(window, {config.dnm_threshold, config.dnm_normalize}).compromised;
    } catch (const Error& e) {
      if (e.code() != Errc::insufficient_neighbors) throw;
    }

    misbehaviour::PmComponents components;
    components.time = verdict.time_flag;
    components.data_central = verdict.central_flag;
    components.data_distributed = verdict.distributed_flag;
    components.reliability = 1.0;  // offline traces carry no channel hit/miss data
    misbehaviour::PMReport report = misbehaviour::assess_pm(components, config.pm);
    verdict.pm = report.pm;
    verdict.penalty = report.penalty_ms.has_value();
    if (verdict.penalty) time_states[record.sensor_id].noftr = 0;

    latest[record.sensor_id] = Latest{record.position, record.value};
    verdicts.push_back(std::move(verdict));
  }
  return verdicts;
}

}  // namespace canopy::sim
