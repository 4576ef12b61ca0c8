#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canopy/misbehaviour/detectors.hpp"

namespace canopy::sim {

// One row of a recorded sensor-reading table:
//   time_ms node_id sensor_id latitude longitude value
struct TraceRecord {
  std::int64_t time_ms = 0;
  std::string node_id;
  std::string sensor_id;
  misbehaviour::GeoPoint position;
  double value = 0;
};

std::vector<TraceRecord> load_trace(const std::string& path);  // throws schema_mismatch
std::vector<TraceRecord> parse_trace(std::string_view text, std::string_view origin);

struct DetectConfig {
  std::string sensor_type;  // names the model to apply (single-feature)
  misbehaviour::TimeConfig time;
  misbehaviour::PmConfig pm;
  double dnm_arm = 0.02;
  double dnm_threshold = 50.0;
  bool dnm_normalize = false;
};

DetectConfig load_detect_config(const std::string& path);  // JSON; throws config_error

struct TraceVerdict {
  TraceRecord record;
  bool time_frequent = false;
  bool time_flag = false;
  bool central_flag = false;
  bool distributed_flag = false;
  double pm = 0;
  bool penalty = false;
};

// Replays the detectors over the trace in time order. Offline traces carry no
// hit/miss channel data, so network reliability is reported as 1.0.
std::vector<TraceVerdict> detect_trace(const std::vector<TraceRecord>& trace,
                                       const misbehaviour::GaussianClassModel& model,
                                       const DetectConfig& config);

}  // namespace canopy::sim
