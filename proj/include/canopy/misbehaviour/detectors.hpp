#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "canopy/bytes.hpp"

namespace canopy::misbehaviour {

inline constexpr double kMassTolerance = 1e-9;

// ---------------------------------------------------------------------------
// Time inconsistency: minFreq / NoFTR / ToLT.

struct TimeConfig {
  std::int64_t min_freq_ms = 1;
  int noftr_cutoff = 1;
};

struct TimeState {
  std::optional<std::int64_t> tolt_ms;  // time of last transaction; empty before any
  int noftr = 0;
};

struct TimeCheck {
  bool frequent = false;
  bool compromised = false;
  TimeState next;
};

// frequent  iff the interval since the last transaction is < min_freq;
// compromised iff NoFTR (incremented on frequent requests) reaches cutoff.
// The first-ever observation only initializes ToLT.
TimeCheck check_time(const TimeState& state, std::int64_t timestamp_ms, const TimeConfig& config);

// ---------------------------------------------------------------------------
// Data inconsistency, centralized: Dempster-Shafer over {normal, faulty}.

// Basic mass over the frame {normal, faulty}: mass on the two singletons and
// on the whole frame; mass of the empty set is identically zero.
struct MassAssignment {
  double normal = 0;
  double faulty = 0;
  double either = 0;  // mass on the full frame

  double sum() const { return normal + faulty + either; }
  bool operator==(const MassAssignment&) const = default;
};

MassAssignment vacuous_mass();
bool valid_mass(const MassAssignment& m, double tolerance = kMassTolerance);

// K of Dempster's rule: total product mass on conflicting (empty-intersection)
// subset pairs.
double conflict_mass(const MassAssignment& a, const MassAssignment& b);

// Dempster's combination. Throws total_conflict when K == 1.
MassAssignment ds_combine(const MassAssignment& a, const MassAssignment& b);

struct ClassStats {
  double mu = 0;
  double sigma = 1;  // > 0
};

struct FeatureModel {
  ClassStats normal;
  ClassStats faulty;
};

double gaussian_pdf(double x, double mu, double sigma);

// Per-feature mass: each class density normalized across the two classes.
// When both densities underflow to zero the observation carries no evidence
// and the vacuous mass is returned.
MassAssignment gaussian_mass(const FeatureModel& model, double observation);

// Training model for one sensor type. feature_order preserves the order the
// model file declares, which is also the combination order.
struct GaussianClassModel {
  std::map<std::string, FeatureModel> features;
  std::vector<std::string> feature_order;
};

struct CentralVerdict {
  bool faulty = false;
  MassAssignment combined;
};

// Folds ds_combine over per-feature masses in the given observation order.
// Ties classify as faulty: "normal" requires strict dominance.
CentralVerdict classify_central(const GaussianClassModel& model,
                                const std::vector<std::pair<std::string, double>>& observations);
CentralVerdict classify_central(const std::vector<std::pair<FeatureModel, double>>& observations);

// ---------------------------------------------------------------------------
// Data inconsistency, distributed: distance-to-neighbours aggregate inside a
// square geographic window.

struct GeoPoint {
  double latitude = 0;
  double longitude = 0;
};

struct NeighborReading {
  std::string node_id;
  GeoPoint position;
  double reading = 0;
};

struct NeighborWindow {
  GeoPoint center;
  double arm = 0;  // s; window spans [center - s/2, center + s/2] on both axes
  double own_reading = 0;
  std::vector<NeighborReading> neighbors;  // candidates; dnm() applies the window
};

bool in_window(const GeoPoint& center, double arm, const GeoPoint& p);

struct DnmConfig {
  double threshold = 0;
  bool normalize = false;  // divide by in-window neighbor count (off by default)
};

struct DnmResult {
  double value = 0;
  bool compromised = false;
  int neighbors_considered = 0;
};

// Sum of |own - neighbor| over neighbours inside the window. Throws
// insufficient_neighbors when the window is empty (no verdict).
DnmResult dnm(const NeighborWindow& window, const DnmConfig& config);

// ---------------------------------------------------------------------------
// Network inconsistency and the fused probability-of-misbehaviour score.

struct NetworkReliability {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
};

// hits / (hits + misses); throws no_data on zero observations.
double network_reliability(const NetworkReliability& r);

struct PmWeights {
  double time = 0.25;
  double data_central = 0.25;
  double data_distributed = 0.25;
  double network = 0.25;
};

struct PmConfig {
  PmWeights weights;               // must sum to 1 within 1e-9
  double trigger_pct = 50.0;       // penalty fires when pm exceeds this
  std::int64_t base_block_ms = 60'000;
  double reliability_floor = 0.95; // a lone time flag never penalizes while
                                   // reliability stays at or above this
};

struct PmComponents {
  bool time = false;
  bool data_central = false;
  bool data_distributed = false;
  double reliability = 1.0;
};

struct PMReport {
  double pm = 0;  // percentage in [0, 100]
  PmComponents components;
  std::optional<std::int64_t> penalty_ms;
};

// pm = 100 * (w_t*[time] + w_c*[central] + w_d*[distributed] + w_n*(1-rel)).
PMReport assess_pm(const PmComponents& components, const PmConfig& config);

// ---------------------------------------------------------------------------
// Training-model file: whitespace-separated rows of
//   sensor_type feature class mu sigma
std::map<std::string, GaussianClassModel> load_model_file(const std::string& path);
std::map<std::string, GaussianClassModel> parse_model_table(std::string_view text,
                                                            std::string_view origin);

}  // namespace canopy::misbehaviour
