#include "canopy/misbehaviour/detectors.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "canopy/error.hpp"

namespace canopy::misbehaviour {

TimeCheck check_time(const TimeState& state, std::int64_t timestamp_ms,
                     const TimeConfig& config) {
  TimeCheck check;
  check.next = state;
  if (state.tolt_ms.has_value()) {
    if (timestamp_ms < *state.tolt_ms) {
      raise(Errc::invalid_argument, "timestamp moved backwards");
    }
    check.frequent = (timestamp_ms - *state.tolt_ms) < config.min_freq_ms;
    if (check.frequent) ++check.next.noftr;
  }
  check.compromised = check.next.noftr >= config.noftr_cutoff;
  check.next.tolt_ms = timestamp_ms;
  return check;
}

MassAssignment vacuous_mass() { return MassAssignment{0, 0, 1}; }

bool valid_mass(const MassAssignment& m, double tolerance) {
  return m.normal >= -tolerance && m.faulty >= -tolerance && m.either >= -tolerance &&
         std::abs(m.sum() - 1.0) <= tolerance;
}

double conflict_mass(const MassAssignment& a, const MassAssignment& b) {
  // Only {normal} x {faulty} and {faulty} x {normal} intersect to the empty set.
  return a.normal * b.faulty + a.faulty * b.normal;
}

MassAssignment ds_combine(const MassAssignment& a, const MassAssignment& b) {
  if (!valid_mass(a) || !valid_mass(b)) {
    raise(Errc::invalid_argument, "mass assignment does not sum to 1");
  }
  const double k = conflict_mass(a, b);
  if (std::abs(1.0 - k) <= 1e-12) {
    raise(Errc::total_conflict, "total conflict between mass assignments (K = 1)");
  }
  const double norm = 1.0 - k;
  MassAssignment out;
  out.normal = (a.normal * b.normal + a.normal * b.either + a.either * b.normal) / norm;
  out.faulty = (a.faulty * b.faulty + a.faulty * b.either + a.either * b.faulty) / norm;
  out.either = (a.either * b.either) / norm;
  return out;
}

double gaussian_pdf(double x, double mu, double sigma) {
  if (sigma <= 0) raise(Errc::invalid_argument, "sigma must be positive");
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

MassAssignment gaussian_mass(const FeatureModel& model, double observation) {
  const double rho_normal = gaussian_pdf(observation, model.normal.mu, model.normal.sigma);
  const double rho_faulty = gaussian_pdf(observation, model.faulty.mu, model.faulty.sigma);
  const double total = rho_normal + rho_faulty;
  if (total <= 0 || !std::isfinite(total)) {
    // Degenerate observation: both densities underflowed; no evidence either way.
    return vacuous_mass();
  }
  return MassAssignment{rho_normal / total, rho_faulty / total, 0};
}

CentralVerdict classify_central(
    const std::vector<std::pair<FeatureModel, double>>& observations) {
  if (observations.empty()) raise(Errc::invalid_argument, "no observations to classify");
  MassAssignment combined = gaussian_mass(observations[0].first, observations[0].second);
  for (std::size_t i = 1; i < observations.size(); ++i) {
    combined = ds_combine(combined, gaussian_mass(observations[i].first, observations[i].second));
  }
  return CentralVerdict{combined.faulty >= combined.normal, combined};
}

CentralVerdict classify_central(const GaussianClassModel& model,
                                const std::vector<std::pair<std::string, double>>& observations) {
  std::vector<std::pair<FeatureModel, double>> resolved;
  resolved.reserve(observations.size());
  for (const auto& [feature, value] : observations) {
    auto it = model.features.find(feature);
    if (it == model.features.end()) {
      raise(Errc::invalid_argument, "model has no feature '" + feature + "'");
    }
    resolved.emplace_back(it->second, value);
  }
  return classify_central(resolved);
}

bool in_window(const GeoPoint& center, double arm, const GeoPoint& p) {
  const double half = arm / 2.0;
  return p.latitude >= center.latitude - half && p.latitude <= center.latitude + half &&
         p.longitude >= center.longitude - half && p.longitude <= center.longitude + half;
}

DnmResult dnm(const NeighborWindow& window, const DnmConfig& config) {
  DnmResult result;
  double sum = 0;
  for (const NeighborReading& neighbor : window.neighbors) {
    if (!in_window(window.center, window.arm, neighbor.position)) continue;
    sum += std::abs(window.own_reading - neighbor.reading);
    ++result.neighbors_considered;
  }
  if (result.neighbors_considered == 0) {
    raise(Errc::insufficient_neighbors, "no neighbors inside the window");
  }
  result.value = config.normalize ? sum / result.neighbors_considered : sum;
  result.compromised = result.value > config.threshold;
  return result;
}

double network_reliability(const NetworkReliability& r) {
  const std::uint64_t total = r.hits + r.misses;
  if (total == 0) raise(Errc::no_data, "no hit/miss observations");
  return static_cast<double>(r.hits) / static_cast<double>(total);
}

PMReport assess_pm(const PmComponents& components, const PmConfig& config) {
  const PmWeights& w = config.weights;
  const double weight_sum = w.time + w.data_central + w.data_distributed + w.network;
  if (std::abs(weight_sum - 1.0) > kMassTolerance) {
    raise(Errc::invalid_argument, "PM weights must sum to 1");
  }
  if (components.reliability < 0 || components.reliability > 1) {
    raise(Errc::invalid_argument, "reliability outside [0,1]");
  }
  PMReport report;
  report.components = components;
  report.pm = 100.0 * (w.time * (components.time ? 1.0 : 0.0) +
                       w.data_central * (components.data_central ? 1.0 : 0.0) +
                       w.data_distributed * (components.data_distributed ? 1.0 : 0.0) +
                       w.network * (1.0 - components.reliability));
  const bool time_only = components.time && !components.data_central &&
                         !components.data_distributed;
  const bool reliability_degraded = components.reliability < config.reliability_floor;
  if (report.pm > config.trigger_pct && !(time_only && !reliability_degraded)) {
    report.penalty_ms =
        static_cast<std::int64_t>(static_cast<double>(config.base_block_ms) * report.pm / 100.0);
  }
  return report;
}

std::map<std::string, GaussianClassModel> parse_model_table(std::string_view text,
                                                            std::string_view origin) {
  std::map<std::string, GaussianClassModel> models;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string type, feature, cls;
    double mu = 0, sigma = 0;
    if (!(fields >> type)) continue;  // blank line
    if (!(fields >> feature >> cls >> mu >> sigma)) {
      raise(Errc::config_error, std::string(origin) + ":" + std::to_string(line_no) +
                                    ": expected 'type feature class mu sigma'");
    }
    if (sigma <= 0) {
      raise(Errc::config_error,
            std::string(origin) + ":" + std::to_string(line_no) + ": sigma must be positive");
    }
    GaussianClassModel& model = models[type];
    if (!model.features.count(feature)) model.feature_order.push_back(feature);
    FeatureModel& fm = model.features[feature];
    if (cls == "normal") {
      fm.normal = ClassStats{mu, sigma};
    } else if (cls == "faulty") {
      fm.faulty = ClassStats{mu, sigma};
    } else {
      raise(Errc::config_error, std::string(origin) + ":" + std::to_string(line_no) +
                                    ": class must be 'normal' or 'faulty'");
    }
  }
  return models;
}

std::map<std::string, GaussianClassModel> load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_error, "cannot read model file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_model_table(text, path);
}

}  // namespace canopy::misbehaviour
