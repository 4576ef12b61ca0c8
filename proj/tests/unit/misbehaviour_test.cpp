#include <array>
#include <cmath>

#include "canopy/error.hpp"
#include "canopy/misbehaviour/detectors.hpp"
#include "canopy/sim/rng.hpp"
#include "doctest.h"

using namespace canopy;
using namespace canopy::misbehaviour;

namespace {

// Brute-force Dempster oracle over the 4 subsets of {normal, faulty} encoded
// as bitmasks: 0 = empty, 1 = {normal}, 2 = {faulty}, 3 = the frame.
using SubsetMass = std::array<double, 4>;

SubsetMass to_subsets(const MassAssignment& m) { return {0.0, m.normal, m.faulty, m.either}; }

SubsetMass oracle_combine(const SubsetMass& a, const SubsetMass& b) {
  SubsetMass out{0, 0, 0, 0};
  double conflict = 0;
  for (int x = 0; x < 4; ++x) {
    for (int y = 0; y < 4; ++y) {
      const int z = x & y;
      if (z == 0) {
        conflict += a[x] * b[y];
      } else {
        out[z] += a[x] * b[y];
      }
    }
  }
  for (int z = 1; z < 4; ++z) out[z] /= (1.0 - conflict);
  return out;
}

// n-ary Dempster as one normalized product over non-empty intersections;
// independent of the iterated pairwise implementation path.
SubsetMass oracle_combine3(const SubsetMass& a, const SubsetMass& b, const SubsetMass& c) {
  SubsetMass out{0, 0, 0, 0};
  double total = 0;
  for (int x = 0; x < 4; ++x) {
    for (int y = 0; y < 4; ++y) {
      for (int z = 0; z < 4; ++z) {
        const int w = x & y & z;
        const double p = a[x] * b[y] * c[z];
        if (w != 0) {
          out[w] += p;
          total += p;
        }
      }
    }
  }
  for (int w = 1; w < 4; ++w) out[w] /= total;
  return out;
}

MassAssignment random_mass(sim::Rng& rng) {
  // Positive mass on both singletons keeps every pair conflict-free (K < 1).
  double n = 0.05 + rng.unit();
  double f = 0.05 + rng.unit();
  double e = rng.unit() * 0.5;
  const double total = n + f + e;
  return MassAssignment{n / total, f / total, e / total};
}

constexpr double kTol = 1e-9;

}  // namespace

TEST_CASE("ds_combine matches the worked example") {
  MassAssignment m1{0.6, 0.4, 0};
  MassAssignment m2{0.7, 0.3, 0};
  CHECK(conflict_mass(m1, m2) == doctest::Approx(0.46).epsilon(1e-12));
  MassAssignment combined = ds_combine(m1, m2);
  CHECK(combined.normal == doctest::Approx(0.7777777777777778).epsilon(1e-12));
  CHECK(combined.faulty == doctest::Approx(0.2222222222222222).epsilon(1e-12));
  CHECK(combined.either == 0.0);
}

TEST_CASE("ds_combine agrees with the subset-enumeration oracle") {
  sim::Rng rng(101);
  for (int i = 0; i < 1000; ++i) {
    MassAssignment a = random_mass(rng);
    MassAssignment b = random_mass(rng);
    MassAssignment got = ds_combine(a, b);
    SubsetMass want = oracle_combine(to_subsets(a), to_subsets(b));
    CHECK(std::abs(got.normal - want[1]) < kTol);
    CHECK(std::abs(got.faulty - want[2]) < kTol);
    CHECK(std::abs(got.either - want[3]) < kTol);
    CHECK(valid_mass(got));
  }
}

TEST_CASE("ds_combine is commutative and associative") {
  sim::Rng rng(202);
  for (int i = 0; i < 500; ++i) {
    MassAssignment a = random_mass(rng);
    MassAssignment b = random_mass(rng);
    MassAssignment c = random_mass(rng);
    MassAssignment ab = ds_combine(a, b);
    MassAssignment ba = ds_combine(b, a);
    CHECK(std::abs(ab.normal - ba.normal) < kTol);
    CHECK(std::abs(ab.faulty - ba.faulty) < kTol);
    MassAssignment ab_c = ds_combine(ab, c);
    MassAssignment a_bc = ds_combine(a, ds_combine(b, c));
    CHECK(std::abs(ab_c.normal - a_bc.normal) < kTol);
    CHECK(std::abs(ab_c.faulty - a_bc.faulty) < kTol);
    CHECK(std::abs(ab_c.either - a_bc.either) < kTol);
  }
}

TEST_CASE("vacuous mass is the neutral element") {
  MassAssignment m{0.3, 0.45, 0.25};
  MassAssignment out = ds_combine(m, vacuous_mass());
  CHECK(out.normal == doctest::Approx(m.normal).epsilon(1e-15));
  CHECK(out.faulty == doctest::Approx(m.faulty).epsilon(1e-15));
  CHECK(out.either == doctest::Approx(m.either).epsilon(1e-15));
}

TEST_CASE("total conflict is an error") {
  MassAssignment all_normal{1, 0, 0};
  MassAssignment all_faulty{0, 1, 0};
  CHECK_THROWS_AS(ds_combine(all_normal, all_faulty), Error);
  try {
    ds_combine(all_normal, all_faulty);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::total_conflict);
  }
}

TEST_CASE("gaussian_mass") {
  SUBCASE("golden value against the high-precision oracle") {
    // mu_n=25 sigma_n=1, mu_f=35 sigma_f=1, x=26:
    // m(normal) = phi(1)/(phi(1)+phi(9)) = 1/(1+e^-40); reference evaluation
    // gives faulty mass 4.248354255e-18.
    FeatureModel model{{25, 1}, {35, 1}};
    MassAssignment m = gaussian_mass(model, 26);
    CHECK(m.normal == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.faulty == doctest::Approx(4.248354255e-18).epsilon(1e-6));
    CHECK(m.either == 0.0);
  }
  SUBCASE("observation at the normal mean dominates") {
    FeatureModel model{{25, 1}, {60, 1}};
    MassAssignment m = gaussian_mass(model, 25);
    CHECK(m.normal > 0.999999);
  }
  SUBCASE("symmetric models split evenly") {
    FeatureModel model{{20, 2}, {30, 2}};
    MassAssignment m = gaussian_mass(model, 25);
    CHECK(m.normal == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.faulty == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("sums to one and matches density scaling over random draws") {
    sim::Rng rng(303);
    for (int i = 0; i < 1000; ++i) {
      FeatureModel model;
      model.normal = {rng.unit() * 100 - 50, 0.1 + rng.unit() * 9.9};
      model.faulty = {rng.unit() * 100 - 50, 0.1 + rng.unit() * 9.9};
      const double x = rng.unit() * 120 - 60;
      MassAssignment m = gaussian_mass(model, x);
      CHECK(valid_mass(m, kTol));
      // normalization invariance: scaling both densities by c > 0 changes nothing
      const double c = 0.01 + rng.unit() * 100;
      const double rho_n = c * gaussian_pdf(x, model.normal.mu, model.normal.sigma);
      const double rho_f = c * gaussian_pdf(x, model.faulty.mu, model.faulty.sigma);
      if (rho_n + rho_f > 0) {
        CHECK(std::abs(m.normal - rho_n / (rho_n + rho_f)) < kTol);
      }
    }
  }
  SUBCASE("degenerate observation returns the vacuous mass") {
    FeatureModel model{{0, 0.1}, {1000, 0.1}};
    MassAssignment m = gaussian_mass(model, 500);
    CHECK(m.either == 1.0);
    CHECK(m.normal == 0.0);
  }
}

TEST_CASE("classify_central") {
  FeatureModel near{{25, 1.5}, {45, 3}};
  SUBCASE("single feature equals the mass argmax") {
    CHECK_FALSE(classify_central({{near, 25.5}}).faulty);
    CHECK(classify_central({{near, 44.0}}).faulty);
  }
  SUBCASE("all features strongly normal") {
    CHECK_FALSE(classify_central({{near, 25.0}, {near, 24.7}, {near, 25.2}}).faulty);
  }
  SUBCASE("ties classify as faulty") {
    FeatureModel symmetric{{20, 2}, {30, 2}};
    CHECK(classify_central({{symmetric, 25.0}}).faulty);
  }
  SUBCASE("three mixed features match the direct triple-product oracle") {
    // Moderate separations keep every pairwise conflict well below 1 so the
    // comparison is not dominated by normalization cancellation.
    sim::Rng rng(404);
    for (int i = 0; i < 200; ++i) {
      std::vector<std::pair<FeatureModel, double>> observations;
      std::vector<SubsetMass> masses;
      for (int j = 0; j < 3; ++j) {
        FeatureModel model;
        model.normal = {25 + rng.gauss() * 0.5, 3 + rng.unit()};
        model.faulty = {34 + rng.gauss() * 0.5, 3 + rng.unit()};
        double x = 25 + rng.unit() * 7;
        observations.push_back({model, x});
        masses.push_back(to_subsets(gaussian_mass(model, x)));
      }
      CentralVerdict verdict = classify_central(observations);
      SubsetMass want = oracle_combine3(masses[0], masses[1], masses[2]);
      CHECK(std::abs(verdict.combined.normal - want[1]) < kTol);
      CHECK(std::abs(verdict.combined.faulty - want[2]) < kTol);
      CHECK(verdict.faulty == (want[2] >= want[1]));
    }
  }
  SUBCASE("named-feature lookup") {
    GaussianClassModel model;
    model.features["temperature"] = near;
    model.feature_order = {"temperature"};
    CHECK_FALSE(classify_central(model, {{"temperature", 25.0}}).faulty);
    CHECK_THROWS_AS(classify_central(model, {{"humidity", 50.0}}), Error);
    CHECK_THROWS_AS(classify_central(model, {}), Error);
  }
}

TEST_CASE("check_time") {
  TimeConfig config{60'000, 3};
  SUBCASE("slow stream never flags") {
    TimeState state;
    for (int i = 0; i < 20; ++i) {
      TimeCheck check = check_time(state, 120'000ll * i, config);
      CHECK_FALSE(check.frequent);
      CHECK_FALSE(check.compromised);
      state = check.next;
    }
    CHECK(state.noftr == 0);
  }
  SUBCASE("10s intervals compromise on exactly the 3rd frequent request") {
    TimeState state;
    int frequent_count = 0;
    int compromised_at = -1;
    for (int i = 0; i <= 5; ++i) {
      TimeCheck check = check_time(state, 10'000ll * i, config);
      if (check.frequent) ++frequent_count;
      if (check.compromised && compromised_at < 0) compromised_at = frequent_count;
      state = check.next;
    }
    CHECK(compromised_at == 3);
  }
  SUBCASE("Table-conformant GPS cadence is never flagged over 24 hours") {
    TimeConfig gps{30ll * 60 * 1000, 3};
    TimeState state;
    for (int i = 0; i <= 48; ++i) {
      TimeCheck check = check_time(state, 30ll * 60 * 1000 * i, gps);
      CHECK_FALSE(check.frequent);
      CHECK_FALSE(check.compromised);
      state = check.next;
    }
  }
  SUBCASE("random schedules with inter-arrival >= min_freq never flag") {
    sim::Rng rng(505);
    for (int trial = 0; trial < 50; ++trial) {
      TimeState state;
      std::int64_t t = 0;
      for (int i = 0; i < 40; ++i) {
        t += config.min_freq_ms + static_cast<std::int64_t>(rng.below(100'000));
        TimeCheck check = check_time(state, t, config);
        CHECK_FALSE(check.frequent);
        CHECK_FALSE(check.compromised);
        state = check.next;
      }
    }
  }
  SUBCASE("noftr resets by replacing the state") {
    TimeState state;
    state = check_time(state, 0, config).next;
    state = check_time(state, 100, config).next;
    CHECK(state.noftr == 1);
    state = TimeState{state.tolt_ms, 0};  // penalty applied: counter cleared
    CHECK(state.noftr == 0);
  }
  SUBCASE("unknown sensor handling is the caller's no_ach_entry") {
    // check_time itself is pure; the engine maps a missing ACH entry to
    // Errc::no_ach_entry before calling it. Covered in the simulator tests.
  }
}

TEST_CASE("dnm") {
  DnmConfig config{10.0, false};
  NeighborWindow window;
  window.center = {10.0, 20.0};
  window.arm = 1.0;
  window.own_reading = 25.0;
  SUBCASE("identical neighbors give zero") {
    for (int i = 0; i < 3; ++i) {
      window.neighbors.push_back({"n" + std::to_string(i), {10.1, 20.1}, 25.0});
    }
    DnmResult result = dnm(window, config);
    CHECK(result.value == 0.0);
    CHECK_FALSE(result.compromised);
    CHECK(result.neighbors_considered == 3);
  }
  SUBCASE("hand-computed fixture 1+1+2") {
    window.neighbors = {{"a", {10.0, 20.0}, 24.0},
                        {"b", {10.2, 19.8}, 26.0},
                        {"c", {9.8, 20.3}, 27.0}};
    DnmResult result = dnm(window, config);
    CHECK(result.value == doctest::Approx(4.0).epsilon(1e-12));
    CHECK_FALSE(result.compromised);
    DnmConfig tight{3.9, false};
    CHECK(dnm(window, tight).compromised);
  }
  SUBCASE("neighbor at latitude center + s is outside the window") {
    window.neighbors = {{"far", {10.0 + window.arm, 20.0}, 99.0},
                        {"near", {10.0, 20.0}, 25.0}};
    DnmResult result = dnm(window, config);
    CHECK(result.neighbors_considered == 1);
    CHECK(result.value == 0.0);
  }
  SUBCASE("window bound is inclusive at center + s/2") {
    window.neighbors = {{"edge", {10.5, 20.5}, 25.0}};
    CHECK(dnm(window, config).neighbors_considered == 1);
  }
  SUBCASE("no neighbors inside is an error") {
    window.neighbors = {{"far", {99, 99}, 1.0}};
    CHECK_THROWS_AS(dnm(window, config), Error);
  }
  SUBCASE("translation invariance in readings") {
    sim::Rng rng(606);
    for (int trial = 0; trial < 200; ++trial) {
      NeighborWindow w;
      w.center = {rng.unit() * 90, rng.unit() * 180};
      w.arm = 0.5 + rng.unit();
      w.own_reading = rng.unit() * 50;
      int n = 1 + static_cast<int>(rng.below(6));
      for (int i = 0; i < n; ++i) {
        w.neighbors.push_back({"n",
                               {w.center.latitude + (rng.unit() - 0.5) * w.arm * 0.9,
                                w.center.longitude + (rng.unit() - 0.5) * w.arm * 0.9},
                               rng.unit() * 50});
      }
      DnmResult base = dnm(w, config);
      const double shift = rng.unit() * 100 - 50;
      NeighborWindow shifted = w;
      shifted.own_reading += shift;
      for (auto& neighbor : shifted.neighbors) neighbor.reading += shift;
      DnmResult moved = dnm(shifted, config);
      CHECK(std::abs(base.value - moved.value) < 1e-9);
    }
  }
  SUBCASE("normalized variant divides by the neighbor count") {
    window.neighbors = {{"a", {10, 20}, 24.0}, {"b", {10, 20}, 26.0}, {"c", {10, 20}, 27.0}};
    DnmConfig normalized{10.0, true};
    CHECK(dnm(window, normalized).value == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("network reliability ratio") {
  CHECK(network_reliability({9, 1}) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(network_reliability({0, 5}) == 0.0);
  CHECK(network_reliability({7, 3}) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK_THROWS_AS(network_reliability({0, 0}), Error);
}

TEST_CASE("assess_pm") {
  PmConfig config;  // equal weights, trigger 50, base 60s, floor 0.95
  SUBCASE("all clean") {
    PMReport report = assess_pm({false, false, false, 1.0}, config);
    CHECK(report.pm == 0.0);
    CHECK_FALSE(report.penalty_ms.has_value());
  }
  SUBCASE("only time flagged with equal weights") {
    PMReport report = assess_pm({true, false, false, 1.0}, config);
    CHECK(report.pm == doctest::Approx(25.0).epsilon(1e-12));
  }
  SUBCASE("time + central flagged, reliability 0.8") {
    PMReport report = assess_pm({true, true, false, 0.8}, config);
    CHECK(report.pm == doctest::Approx(55.0).epsilon(1e-12));
    REQUIRE(report.penalty_ms.has_value());
    CHECK(*report.penalty_ms == 33'000);  // 60s * 55%
  }
  SUBCASE("a lone time flag does not penalize while reliability holds") {
    PmConfig aggressive = config;
    aggressive.weights = {0.8, 0.1, 0.05, 0.05};
    PMReport healthy = assess_pm({true, false, false, 1.0}, aggressive);
    CHECK(healthy.pm == doctest::Approx(80.0).epsilon(1e-12));
    CHECK_FALSE(healthy.penalty_ms.has_value());
    PMReport degraded = assess_pm({true, false, false, 0.5}, aggressive);
    CHECK(degraded.penalty_ms.has_value());
  }
  SUBCASE("monotone in every component") {
    sim::Rng rng(707);
    for (int i = 0; i < 200; ++i) {
      PmComponents base{rng.below(2) == 1, rng.below(2) == 1, rng.below(2) == 1, rng.unit()};
      const double pm0 = assess_pm(base, config).pm;
      PmComponents flipped = base;
      switch (rng.below(3)) {
        case 0: flipped.time = true; break;
        case 1: flipped.data_central = true; break;
        default: flipped.data_distributed = true; break;
      }
      CHECK(assess_pm(flipped, config).pm >= pm0 - 1e-12);
    }
  }
  SUBCASE("weights must sum to one") {
    PmConfig bad = config;
    bad.weights = {0.5, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(assess_pm({}, bad), Error);
  }
}

TEST_CASE("model table parsing") {
  const char* text =
      "# type feature class mu sigma\n"
      "weather temperature normal 25 1.5\n"
      "weather temperature faulty 45 3\n"
      "weather humidity normal 55 5   # percent\n"
      "weather humidity faulty 5 2\n"
      "gps drift normal 0 0.5\n"
      "gps drift faulty 10 2\n";
  auto models = parse_model_table(text, "inline");
  REQUIRE(models.count("weather") == 1);
  REQUIRE(models.count("gps") == 1);
  const auto& weather = models.at("weather");
  CHECK(weather.feature_order == std::vector<std::string>{"temperature", "humidity"});
  CHECK(weather.features.at("temperature").normal.mu == 25);
  CHECK(weather.features.at("humidity").faulty.sigma == 2);
  CHECK_THROWS_AS(parse_model_table("weather temp normal 1", "x"), Error);
  CHECK_THROWS_AS(parse_model_table("weather temp odd 1 1", "x"), Error);
  CHECK_THROWS_AS(parse_model_table("weather temp normal 1 0", "x"), Error);
}
