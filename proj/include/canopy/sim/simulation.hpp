#pragma once

#include <memory>

#include "canopy/ledger/chain.hpp"
#include "canopy/sim/report.hpp"
#include "canopy/sim/scenario.hpp"

namespace canopy::sim {

struct SimImpl;

// Deterministic discrete-event simulation of the full two-tier architecture:
// LP nodes emit hash-chain-authenticated packets to their block admins,
// admins gate them through the ACH and misbehaviour detectors into private
// ledgers, summarized blocks sync to quorum-validated group-head public
// ledgers, and attack scripts drive the adversary models. Identical
// (scenario, seed) pairs produce byte-identical reports.
class Simulation {
 public:
  Simulation(ScenarioConfig config, std::uint64_t seed);
  ~Simulation();
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;

  MetricsReport run();

  // Post-run access to every ledger, for persistence and audit.
  struct ChainRef {
    std::string name;
    bool public_tier = false;
    const ledger::ChainStore* chain = nullptr;
  };
  std::vector<ChainRef> chains() const;

 private:
  std::unique_ptr<SimImpl> impl_;
};

MetricsReport run_scenario(const ScenarioConfig& config, std::uint64_t seed);

}  // namespace canopy::sim
