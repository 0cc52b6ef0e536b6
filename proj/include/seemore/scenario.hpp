#pragma once

#include <string>
#include <variant>

#include "json.hpp"
#include "seemore/simnet.hpp"

namespace seemore {

using json = nlohmann::json;

// JSON <-> Scenario. parse_* return an error string on malformed input
// rather than throwing.
std::variant<Scenario, std::string> scenario_from_json(const json& j);
std::variant<Scenario, std::string> load_scenario(const std::string& path);
json scenario_to_json(const Scenario& sc);

// A sweep is a base scenario plus a grid of cluster/mode cells, each run
// under every listed seed.
struct SweepCell {
  ClusterConfig cluster;
  Mode mode = Mode::Lion;
  uint32_t clients = 0;  // 0 = inherit from the base workload
};

struct SweepConfig {
  Scenario base;
  std::vector<SweepCell> cells;
  std::vector<uint64_t> seeds;
};

std::variant<SweepConfig, std::string> load_sweep(const std::string& path);

// One CSV row per (cell, seed), deterministic order; returns the CSV text.
std::string run_sweep(const SweepConfig& cfg);

}  // namespace seemore
