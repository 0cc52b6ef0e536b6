#include "doctest.h"
#include "seemore/scenario.hpp"

using namespace seemore;

TEST_SUITE_BEGIN("scenario");

TEST_CASE("parsing fills defaults and reads every section") {
  json j = json::parse(R"({
    "cluster": {"S": 2, "P": 4, "c": 1, "m": 1},
    "mode": "dog",
    "workload": {"clients": 3, "requests_per_client": 7, "put_ratio": 0.5},
    "delay": {"base": 2, "gst": 40, "pre_gst_cap": 9, "pre_gst_drop": 0.1},
    "faults": {
      "crashes": [{"replica": 0, "at": 10, "restart_at": 60}],
      "byzantine": [{"replica": 5, "at": 0, "strategy": "equivocate"}]
    },
    "mode_changes": [{"at": 100, "target": "peacock"}],
    "checkpoint_period": 5,
    "seed": 99
  })");
  auto parsed = scenario_from_json(j);
  REQUIRE(std::holds_alternative<Scenario>(parsed));
  const Scenario& sc = std::get<Scenario>(parsed);
  CHECK(sc.cluster.total() == 6);
  CHECK(sc.initial_mode == Mode::Dog);
  CHECK(sc.workload.clients == 3);
  CHECK(sc.workload.put_ratio == doctest::Approx(0.5));
  CHECK(sc.delay.gst == 40);
  REQUIRE(sc.faults.crashes.size() == 1);
  CHECK(sc.faults.crashes[0].restart_at == 60);
  REQUIRE(sc.faults.byzantine.size() == 1);
  CHECK(sc.faults.byzantine[0].strategy == ByzStrategy::Equivocate);
  REQUIRE(sc.mode_changes.size() == 1);
  CHECK(sc.mode_changes[0].target == Mode::Peacock);
  CHECK(sc.replica_opts.checkpoint_period == 5);
  // client timeout defaults to four watch timeouts
  CHECK(sc.client_opts.retry_timeout == 4 * sc.replica_opts.watch_timeout);
  CHECK(sc.seed == 99);
  CHECK(!sc.validate());
}

TEST_CASE("round trip through json is stable") {
  json j = json::parse(R"({
    "cluster": {"S": 3, "P": 8, "c": 2, "m": 2},
    "mode": "peacock",
    "workload": {"clients": 2, "requests_per_client": 10, "put_ratio": 1.0},
    "seed": 5
  })");
  auto first = scenario_from_json(j);
  REQUIRE(std::holds_alternative<Scenario>(first));
  json dumped = scenario_to_json(std::get<Scenario>(first));
  auto second = scenario_from_json(dumped);
  REQUIRE(std::holds_alternative<Scenario>(second));
  CHECK(scenario_to_json(std::get<Scenario>(second)) == dumped);
}

TEST_CASE("the rental size can be derived instead of given") {
  json j = json::parse(R"({
    "cluster": {"S": 2, "c": 1, "m": 1, "alpha": 0.3},
    "mode": "lion"
  })");
  auto parsed = scenario_from_json(j);
  REQUIRE(std::holds_alternative<Scenario>(parsed));
  CHECK(std::get<Scenario>(parsed).cluster.public_size == 10);
}

TEST_CASE("parse errors are reported, not thrown") {
  CHECK(std::holds_alternative<std::string>(
      scenario_from_json(json::parse(R"({"mode": "lion"})"))));
  CHECK(std::holds_alternative<std::string>(scenario_from_json(
      json::parse(R"({"cluster": {"S":2,"P":4,"c":1,"m":1}, "mode": "cat"})"))));
  CHECK(std::holds_alternative<std::string>(scenario_from_json(json::parse(
      R"({"cluster": {"S":2,"c":1,"m":1,"alpha":0.5}, "mode": "lion"})"))));
  CHECK(std::holds_alternative<std::string>(
      load_scenario("/nonexistent/path.json")));
}

TEST_SUITE_END();
