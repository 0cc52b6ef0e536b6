#include "doctest.h"
#include "helpers.hpp"
#include "seemore/metrics.hpp"
#include "seemore/simnet.hpp"

using namespace seemore;
using namespace seemore::test;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("linear fit recovers an exact line") {
  std::vector<std::pair<double, double>> pts;
  for (double x = 1; x <= 5; x++) pts.push_back({x, 3 * x + 7});
  LinearFit f = linear_fit(pts);
  CHECK(f.slope == doctest::Approx(3));
  CHECK(f.intercept == doctest::Approx(7));
  CHECK(f.r2 == doctest::Approx(1.0));
}

TEST_CASE("linear fit degrades on non-linear data") {
  std::vector<std::pair<double, double>> pts;
  for (double x = 1; x <= 8; x++) pts.push_back({x, x * x * x});
  LinearFit f = linear_fit(pts);
  CHECK(f.r2 < 0.95);
}

TEST_CASE("csv has three stable tables") {
  RunMetrics m;
  m.requests.push_back({1, 1, 1, Mode::Lion, 0, 0, 4});
  m.count_message(MsgType::Request, Mode::Lion);
  m.count_message(MsgType::Prepare, Mode::Lion);
  m.count_message(MsgType::Prepare, Mode::Lion);
  m.view_changes.push_back({1, 10, 14, true});
  m.duration = 20;

  std::string csv = m.to_csv();
  CHECK(csv.find("request_id,client,ts,mode,view,latency_sim_ms") !=
        std::string::npos);
  CHECK(csv.find("1,1,1,lion,0,4") != std::string::npos);
  CHECK(csv.find("msg_type,mode,count") != std::string::npos);
  CHECK(csv.find("prepare,lion,2") != std::string::npos);
  CHECK(csv.find("view,start,end,downtime") != std::string::npos);
  CHECK(csv.find("1,10,14,4") != std::string::npos);
  CHECK(m.to_csv() == csv);  // stable
}

TEST_CASE("empty metrics emit header-only tables") {
  RunMetrics m;
  std::string csv = m.to_csv();
  CHECK(csv.find("request_id") != std::string::npos);
  CHECK(csv.find("msg_type") != std::string::npos);
  CHECK(csv.find("view,start") != std::string::npos);
}

TEST_CASE("throughput is committed requests over simulated duration") {
  RunMetrics m;
  m.duration = 0;
  CHECK(m.throughput() == 0.0);
  m.requests.resize(10);
  m.duration = 50;
  CHECK(m.throughput() == doctest::Approx(0.2));
}

TEST_CASE("per-run counters only grow with traffic") {
  Scenario sc;
  sc.cluster = small_cluster();
  sc.initial_mode = Mode::Lion;
  sc.workload = {1, 1, 1.0};
  RunResult one = run_scenario(sc);
  sc.workload.requests_per_client = 5;
  RunResult five = run_scenario(sc);
  CHECK(five.metrics.total_messages > one.metrics.total_messages);
  CHECK(one.metrics.requests.size() == 1);
  CHECK(five.metrics.requests.size() == 5);
}

TEST_SUITE_END();
