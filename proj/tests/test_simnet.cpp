#include "doctest.h"
#include "helpers.hpp"
#include "seemore/simnet.hpp"

using namespace seemore;
using namespace seemore::test;

TEST_SUITE_BEGIN("simnet");

namespace {
Scenario base_scenario(Mode mode) {
  Scenario sc;
  sc.cluster = small_cluster();
  sc.initial_mode = mode;
  sc.workload = {2, 20, 1.0};
  sc.seed = 17;
  return sc;
}
}  // namespace

TEST_CASE("fault-free runs complete with identical replica states") {
  for (Mode m : {Mode::Lion, Mode::Dog, Mode::Peacock}) {
    CAPTURE(mode_name(m));
    RunResult r = run_scenario(base_scenario(m));
    CHECK(r.audit.ok);
    CHECK(r.all_completed);
    CHECK(r.metrics.requests.size() == 40);
    std::set<Digest> ds;
    for (auto& [rep, d] : r.digests) ds.insert(d);
    CHECK(ds.size() == 1);
    for (auto& [rep, cur] : r.exec_cursors) CHECK(cur == 40);
  }
}

TEST_CASE("identical scenario and seed give byte-identical metrics") {
  Scenario sc = base_scenario(Mode::Peacock);
  sc.delay = {1, 100, 10, 0.1};
  sc.faults.crashes = {{1, 40, 90}};
  RunResult a = run_scenario(sc);
  RunResult b = run_scenario(sc);
  CHECK(a.metrics.to_csv() == b.metrics.to_csv());
  CHECK(a.digests == b.digests);
  CHECK(a.exec_log.size() == b.exec_log.size());
}

TEST_CASE("different seeds change pre-GST schedules but never safety") {
  Scenario sc = base_scenario(Mode::Dog);
  sc.delay = {1, 80, 12, 0.15};
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    sc.seed = seed;
    RunResult r = run_scenario(sc);
    CHECK(r.audit.ok);
    CHECK(r.all_completed);
  }
}

TEST_CASE("fault plans are bounded and located") {
  ClusterConfig cfg = small_cluster();

  FaultPlan crash_in_public;
  crash_in_public.crashes = {{3, 10, 0}};
  CHECK(crash_in_public.validate(cfg).has_value());

  FaultPlan byz_in_private;
  byz_in_private.byzantine = {{0, 10, ByzStrategy::Mute}};
  CHECK(byz_in_private.validate(cfg).has_value());

  FaultPlan too_many_byz;
  too_many_byz.byzantine = {{2, 0, ByzStrategy::Mute},
                            {3, 0, ByzStrategy::Equivocate}};
  CHECK(too_many_byz.validate(cfg).has_value());

  FaultPlan ok;
  ok.crashes = {{0, 10, 50}};
  ok.byzantine = {{4, 0, ByzStrategy::WrongSeq}};
  CHECK(!ok.validate(cfg).has_value());
}

TEST_CASE("every byzantine strategy is survived within bounds") {
  for (ByzStrategy s :
       {ByzStrategy::Mute, ByzStrategy::Equivocate, ByzStrategy::CorruptDigest,
        ByzStrategy::WrongSeq, ByzStrategy::ReplayOldView,
        ByzStrategy::ForgeAttempt}) {
    CAPTURE(byz_strategy_name(s));
    for (Mode m : {Mode::Dog, Mode::Peacock}) {
      Scenario sc = base_scenario(m);
      sc.faults.byzantine = {{2, 10, s}};
      RunResult r = run_scenario(sc);
      CHECK(r.audit.ok);
      CHECK(r.all_completed);
    }
  }
}

TEST_CASE("audit flags conflicting execution digests") {
  std::vector<ExecRecord> log = {
      {0, 1, 0xAAA, 0, Mode::Lion, 1, 1, true, 4},
      {1, 1, 0xAAA, 0, Mode::Lion, 1, 1, true, 4},
      {2, 1, 0xBBB, 0, Mode::Lion, 1, 1, true, 4},
  };
  AuditReport rep = audit_exec_log(log);
  CHECK(!rep.ok);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].find("conflicting digests") != std::string::npos);
}

TEST_CASE("audit flags double application of a client timestamp") {
  std::vector<ExecRecord> log = {
      {0, 1, 0xAAA, 0, Mode::Lion, 1, 1, true, 4},
      {0, 2, 0xAAB, 0, Mode::Lion, 1, 1, true, 8},
  };
  AuditReport rep = audit_exec_log(log);
  CHECK(!rep.ok);
  CHECK(rep.violations[0].find("twice") != std::string::npos);
}

TEST_CASE("audit flags out-of-order execution") {
  std::vector<ExecRecord> log = {
      {0, 2, 0xAAA, 0, Mode::Lion, 1, 1, true, 4},
      {0, 1, 0xAAB, 0, Mode::Lion, 2, 1, true, 8},
  };
  AuditReport rep = audit_exec_log(log);
  CHECK(!rep.ok);
}

TEST_CASE("audit passes a clean interleaved history") {
  std::vector<ExecRecord> log;
  for (ReplicaId r = 0; r < 4; r++)
    for (Seq n = 1; n <= 5; n++)
      log.push_back({r, n, 0x1000 + n, 0, Mode::Dog, ClientId(n % 2 + 1),
                     n, true, n + r});
  CHECK(audit_exec_log(log).ok);
}

TEST_CASE("sabotaged quorum plus equivocation is caught by the audit") {
  Scenario sc = base_scenario(Mode::Peacock);
  sc.faults.byzantine = {{2, 0, ByzStrategy::Equivocate}};
  sc.hooks.accept_quorum_delta = -2;
  RunResult r = run_scenario(sc);
  CHECK(!r.audit.ok);

  // the same attack against the real quorum is harmless
  sc.hooks.accept_quorum_delta = 0;
  RunResult ok = run_scenario(sc);
  CHECK(ok.audit.ok);
}

TEST_CASE("scenario validation rejects malformed setups") {
  Scenario sc = base_scenario(Mode::Lion);
  SUBCASE("cluster too small") {
    sc.cluster = {1, 2, 1, 1};
    CHECK(sc.validate().has_value());
  }
  SUBCASE("faults out of bounds") {
    sc.faults.byzantine = {{2, 0, ByzStrategy::Mute},
                           {3, 0, ByzStrategy::Mute}};
    CHECK(sc.validate().has_value());
  }
  SUBCASE("bad delay model") {
    sc.delay.pre_gst_cap = 0;
    CHECK(sc.validate().has_value());
  }
  SUBCASE("mode change target must fit the cluster") {
    sc.cluster = {3, 3, 1, 1};  // N=6 fine, but P=3 < 3m+1
    sc.mode_changes = {{50, Mode::Peacock}};
    CHECK(sc.validate().has_value());
  }
}

TEST_SUITE_END();
