#include "doctest.h"
#include "helpers.hpp"
#include "seemore/simnet.hpp"

using namespace seemore;
using namespace seemore::test;

TEST_SUITE_BEGIN("viewchange");

namespace {
const KeyedHashCrypto kCrypto;

AgreeMsg signed_entry(MsgType t, View v, Seq n, ReplicaId sender,
                      const RequestMsg& req) {
  AgreeMsg m;
  m.type = t;
  m.view = v;
  m.seq = n;
  m.sender = sender;
  m.has_request = true;
  m.request = req;
  m.digest = request_digest(kCrypto, req);
  sign_agree(kCrypto, m);
  return m;
}

ViewChangeMsg make_vc(ReplicaId sender, View new_view, Mode target,
                      Mode from_mode, std::vector<AgreeMsg> prepares,
                      std::vector<AgreeMsg> commits = {}) {
  ViewChangeMsg vc;
  vc.new_view = new_view;
  vc.target_mode = target;
  vc.from_view = new_view - 1;
  vc.from_mode = from_mode;
  vc.stable_seq = 0;
  vc.prepares = std::move(prepares);
  vc.commits = std::move(commits);
  vc.sender = sender;
  sign_view_change(kCrypto, vc);
  return vc;
}
}  // namespace

TEST_CASE("assembly needs the view-change quorum") {
  ClusterConfig cfg = small_cluster();
  Replica assembler(cfg, 1, Mode::Lion, &kCrypto, {});
  RequestMsg req = make_request(kCrypto, 1, 1, "k", "v");
  AgreeMsg prep = signed_entry(MsgType::Prepare, 0, 1, 0, req);

  // 2m+c = 3 other logs required; two are not enough
  std::vector<ViewChangeMsg> vcs = {
      make_vc(2, 1, Mode::Lion, Mode::Lion, {prep}),
      make_vc(3, 1, Mode::Lion, Mode::Lion, {prep})};
  CHECK(!assembler.assemble_new_view(1, Mode::Lion, vcs));

  vcs.push_back(make_vc(4, 1, Mode::Lion, Mode::Lion, {prep}));
  CHECK(assembler.assemble_new_view(1, Mode::Lion, vcs).has_value());
}

TEST_CASE("commit evidence survives into the new view with its digest") {
  ClusterConfig cfg = small_cluster();
  Replica assembler(cfg, 1, Mode::Lion, &kCrypto, {});
  RequestMsg req = make_request(kCrypto, 1, 1, "k", "v");
  AgreeMsg commit = signed_entry(MsgType::Commit, 0, 1, 0, req);

  std::vector<ViewChangeMsg> vcs = {
      make_vc(2, 1, Mode::Lion, Mode::Lion, {}, {commit}),
      make_vc(3, 1, Mode::Lion, Mode::Lion, {}),
      make_vc(4, 1, Mode::Lion, Mode::Lion, {})};
  auto nv = assembler.assemble_new_view(1, Mode::Lion, vcs);
  REQUIRE(nv);
  REQUIRE(nv->commits.size() == 1);
  CHECK(nv->commits[0].seq == 1);
  CHECK(nv->commits[0].digest == request_digest(kCrypto, req));
  CHECK(nv->commits[0].sender == 1);  // re-signed by the assembler
  CHECK(nv->prepares.empty());
}

TEST_CASE("a prepare reported by a full quorum is treated as committed") {
  ClusterConfig cfg = small_cluster();
  Replica assembler(cfg, 1, Mode::Lion, &kCrypto, {});
  RequestMsg req = make_request(kCrypto, 1, 1, "k", "v");
  AgreeMsg prep = signed_entry(MsgType::Prepare, 0, 1, 0, req);

  std::vector<ViewChangeMsg> vcs;
  for (ReplicaId s : {1u, 2u, 3u, 4u})
    vcs.push_back(make_vc(s, 1, Mode::Lion, Mode::Lion, {prep}));
  auto nv = assembler.assemble_new_view(1, Mode::Lion, vcs);
  REQUIRE(nv);
  // 4 reporters = 2m+c+1: the old quorum must have accepted it
  CHECK(nv->commits.size() == 1);
  CHECK(nv->prepares.empty());
}

TEST_CASE("gaps are filled with no-ops, partial evidence is re-prepared") {
  ClusterConfig cfg = small_cluster();
  Replica assembler(cfg, 1, Mode::Lion, &kCrypto, {});
  RequestMsg r1 = make_request(kCrypto, 1, 1, "a", "1");
  RequestMsg r3 = make_request(kCrypto, 2, 1, "b", "2");
  AgreeMsg p1 = signed_entry(MsgType::Prepare, 0, 1, 0, r1);
  AgreeMsg p3 = signed_entry(MsgType::Prepare, 0, 3, 0, r3);

  std::vector<ViewChangeMsg> vcs = {
      make_vc(2, 1, Mode::Lion, Mode::Lion, {p1, p3}),
      make_vc(3, 1, Mode::Lion, Mode::Lion, {}),
      make_vc(4, 1, Mode::Lion, Mode::Lion, {})};
  auto nv = assembler.assemble_new_view(1, Mode::Lion, vcs);
  REQUIRE(nv);
  REQUIRE(nv->prepares.size() == 3);
  CHECK(nv->prepares[0].seq == 1);
  CHECK(nv->prepares[0].digest == request_digest(kCrypto, r1));
  // the hole at 2 became a protocol no-op
  CHECK(nv->prepares[1].seq == 2);
  CHECK(nv->prepares[1].request.op.kind == KvOp::Kind::Noop);
  CHECK(nv->prepares[2].seq == 3);
  CHECK(nv->prepares[2].digest == request_digest(kCrypto, r3));
}

TEST_CASE("forged evidence inside a view-change message is discarded") {
  ClusterConfig cfg = small_cluster();
  Replica assembler(cfg, 1, Mode::Lion, &kCrypto, {});
  RequestMsg req = make_request(kCrypto, 1, 1, "k", "v");
  AgreeMsg bogus = signed_entry(MsgType::Prepare, 0, 1, 0, req);
  bogus.sig ^= 1;  // broken primary signature

  std::vector<ViewChangeMsg> vcs = {
      make_vc(2, 1, Mode::Lion, Mode::Lion, {bogus}),
      make_vc(3, 1, Mode::Lion, Mode::Lion, {}),
      make_vc(4, 1, Mode::Lion, Mode::Lion, {})};
  // the message carrying forged evidence is invalid, dropping the
  // sender below quorum
  CHECK(!assembler.assemble_new_view(1, Mode::Lion, vcs));
}

TEST_CASE("crash of the lion primary elects a successor and finishes") {
  Scenario sc;
  sc.cluster = small_cluster();
  sc.initial_mode = Mode::Lion;
  sc.workload = {2, 20, 1.0};
  sc.faults.crashes = {{0, 25, 0}};
  sc.seed = 3;
  REQUIRE(!sc.validate());
  RunResult r = run_scenario(sc);
  CHECK(r.audit.ok);
  CHECK(r.all_completed);
  CHECK(r.final_view >= 1);
  CHECK(r.final_mode == Mode::Lion);
}

TEST_CASE("muting the peacock primary triggers a transferer-led change") {
  Scenario sc;
  sc.cluster = small_cluster();
  sc.initial_mode = Mode::Peacock;
  sc.workload = {2, 20, 1.0};
  sc.faults.byzantine = {{2, 25, ByzStrategy::Mute}};
  sc.seed = 3;
  RunResult r = run_scenario(sc);
  CHECK(r.audit.ok);
  CHECK(r.all_completed);
  CHECK(r.final_view >= 1);
  CHECK(r.final_mode == Mode::Peacock);
}

TEST_CASE("mode changes walk through all three modes without data loss") {
  Scenario sc;
  sc.cluster = {2, 10, 1, 3};
  sc.initial_mode = Mode::Lion;
  sc.workload = {2, 40, 1.0};
  sc.mode_changes = {{60, Mode::Peacock}, {220, Mode::Dog}};
  sc.seed = 5;
  RunResult r = run_scenario(sc);
  CHECK(r.audit.ok);
  CHECK(r.all_completed);
  CHECK(r.final_mode == Mode::Dog);
  CHECK(r.final_view >= 2);
}

TEST_CASE("crash-and-restart replica catches up via checkpoints") {
  Scenario sc;
  sc.cluster = small_cluster();
  sc.initial_mode = Mode::Lion;
  sc.workload = {2, 30, 1.0};
  sc.faults.crashes = {{1, 20, 120}};
  sc.seed = 9;
  RunResult r = run_scenario(sc);
  CHECK(r.audit.ok);
  CHECK(r.all_completed);
  // the restarted backup ends on the same state as everyone else
  REQUIRE(r.digests.count(1));
  std::set<Digest> ds;
  for (auto& [rep, d] : r.digests) ds.insert(d);
  CHECK(ds.size() == 1);
}

TEST_SUITE_END();
