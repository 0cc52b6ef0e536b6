#pragma once

#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>

#include "seemore/client.hpp"
#include "seemore/config.hpp"
#include "seemore/metrics.hpp"
#include "seemore/replica.hpp"

namespace seemore {

enum class ByzStrategy : uint8_t {
  None = 0,
  Mute,          // sends nothing
  Equivocate,    // conflicting digests to disjoint peer halves
  CorruptDigest, // re-signed messages voting for a garbage digest
  WrongSeq,      // shifts sequence numbers
  ReplayOldView, // stamps messages with a stale view
  ForgeAttempt,  // fabricates signatures of honest replicas
};

const char* byz_strategy_name(ByzStrategy s);
std::optional<ByzStrategy> byz_strategy_from_name(const std::string& s);

struct CrashDirective {
  ReplicaId replica = 0;
  SimTime at = 0;
  SimTime restart_at = 0;  // 0 = stays down
};

struct ByzDirective {
  ReplicaId replica = 0;
  SimTime at = 0;
  ByzStrategy strategy = ByzStrategy::None;
};

// Crash faults live in the trusted partition, Byzantine faults in the
// rented one, and neither may exceed its bound.
struct FaultPlan {
  std::vector<CrashDirective> crashes;
  std::vector<ByzDirective> byzantine;
  std::optional<std::string> validate(const ClusterConfig& cfg) const;
};

struct DelayModel {
  SimTime base = 1;         // per-link one-way delay after GST
  SimTime gst = 0;          // before this instant the adversary schedules
  SimTime pre_gst_cap = 1;  // max delay the adversary may impose
  double pre_gst_drop = 0;  // per-message drop probability before GST
};

struct Workload {
  uint32_t clients = 1;
  uint32_t requests_per_client = 10;
  double put_ratio = 1.0;  // remainder are gets
};

struct ModeSwitch {
  SimTime at = 0;
  Mode target = Mode::Lion;
};

struct Scenario {
  ClusterConfig cluster;
  Mode initial_mode = Mode::Lion;
  Workload workload;
  DelayModel delay;
  FaultPlan faults;
  std::vector<ModeSwitch> mode_changes;
  ReplicaOptions replica_opts;
  ClientOptions client_opts;
  SimTime max_time = 200000;
  uint64_t seed = 1;
  Replica::TestHooks hooks;  // sabotage knobs for auditor mutation tests

  std::optional<std::string> validate() const;
};

struct ExecRecord {
  ReplicaId replica = 0;
  Seq seq = 0;
  Digest digest = 0;
  View view = 0;
  Mode mode = Mode::Lion;
  ClientId client = 0;
  uint64_t ts = 0;
  bool mutation = false;
  SimTime at = 0;
};

struct AuditReport {
  bool ok = true;
  std::vector<std::string> violations;
};

struct RunResult {
  RunMetrics metrics;
  std::map<ReplicaId, Digest> digests;     // honest replicas only
  std::map<ReplicaId, Seq> exec_cursors;   // honest replicas only
  AuditReport audit;
  bool all_completed = false;
  uint64_t forged_sent = 0;
  uint64_t sig_rejects = 0;
  std::vector<ExecRecord> exec_log;
  View final_view = 0;
  Mode final_mode = Mode::Lion;
};

// Post-hoc safety check over the execution histories of honest replicas:
// per-sequence agreement, per-replica cursor monotonicity, and at most
// one state mutation per (client, ts).
AuditReport audit_exec_log(const std::vector<ExecRecord>& log);

// Deterministic discrete-event run: identical (scenario, seed) pairs
// yield identical traces, metrics, and digests.
RunResult run_scenario(const Scenario& sc);

}  // namespace seemore
