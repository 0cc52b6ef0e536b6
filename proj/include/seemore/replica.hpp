#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>

#include "seemore/config.hpp"
#include "seemore/crypto.hpp"
#include "seemore/kv.hpp"
#include "seemore/messages.hpp"
#include "seemore/step.hpp"

namespace seemore {

struct ReplicaOptions {
  Seq checkpoint_period = 10;
  SimTime watch_timeout = 8;      // tau
  SimTime vc_retry_timeout = 32;  // give up on an unresponsive assembler
};

// Per-replica protocol state machine for all three modes. Single-threaded
// event handler: one inbound message or timer in, outbound messages and
// state mutation out. Instances share nothing mutable.
class Replica {
 public:
  // Sabotage knobs used by harness mutation tests to prove the safety
  // auditor catches quorum violations. Zero in normal operation.
  struct TestHooks {
    int accept_quorum_delta = 0;
  };

  Replica(const ClusterConfig& cfg, ReplicaId id, Mode mode,
          const CryptoProvider* crypto, const ReplicaOptions& opts,
          RunObserver* observer = nullptr);

  // `network_from` is the authenticated channel endpoint; it backs the
  // sender check for the unsigned Lion accepts.
  StepResult on_message(uint32_t network_from, bool from_client,
                        const ProtocolMessage& msg, SimTime now);
  StepResult on_timer(uint64_t token, SimTime now);

  // Broadcast a mode-change announcement; a no-op unless this replica is
  // the trusted replica authorized to announce view v+1 in the target
  // mode.
  StepResult initiate_mode_change(Mode target, SimTime now);

  ReplicaId id() const { return id_; }
  View view() const { return view_; }
  Mode mode() const { return mode_; }
  Seq exec_cursor() const { return exec_cursor_; }
  Seq stable_checkpoint() const { return stable_seq_; }
  bool is_primary() const { return is_primary_; }
  bool is_proxy() const { return is_proxy_; }
  bool in_view_change() const { return in_viewchange_; }
  size_t log_slot_count() const { return slots_.size(); }
  Digest state_digest() const;
  void set_observer(RunObserver* obs) { observer_ = obs; }

  // Crash-restart support: state is value-copyable.
  Replica snapshot() const { return *this; }
  void restore(const Replica& snap) { *this = snap; }

  // Exposed for unit tests of the assembly rules. Returns nullopt when
  // the view-change quorum is insufficient.
  std::optional<NewViewMsg> assemble_new_view(
      View new_view, Mode target_mode,
      const std::vector<ViewChangeMsg>& vc_msgs) const;

  TestHooks hooks;

 private:
  struct Slot {
    std::optional<AgreeMsg> prepare;     // primary prepare / pre-prepare
    std::optional<AgreeMsg> commit_msg;  // Lion: primary-signed commit
    std::map<Digest, std::set<ReplicaId>> accepts;
    std::map<Digest, std::set<ReplicaId>> peer_prepares;
    std::map<Digest, std::set<ReplicaId>> commits;
    std::map<Digest, std::set<ReplicaId>> informs;
    std::vector<AgreeMsg> peer_prepare_msgs;  // kept for prepared proofs
    // last certificate that reached the prepare quorum; survives view
    // installs so committed slots stay reportable in later view changes
    std::optional<PreparedProof> proof;
    bool commit_sent = false;
    bool inform_sent = false;
    bool committed = false;
    bool executed = false;
    Digest committed_digest = 0;
    std::optional<RequestMsg> request;
  };

  struct ClientEntry {
    uint64_t last_ts = 0;
    std::string last_result;
  };

  enum class TimerKind { WatchSeq, WatchRequest, VcRetry };
  struct TimerPurpose {
    TimerKind kind = TimerKind::WatchSeq;
    Seq seq = 0;
    ClientId client = 0;
    uint64_t ts = 0;
    View view = 0;
    uint32_t tries = 0;
  };

  // message handlers
  void handle_request(StepResult& out, const RequestMsg& req, SimTime now);
  void handle_prepare(StepResult& out, const AgreeMsg& msg, SimTime now);
  void handle_preprepare(StepResult& out, const AgreeMsg& msg, SimTime now);
  void handle_peer_prepare(StepResult& out, const AgreeMsg& msg);
  void handle_accept(StepResult& out, uint32_t network_from,
                     const AgreeMsg& msg);
  void handle_commit(StepResult& out, const AgreeMsg& msg);
  void handle_inform(StepResult& out, const AgreeMsg& msg);
  void handle_checkpoint(StepResult& out, const CheckpointMsg& msg);
  void handle_view_change(StepResult& out, const ViewChangeMsg& msg,
                          SimTime now);
  void handle_new_view(StepResult& out, const NewViewMsg& msg, SimTime now);
  void handle_mode_change(StepResult& out, const ModeChangeMsg& msg,
                          SimTime now);

  // normal-case helpers
  void assign_sequence(StepResult& out, const RequestMsg& req, SimTime now);
  void check_lion_accept_quorum(StepResult& out, Seq n, Slot& slot);
  void check_dog_accept_quorum(StepResult& out, Seq n, Slot& slot);
  void check_peacock_prepared(StepResult& out, Seq n, Slot& slot);
  void check_peacock_committed(StepResult& out, Seq n, Slot& slot);
  void check_inform_quorum(StepResult& out, Seq n, Slot& slot);
  void mark_committed(Slot& slot, Digest d,
                      const std::optional<RequestMsg>& req);
  void try_execute(StepResult& out);
  void maybe_checkpoint(StepResult& out);
  void publish_checkpoint(StepResult& out);
  void process_ckpt_vote(StepResult& out, const CheckpointMsg& msg);
  void adopt_checkpoint(StepResult* out, Seq seq,
                        std::vector<CheckpointMsg> cert);
  void garbage_collect(Seq upto);
  void drain_deferred(StepResult& out, SimTime now);
  StateSnapshot make_snapshot() const;

  // view change helpers
  void begin_view_change(StepResult& out, View new_view, Mode target_mode,
                         SimTime now);
  ViewChangeMsg build_vc_message(View new_view, Mode target_mode) const;
  void try_assemble(StepResult& out, View new_view, SimTime now);
  void install_new_view(StepResult& out, const NewViewMsg& msg, SimTime now);
  bool verify_vc_contents(const ViewChangeMsg& vc) const;
  bool verify_checkpoint_cert(Seq seq,
                              const std::vector<CheckpointMsg>& cert) const;
  void recompute_roles();

  void arm(StepResult& out, TimerPurpose p, SimTime delay);
  void broadcast(StepResult& out, MsgPtr m);
  void send_proxies(StepResult& out, MsgPtr m, View v);
  void send_non_proxies(StepResult& out, MsgPtr m, View v);
  MsgPtr share(ProtocolMessage&& m) const {
    return std::make_shared<const ProtocolMessage>(std::move(m));
  }
  void reject(MsgType t, VerifyError e);
  RequestMsg noop_request() const;

  ClusterConfig cfg_;
  ReplicaId id_ = 0;
  const CryptoProvider* crypto_ = nullptr;
  ReplicaOptions opts_;
  RunObserver* observer_ = nullptr;

  View view_ = 0;
  Mode mode_ = Mode::Lion;
  bool is_primary_ = false;
  bool is_proxy_ = false;
  bool in_viewchange_ = false;
  View pending_view_ = 0;
  Mode pending_mode_ = Mode::Lion;

  Seq seq_counter_ = 0;  // last assigned sequence (primary)
  Seq stable_seq_ = 0;
  std::vector<CheckpointMsg> stable_cert_;
  // snapshot taken at the last period boundary, published once this
  // replica holds a broadcasting role (it may gain one only later)
  std::optional<CheckpointMsg> pending_ckpt_;
  Seq exec_cursor_ = 0;
  std::map<Seq, Slot> slots_;
  KvStore kv_;
  std::map<ClientId, ClientEntry> client_table_;
  // primary-side dedupe of in-flight assignments: client -> (ts, seq)
  std::map<ClientId, std::pair<uint64_t, Seq>> assigned_;
  std::deque<RequestMsg> deferred_;  // watermark-window backlog

  // peacock checkpoint votes: seq -> digest -> messages by sender
  std::map<Seq, std::map<Digest, std::map<ReplicaId, CheckpointMsg>>>
      ckpt_votes_;

  // view-change collection: new_view -> sender -> message
  std::map<View, std::map<ReplicaId, ViewChangeMsg>> vc_store_;
  // the installation certificate for view_; re-sent to stragglers
  std::optional<NewViewMsg> last_nv_;

  uint64_t timer_counter_ = 0;
  std::map<uint64_t, TimerPurpose> timers_;
};

// Checks an agreement message's signature against an explicit signer,
// plus digest consistency of an embedded request. Used when validating
// view-change contents and re-issued new-view entries.
bool verify_signed_by(const CryptoProvider& crypto, const AgreeMsg& msg,
                      ReplicaId signer);

}  // namespace seemore
