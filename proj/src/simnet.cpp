#include "seemore/simnet.hpp"

#include <algorithm>
#include <sstream>

namespace seemore {

const char* byz_strategy_name(ByzStrategy s) {
  switch (s) {
    case ByzStrategy::None: return "none";
    case ByzStrategy::Mute: return "mute";
    case ByzStrategy::Equivocate: return "equivocate";
    case ByzStrategy::CorruptDigest: return "corrupt_digest";
    case ByzStrategy::WrongSeq: return "wrong_seq";
    case ByzStrategy::ReplayOldView: return "replay_old_view";
    case ByzStrategy::ForgeAttempt: return "forge_attempt";
  }
  return "none";
}

std::optional<ByzStrategy> byz_strategy_from_name(const std::string& s) {
  for (ByzStrategy v :
       {ByzStrategy::None, ByzStrategy::Mute, ByzStrategy::Equivocate,
        ByzStrategy::CorruptDigest, ByzStrategy::WrongSeq,
        ByzStrategy::ReplayOldView, ByzStrategy::ForgeAttempt})
    if (s == byz_strategy_name(v)) return v;
  return std::nullopt;
}

std::optional<std::string> FaultPlan::validate(
    const ClusterConfig& cfg) const {
  std::set<ReplicaId> cset, bset;
  for (const CrashDirective& d : crashes) {
    if (!cfg.is_private(d.replica))
      return "crash fault outside the trusted partition";
    cset.insert(d.replica);
  }
  if (cset.size() > cfg.crash_bound)
    return "crash plan exceeds the crash bound";
  for (const ByzDirective& d : byzantine) {
    if (d.replica < cfg.private_size || d.replica >= cfg.total())
      return "byzantine fault outside the rented partition";
    if (d.strategy == ByzStrategy::None)
      return "byzantine directive without a strategy";
    bset.insert(d.replica);
  }
  if (bset.size() > cfg.byz_bound)
    return "byzantine plan exceeds the byzantine bound";
  return std::nullopt;
}

std::optional<std::string> Scenario::validate() const {
  if (auto e = cluster.validate(initial_mode)) return e;
  for (const ModeSwitch& m : mode_changes)
    if (auto e = cluster.validate(m.target)) return e;
  if (auto e = faults.validate(cluster)) return e;
  if (workload.clients == 0) return "workload needs at least one client";
  if (workload.put_ratio < 0 || workload.put_ratio > 1)
    return "put_ratio must lie in [0,1]";
  if (delay.base == 0) return "base delay must be positive";
  if (delay.pre_gst_cap < delay.base)
    return "pre-GST delay cap below the base delay";
  if (delay.pre_gst_drop < 0 || delay.pre_gst_drop >= 1)
    return "pre-GST drop probability must lie in [0,1)";
  if (max_time == 0) return "max_time must be positive";
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

struct Event {
  enum class Kind {
    DeliverReplica,
    DeliverClient,
    ReplicaTimer,
    ClientTimer,
    Crash,
    Restart,
    SetByz,
    ClientSubmit,
    ModeSwitch,
  };
  SimTime at = 0;
  uint64_t eid = 0;
  Kind kind = Kind::DeliverReplica;
  uint32_t target = 0;  // replica or client id, depending on kind
  uint32_t from = 0;    // sending endpoint for deliveries
  bool from_client = false;
  MsgPtr msg;
  uint64_t token = 0;
  ByzStrategy strategy = ByzStrategy::None;
  Mode mode_target = Mode::Lion;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.at != b.at) return a.at > b.at;
    return a.eid > b.eid;
  }
};

class Sim : public RunObserver {
 public:
  explicit Sim(const Scenario& sc) : sc_(sc), rng_(sc.seed) {
    const uint32_t n = sc.cluster.total();
    crashed_.assign(n, false);
    byz_.assign(n, ByzStrategy::None);
    for (ReplicaId r = 0; r < n; r++)
      replicas_.push_back(std::make_unique<Replica>(
          sc.cluster, r, sc.initial_mode, &crypto_, sc.replica_opts, this));
    for (auto& rp : replicas_) rp->hooks = sc.hooks;
    remaining_.assign(sc.workload.clients, sc.workload.requests_per_client);
    done_counts_.assign(sc.workload.clients, 0);
    for (uint32_t i = 0; i < sc.workload.clients; i++)
      clients_.push_back(std::make_unique<Client>(
          sc.cluster, ClientId(i + 1), sc.initial_mode, &crypto_,
          sc.client_opts));
  }

  RunResult run() {
    for (uint32_t i = 0; i < sc_.workload.clients; i++)
      push({0, next_eid(), Event::Kind::ClientSubmit, i});
    for (const CrashDirective& d : sc_.faults.crashes) {
      push({d.at, next_eid(), Event::Kind::Crash, d.replica});
      if (d.restart_at > d.at)
        push({d.restart_at, next_eid(), Event::Kind::Restart, d.replica});
    }
    for (const ByzDirective& d : sc_.faults.byzantine) {
      Event e{d.at, next_eid(), Event::Kind::SetByz, d.replica};
      e.strategy = d.strategy;
      push(std::move(e));
    }
    for (const ModeSwitch& m : sc_.mode_changes) {
      Event e{m.at, next_eid(), Event::Kind::ModeSwitch, 0};
      e.mode_target = m.target;
      push(std::move(e));
    }

    while (!pq_.empty()) {
      Event ev = pq_.top();
      if (ev.at > sc_.max_time) break;
      pq_.pop();
      now_ = ev.at;
      handle(ev);
    }
    return finish();
  }

  // RunObserver
  void on_execute(ReplicaId r, Seq n, Digest d, View v, Mode m, ClientId c,
                  uint64_t ts, bool mutation) override {
    if (byz_[r] != ByzStrategy::None) return;
    res_.exec_log.push_back({r, n, d, v, m, c, ts, mutation, now_});
  }
  void on_reject(ReplicaId r, MsgType, VerifyError e) override {
    if (byz_[r] != ByzStrategy::None) return;
    if (e == VerifyError::BadSignature || e == VerifyError::WrongRole)
      res_.sig_rejects++;
  }
  void on_viewchange_started(ReplicaId, View v) override {
    auto [it, fresh] = vc_spans_.try_emplace(v);
    if (fresh) {
      it->second.view = v;
      it->second.start = now_;
    }
  }
  void on_view_installed(ReplicaId, View v, Mode) override {
    auto it = vc_spans_.find(v);
    if (it == vc_spans_.end()) {
      auto [jt, _] = vc_spans_.try_emplace(v);
      jt->second.view = v;
      jt->second.start = now_;
      it = jt;
    }
    if (!it->second.installed) {
      it->second.installed = true;
      it->second.end = now_;
    }
  }

 private:
  uint64_t next_eid() { return ++eid_; }
  void push(Event e) { pq_.push(std::move(e)); }

  // Returns delivery delay, or nullopt for an adversarial pre-GST drop.
  std::optional<SimTime> link_delay() {
    if (now_ >= sc_.delay.gst) return sc_.delay.base;
    if (sc_.delay.pre_gst_drop > 0 &&
        std::uniform_real_distribution<double>(0, 1)(rng_) <
            sc_.delay.pre_gst_drop)
      return std::nullopt;
    return std::uniform_int_distribution<SimTime>(
        sc_.delay.base, sc_.delay.pre_gst_cap)(rng_);
  }

  void deliver(uint32_t from, bool from_client, const OutboundMsg& om,
               Mode sender_mode) {
    res_.metrics.count_message(type_of(*om.msg), sender_mode);
    auto d = link_delay();
    if (!d) return;
    Event e{now_ + *d, next_eid(),
            om.to_client ? Event::Kind::DeliverClient
                         : Event::Kind::DeliverReplica,
            om.dest, from, from_client, om.msg};
    push(std::move(e));
  }

  void dispatch_replica(ReplicaId r, StepResult&& out) {
    Mode m = replicas_[r]->mode();
    if (byz_[r] != ByzStrategy::None) mutate(r, out);
    for (const OutboundMsg& om : out.msgs) deliver(r, false, om, m);
    for (const TimerArm& t : out.timers)
      push({now_ + t.delay, next_eid(), Event::Kind::ReplicaTimer, r, 0,
            false, nullptr, t.token});
  }

  void dispatch_client(uint32_t idx, StepResult&& out) {
    Mode m = clients_[idx]->known_mode();
    for (const OutboundMsg& om : out.msgs) deliver(idx + 1, true, om, m);
    for (const TimerArm& t : out.timers)
      push({now_ + t.delay, next_eid(), Event::Kind::ClientTimer, idx, 0,
            false, nullptr, t.token});
  }

  // Outbound mutation for Byzantine senders. Internal replica state stays
  // honest; only what leaves the node is twisted.
  void mutate(ReplicaId r, StepResult& out) {
    ByzStrategy s = byz_[r];
    if (s == ByzStrategy::Mute) {
      out.msgs.clear();
      return;
    }
    std::vector<OutboundMsg> extra;
    for (OutboundMsg& om : out.msgs) {
      const AgreeMsg* am = std::get_if<AgreeMsg>(om.msg.get());
      if (!am) continue;
      AgreeMsg tw = *am;
      bool twist = false;
      switch (s) {
        case ByzStrategy::Equivocate:
          // conflicting proposal or vote to the odd-numbered peers
          if (om.dest % 2 == 1) {
            if (tw.has_request) {
              // swap in a no-op, the one request a non-client can
              // produce with a valid (absent) client signature
              tw.request = RequestMsg{};
              tw.request.op.kind = KvOp::Kind::Noop;
              tw.digest = request_digest(crypto_, tw.request);
            } else {
              tw.digest ^= 0x517e517e517e517eULL;
            }
            twist = true;
          }
          break;
        case ByzStrategy::CorruptDigest:
          tw.digest ^= 0xbadbadbadbadbadbULL;
          if (tw.has_request) {
            tw.has_request = false;
            tw.request = RequestMsg{};
          }
          twist = true;
          break;
        case ByzStrategy::WrongSeq:
          tw.seq += 97;
          twist = true;
          break;
        case ByzStrategy::ReplayOldView:
          if (tw.view > 0) {
            tw.view -= 1;
            twist = true;
          }
          break;
        case ByzStrategy::ForgeAttempt: {
          // extra message impersonating an honest peer
          AgreeMsg forged = *am;
          forged.sender =
              r == sc_.cluster.private_size ? r + 1 : sc_.cluster.private_size;
          forged.sig = 0xf04ef04ef04ef04eULL;
          extra.push_back({om.to_client, om.dest,
                           std::make_shared<const ProtocolMessage>(
                               ProtocolMessage(std::move(forged)))});
          res_.forged_sent++;
          break;
        }
        default:
          break;
      }
      if (twist) {
        sign_agree(crypto_, tw);
        om.msg = std::make_shared<const ProtocolMessage>(
            ProtocolMessage(std::move(tw)));
      }
    }
    for (OutboundMsg& om : extra) out.msgs.push_back(std::move(om));
  }

  void client_submit(uint32_t idx) {
    if (remaining_[idx] == 0 || clients_[idx]->busy()) return;
    remaining_[idx]--;
    KvOp op;
    std::string key = "k" + std::to_string(idx + 1);
    bool put = std::uniform_real_distribution<double>(0, 1)(det_rng_) <
               sc_.workload.put_ratio;
    if (put) {
      op.kind = KvOp::Kind::Put;
      op.key = key;
      op.value = "v" + std::to_string(clients_[idx]->ts() + 1);
    } else {
      op.kind = KvOp::Kind::Get;
      op.key = key;
    }
    dispatch_client(idx, clients_[idx]->submit(op, now_));
  }

  void mode_switch(Mode target) {
    // the trusted replica entitled to announce the next view speaks
    for (ReplicaId r = 0; r < sc_.cluster.private_size; r++) {
      if (crashed_[r]) continue;
      View next = replicas_[r]->view() + 1;
      if (replicas_[r]->id() !=
          transferer_of_view(next, sc_.cluster.private_size))
        continue;
      if (replicas_[r]->mode() == target) continue;
      dispatch_replica(r, replicas_[r]->initiate_mode_change(target, now_));
      return;
    }
  }

  void handle(const Event& ev) {
    switch (ev.kind) {
      case Event::Kind::DeliverReplica: {
        if (ev.target >= replicas_.size() || crashed_[ev.target]) return;
        dispatch_replica(ev.target,
                         replicas_[ev.target]->on_message(
                             ev.from, ev.from_client, *ev.msg, now_));
        break;
      }
      case Event::Kind::DeliverClient: {
        uint32_t idx = ev.target - 1;
        if (idx >= clients_.size()) return;
        const ReplyMsg* rep = std::get_if<ReplyMsg>(ev.msg.get());
        if (!rep) return;
        Client& cl = *clients_[idx];
        dispatch_client(idx, cl.on_reply(*rep, now_));
        if (cl.completions().size() > done_counts_[idx]) {
          done_counts_[idx] = cl.completions().size();
          const auto& c = cl.completions().back();
          RequestSample s;
          s.request_id = ++req_counter_;
          s.client = cl.id();
          s.ts = c.ts;
          s.mode = cl.known_mode();
          s.view = cl.known_view();
          s.submitted_at = c.submitted_at;
          s.completed_at = c.completed_at;
          res_.metrics.requests.push_back(s);
          if (remaining_[idx] > 0)
            push({now_, next_eid(), Event::Kind::ClientSubmit, idx});
        }
        break;
      }
      case Event::Kind::ReplicaTimer:
        if (crashed_[ev.target]) return;
        dispatch_replica(ev.target,
                         replicas_[ev.target]->on_timer(ev.token, now_));
        break;
      case Event::Kind::ClientTimer:
        dispatch_client(ev.target,
                        clients_[ev.target]->on_timer(ev.token, now_));
        break;
      case Event::Kind::Crash:
        crashed_[ev.target] = true;
        break;
      case Event::Kind::Restart:
        crashed_[ev.target] = false;
        break;
      case Event::Kind::SetByz:
        byz_[ev.target] = ev.strategy;
        break;
      case Event::Kind::ClientSubmit:
        client_submit(ev.target);
        break;
      case Event::Kind::ModeSwitch:
        mode_switch(ev.mode_target);
        break;
    }
  }

  RunResult finish() {
    res_.metrics.duration = now_;
    for (auto& [v, span] : vc_spans_)
      res_.metrics.view_changes.push_back(span);
    for (ReplicaId r = 0; r < replicas_.size(); r++) {
      if (byz_[r] != ByzStrategy::None) continue;
      res_.digests[r] = replicas_[r]->state_digest();
      res_.exec_cursors[r] = replicas_[r]->exec_cursor();
      if (replicas_[r]->view() >= res_.final_view) {
        res_.final_view = replicas_[r]->view();
        res_.final_mode = replicas_[r]->mode();
      }
    }
    res_.all_completed = true;
    for (uint32_t i = 0; i < clients_.size(); i++)
      if (remaining_[i] != 0 || clients_[i]->busy())
        res_.all_completed = false;
    res_.audit = audit_exec_log(res_.exec_log);
    return std::move(res_);
  }

  const Scenario& sc_;
  std::mt19937_64 rng_;       // adversarial scheduling pre-GST
  std::mt19937_64 det_rng_{12345};  // workload op mix, scenario-independent
  KeyedHashCrypto crypto_;
  std::vector<std::unique_ptr<Replica>> replicas_;
  std::vector<std::unique_ptr<Client>> clients_;
  std::vector<bool> crashed_;
  std::vector<ByzStrategy> byz_;
  std::vector<uint32_t> remaining_;
  std::vector<size_t> done_counts_;
  std::priority_queue<Event, std::vector<Event>, EventLater> pq_;
  uint64_t eid_ = 0;
  SimTime now_ = 0;
  uint64_t req_counter_ = 0;
  std::map<View, ViewChangeSpan> vc_spans_;
  RunResult res_;
};

}  // namespace

AuditReport audit_exec_log(const std::vector<ExecRecord>& log) {
  AuditReport rep;
  auto flag = [&](std::string v) {
    rep.ok = false;
    rep.violations.push_back(std::move(v));
  };

  std::map<ReplicaId, Seq> last_seq;
  std::map<Seq, std::map<Digest, std::set<ReplicaId>>> by_seq;
  std::map<ReplicaId, std::set<std::pair<ClientId, uint64_t>>> mutated;

  for (const ExecRecord& e : log) {
    auto [it, fresh] = last_seq.try_emplace(e.replica, 0);
    if (!fresh && e.seq <= it->second)
      flag("replica " + std::to_string(e.replica) +
           " executed sequence " + std::to_string(e.seq) +
           " out of order");
    it->second = std::max(it->second, e.seq);

    by_seq[e.seq][e.digest].insert(e.replica);

    if (e.mutation && e.client != 0) {
      auto key = std::make_pair(e.client, e.ts);
      if (!mutated[e.replica].insert(key).second)
        flag("replica " + std::to_string(e.replica) +
             " applied client " + std::to_string(e.client) + " ts " +
             std::to_string(e.ts) + " twice");
    }
  }

  for (const auto& [n, digests] : by_seq) {
    if (digests.size() <= 1) continue;
    std::string v = "sequence " + std::to_string(n) +
                    " executed with conflicting digests:";
    for (const auto& [d, who] : digests)
      v += " " + std::to_string(d) + "(x" + std::to_string(who.size()) + ")";
    flag(std::move(v));
  }
  return rep;
}

RunResult run_scenario(const Scenario& sc) {
  Sim sim(sc);
  return sim.run();
}

}  // namespace seemore
