#include "seemore/replica.hpp"

#include <algorithm>
#include <cassert>

#include "seemore/bytes.hpp"

#ifdef SEEMORE_TRACE
#include <cstdio>
#define TRACE(...) std::fprintf(stderr, __VA_ARGS__)
#else
#define TRACE(...)
#endif

namespace seemore {

namespace {

// Signing-region check against an explicit signer id.
std::vector<uint8_t> agree_signing_bytes(const AgreeMsg& m) {
  AgreeMsg copy = m;
  copy.sig = 0;
  return serialize(ProtocolMessage(std::move(copy)));
}

}  // namespace

bool verify_signed_by(const CryptoProvider& crypto, const AgreeMsg& msg,
                      ReplicaId signer) {
  if (msg.sender != signer) return false;
  if (!crypto.verify(replica_key(signer), agree_signing_bytes(msg), msg.sig))
    return false;
  if (msg.has_request &&
      request_digest(crypto, msg.request) != msg.digest)
    return false;
  return true;
}

Replica::Replica(const ClusterConfig& cfg, ReplicaId id, Mode mode,
                 const CryptoProvider* crypto, const ReplicaOptions& opts,
                 RunObserver* observer)
    : cfg_(cfg),
      id_(id),
      crypto_(crypto),
      opts_(opts),
      observer_(observer),
      mode_(mode) {
  recompute_roles();
}

void Replica::recompute_roles() {
  is_primary_ = id_ == primary_of_view(view_, mode_, cfg_);
  is_proxy_ = mode_ != Mode::Lion && is_proxy_of_view(id_, view_, cfg_);
}

void Replica::reject(MsgType t, VerifyError e) {
  if (observer_) observer_->on_reject(id_, t, e);
}

RequestMsg Replica::noop_request() const {
  RequestMsg r;
  r.op.kind = KvOp::Kind::Noop;
  return r;
}

void Replica::arm(StepResult& out, TimerPurpose p, SimTime delay) {
  uint64_t token = ++timer_counter_;
  p.view = view_;
  timers_[token] = p;
  out.arm(token, delay);
}

void Replica::broadcast(StepResult& out, MsgPtr m) {
  for (ReplicaId r = 0; r < cfg_.total(); r++)
    if (r != id_) out.send(r, m);
}

void Replica::send_proxies(StepResult& out, MsgPtr m, View v) {
  for (ReplicaId r : proxy_set(v, cfg_))
    if (r != id_) out.send(r, m);
}

void Replica::send_non_proxies(StepResult& out, MsgPtr m, View v) {
  for (ReplicaId r = 0; r < cfg_.total(); r++)
    if (r != id_ && !is_proxy_of_view(r, v, cfg_)) out.send(r, m);
}

Digest Replica::state_digest() const {
  StateSnapshot snap = make_snapshot();
  ByteWriter w;
  w.u64(snapshot_digest(*crypto_, snap));
  w.u64(exec_cursor_);
  return crypto_->digest(w.bytes());
}

StateSnapshot Replica::make_snapshot() const {
  StateSnapshot s;
  s.kv = kv_.snapshot();
  for (const auto& [c, e] : client_table_)
    s.clients.emplace_back(c, e.last_ts, e.last_result);
  return s;
}

// ---------------------------------------------------------------------------
// dispatch

StepResult Replica::on_message(uint32_t network_from, bool from_client,
                               const ProtocolMessage& msg, SimTime now) {
  (void)from_client;
  StepResult out;
  VerifyError err = verify_message(msg, *crypto_, cfg_, mode_);
  if (err != VerifyError::None) {
    reject(type_of(msg), err);
    return out;
  }
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RequestMsg>) {
          handle_request(out, m, now);
        } else if constexpr (std::is_same_v<T, AgreeMsg>) {
          switch (m.type) {
            case MsgType::Prepare:
              handle_prepare(out, m, now);
              break;
            case MsgType::PrePrepare:
              handle_preprepare(out, m, now);
              break;
            case MsgType::PeerPrepare:
              handle_peer_prepare(out, m);
              break;
            case MsgType::Accept:
              handle_accept(out, network_from, m);
              break;
            case MsgType::Commit:
              handle_commit(out, m);
              break;
            case MsgType::Inform:
              handle_inform(out, m);
              break;
            default:
              break;
          }
        } else if constexpr (std::is_same_v<T, CheckpointMsg>) {
          handle_checkpoint(out, m);
        } else if constexpr (std::is_same_v<T, ViewChangeMsg>) {
          handle_view_change(out, m, now);
        } else if constexpr (std::is_same_v<T, NewViewMsg>) {
          handle_new_view(out, m, now);
        } else if constexpr (std::is_same_v<T, ModeChangeMsg>) {
          handle_mode_change(out, m, now);
        }
      },
      msg);
  return out;
}

// ---------------------------------------------------------------------------
// request intake

void Replica::handle_request(StepResult& out, const RequestMsg& req,
                             SimTime now) {
  if (req.client == 0) return;  // noops never arrive from the network
  auto ct = client_table_.find(req.client);
  if (ct != client_table_.end() && req.ts <= ct->second.last_ts) {
    if (req.ts == ct->second.last_ts) {
      // exactly-once: re-send the cached reply
      ReplyMsg rep{mode_, view_, req.ts, req.client, ct->second.last_result,
                   id_, 0};
      sign_reply(*crypto_, rep);
      out.send_client(req.client, share(ProtocolMessage(std::move(rep))));
    }
    return;
  }

  if (is_primary_ && !in_viewchange_) {
    auto it = assigned_.find(req.client);
    if (it != assigned_.end() && it->second.first >= req.ts) {
      // already in flight: re-broadcast the prepare as repair
      if (it->second.first == req.ts) {
        auto slot = slots_.find(it->second.second);
        if (slot != slots_.end() && slot->second.prepare &&
            slot->second.prepare->view == view_)
          broadcast(out, share(ProtocolMessage(*slot->second.prepare)));
      }
      return;
    }
    assign_sequence(out, req, now);
    return;
  }

  // Backup: relay to the believed primary and watch for progress.
  ReplicaId p = primary_of_view(view_, mode_, cfg_);
  if (p != id_) out.send(p, share(ProtocolMessage(req)));
  const bool watcher = mode_ == Mode::Lion ? !is_primary_
                                           : (is_proxy_ && !is_primary_);
  if (watcher)
    arm(out,
        {TimerKind::WatchRequest, 0, req.client, req.ts, 0, 0},
        opts_.watch_timeout);
}

void Replica::assign_sequence(StepResult& out, const RequestMsg& req,
                              SimTime now) {
  (void)now;
  // Watermark window bounds in-flight sequences.
  if (seq_counter_ + 1 > stable_seq_ + 2 * opts_.checkpoint_period) {
    deferred_.push_back(req);
    return;
  }
  Seq n = ++seq_counter_;
  Digest d = request_digest(*crypto_, req);
  Slot& slot = slots_[n];
  slot.request = req;
  assigned_[req.client] = {req.ts, n};

  AgreeMsg m;
  m.type = mode_ == Mode::Peacock ? MsgType::PrePrepare : MsgType::Prepare;
  m.view = view_;
  m.seq = n;
  m.digest = d;
  m.sender = id_;
  m.has_request = true;
  m.request = req;
  sign_agree(*crypto_, m);
  slot.prepare = m;
  if (mode_ == Mode::Peacock) {
    slot.peer_prepares[d].insert(id_);  // pre-prepare doubles as our prepare
  } else {
    slot.accepts[d].insert(id_);
  }
  broadcast(out, share(ProtocolMessage(std::move(m))));
}

void Replica::drain_deferred(StepResult& out, SimTime now) {
  while (!deferred_.empty() && is_primary_ && !in_viewchange_ &&
         seq_counter_ + 1 <= stable_seq_ + 2 * opts_.checkpoint_period) {
    RequestMsg req = deferred_.front();
    deferred_.pop_front();
    auto ct = client_table_.find(req.client);
    if (ct != client_table_.end() && req.ts <= ct->second.last_ts) continue;
    auto it = assigned_.find(req.client);
    if (it != assigned_.end() && it->second.first >= req.ts) continue;
    assign_sequence(out, req, now);
  }
}

// ---------------------------------------------------------------------------
// Lion / Dog prepare-accept-commit

void Replica::handle_prepare(StepResult& out, const AgreeMsg& msg,
                             SimTime now) {
  (void)now;
  if (mode_ == Mode::Peacock) return;
  if (msg.view != view_ || in_viewchange_) {
    if (msg.view < view_) reject(MsgType::Prepare, VerifyError::StaleView);
    return;  // newer views need a new-view message first
  }
  if (msg.seq <= stable_seq_) return;
  Slot& slot = slots_[msg.seq];
  const bool dup =
      slot.prepare && slot.prepare->view == view_ &&
      slot.prepare->digest == msg.digest;
  if (!dup) {
    slot.prepare = msg;
    if (msg.has_request) slot.request = msg.request;
  }

  if (mode_ == Mode::Lion) {
    AgreeMsg acc;
    acc.type = MsgType::Accept;
    acc.view = view_;
    acc.seq = msg.seq;
    acc.digest = msg.digest;
    acc.sender = id_;
    // accepts go only to the trusted primary; left unsigned
    out.send(primary_of_view(view_, Mode::Lion, cfg_),
             share(ProtocolMessage(std::move(acc))));
    if (!dup && !slot.committed)
      arm(out, {TimerKind::WatchSeq, msg.seq}, opts_.watch_timeout);
    return;
  }

  // Dog
  if (is_proxy_) {
    AgreeMsg acc;
    acc.type = MsgType::Accept;
    acc.view = view_;
    acc.seq = msg.seq;
    acc.digest = msg.digest;
    acc.sender = id_;
    sign_agree(*crypto_, acc);
    send_proxies(out, share(ProtocolMessage(std::move(acc))), view_);
    slot.accepts[msg.digest].insert(id_);
    if (!dup && !slot.committed)
      arm(out, {TimerKind::WatchSeq, msg.seq}, opts_.watch_timeout);
    check_dog_accept_quorum(out, msg.seq, slot);
  } else {
    // passive replica: log and wait for informs
    check_inform_quorum(out, msg.seq, slot);
  }
}

void Replica::handle_accept(StepResult& out, uint32_t network_from,
                            const AgreeMsg& msg) {
  if (msg.view != view_ || in_viewchange_) {
    if (msg.view < view_) reject(MsgType::Accept, VerifyError::StaleView);
    return;
  }
  if (msg.seq <= stable_seq_) return;

  if (mode_ == Mode::Lion) {
    if (!is_primary_) return;
    // Unsigned accepts ride the authenticated channel: the claimed sender
    // must be the channel endpoint.
    if (msg.sender != network_from) {
      reject(MsgType::Accept, VerifyError::WrongRole);
      return;
    }
    Slot& slot = slots_[msg.seq];
    const bool fresh = slot.accepts[msg.digest].insert(msg.sender).second;
    if (slot.commit_sent && slot.committed_digest == msg.digest) {
      // a re-sent accept means the sender missed the commit broadcast:
      // repair point-to-point; a late first accept needs nothing
      if (!fresh && slot.commit_msg)
        out.send(msg.sender, share(ProtocolMessage(*slot.commit_msg)));
      return;
    }
    check_lion_accept_quorum(out, msg.seq, slot);
    return;
  }

  if (mode_ == Mode::Dog && is_proxy_) {
    Slot& slot = slots_[msg.seq];
    slot.accepts[msg.digest].insert(msg.sender);
    check_dog_accept_quorum(out, msg.seq, slot);
  }
}

void Replica::check_lion_accept_quorum(StepResult& out, Seq n, Slot& slot) {
  if (slot.commit_sent || !slot.prepare || !slot.request) return;
  Digest d = slot.prepare->digest;
  size_t quorum = size_t(
      std::max<int>(1, int(cfg_.lion_quorum()) + hooks.accept_quorum_delta));
  if (slot.accepts[d].size() < quorum) return;
  slot.commit_sent = true;

  AgreeMsg c;
  c.type = MsgType::Commit;
  c.view = view_;
  c.seq = n;
  c.digest = d;
  c.sender = id_;
  c.has_request = true;
  c.request = *slot.request;  // lets replicas without the prepare execute
  sign_agree(*crypto_, c);
  slot.commit_msg = c;
  broadcast(out, share(ProtocolMessage(std::move(c))));

  mark_committed(slot, d, slot.request);
  try_execute(out);
}

void Replica::check_dog_accept_quorum(StepResult& out, Seq n, Slot& slot) {
  if (slot.commit_sent || !slot.prepare || !slot.request) return;
  Digest d = slot.prepare->digest;
  size_t quorum = size_t(
      std::max<int>(1, int(cfg_.proxy_quorum()) + hooks.accept_quorum_delta));
  if (slot.accepts[d].size() < quorum) return;
  slot.commit_sent = true;
  slot.inform_sent = true;

  AgreeMsg c;
  c.type = MsgType::Commit;
  c.view = view_;
  c.seq = n;
  c.digest = d;
  c.sender = id_;
  sign_agree(*crypto_, c);
  send_proxies(out, share(ProtocolMessage(std::move(c))), view_);

  AgreeMsg inf;
  inf.type = MsgType::Inform;
  inf.view = view_;
  inf.seq = n;
  inf.digest = d;
  inf.sender = id_;
  sign_agree(*crypto_, inf);
  send_non_proxies(out, share(ProtocolMessage(std::move(inf))), view_);

  mark_committed(slot, d, slot.request);
  try_execute(out);
}

// ---------------------------------------------------------------------------
// Peacock three-phase agreement

void Replica::handle_preprepare(StepResult& out, const AgreeMsg& msg,
                                SimTime now) {
  (void)now;
  if (mode_ != Mode::Peacock) return;
  if (msg.view != view_ || in_viewchange_) {
    if (msg.view < view_) reject(MsgType::PrePrepare, VerifyError::StaleView);
    return;
  }
  if (msg.seq <= stable_seq_) return;
  Slot& slot = slots_[msg.seq];
  if (slot.prepare && slot.prepare->view == view_ &&
      slot.prepare->digest != msg.digest) {
    // equivocating primary: keep the first, the vote counts resolve it
    reject(MsgType::PrePrepare, VerifyError::DigestMismatch);
    return;
  }
  const bool dup = slot.prepare && slot.prepare->digest == msg.digest;
  if (!dup) {
    slot.prepare = msg;
    if (msg.has_request) slot.request = msg.request;
  }

  if (!is_proxy_) {
    check_inform_quorum(out, msg.seq, slot);
    return;  // passive: wait for informs
  }

  slot.peer_prepares[msg.digest].insert(msg.sender);
  if (!dup) {
    AgreeMsg pp;
    pp.type = MsgType::PeerPrepare;
    pp.view = view_;
    pp.seq = msg.seq;
    pp.digest = msg.digest;
    pp.sender = id_;
    sign_agree(*crypto_, pp);
    slot.peer_prepares[msg.digest].insert(id_);
    slot.peer_prepare_msgs.push_back(pp);
    send_proxies(out, share(ProtocolMessage(std::move(pp))), view_);
    if (!slot.committed)
      arm(out, {TimerKind::WatchSeq, msg.seq}, opts_.watch_timeout);
  }
  check_peacock_prepared(out, msg.seq, slot);
}

void Replica::handle_peer_prepare(StepResult& out, const AgreeMsg& msg) {
  if (mode_ != Mode::Peacock || !is_proxy_) return;
  if (msg.view != view_ || in_viewchange_) {
    if (msg.view < view_) reject(MsgType::PeerPrepare, VerifyError::StaleView);
    return;
  }
  if (msg.seq <= stable_seq_) return;
  Slot& slot = slots_[msg.seq];
  if (slot.peer_prepares[msg.digest].insert(msg.sender).second)
    slot.peer_prepare_msgs.push_back(msg);
  check_peacock_prepared(out, msg.seq, slot);
}

void Replica::check_peacock_prepared(StepResult& out, Seq n, Slot& slot) {
  if (slot.commit_sent || !slot.prepare) return;
  Digest d = slot.prepare->digest;
  size_t quorum = size_t(
      std::max<int>(1, int(cfg_.proxy_quorum()) + hooks.accept_quorum_delta));
  if (slot.peer_prepares[d].size() < quorum) return;
  slot.commit_sent = true;

  PreparedProof proof;
  proof.preprepare = *slot.prepare;
  for (const AgreeMsg& m : slot.peer_prepare_msgs)
    if (m.digest == d) proof.prepares.push_back(m);
  slot.proof = std::move(proof);

  AgreeMsg c;
  c.type = MsgType::Commit;
  c.view = view_;
  c.seq = n;
  c.digest = d;
  c.sender = id_;
  sign_agree(*crypto_, c);
  slot.commits[d].insert(id_);
  send_proxies(out, share(ProtocolMessage(std::move(c))), view_);
  check_peacock_committed(out, n, slot);
}

void Replica::check_peacock_committed(StepResult& out, Seq n, Slot& slot) {
  if (slot.inform_sent || !slot.prepare || !slot.request) return;
  Digest d = slot.prepare->digest;
  size_t quorum = size_t(
      std::max<int>(1, int(cfg_.proxy_quorum()) + hooks.accept_quorum_delta));
  if (slot.commits[d].size() < quorum) return;
  slot.inform_sent = true;

  AgreeMsg inf;
  inf.type = MsgType::Inform;
  inf.view = view_;
  inf.seq = n;
  inf.digest = d;
  inf.sender = id_;
  sign_agree(*crypto_, inf);
  send_non_proxies(out, share(ProtocolMessage(std::move(inf))), view_);

  mark_committed(slot, d, slot.request);
  try_execute(out);
}

// ---------------------------------------------------------------------------
// commit / inform / execution

void Replica::handle_commit(StepResult& out, const AgreeMsg& msg) {
  if (msg.view != view_ || in_viewchange_) {
    if (msg.view < view_) reject(MsgType::Commit, VerifyError::StaleView);
    return;
  }
  if (msg.seq <= stable_seq_) return;

  if (mode_ == Mode::Lion) {
    Slot& slot = slots_[msg.seq];
    slot.commit_msg = msg;
    // A commit from the trusted primary suffices even without the prepare.
    mark_committed(slot, msg.digest,
                   msg.has_request ? std::optional<RequestMsg>(msg.request)
                                   : slot.request);
    try_execute(out);
    return;
  }

  if (mode_ == Mode::Peacock) {
    if (!is_proxy_) return;  // passive nodes act on informs only
    Slot& slot = slots_[msg.seq];
    slot.commits[msg.digest].insert(msg.sender);
    check_peacock_committed(out, msg.seq, slot);
    return;
  }

  // Dog: proxies commit via their own accept quorum; commits are logged
  // for completeness only.
  if (is_proxy_) slots_[msg.seq].commits[msg.digest].insert(msg.sender);
}

void Replica::handle_inform(StepResult& out, const AgreeMsg& msg) {
  if (mode_ == Mode::Lion) return;
  if (msg.view != view_) {
    if (msg.view < view_) reject(MsgType::Inform, VerifyError::StaleView);
    return;
  }
  if (msg.seq <= stable_seq_ || is_proxy_) return;
  Slot& slot = slots_[msg.seq];
  slot.informs[msg.digest].insert(msg.sender);
  check_inform_quorum(out, msg.seq, slot);
}

void Replica::check_inform_quorum(StepResult& out, Seq n, Slot& slot) {
  (void)n;
  if (slot.committed || !slot.prepare || !slot.request) return;
  Digest d = slot.prepare->digest;
  // Dog bystanders need 2m+1 informs; Peacock bystanders need m+1.
  size_t threshold = mode_ == Mode::Dog ? cfg_.proxy_quorum()
                                        : cfg_.byz_bound + 1;
  auto it = slot.informs.find(d);
  if (it == slot.informs.end() || it->second.size() < threshold) return;
  mark_committed(slot, d, slot.request);
  try_execute(out);
}

void Replica::mark_committed(Slot& slot, Digest d,
                             const std::optional<RequestMsg>& req) {
  if (slot.committed) return;  // first quorum wins
  slot.committed = true;
  slot.committed_digest = d;
  if (req) slot.request = req;
}

void Replica::try_execute(StepResult& out) {
  while (true) {
    auto it = slots_.find(exec_cursor_ + 1);
    if (it == slots_.end() || !it->second.committed || !it->second.request)
      break;
    Slot& slot = it->second;
    const RequestMsg& req = *slot.request;
    Seq n = exec_cursor_ + 1;
    slot.executed = true;
    exec_cursor_ = n;

    std::string result;
    bool applied_mutation = false;
    if (req.client != 0) {
      ClientEntry& ce = client_table_[req.client];
      if (req.ts <= ce.last_ts) {
        // retransmitted under a second sequence number: no state change
        result = req.ts == ce.last_ts ? ce.last_result : "";
      } else {
        result = kv_.apply(req.op);
        applied_mutation = req.op.kind == KvOp::Kind::Put;
        ce.last_ts = req.ts;
        ce.last_result = result;
      }
    } else {
      // protocol no-op: leaves the state unchanged
    }

    if (observer_)
      observer_->on_execute(id_, n, slot.committed_digest, view_, mode_,
                            req.client, req.ts, applied_mutation);

    const bool replies = mode_ == Mode::Lion ? is_primary_ : is_proxy_;
    if (replies && req.client != 0) {
      ReplyMsg rep{mode_, view_, req.ts, req.client, result, id_, 0};
      sign_reply(*crypto_, rep);
      out.send_client(req.client, share(ProtocolMessage(std::move(rep))));
    }
    maybe_checkpoint(out);
  }
}

// ---------------------------------------------------------------------------
// checkpoints

void Replica::maybe_checkpoint(StepResult& out) {
  if (opts_.checkpoint_period == 0 ||
      exec_cursor_ % opts_.checkpoint_period != 0)
    return;
  Seq n = exec_cursor_;
  if (n == 0 || n <= stable_seq_) return;

  TRACE("r%u maybe_ckpt n=%llu primary=%d proxy=%d invc=%d\n", id_,
        (unsigned long long)n, (int)is_primary_, (int)is_proxy_,
        (int)in_viewchange_);
  // Snapshot at the boundary regardless of role: the broadcasting role
  // may only arrive with a later view, long after this state is gone.
  CheckpointMsg m;
  m.seq = n;
  m.state = make_snapshot();
  m.state_digest = snapshot_digest(*crypto_, m.state);
  m.sender = id_;
  sign_checkpoint(*crypto_, m);
  pending_ckpt_ = std::move(m);
  publish_checkpoint(out);
}

void Replica::publish_checkpoint(StepResult& out) {
  if (!pending_ckpt_ || pending_ckpt_->seq <= stable_seq_) return;
  if (mode_ != Mode::Peacock) {
    if (!is_primary_) return;
    CheckpointMsg m = *pending_ckpt_;
    m.sender = id_;
    sign_checkpoint(*crypto_, m);
    Seq n = m.seq;
    broadcast(out, share(ProtocolMessage(m)));
    adopt_checkpoint(&out, n, {std::move(m)});
    return;
  }
  if (!is_proxy_) return;
  CheckpointMsg m = *pending_ckpt_;
  m.sender = id_;
  sign_checkpoint(*crypto_, m);
  broadcast(out, share(ProtocolMessage(m)));
  process_ckpt_vote(out, m);
}

void Replica::handle_checkpoint(StepResult& out, const CheckpointMsg& msg) {
  if (msg.seq <= stable_seq_) return;  // stale checkpoint
  if (mode_ != Mode::Peacock) {
    // one message signed by a trusted replica is a certificate
    adopt_checkpoint(&out, msg.seq, {msg});
    return;
  }
  process_ckpt_vote(out, msg);
}

void Replica::process_ckpt_vote(StepResult& out, const CheckpointMsg& msg) {
  if (msg.seq <= stable_seq_) return;
  auto& by_sender = ckpt_votes_[msg.seq][msg.state_digest];
  by_sender.emplace(msg.sender, msg);
  if (by_sender.size() < cfg_.proxy_quorum()) return;
  std::vector<CheckpointMsg> cert;
  cert.reserve(by_sender.size());
  for (const auto& [s, m] : by_sender) cert.push_back(m);
  adopt_checkpoint(&out, msg.seq, std::move(cert));
}

void Replica::adopt_checkpoint(StepResult* out, Seq seq,
                               std::vector<CheckpointMsg> cert) {
  if (seq <= stable_seq_ || cert.empty()) return;
  TRACE("r%u adopt_ckpt seq=%llu (cursor=%llu)\n", id_,
        (unsigned long long)seq, (unsigned long long)exec_cursor_);
  stable_seq_ = seq;
  stable_cert_ = std::move(cert);
  if (seq > exec_cursor_) {
    // fell behind: install the checkpointed state directly
    const StateSnapshot& s = stable_cert_.front().state;
    kv_.load(s.kv);
    client_table_.clear();
    for (const auto& [c, ts, res] : s.clients)
      client_table_[c] = {ts, res};
    exec_cursor_ = seq;
    if (observer_) observer_->on_checkpoint_adopt(id_, seq);
  }
  garbage_collect(seq);
  if (out) {
    try_execute(*out);
    drain_deferred(*out, 0);
  }
}

void Replica::garbage_collect(Seq upto) {
  slots_.erase(slots_.begin(), slots_.upper_bound(upto));
  ckpt_votes_.erase(ckpt_votes_.begin(), ckpt_votes_.upper_bound(upto));
}

// ---------------------------------------------------------------------------
// timers

StepResult Replica::on_timer(uint64_t token, SimTime now) {
  StepResult out;
  auto it = timers_.find(token);
  if (it == timers_.end()) return out;
  TimerPurpose p = it->second;
  timers_.erase(it);

  switch (p.kind) {
    case TimerKind::WatchSeq: {
      if (view_ != p.view) break;  // view moved on; the slot was re-issued
      auto sl = slots_.find(p.seq);
      if (p.seq <= stable_seq_ ||
          (sl != slots_.end() && sl->second.committed))
        break;
      begin_view_change(out, view_ + 1, mode_, now);
      break;
    }
    case TimerKind::WatchRequest: {
      auto ct = client_table_.find(p.client);
      if (ct != client_table_.end() && ct->second.last_ts >= p.ts) break;
      if (view_ != p.view) {
        // Still unexecuted after a view change. The new primary only learns
        // of the request from the client's rebroadcast, so the grace must
        // cover a full client retry interval or the watcher sinks every
        // fresh view before it can make progress.
        if (p.tries < 100) {
          p.tries++;
          arm(out, p, 4 * opts_.watch_timeout);
        }
        break;
      }
      begin_view_change(out, view_ + 1, mode_, now);
      break;
    }
    case TimerKind::VcRetry: {
      if (view_ >= p.view) break;
      if (in_viewchange_ && pending_view_ == p.view)
        begin_view_change(out, p.view + 1, pending_mode_, now);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// view changes

ViewChangeMsg Replica::build_vc_message(View new_view,
                                        Mode target_mode) const {
  ViewChangeMsg vc;
  vc.new_view = new_view;
  vc.target_mode = target_mode;
  vc.from_view = view_;
  vc.from_mode = mode_;
  vc.stable_seq = stable_seq_;
  vc.checkpoint_cert = stable_cert_;
  vc.sender = id_;
  for (const auto& [n, slot] : slots_) {
    if (n <= stable_seq_) continue;
    if (mode_ != Mode::Peacock) {
      // a slot installed from a new-view commit stores the commit in the
      // prepare field; report each certificate under its real type
      if (slot.prepare && slot.prepare->type == MsgType::Prepare)
        vc.prepares.push_back(*slot.prepare);
      if (mode_ == Mode::Lion && slot.commit_msg &&
          slot.commit_msg->type == MsgType::Commit)
        vc.commits.push_back(*slot.commit_msg);
      continue;
    }
    // report the certificate captured at the prepare quorum, if any
    if (slot.proof) vc.prepared_proofs.push_back(*slot.proof);
  }
  return vc;
}

void Replica::begin_view_change(StepResult& out, View new_view,
                                Mode target_mode, SimTime now) {
  if (view_ >= new_view) return;
  if (in_viewchange_ && pending_view_ >= new_view) return;
  in_viewchange_ = true;
  pending_view_ = new_view;
  pending_mode_ = target_mode;
  TRACE("r%u begin_vc new_view=%llu target=%s (view_=%llu)\n", id_,
        (unsigned long long)new_view, mode_name(target_mode),
        (unsigned long long)view_);
  if (observer_) observer_->on_viewchange_started(id_, new_view);

  // Who speaks: Lion all replicas, Dog the public cloud, Peacock the
  // proxies of the abandoned view.
  bool speaks = mode_ == Mode::Lion ||
                (mode_ == Mode::Dog && cfg_.is_public(id_)) ||
                (mode_ == Mode::Peacock && is_proxy_);
  ViewChangeMsg vc = build_vc_message(new_view, target_mode);
  sign_view_change(*crypto_, vc);
  vc_store_[new_view][id_] = vc;
  MsgPtr m = share(ProtocolMessage(vc));
  ReplicaId assembler = transferer_of_view(new_view, cfg_.private_size);
  if (!speaks) {
    // bystanders only ping the assembler so a finished view change can
    // be re-sent to them
    if (assembler != id_) out.send(assembler, m);
  } else if (mode_ == Mode::Dog) {
    for (ReplicaId r = cfg_.private_size; r < cfg_.total(); r++)
      if (r != id_) out.send(r, m);
    if (assembler != id_ && cfg_.is_private(assembler))
      out.send(assembler, m);
  } else {
    broadcast(out, m);
  }
  arm(out, {TimerKind::VcRetry, 0, 0, 0, new_view}, opts_.vc_retry_timeout);
  // the VcRetry purpose view must be the pending one, not view_
  timers_[timer_counter_].view = new_view;

  if (id_ == transferer_of_view(new_view, cfg_.private_size))
    try_assemble(out, new_view, now);
}

void Replica::handle_view_change(StepResult& out, const ViewChangeMsg& msg,
                                 SimTime now) {
  if (msg.new_view <= view_) {
    // the sender lags; hand it the certificate for the current view
    if (last_nv_ && msg.sender != id_)
      out.send(msg.sender, share(ProtocolMessage(*last_nv_)));
    reject(MsgType::ViewChange, VerifyError::StaleView);
    return;
  }
  vc_store_[msg.new_view][msg.sender] = msg;
  if (msg.from_view < view_ && last_nv_ && msg.sender != id_)
    out.send(msg.sender, share(ProtocolMessage(*last_nv_)));

  // Join once m+1 distinct replicas vouch for the same transition: at
  // least one of them is non-faulty.
  if (!in_viewchange_ || pending_view_ < msg.new_view) {
    size_t agreeing = 0;
    for (const auto& [s, vc] : vc_store_[msg.new_view])
      if (vc.target_mode == msg.target_mode) agreeing++;
    if (agreeing >= size_t(cfg_.byz_bound + 1))
      begin_view_change(out, msg.new_view, msg.target_mode, now);
  }

  if (id_ == transferer_of_view(msg.new_view, cfg_.private_size))
    try_assemble(out, msg.new_view, now);
}

bool Replica::verify_checkpoint_cert(
    Seq seq, const std::vector<CheckpointMsg>& cert) const {
  if (seq == 0) return true;
  size_t trusted = 0;
  std::set<ReplicaId> publics;
  Digest d = 0;
  for (const CheckpointMsg& m : cert) {
    if (m.seq != seq || m.sender >= cfg_.total()) return false;
    CheckpointMsg copy = m;
    copy.sig = 0;
    if (!crypto_->verify(replica_key(m.sender),
                         serialize(ProtocolMessage(std::move(copy))), m.sig))
      return false;
    if (snapshot_digest(*crypto_, m.state) != m.state_digest) return false;
    if (d == 0) d = m.state_digest;
    if (m.state_digest != d) return false;
    if (cfg_.is_private(m.sender)) trusted++;
    else publics.insert(m.sender);
  }
  // Either form is sound in every mode: a private signer is trusted by
  // assumption, and 2m+1 public signers contain an honest majority. A
  // certificate minted under one mode must stay valid after a switch.
  return trusted >= 1 || publics.size() >= cfg_.proxy_quorum();
}

bool Replica::verify_vc_contents(const ViewChangeMsg& vc) const {
  if (!verify_checkpoint_cert(vc.stable_seq, vc.checkpoint_cert))
    return false;
  for (const AgreeMsg& p : vc.prepares) {
    if (p.type != MsgType::Prepare || p.seq <= vc.stable_seq) return false;
    ReplicaId signer =
        ReplicaId(p.view % cfg_.private_size);  // old trusted primary
    if (!verify_signed_by(*crypto_, p, signer)) return false;
  }
  for (const AgreeMsg& c : vc.commits) {
    if (c.type != MsgType::Commit || c.seq <= vc.stable_seq) return false;
    ReplicaId signer = ReplicaId(c.view % cfg_.private_size);
    if (!verify_signed_by(*crypto_, c, signer)) return false;
  }
  for (const PreparedProof& proof : vc.prepared_proofs) {
    const AgreeMsg& pp = proof.preprepare;
    if (pp.type != MsgType::PrePrepare || pp.seq <= vc.stable_seq)
      return false;
    // issued either by the view's public primary or re-issued by the
    // view's assembler after a previous view change
    if (pp.sender != primary_of_view(pp.view, Mode::Peacock, cfg_) &&
        pp.sender != transferer_of_view(pp.view, cfg_.private_size))
      return false;
    if (!verify_signed_by(*crypto_, pp, pp.sender)) return false;
    std::set<ReplicaId> senders;
    for (const AgreeMsg& m : proof.prepares) {
      if (m.type != MsgType::PeerPrepare || m.view != pp.view ||
          m.seq != pp.seq || m.digest != pp.digest)
        return false;
      if (!is_proxy_of_view(m.sender, m.view, cfg_)) return false;
      if (!verify_signed_by(*crypto_, m, m.sender)) return false;
      senders.insert(m.sender);
    }
    senders.insert(pp.sender);
    if (senders.size() < cfg_.proxy_quorum()) return false;
  }
  return true;
}

std::optional<NewViewMsg> Replica::assemble_new_view(
    View new_view, Mode target_mode,
    const std::vector<ViewChangeMsg>& vc_msgs) const {
  // Filter to content-valid messages from distinct senders.
  std::map<ReplicaId, const ViewChangeMsg*> valid;
  for (const ViewChangeMsg& vc : vc_msgs) {
    if (vc.new_view != new_view || vc.target_mode != target_mode) continue;
    if (vc.sender >= cfg_.total()) continue;
    if (!verify_vc_contents(vc)) continue;
    valid[vc.sender] = &vc;
  }

  // Quorum rule follows the mode being left behind.
  if (mode_ == Mode::Lion) {
    size_t others = valid.size() - (valid.count(id_) ? 1 : 0);
    if (others < size_t(2 * cfg_.byz_bound + cfg_.crash_bound))
      return std::nullopt;
  } else {
    // key on the highest abandoned view represented and count its proxies
    View last_active = 0;
    for (const auto& [s, vc] : valid)
      last_active = std::max(last_active, vc->from_view);
    size_t proxies = 0;
    for (const auto& [s, vc] : valid)
      if (vc->from_view == last_active &&
          is_proxy_of_view(s, last_active, cfg_))
        proxies++;
    if (proxies < cfg_.proxy_quorum()) return std::nullopt;
  }

  NewViewMsg nv;
  nv.new_view = new_view;
  nv.new_mode = target_mode;
  nv.sender = id_;

  // checkpoint floor: best certificate seen (our own included)
  nv.stable_seq = stable_seq_;
  nv.checkpoint_cert = stable_cert_;
  for (const auto& [s, vc] : valid) {
    if (vc->stable_seq > nv.stable_seq) {
      nv.stable_seq = vc->stable_seq;
      nv.checkpoint_cert = vc->checkpoint_cert;
    }
  }
  const Seq l = nv.stable_seq;

  // Gather evidence per sequence number. When several views reported the
  // same slot, only the highest view's message may be carried over: a commit
  // in view v intersects every later view-change quorum, so the view-v
  // prepare dominates any stale lower-view assignment of the slot.
  struct Evidence {
    const AgreeMsg* commit = nullptr;
    const AgreeMsg* prepare = nullptr;
    const AgreeMsg* proof_pp = nullptr;
    // reporters per (view, digest) of the prepare they carried
    std::map<std::pair<View, Digest>, std::set<ReplicaId>> reporters;
  };
  std::map<Seq, Evidence> evidence;
  Seq h = l;
  for (const auto& [s, vc] : valid) {
    for (const AgreeMsg& c : vc->commits) {
      if (c.seq <= l) continue;
      auto& e = evidence[c.seq];
      if (c.has_request && (!e.commit || c.view > e.commit->view)) e.commit = &c;
      h = std::max(h, c.seq);
    }
    for (const AgreeMsg& p : vc->prepares) {
      if (p.seq <= l) continue;
      auto& e = evidence[p.seq];
      if (p.has_request && (!e.prepare || p.view > e.prepare->view))
        e.prepare = &p;
      e.reporters[{p.view, p.digest}].insert(s);
      h = std::max(h, p.seq);
    }
    for (const PreparedProof& proof : vc->prepared_proofs) {
      if (proof.preprepare.seq <= l) continue;
      auto& e = evidence[proof.preprepare.seq];
      if (proof.preprepare.has_request &&
          (!e.proof_pp || proof.preprepare.view > e.proof_pp->view))
        e.proof_pp = &proof.preprepare;
      h = std::max(h, proof.preprepare.seq);
    }
  }

  const MsgType reissue_type =
      target_mode == Mode::Peacock ? MsgType::PrePrepare : MsgType::Prepare;
  for (Seq n = l + 1; n <= h; n++) {
    auto it = evidence.find(n);
    const Evidence* e = it == evidence.end() ? nullptr : &it->second;

    const AgreeMsg* source = nullptr;
    bool as_commit = false;
    if (e) {
      if (e->commit) {
        source = e->commit;
        as_commit = true;
      } else if (mode_ == Mode::Lion && e->prepare &&
                 e->reporters.count(
                     {e->prepare->view, e->prepare->digest}) &&
                 e->reporters.at({e->prepare->view, e->prepare->digest})
                         .size() >= cfg_.lion_quorum()) {
        source = e->prepare;
        as_commit = true;
      } else if (e->prepare) {
        source = e->prepare;
      } else if (e->proof_pp) {
        source = e->proof_pp;
      }
    }

    AgreeMsg m;
    m.view = new_view;
    m.seq = n;
    m.sender = id_;
    m.has_request = true;
    if (source) {
      m.request = source->request;
      m.digest = source->digest;
    } else {
      // nothing reported for n: commit a no-op to fill the gap
      m.request = noop_request();
      m.digest = request_digest(*crypto_, m.request);
    }
    if (as_commit && target_mode == Mode::Lion) {
      m.type = MsgType::Commit;
      sign_agree(*crypto_, m);
      nv.commits.push_back(std::move(m));
    } else {
      m.type = reissue_type;
      sign_agree(*crypto_, m);
      nv.prepares.push_back(std::move(m));
    }
  }
  return nv;
}

void Replica::try_assemble(StepResult& out, View new_view, SimTime now) {
  if (view_ >= new_view) return;
  auto store = vc_store_.find(new_view);
  if (store == vc_store_.end()) return;

  // group by target mode; honest senders agree on one
  std::set<Mode> targets;
  for (const auto& [s, vc] : store->second) targets.insert(vc.target_mode);

  for (Mode target : targets) {
    std::vector<ViewChangeMsg> vcs;
    bool have_self = false;
    for (const auto& [s, vc] : store->second) {
      if (vc.target_mode != target) continue;
      vcs.push_back(vc);
      if (s == id_) have_self = true;
    }
    if (mode_ == Mode::Lion && !have_self) {
      // the assembler's own log always participates in the assembly
      ViewChangeMsg own = build_vc_message(new_view, target);
      sign_view_change(*crypto_, own);
      vcs.push_back(own);
    }
    auto nv = assemble_new_view(new_view, target, vcs);
    TRACE("r%u try_assemble view=%llu target=%s vcs=%zu -> %s\n", id_,
          (unsigned long long)new_view, mode_name(target), vcs.size(),
          nv ? "ok" : "no-quorum");
    if (!nv) continue;
    sign_new_view(*crypto_, *nv);
    broadcast(out, share(ProtocolMessage(*nv)));
    install_new_view(out, *nv, now);
    return;
  }
}

void Replica::handle_new_view(StepResult& out, const NewViewMsg& msg,
                              SimTime now) {
  if (msg.new_view <= view_) return;  // idempotent
  // entries must be signed by the assembler
  for (const AgreeMsg& p : msg.prepares)
    if (!verify_signed_by(*crypto_, p, msg.sender)) {
      reject(MsgType::NewView, VerifyError::BadSignature);
      return;
    }
  for (const AgreeMsg& c : msg.commits)
    if (!verify_signed_by(*crypto_, c, msg.sender)) {
      reject(MsgType::NewView, VerifyError::BadSignature);
      return;
    }
  if (!verify_checkpoint_cert(msg.stable_seq, msg.checkpoint_cert)) {
    reject(MsgType::NewView, VerifyError::BadSignature);
    return;
  }
  install_new_view(out, msg, now);
}

void Replica::install_new_view(StepResult& out, const NewViewMsg& msg,
                               SimTime now) {
  (void)now;
  if (msg.new_view <= view_) return;

  adopt_checkpoint(nullptr, msg.stable_seq, msg.checkpoint_cert);

  TRACE("r%u install view=%llu mode=%s stable=%llu\n", id_,
        (unsigned long long)msg.new_view, mode_name(msg.new_mode),
        (unsigned long long)msg.stable_seq);
  view_ = msg.new_view;
  mode_ = msg.new_mode;
  in_viewchange_ = false;
  pending_view_ = view_;
  last_nv_ = msg;
  recompute_roles();
  // in-flight assignments died with the old view; retransmissions are
  // deduplicated against the executed client table instead
  assigned_.clear();
  if (observer_) observer_->on_view_installed(id_, view_, mode_);

  // votes and prepares of the abandoned view are void
  for (auto& [n, slot] : slots_) {
    if (!slot.committed) {
      // the prepared certificate outlives the reset: this slot may have
      // committed at another replica on the strength of our prepare
      auto keep = std::move(slot.proof);
      slot = Slot{};
      slot.proof = std::move(keep);
      continue;
    }
    // committed slots keep their outcome but shed per-view voting state so
    // the quorum paths re-fire and re-deliver commit/inform under this view
    // to replicas that missed them
    slot.accepts.clear();
    slot.peer_prepares.clear();
    slot.peer_prepare_msgs.clear();
    slot.commits.clear();
    slot.informs.clear();
    slot.commit_sent = false;
    slot.inform_sent = false;
    slot.commit_msg.reset();
  }

  Seq h = stable_seq_;
  for (const AgreeMsg& c : msg.commits) h = std::max(h, c.seq);
  for (const AgreeMsg& p : msg.prepares) h = std::max(h, p.seq);
  if (is_primary_) seq_counter_ = std::max(seq_counter_, h);

  for (const AgreeMsg& c : msg.commits) {
    if (c.seq <= stable_seq_) continue;
    Slot& slot = slots_[c.seq];
    slot.prepare = c;
    slot.commit_msg = c;
    mark_committed(slot, c.digest, c.request);
  }

  const bool watcher =
      mode_ == Mode::Lion ? !is_primary_ : (is_proxy_ && !is_primary_);
  for (const AgreeMsg& p : msg.prepares) {
    if (p.seq <= stable_seq_) continue;
    Slot& slot = slots_[p.seq];
    slot.prepare = p;
    slot.request = p.request;

    if (mode_ == Mode::Lion) {
      if (id_ == msg.sender) {
        slot.accepts[p.digest].insert(id_);
      } else {
        AgreeMsg acc;
        acc.type = MsgType::Accept;
        acc.view = view_;
        acc.seq = p.seq;
        acc.digest = p.digest;
        acc.sender = id_;
        out.send(msg.sender, share(ProtocolMessage(std::move(acc))));
      }
    } else if (mode_ == Mode::Dog) {
      if (is_proxy_) {
        AgreeMsg acc;
        acc.type = MsgType::Accept;
        acc.view = view_;
        acc.seq = p.seq;
        acc.digest = p.digest;
        acc.sender = id_;
        sign_agree(*crypto_, acc);
        slot.accepts[p.digest].insert(id_);
        send_proxies(out, share(ProtocolMessage(std::move(acc))), view_);
      }
    } else {  // Peacock: all proxies re-run the prepare phase
      if (is_proxy_) {
        AgreeMsg pp;
        pp.type = MsgType::PeerPrepare;
        pp.view = view_;
        pp.seq = p.seq;
        pp.digest = p.digest;
        pp.sender = id_;
        sign_agree(*crypto_, pp);
        slot.peer_prepares[p.digest].insert(id_);
        slot.peer_prepare_msgs.push_back(pp);
        send_proxies(out, share(ProtocolMessage(std::move(pp))), view_);
      }
    }
    if (watcher && !slot.committed)
      arm(out, {TimerKind::WatchSeq, p.seq}, opts_.watch_timeout);
  }

  try_execute(out);
  publish_checkpoint(out);
  drain_deferred(out, now);
  vc_store_.erase(vc_store_.begin(), vc_store_.upper_bound(view_));
}

// ---------------------------------------------------------------------------
// mode switching

StepResult Replica::initiate_mode_change(Mode target, SimTime now) {
  StepResult out;
  View next = view_ + 1;
  if (id_ != transferer_of_view(next, cfg_.private_size)) return out;
  ModeChangeMsg mc;
  mc.next_view = next;
  mc.next_mode = target;
  mc.sender = id_;
  sign_mode_change(*crypto_, mc);
  broadcast(out, share(ProtocolMessage(std::move(mc))));
  begin_view_change(out, next, target, now);
  return out;
}

void Replica::handle_mode_change(StepResult& out, const ModeChangeMsg& msg,
                                 SimTime now) {
  if (msg.next_view <= view_) {
    reject(MsgType::ModeChange, VerifyError::StaleView);
    return;
  }
  begin_view_change(out, msg.next_view, msg.next_mode, now);
}

}  // namespace seemore
