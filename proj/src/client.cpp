#include "seemore/client.hpp"

namespace seemore {

Client::Client(const ClusterConfig& cfg, ClientId id, Mode initial_mode,
               const CryptoProvider* crypto, const ClientOptions& opts)
    : cfg_(cfg), id_(id), crypto_(crypto), opts_(opts),
      known_mode_(initial_mode) {}

ReplicaId Client::believed_primary() const {
  return primary_of_view(known_view_, known_mode_, cfg_);
}

StepResult Client::submit(const KvOp& op, SimTime now) {
  StepResult out;
  if (pending_) return out;
  pending_ = true;
  retries_ = 0;
  submitted_at_ = now;
  public_votes_.clear();

  pending_req_.op = op;
  pending_req_.ts = ++ts_;
  pending_req_.client = id_;
  sign_request(*crypto_, pending_req_);

  out.send(believed_primary(), std::make_shared<const ProtocolMessage>(
                                   ProtocolMessage(pending_req_)));
  timer_token_ = ++timer_counter_;
  out.arm(timer_token_, opts_.retry_timeout);
  return out;
}

StepResult Client::rebroadcast(SimTime now) {
  (void)now;
  StepResult out;
  auto m = std::make_shared<const ProtocolMessage>(
      ProtocolMessage(pending_req_));
  for (ReplicaId r = 0; r < cfg_.total(); r++) out.send(r, m);
  timer_token_ = ++timer_counter_;
  out.arm(timer_token_, opts_.retry_timeout);
  return out;
}

StepResult Client::on_timer(uint64_t token, SimTime now) {
  StepResult out;
  if (!pending_ || token != timer_token_) return out;
  if (retries_ >= opts_.max_retries) return out;
  retries_++;
  return rebroadcast(now);
}

StepResult Client::on_reply(const ReplyMsg& msg, SimTime now) {
  StepResult out;
  if (!pending_ || msg.client != id_ || msg.ts != pending_req_.ts) return out;
  if (msg.sender >= cfg_.total()) return out;
  {
    ReplyMsg copy = msg;
    copy.sig = 0;
    if (!crypto_->verify(replica_key(msg.sender),
                         serialize(ProtocolMessage(std::move(copy))),
                         msg.sig))
      return out;
  }

  // Replies advertise the sender's mode and view; clients track the
  // freshest pair they have seen.
  if (msg.view > known_view_ ||
      (msg.view == known_view_ && msg.mode != known_mode_)) {
    known_view_ = msg.view;
    known_mode_ = msg.mode;
  }

  bool done = false;
  if (cfg_.is_private(msg.sender)) {
    // a trusted replica vouches alone
    done = true;
  } else {
    public_votes_[msg.result].insert(msg.sender);
    size_t need;
    switch (known_mode_) {
      case Mode::Dog:
        need = retries_ > 0 ? cfg_.byz_bound + 1 : cfg_.proxy_quorum();
        break;
      default:  // Peacock, and the Lion rebroadcast fallback
        need = cfg_.byz_bound + 1;
        break;
    }
    done = public_votes_[msg.result].size() >= need;
  }
  if (!done) return out;

  Completion c;
  c.ts = pending_req_.ts;
  c.result = msg.result;
  c.submitted_at = submitted_at_;
  c.completed_at = now;
  c.retransmitted = retries_ > 0;
  completions_.push_back(std::move(c));
  pending_ = false;
  timer_token_ = 0;  // lazy-cancel the retry timer
  public_votes_.clear();
  return out;
}

}  // namespace seemore
