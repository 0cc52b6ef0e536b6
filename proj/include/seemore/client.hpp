#pragma once

#include <map>
#include <set>

#include "seemore/config.hpp"
#include "seemore/crypto.hpp"
#include "seemore/messages.hpp"
#include "seemore/step.hpp"

namespace seemore {

struct ClientOptions {
  SimTime retry_timeout = 32;  // 4x the replica watch timeout
  uint32_t max_retries = 200;
};

// One logical client: a single outstanding request at a time, timestamps
// strictly increasing, result accepted once the mode-dependent reply
// quorum is met.
class Client {
 public:
  Client(const ClusterConfig& cfg, ClientId id, Mode initial_mode,
         const CryptoProvider* crypto, const ClientOptions& opts = {});

  // Begins a new operation; callers must check !busy() first.
  StepResult submit(const KvOp& op, SimTime now);
  StepResult on_reply(const ReplyMsg& msg, SimTime now);
  StepResult on_timer(uint64_t token, SimTime now);

  bool busy() const { return pending_; }
  ClientId id() const { return id_; }
  uint64_t ts() const { return ts_; }
  Mode known_mode() const { return known_mode_; }
  View known_view() const { return known_view_; }

  // Completion record for the most recently finished request.
  struct Completion {
    uint64_t ts = 0;
    std::string result;
    SimTime submitted_at = 0;
    SimTime completed_at = 0;
    bool retransmitted = false;
  };
  const std::vector<Completion>& completions() const { return completions_; }

 private:
  StepResult rebroadcast(SimTime now);
  ReplicaId believed_primary() const;

  ClusterConfig cfg_;
  ClientId id_ = 0;
  const CryptoProvider* crypto_ = nullptr;
  ClientOptions opts_;

  uint64_t ts_ = 0;
  Mode known_mode_ = Mode::Lion;
  View known_view_ = 0;

  bool pending_ = false;
  RequestMsg pending_req_;
  SimTime submitted_at_ = 0;
  uint32_t retries_ = 0;
  uint64_t timer_token_ = 0;
  uint64_t timer_counter_ = 0;
  // votes for the pending ts, keyed by result
  std::map<std::string, std::set<ReplicaId>> public_votes_;
  std::vector<Completion> completions_;
};

}  // namespace seemore
