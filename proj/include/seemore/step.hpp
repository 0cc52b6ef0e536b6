#pragma once

#include <vector>

#include "seemore/messages.hpp"
#include "seemore/types.hpp"

namespace seemore {

struct OutboundMsg {
  bool to_client = false;
  uint32_t dest = 0;  // replica id or client id
  MsgPtr msg;
};

struct TimerArm {
  uint64_t token = 0;
  SimTime delay = 0;
};

// One inbound event in, a batch of outbound messages and timer arms out.
// Cancellation is lazy: a fired timer whose purpose is no longer live is
// ignored by the owner.
struct StepResult {
  std::vector<OutboundMsg> msgs;
  std::vector<TimerArm> timers;

  void send(ReplicaId to, MsgPtr m) { msgs.push_back({false, to, std::move(m)}); }
  void send_client(ClientId to, MsgPtr m) {
    msgs.push_back({true, to, std::move(m)});
  }
  void arm(uint64_t token, SimTime delay) { timers.push_back({token, delay}); }
  void merge(StepResult&& other) {
    for (auto& m : other.msgs) msgs.push_back(std::move(m));
    for (auto& t : other.timers) timers.push_back(t);
  }
};

// Hooks the harness uses to audit execution, attribute rejects, and time
// view changes. All callbacks are optional.
class RunObserver {
 public:
  virtual ~RunObserver() = default;
  virtual void on_execute(ReplicaId, Seq, Digest, View, Mode, ClientId,
                          uint64_t /*ts*/, bool /*mutation*/) {}
  virtual void on_checkpoint_adopt(ReplicaId, Seq) {}
  virtual void on_reject(ReplicaId, MsgType, VerifyError) {}
  virtual void on_view_installed(ReplicaId, View, Mode) {}
  virtual void on_viewchange_started(ReplicaId, View) {}
};

}  // namespace seemore
