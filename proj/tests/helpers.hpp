#pragma once

#include <map>
#include <memory>
#include <vector>

#include "seemore/client.hpp"
#include "seemore/replica.hpp"

namespace seemore::test {

inline ClusterConfig small_cluster() {
  // S=2, P=4, c=1, m=1: the smallest cluster hosting all three modes
  return ClusterConfig{2, 4, 1, 1};
}

inline RequestMsg make_request(const CryptoProvider& crypto, ClientId c,
                               uint64_t ts, const std::string& key,
                               const std::string& value) {
  RequestMsg r;
  r.op.kind = KvOp::Kind::Put;
  r.op.key = key;
  r.op.value = value;
  r.ts = ts;
  r.client = c;
  sign_request(crypto, r);
  return r;
}

// Zero-delay synchronous pump: delivers every replica-bound message until
// the network is quiet. Timers never fire; client-bound messages are
// collected and returned. Good enough for happy-path protocol unit tests.
class Pump {
 public:
  Pump(const ClusterConfig& cfg, Mode mode, const CryptoProvider* crypto,
       const ReplicaOptions& opts = {}) {
    for (ReplicaId r = 0; r < cfg.total(); r++)
      replicas.push_back(
          std::make_unique<Replica>(cfg, r, mode, crypto, opts));
  }

  // Inject a message as if sent from `from`, then run to quiescence.
  std::vector<OutboundMsg> inject(uint32_t from, bool from_client,
                                  ReplicaId to, const ProtocolMessage& msg) {
    pending.push_back({from, from_client, {false, to, share(msg)}});
    return drain();
  }

  std::vector<OutboundMsg> drain() {
    std::vector<OutboundMsg> to_clients;
    while (!pending.empty()) {
      auto [from, from_client, om] = pending.front();
      pending.erase(pending.begin());
      if (om.to_client) {
        to_clients.push_back(om);
        continue;
      }
      StepResult out = replicas[om.dest]->on_message(from, from_client,
                                                     *om.msg, now);
      for (OutboundMsg& m : out.msgs)
        pending.push_back({om.dest, false, std::move(m)});
    }
    return to_clients;
  }

  static MsgPtr share(const ProtocolMessage& m) {
    return std::make_shared<const ProtocolMessage>(m);
  }

  std::vector<std::unique_ptr<Replica>> replicas;
  SimTime now = 0;

 private:
  struct Pending {
    uint32_t from;
    bool from_client;
    OutboundMsg om;
  };
  std::vector<Pending> pending;
};

}  // namespace seemore::test
