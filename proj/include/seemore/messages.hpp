#pragma once

#include <memory>
#include <optional>
#include <tuple>
#include <variant>
#include <vector>

#include "seemore/config.hpp"
#include "seemore/crypto.hpp"
#include "seemore/kv.hpp"
#include "seemore/types.hpp"

namespace seemore {

enum class MsgType : uint8_t {
  Request = 1,
  Prepare = 2,      // Lion/Dog primary broadcast, carries the request
  PrePrepare = 3,   // Peacock primary broadcast, carries the request
  PeerPrepare = 4,  // Peacock proxy prepare phase
  Accept = 5,       // unsigned in Lion, signed in Dog
  Commit = 6,
  Inform = 7,
  Reply = 8,
  Checkpoint = 9,
  ViewChange = 10,
  NewView = 11,
  ModeChange = 12,
};

const char* msg_type_name(MsgType t);

struct RequestMsg {
  KvOp op;
  uint64_t ts = 0;  // per-client monotonic counter
  ClientId client = 0;
  Signature sig = 0;
};

// Shared shape for all per-sequence agreement messages; `type`
// distinguishes the phase.
struct AgreeMsg {
  MsgType type = MsgType::Prepare;
  View view = 0;
  Seq seq = 0;
  Digest digest = 0;
  ReplicaId sender = 0;
  bool has_request = false;
  RequestMsg request;
  Signature sig = 0;
};

struct ReplyMsg {
  Mode mode = Mode::Lion;
  View view = 0;
  uint64_t ts = 0;
  ClientId client = 0;
  std::string result;
  ReplicaId sender = 0;
  Signature sig = 0;
};

// Application state carried by checkpoints so lagging replicas can adopt
// it directly; there is no separate state-fetch subprotocol in the
// simulation.
struct StateSnapshot {
  std::vector<std::pair<std::string, std::string>> kv;
  // (client, last executed ts, cached result)
  std::vector<std::tuple<ClientId, uint64_t, std::string>> clients;
};

struct CheckpointMsg {
  Seq seq = 0;
  Digest state_digest = 0;
  ReplicaId sender = 0;
  StateSnapshot state;
  Signature sig = 0;
};

// Peacock prepared certificate: pre-prepare plus 2m matching proxy
// prepares.
struct PreparedProof {
  AgreeMsg preprepare;
  std::vector<AgreeMsg> prepares;
};

struct ViewChangeMsg {
  View new_view = 0;
  Mode target_mode = Mode::Lion;
  View from_view = 0;       // sender's view when it gave up on the primary
  Mode from_mode = Mode::Lion;
  Seq stable_seq = 0;
  std::vector<CheckpointMsg> checkpoint_cert;
  std::vector<AgreeMsg> prepares;  // Lion/Dog: primary-signed prepares
  std::vector<PreparedProof> prepared_proofs;  // Peacock
  std::vector<AgreeMsg> commits;   // Lion only
  ReplicaId sender = 0;
  Signature sig = 0;
};

struct NewViewMsg {
  View new_view = 0;
  Mode new_mode = Mode::Lion;
  Seq stable_seq = 0;
  std::vector<CheckpointMsg> checkpoint_cert;
  std::vector<AgreeMsg> prepares;  // re-issued, signed by the assembler
  std::vector<AgreeMsg> commits;   // Lion target only
  ReplicaId sender = 0;
  Signature sig = 0;
};

struct ModeChangeMsg {
  View next_view = 0;
  Mode next_mode = Mode::Lion;
  ReplicaId sender = 0;
  Signature sig = 0;
};

using ProtocolMessage =
    std::variant<RequestMsg, AgreeMsg, ReplyMsg, CheckpointMsg, ViewChangeMsg,
                 NewViewMsg, ModeChangeMsg>;
using MsgPtr = std::shared_ptr<const ProtocolMessage>;

MsgType type_of(const ProtocolMessage& msg);

// Canonical wire encoding; round-trips via deserialize.
std::vector<uint8_t> serialize(const ProtocolMessage& msg);
std::optional<ProtocolMessage> deserialize(const uint8_t* data, size_t len);
inline std::optional<ProtocolMessage> deserialize(
    const std::vector<uint8_t>& b) {
  return deserialize(b.data(), b.size());
}

Digest request_digest(const CryptoProvider& crypto, const RequestMsg& req);
Digest snapshot_digest(const CryptoProvider& crypto, const StateSnapshot& s);

void sign_request(const CryptoProvider& crypto, RequestMsg& req);
bool verify_request(const CryptoProvider& crypto, const RequestMsg& req);

// Signs with the sender's replica key over the canonical encoding minus
// the signature field.
void sign_agree(const CryptoProvider& crypto, AgreeMsg& m);
void sign_reply(const CryptoProvider& crypto, ReplyMsg& m);
void sign_checkpoint(const CryptoProvider& crypto, CheckpointMsg& m);
void sign_view_change(const CryptoProvider& crypto, ViewChangeMsg& m);
void sign_new_view(const CryptoProvider& crypto, NewViewMsg& m);
void sign_mode_change(const CryptoProvider& crypto, ModeChangeMsg& m);

enum class VerifyError {
  None,
  BadSignature,
  DigestMismatch,
  WrongRole,
  StaleView,
  Malformed,
};

const char* verify_error_name(VerifyError e);

// Signature, digest-consistency, and role-authorization check. `mode` is
// the receiver's current mode (decides e.g. whether Accept must be
// signed); when `current_view` is given, messages from older views are
// flagged StaleView.
VerifyError verify_message(const ProtocolMessage& msg,
                           const CryptoProvider& crypto,
                           const ClusterConfig& cfg, Mode mode,
                           std::optional<View> current_view = std::nullopt);

}  // namespace seemore
