#include "seemore/messages.hpp"

#include "seemore/bytes.hpp"

namespace seemore {
namespace {

void write_op(ByteWriter& w, const KvOp& op) {
  w.u8(uint8_t(op.kind));
  w.str(op.key);
  w.str(op.value);
}

KvOp read_op(ByteReader& r) {
  KvOp op;
  uint8_t k = r.u8();
  if (k > 2) {
    r.str();  // poison: force failure below
    op.kind = KvOp::Kind::Noop;
  } else {
    op.kind = KvOp::Kind(k);
  }
  op.key = r.str();
  op.value = r.str();
  return op;
}

void write_request(ByteWriter& w, const RequestMsg& m) {
  write_op(w, m.op);
  w.u64(m.ts);
  w.u32(m.client);
  w.u64(m.sig);
}

RequestMsg read_request(ByteReader& r) {
  RequestMsg m;
  m.op = read_op(r);
  m.ts = r.u64();
  m.client = r.u32();
  m.sig = r.u64();
  return m;
}

void write_agree(ByteWriter& w, const AgreeMsg& m) {
  w.u8(uint8_t(m.type));
  w.u64(m.view);
  w.u64(m.seq);
  w.u64(m.digest);
  w.u32(m.sender);
  w.u8(m.has_request ? 1 : 0);
  if (m.has_request) write_request(w, m.request);
  w.u64(m.sig);
}

AgreeMsg read_agree(ByteReader& r, MsgType type) {
  AgreeMsg m;
  m.type = type;
  m.view = r.u64();
  m.seq = r.u64();
  m.digest = r.u64();
  m.sender = r.u32();
  m.has_request = r.u8() != 0;
  if (m.has_request) m.request = read_request(r);
  m.sig = r.u64();
  return m;
}

AgreeMsg read_agree_tagged(ByteReader& r) {
  uint8_t t = r.u8();
  return read_agree(r, MsgType(t));
}

void write_reply(ByteWriter& w, const ReplyMsg& m) {
  w.u8(uint8_t(m.mode));
  w.u64(m.view);
  w.u64(m.ts);
  w.u32(m.client);
  w.str(m.result);
  w.u32(m.sender);
  w.u64(m.sig);
}

ReplyMsg read_reply(ByteReader& r) {
  ReplyMsg m;
  m.mode = Mode(r.u8());
  m.view = r.u64();
  m.ts = r.u64();
  m.client = r.u32();
  m.result = r.str();
  m.sender = r.u32();
  m.sig = r.u64();
  return m;
}

void write_snapshot(ByteWriter& w, const StateSnapshot& s) {
  w.u32(uint32_t(s.kv.size()));
  for (const auto& [k, v] : s.kv) {
    w.str(k);
    w.str(v);
  }
  w.u32(uint32_t(s.clients.size()));
  for (const auto& [c, ts, res] : s.clients) {
    w.u32(c);
    w.u64(ts);
    w.str(res);
  }
}

StateSnapshot read_snapshot(ByteReader& r) {
  StateSnapshot s;
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n && r.ok(); i++) {
    std::string k = r.str();
    std::string v = r.str();
    s.kv.emplace_back(std::move(k), std::move(v));
  }
  uint32_t nc = r.u32();
  for (uint32_t i = 0; i < nc && r.ok(); i++) {
    ClientId c = r.u32();
    uint64_t ts = r.u64();
    std::string res = r.str();
    s.clients.emplace_back(c, ts, std::move(res));
  }
  return s;
}

void write_checkpoint(ByteWriter& w, const CheckpointMsg& m) {
  w.u64(m.seq);
  w.u64(m.state_digest);
  w.u32(m.sender);
  write_snapshot(w, m.state);
  w.u64(m.sig);
}

CheckpointMsg read_checkpoint(ByteReader& r) {
  CheckpointMsg m;
  m.seq = r.u64();
  m.state_digest = r.u64();
  m.sender = r.u32();
  m.state = read_snapshot(r);
  m.sig = r.u64();
  return m;
}

void write_view_change(ByteWriter& w, const ViewChangeMsg& m) {
  w.u64(m.new_view);
  w.u8(uint8_t(m.target_mode));
  w.u64(m.from_view);
  w.u8(uint8_t(m.from_mode));
  w.u64(m.stable_seq);
  w.u32(uint32_t(m.checkpoint_cert.size()));
  for (const auto& c : m.checkpoint_cert) write_checkpoint(w, c);
  w.u32(uint32_t(m.prepares.size()));
  for (const auto& p : m.prepares) write_agree(w, p);
  w.u32(uint32_t(m.prepared_proofs.size()));
  for (const auto& pp : m.prepared_proofs) {
    write_agree(w, pp.preprepare);
    w.u32(uint32_t(pp.prepares.size()));
    for (const auto& p : pp.prepares) write_agree(w, p);
  }
  w.u32(uint32_t(m.commits.size()));
  for (const auto& c : m.commits) write_agree(w, c);
  w.u32(m.sender);
  w.u64(m.sig);
}

ViewChangeMsg read_view_change(ByteReader& r) {
  ViewChangeMsg m;
  m.new_view = r.u64();
  m.target_mode = Mode(r.u8());
  m.from_view = r.u64();
  m.from_mode = Mode(r.u8());
  m.stable_seq = r.u64();
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n && r.ok(); i++)
    m.checkpoint_cert.push_back(read_checkpoint(r));
  n = r.u32();
  for (uint32_t i = 0; i < n && r.ok(); i++)
    m.prepares.push_back(read_agree_tagged(r));
  n = r.u32();
  for (uint32_t i = 0; i < n && r.ok(); i++) {
    PreparedProof pp;
    pp.preprepare = read_agree_tagged(r);
    uint32_t np = r.u32();
    for (uint32_t j = 0; j < np && r.ok(); j++)
      pp.prepares.push_back(read_agree_tagged(r));
    m.prepared_proofs.push_back(std::move(pp));
  }
  n = r.u32();
  for (uint32_t i = 0; i < n && r.ok(); i++)
    m.commits.push_back(read_agree_tagged(r));
  m.sender = r.u32();
  m.sig = r.u64();
  return m;
}

void write_new_view(ByteWriter& w, const NewViewMsg& m) {
  w.u64(m.new_view);
  w.u8(uint8_t(m.new_mode));
  w.u64(m.stable_seq);
  w.u32(uint32_t(m.checkpoint_cert.size()));
  for (const auto& c : m.checkpoint_cert) write_checkpoint(w, c);
  w.u32(uint32_t(m.prepares.size()));
  for (const auto& p : m.prepares) write_agree(w, p);
  w.u32(uint32_t(m.commits.size()));
  for (const auto& c : m.commits) write_agree(w, c);
  w.u32(m.sender);
  w.u64(m.sig);
}

NewViewMsg read_new_view(ByteReader& r) {
  NewViewMsg m;
  m.new_view = r.u64();
  m.new_mode = Mode(r.u8());
  m.stable_seq = r.u64();
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n && r.ok(); i++)
    m.checkpoint_cert.push_back(read_checkpoint(r));
  n = r.u32();
  for (uint32_t i = 0; i < n && r.ok(); i++)
    m.prepares.push_back(read_agree_tagged(r));
  n = r.u32();
  for (uint32_t i = 0; i < n && r.ok(); i++)
    m.commits.push_back(read_agree_tagged(r));
  m.sender = r.u32();
  m.sig = r.u64();
  return m;
}

void write_mode_change(ByteWriter& w, const ModeChangeMsg& m) {
  w.u64(m.next_view);
  w.u8(uint8_t(m.next_mode));
  w.u32(m.sender);
  w.u64(m.sig);
}

ModeChangeMsg read_mode_change(ByteReader& r) {
  ModeChangeMsg m;
  m.next_view = r.u64();
  m.next_mode = Mode(r.u8());
  m.sender = r.u32();
  m.sig = r.u64();
  return m;
}

bool valid_mode_byte(Mode m) {
  return m == Mode::Lion || m == Mode::Dog || m == Mode::Peacock;
}

}  // namespace

const char* msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::Request:
      return "request";
    case MsgType::Prepare:
      return "prepare";
    case MsgType::PrePrepare:
      return "pre-prepare";
    case MsgType::PeerPrepare:
      return "peer-prepare";
    case MsgType::Accept:
      return "accept";
    case MsgType::Commit:
      return "commit";
    case MsgType::Inform:
      return "inform";
    case MsgType::Reply:
      return "reply";
    case MsgType::Checkpoint:
      return "checkpoint";
    case MsgType::ViewChange:
      return "view-change";
    case MsgType::NewView:
      return "new-view";
    case MsgType::ModeChange:
      return "mode-change";
  }
  return "?";
}

const char* verify_error_name(VerifyError e) {
  switch (e) {
    case VerifyError::None:
      return "none";
    case VerifyError::BadSignature:
      return "bad-signature";
    case VerifyError::DigestMismatch:
      return "digest-mismatch";
    case VerifyError::WrongRole:
      return "wrong-role";
    case VerifyError::StaleView:
      return "stale-view";
    case VerifyError::Malformed:
      return "malformed";
  }
  return "?";
}

MsgType type_of(const ProtocolMessage& msg) {
  return std::visit(
      [](const auto& m) -> MsgType {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RequestMsg>) return MsgType::Request;
        if constexpr (std::is_same_v<T, AgreeMsg>) return m.type;
        if constexpr (std::is_same_v<T, ReplyMsg>) return MsgType::Reply;
        if constexpr (std::is_same_v<T, CheckpointMsg>)
          return MsgType::Checkpoint;
        if constexpr (std::is_same_v<T, ViewChangeMsg>)
          return MsgType::ViewChange;
        if constexpr (std::is_same_v<T, NewViewMsg>) return MsgType::NewView;
        if constexpr (std::is_same_v<T, ModeChangeMsg>)
          return MsgType::ModeChange;
      },
      msg);
}

std::vector<uint8_t> serialize(const ProtocolMessage& msg) {
  ByteWriter w;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RequestMsg>) {
          w.u8(uint8_t(MsgType::Request));
          write_request(w, m);
        } else if constexpr (std::is_same_v<T, AgreeMsg>) {
          // write_agree emits the type byte itself so nested copies inside
          // view-change certificates stay self-describing
          write_agree(w, m);
        } else if constexpr (std::is_same_v<T, ReplyMsg>) {
          w.u8(uint8_t(MsgType::Reply));
          write_reply(w, m);
        } else if constexpr (std::is_same_v<T, CheckpointMsg>) {
          w.u8(uint8_t(MsgType::Checkpoint));
          write_checkpoint(w, m);
        } else if constexpr (std::is_same_v<T, ViewChangeMsg>) {
          w.u8(uint8_t(MsgType::ViewChange));
          write_view_change(w, m);
        } else if constexpr (std::is_same_v<T, NewViewMsg>) {
          w.u8(uint8_t(MsgType::NewView));
          write_new_view(w, m);
        } else if constexpr (std::is_same_v<T, ModeChangeMsg>) {
          w.u8(uint8_t(MsgType::ModeChange));
          write_mode_change(w, m);
        }
      },
      msg);
  return w.take();
}

std::optional<ProtocolMessage> deserialize(const uint8_t* data, size_t len) {
  ByteReader r(data, len);
  uint8_t t = r.u8();
  if (!r.ok()) return std::nullopt;
  ProtocolMessage out;
  switch (MsgType(t)) {
    case MsgType::Request:
      out = read_request(r);
      break;
    case MsgType::Prepare:
    case MsgType::PrePrepare:
    case MsgType::PeerPrepare:
    case MsgType::Accept:
    case MsgType::Commit:
    case MsgType::Inform:
      out = read_agree(r, MsgType(t));
      break;
    case MsgType::Reply: {
      ReplyMsg m = read_reply(r);
      if (!valid_mode_byte(m.mode)) return std::nullopt;
      out = std::move(m);
      break;
    }
    case MsgType::Checkpoint:
      out = read_checkpoint(r);
      break;
    case MsgType::ViewChange:
      out = read_view_change(r);
      break;
    case MsgType::NewView:
      out = read_new_view(r);
      break;
    case MsgType::ModeChange:
      out = read_mode_change(r);
      break;
    default:
      return std::nullopt;
  }
  if (!r.done()) return std::nullopt;
  return out;
}

Digest request_digest(const CryptoProvider& crypto, const RequestMsg& req) {
  return crypto.digest(serialize(ProtocolMessage(req)));
}

Digest snapshot_digest(const CryptoProvider& crypto, const StateSnapshot& s) {
  ByteWriter w;
  write_snapshot(w, s);
  return crypto.digest(w.bytes());
}

namespace {

// The signing region is the canonical encoding with the signature zeroed.
template <typename M>
std::vector<uint8_t> signing_bytes(const M& msg) {
  M copy = msg;
  copy.sig = 0;
  return serialize(ProtocolMessage(std::move(copy)));
}

template <typename M>
void sign_with(const CryptoProvider& crypto, M& msg, uint32_t key) {
  msg.sig = crypto.sign(key, signing_bytes(msg));
}

template <typename M>
bool check_sig(const CryptoProvider& crypto, const M& msg, uint32_t key) {
  return crypto.verify(key, signing_bytes(msg), msg.sig);
}

}  // namespace

void sign_request(const CryptoProvider& crypto, RequestMsg& req) {
  sign_with(crypto, req, client_key(req.client));
}

bool verify_request(const CryptoProvider& crypto, const RequestMsg& req) {
  // Noop requests are protocol-internal and carry no client signature.
  if (req.op.kind == KvOp::Kind::Noop && req.client == 0) return true;
  return check_sig(crypto, req, client_key(req.client));
}

void sign_agree(const CryptoProvider& crypto, AgreeMsg& m) {
  sign_with(crypto, m, replica_key(m.sender));
}
void sign_reply(const CryptoProvider& crypto, ReplyMsg& m) {
  sign_with(crypto, m, replica_key(m.sender));
}
void sign_checkpoint(const CryptoProvider& crypto, CheckpointMsg& m) {
  sign_with(crypto, m, replica_key(m.sender));
}
void sign_view_change(const CryptoProvider& crypto, ViewChangeMsg& m) {
  sign_with(crypto, m, replica_key(m.sender));
}
void sign_new_view(const CryptoProvider& crypto, NewViewMsg& m) {
  sign_with(crypto, m, replica_key(m.sender));
}
void sign_mode_change(const CryptoProvider& crypto, ModeChangeMsg& m) {
  sign_with(crypto, m, replica_key(m.sender));
}

namespace {

VerifyError verify_agree(const AgreeMsg& m, const CryptoProvider& crypto,
                         const ClusterConfig& cfg, Mode mode,
                         std::optional<View> current_view) {
  if (m.sender >= cfg.total()) return VerifyError::Malformed;
  if (current_view && m.view < *current_view) return VerifyError::StaleView;

  switch (m.type) {
    case MsgType::Prepare:
      if (mode == Mode::Peacock) return VerifyError::WrongRole;
      if (m.sender != primary_of_view(m.view, mode, cfg))
        return VerifyError::WrongRole;
      break;
    case MsgType::PrePrepare:
      if (m.sender != primary_of_view(m.view, Mode::Peacock, cfg))
        return VerifyError::WrongRole;
      break;
    case MsgType::PeerPrepare:
      if (!is_proxy_of_view(m.sender, m.view, cfg))
        return VerifyError::WrongRole;
      break;
    case MsgType::Commit:
      if (mode == Mode::Lion) {
        if (m.sender != primary_of_view(m.view, Mode::Lion, cfg))
          return VerifyError::WrongRole;
      } else if (!is_proxy_of_view(m.sender, m.view, cfg)) {
        return VerifyError::WrongRole;
      }
      break;
    case MsgType::Inform:
      if (!is_proxy_of_view(m.sender, m.view, cfg))
        return VerifyError::WrongRole;
      break;
    case MsgType::Accept:
      if (mode == Mode::Dog && !is_proxy_of_view(m.sender, m.view, cfg))
        return VerifyError::WrongRole;
      break;
    default:
      return VerifyError::Malformed;
  }

  // Lion accepts travel unsigned over the authenticated channel to the
  // trusted primary.
  const bool unsigned_ok = m.type == MsgType::Accept && mode == Mode::Lion;
  if (!unsigned_ok && !check_sig(crypto, m, replica_key(m.sender)))
    return VerifyError::BadSignature;

  if (m.has_request && request_digest(crypto, m.request) != m.digest)
    return VerifyError::DigestMismatch;
  return VerifyError::None;
}

}  // namespace

VerifyError verify_message(const ProtocolMessage& msg,
                           const CryptoProvider& crypto,
                           const ClusterConfig& cfg, Mode mode,
                           std::optional<View> current_view) {
  return std::visit(
      [&](const auto& m) -> VerifyError {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RequestMsg>) {
          return verify_request(crypto, m) ? VerifyError::None
                                           : VerifyError::BadSignature;
        } else if constexpr (std::is_same_v<T, AgreeMsg>) {
          return verify_agree(m, crypto, cfg, mode, current_view);
        } else if constexpr (std::is_same_v<T, ReplyMsg>) {
          if (m.sender >= cfg.total()) return VerifyError::Malformed;
          return check_sig(crypto, m, replica_key(m.sender))
                     ? VerifyError::None
                     : VerifyError::BadSignature;
        } else if constexpr (std::is_same_v<T, CheckpointMsg>) {
          if (m.sender >= cfg.total()) return VerifyError::Malformed;
          if (!check_sig(crypto, m, replica_key(m.sender)))
            return VerifyError::BadSignature;
          if (snapshot_digest(crypto, m.state) != m.state_digest)
            return VerifyError::DigestMismatch;
          // In trusted-primary modes checkpoints must come from the
          // private cloud; Peacock checkpoints come from proxies.
          if (mode != Mode::Peacock && !cfg.is_private(m.sender))
            return VerifyError::WrongRole;
          if (mode == Mode::Peacock && !cfg.is_public(m.sender))
            return VerifyError::WrongRole;
          return VerifyError::None;
        } else if constexpr (std::is_same_v<T, ViewChangeMsg>) {
          if (m.sender >= cfg.total()) return VerifyError::Malformed;
          if (current_view && m.new_view <= *current_view)
            return VerifyError::StaleView;
          return check_sig(crypto, m, replica_key(m.sender))
                     ? VerifyError::None
                     : VerifyError::BadSignature;
        } else if constexpr (std::is_same_v<T, NewViewMsg>) {
          if (m.sender >= cfg.total()) return VerifyError::Malformed;
          // The assembler is the new primary (Lion/Dog) or the
          // transferer (Peacock); both resolve to new_view mod S.
          if (m.sender != transferer_of_view(m.new_view, cfg.private_size))
            return VerifyError::WrongRole;
          return check_sig(crypto, m, replica_key(m.sender))
                     ? VerifyError::None
                     : VerifyError::BadSignature;
        } else if constexpr (std::is_same_v<T, ModeChangeMsg>) {
          if (m.sender >= cfg.total()) return VerifyError::Malformed;
          if (!cfg.is_private(m.sender)) return VerifyError::WrongRole;
          if (m.sender != transferer_of_view(m.next_view, cfg.private_size))
            return VerifyError::WrongRole;
          return check_sig(crypto, m, replica_key(m.sender))
                     ? VerifyError::None
                     : VerifyError::BadSignature;
        }
      },
      msg);
}

}  // namespace seemore
