#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "seemore/messages.hpp"

using namespace seemore;
using namespace seemore::test;

TEST_SUITE_BEGIN("messages");

namespace {
const KeyedHashCrypto kCrypto;
const ClusterConfig kCfg = small_cluster();

AgreeMsg make_agree(MsgType t, View v, Seq n, ReplicaId sender) {
  AgreeMsg m;
  m.type = t;
  m.view = v;
  m.seq = n;
  m.digest = 0x1234;
  m.sender = sender;
  sign_agree(kCrypto, m);
  return m;
}
}  // namespace

TEST_CASE("round-trip serialization for every message shape") {
  RequestMsg req = make_request(kCrypto, 7, 3, "alpha", "beta");

  AgreeMsg agree = make_agree(MsgType::Prepare, 2, 9, 0);
  agree.has_request = true;
  agree.request = req;
  agree.digest = request_digest(kCrypto, req);
  sign_agree(kCrypto, agree);

  ReplyMsg reply{Mode::Dog, 4, 3, 7, "OK", 2, 0};
  sign_reply(kCrypto, reply);

  CheckpointMsg ckpt;
  ckpt.seq = 10;
  ckpt.state.kv = {{"a", "1"}, {"b", "2"}};
  ckpt.state.clients = {{7, 3, "OK"}};
  ckpt.state_digest = snapshot_digest(kCrypto, ckpt.state);
  ckpt.sender = 1;
  sign_checkpoint(kCrypto, ckpt);

  ViewChangeMsg vc;
  vc.new_view = 3;
  vc.target_mode = Mode::Peacock;
  vc.from_view = 2;
  vc.from_mode = Mode::Dog;
  vc.stable_seq = 10;
  vc.checkpoint_cert = {ckpt};
  vc.prepares = {agree};
  vc.prepared_proofs.push_back(
      {make_agree(MsgType::PrePrepare, 1, 11, 2),
       {make_agree(MsgType::PeerPrepare, 1, 11, 3),
        make_agree(MsgType::PeerPrepare, 1, 11, 4)}});
  vc.commits = {make_agree(MsgType::Commit, 0, 8, 0)};
  vc.sender = 3;
  sign_view_change(kCrypto, vc);

  NewViewMsg nv;
  nv.new_view = 3;
  nv.new_mode = Mode::Peacock;
  nv.stable_seq = 10;
  nv.checkpoint_cert = {ckpt};
  nv.prepares = {agree};
  nv.sender = 1;
  sign_new_view(kCrypto, nv);

  ModeChangeMsg mc{5, Mode::Dog, 1, 0};
  sign_mode_change(kCrypto, mc);

  for (ProtocolMessage msg :
       std::vector<ProtocolMessage>{req, agree, reply, ckpt, vc, nv, mc}) {
    auto bytes = serialize(msg);
    auto back = deserialize(bytes);
    REQUIRE(back.has_value());
    CHECK(serialize(*back) == bytes);
    CHECK(type_of(*back) == type_of(msg));
  }
}

TEST_CASE("deserialization rejects truncated and garbage input") {
  auto bytes = serialize(ProtocolMessage(make_agree(MsgType::Commit, 0, 1, 0)));
  for (size_t cut = 0; cut < bytes.size(); cut += 3)
    CHECK(!deserialize(bytes.data(), cut).has_value());
  std::vector<uint8_t> garbage(64, 0xEE);
  CHECK(!deserialize(garbage).has_value());
}

TEST_CASE("signatures bind signer and content") {
  AgreeMsg m = make_agree(MsgType::Commit, 1, 5, 1);
  CHECK(verify_message(ProtocolMessage(m), kCrypto, kCfg, Mode::Lion) ==
        VerifyError::None);

  SUBCASE("content tampering breaks the signature") {
    AgreeMsg t = m;
    t.seq = 6;
    CHECK(verify_message(ProtocolMessage(t), kCrypto, kCfg, Mode::Lion) ==
          VerifyError::BadSignature);
  }
  SUBCASE("another key cannot produce the signature") {
    AgreeMsg t = m;
    auto bytes = serialize(ProtocolMessage(m));
    t.sig = kCrypto.sign(replica_key(3), bytes.data(), bytes.size());
    CHECK(verify_message(ProtocolMessage(t), kCrypto, kCfg, Mode::Lion) ==
          VerifyError::BadSignature);
  }
  SUBCASE("zero signature never verifies") {
    AgreeMsg t = m;
    t.sig = 0;
    CHECK(verify_message(ProtocolMessage(t), kCrypto, kCfg, Mode::Lion) ==
          VerifyError::BadSignature);
  }
}

TEST_CASE("request verification") {
  RequestMsg req = make_request(kCrypto, 3, 1, "k", "v");
  CHECK(verify_request(kCrypto, req));

  RequestMsg bad = req;
  bad.ts = 2;
  CHECK(!verify_request(kCrypto, bad));

  // protocol no-ops are unsigned by design
  RequestMsg noop;
  noop.op.kind = KvOp::Kind::Noop;
  CHECK(verify_request(kCrypto, noop));

  // but a client-attributed request must carry a client signature
  RequestMsg fake;
  fake.op.kind = KvOp::Kind::Put;
  fake.op.key = "k";
  fake.client = 3;
  CHECK(!verify_request(kCrypto, fake));
}

TEST_CASE("role authorization per mode") {
  // view 0: Lion/Dog primary is replica 0, Peacock primary is replica 2
  SUBCASE("prepare must come from the trusted primary of its view") {
    CHECK(verify_message(ProtocolMessage(make_agree(MsgType::Prepare, 0, 1, 1)),
                         kCrypto, kCfg, Mode::Lion) == VerifyError::WrongRole);
    CHECK(verify_message(ProtocolMessage(make_agree(MsgType::Prepare, 1, 1, 1)),
                         kCrypto, kCfg, Mode::Lion) == VerifyError::None);
    CHECK(verify_message(ProtocolMessage(make_agree(MsgType::Prepare, 0, 1, 0)),
                         kCrypto, kCfg, Mode::Peacock) ==
          VerifyError::WrongRole);
  }
  SUBCASE("pre-prepare must come from the public primary") {
    CHECK(verify_message(
              ProtocolMessage(make_agree(MsgType::PrePrepare, 0, 1, 2)),
              kCrypto, kCfg, Mode::Peacock) == VerifyError::None);
    CHECK(verify_message(
              ProtocolMessage(make_agree(MsgType::PrePrepare, 0, 1, 3)),
              kCrypto, kCfg, Mode::Peacock) == VerifyError::WrongRole);
  }
  SUBCASE("informs and peer-prepares must come from proxies of the view") {
    CHECK(verify_message(ProtocolMessage(make_agree(MsgType::Inform, 0, 1, 4)),
                         kCrypto, kCfg, Mode::Dog) == VerifyError::None);
    CHECK(verify_message(ProtocolMessage(make_agree(MsgType::Inform, 0, 1, 0)),
                         kCrypto, kCfg, Mode::Dog) == VerifyError::WrongRole);
  }
  SUBCASE("lion accepts are unsigned, dog accepts are not") {
    AgreeMsg acc;
    acc.type = MsgType::Accept;
    acc.view = 0;
    acc.seq = 1;
    acc.digest = 0x99;
    acc.sender = 3;
    CHECK(verify_message(ProtocolMessage(acc), kCrypto, kCfg, Mode::Lion) ==
          VerifyError::None);
    CHECK(verify_message(ProtocolMessage(acc), kCrypto, kCfg, Mode::Dog) ==
          VerifyError::BadSignature);
    sign_agree(kCrypto, acc);
    CHECK(verify_message(ProtocolMessage(acc), kCrypto, kCfg, Mode::Dog) ==
          VerifyError::None);
  }
}

TEST_CASE("embedded request digest must match") {
  RequestMsg req = make_request(kCrypto, 1, 1, "x", "y");
  AgreeMsg m;
  m.type = MsgType::Prepare;
  m.view = 0;
  m.seq = 1;
  m.sender = 0;
  m.has_request = true;
  m.request = req;
  m.digest = request_digest(kCrypto, req) ^ 1;  // off by one bit
  sign_agree(kCrypto, m);
  CHECK(verify_message(ProtocolMessage(m), kCrypto, kCfg, Mode::Lion) ==
        VerifyError::DigestMismatch);
}

TEST_CASE("stale views are flagged when the receiver's view is known") {
  AgreeMsg m = make_agree(MsgType::Commit, 1, 5, 1);
  CHECK(verify_message(ProtocolMessage(m), kCrypto, kCfg, Mode::Lion, 2) ==
        VerifyError::StaleView);
  CHECK(verify_message(ProtocolMessage(m), kCrypto, kCfg, Mode::Lion, 1) ==
        VerifyError::None);
}

TEST_CASE("property: random agree messages survive a round trip") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; i++) {
    AgreeMsg m;
    m.type = MsgType(2 + rng() % 6);
    m.view = rng() % 1000;
    m.seq = rng() % 100000;
    m.digest = rng();
    m.sender = ReplicaId(rng() % 6);
    if (rng() % 2) {
      m.has_request = true;
      m.request = make_request(kCrypto, ClientId(1 + rng() % 9),
                               rng() % 50, "k" + std::to_string(rng() % 10),
                               "v" + std::to_string(rng() % 10));
      m.digest = request_digest(kCrypto, m.request);
    }
    sign_agree(kCrypto, m);
    auto bytes = serialize(ProtocolMessage(m));
    auto back = deserialize(bytes);
    REQUIRE(back.has_value());
    CHECK(serialize(*back) == bytes);
  }
}

TEST_SUITE_END();
