#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "seemore/types.hpp"

namespace seemore {

// Key namespace: replicas use their id directly, client keys are offset so
// the two spaces never collide.
constexpr uint32_t kClientKeyBase = 1u << 20;

inline uint32_t replica_key(ReplicaId r) { return r; }
inline uint32_t client_key(ClientId c) { return kClientKeyBase + c; }

// Pluggable signature/digest provider. Simulation runs use the keyed-hash
// scheme below; a real asymmetric provider can be swapped in behind the
// same interface.
class CryptoProvider {
 public:
  virtual ~CryptoProvider() = default;

  virtual Digest digest(const uint8_t* data, size_t len) const = 0;
  virtual Signature sign(uint32_t key_id, const uint8_t* data,
                         size_t len) const = 0;
  virtual bool verify(uint32_t key_id, const uint8_t* data, size_t len,
                      Signature sig) const = 0;

  Digest digest(const std::vector<uint8_t>& b) const {
    return digest(b.data(), b.size());
  }
  Signature sign(uint32_t key_id, const std::vector<uint8_t>& b) const {
    return sign(key_id, b.data(), b.size());
  }
  bool verify(uint32_t key_id, const std::vector<uint8_t>& b,
              Signature sig) const {
    return verify(key_id, b.data(), b.size(), sig);
  }
};

// Deterministic keyed-hash crypto. Per-key secrets are derived from a
// domain seed; a signature is a keyed hash of the message bytes, so a
// party that does not hold the secret cannot produce a signature that
// verifies for that key.
class KeyedHashCrypto final : public CryptoProvider {
 public:
  explicit KeyedHashCrypto(uint64_t domain_seed = 0x5ee307e) noexcept
      : domain_(domain_seed) {}

  Digest digest(const uint8_t* data, size_t len) const override;
  Signature sign(uint32_t key_id, const uint8_t* data,
                 size_t len) const override;
  bool verify(uint32_t key_id, const uint8_t* data, size_t len,
              Signature sig) const override;

 private:
  uint64_t secret(uint32_t key_id) const;

  uint64_t domain_;
};

}  // namespace seemore
