#include "seemore/crypto.hpp"

namespace seemore {
namespace {

constexpr uint64_t kFnvOffset = 1469598103934665603ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

uint64_t fnv1a(uint64_t h, const uint8_t* data, size_t len) {
  for (size_t i = 0; i < len; i++) {
    h ^= data[i];
    h *= kFnvPrime;
  }
  return h;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Lion:
      return "lion";
    case Mode::Dog:
      return "dog";
    case Mode::Peacock:
      return "peacock";
  }
  return "?";
}

bool mode_from_name(const std::string& s, Mode& out) {
  if (s == "lion") {
    out = Mode::Lion;
  } else if (s == "dog") {
    out = Mode::Dog;
  } else if (s == "peacock") {
    out = Mode::Peacock;
  } else {
    return false;
  }
  return true;
}

Digest KeyedHashCrypto::digest(const uint8_t* data, size_t len) const {
  uint64_t h = fnv1a(kFnvOffset, data, len);
  return h ? h : 1;  // 0 is the "absent" sentinel
}

uint64_t KeyedHashCrypto::secret(uint32_t key_id) const {
  return splitmix64(domain_ ^ (uint64_t(key_id) << 17) ^ 0xc2b2ae3d27d4eb4full);
}

Signature KeyedHashCrypto::sign(uint32_t key_id, const uint8_t* data,
                                size_t len) const {
  uint64_t h = splitmix64(secret(key_id) ^ fnv1a(kFnvOffset, data, len));
  return h ? h : 1;
}

bool KeyedHashCrypto::verify(uint32_t key_id, const uint8_t* data, size_t len,
                             Signature sig) const {
  return sig != 0 && sig == sign(key_id, data, len);
}

}  // namespace seemore
