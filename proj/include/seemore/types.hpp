#pragma once

#include <cstdint>
#include <string>

namespace seemore {

using ReplicaId = uint32_t;
using ClientId = uint32_t;
using View = uint64_t;
using Seq = uint64_t;
using SimTime = uint64_t;  // simulated milliseconds
using Digest = uint64_t;
using Signature = uint64_t;

// Protocol mode. Lion: trusted primary, whole network participates.
// Dog: trusted primary, 3m+1 public proxies run agreement.
// Peacock: untrusted primary, agreement entirely in the public cloud.
enum class Mode : uint8_t { Lion = 1, Dog = 2, Peacock = 3 };

const char* mode_name(Mode m);
bool mode_from_name(const std::string& s, Mode& out);

}  // namespace seemore
