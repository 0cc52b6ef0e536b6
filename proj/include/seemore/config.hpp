#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seemore/types.hpp"

namespace seemore {

// Cluster topology and fault bounds. Private replicas (trusted, crash-only)
// get ids [0, S), public replicas (untrusted, possibly Byzantine) get
// ids [S, N).
struct ClusterConfig {
  uint32_t private_size = 0;  // S
  uint32_t public_size = 0;   // P
  uint32_t crash_bound = 0;   // c, private cloud
  uint32_t byz_bound = 0;     // m, public cloud

  uint32_t total() const { return private_size + public_size; }
  bool is_private(ReplicaId r) const { return r < private_size; }
  bool is_public(ReplicaId r) const {
    return r >= private_size && r < total();
  }

  uint32_t lion_quorum() const { return 2 * byz_bound + crash_bound + 1; }
  uint32_t proxy_quorum() const { return 2 * byz_bound + 1; }
  uint32_t proxy_count() const { return 3 * byz_bound + 1; }

  // Returns an error description if the config cannot host `mode`.
  std::optional<std::string> validate(Mode mode) const;
};

// Minimum network size 3m + 2c + 1.
uint32_t required_network_size(uint32_t byz_bound, uint32_t crash_bound);

// Quorum size per mode: Lion 2m+c+1, Dog/Peacock 2m+1.
uint32_t quorum_size(Mode mode, uint32_t byz_bound, uint32_t crash_bound);

// Public-cloud sizing. Exactly one method must be selected:
// ratio (alpha, optional beta) or cluster (byz_cluster, optional
// crash_cluster).
struct SizingInput {
  uint32_t private_size = 0;  // S
  uint32_t crash_bound = 0;   // c
  std::optional<double> alpha;          // malicious ratio in public cloud
  std::optional<double> beta;           // crash ratio in public cloud
  std::optional<uint32_t> byz_cluster;    // M, absolute malicious bound
  std::optional<uint32_t> crash_cluster;  // C, absolute crash bound
};

enum class SizingError { InvalidInput, Infeasible };

struct SizingResult {
  bool ok = false;
  uint32_t nodes = 0;
  SizingError error = SizingError::InvalidInput;

  static SizingResult value(uint32_t n) { return {true, n, {}}; }
  static SizingResult failure(SizingError e) { return {false, 0, e}; }
};

SizingResult required_public_rental(const SizingInput& input);

// Lion/Dog: v mod S (private). Peacock: (v mod P) + S (public).
ReplicaId primary_of_view(View v, Mode mode, const ClusterConfig& cfg);

// The 3m+1 public replicas running agreement in Dog/Peacock mode.
// The window [S, S+3m] wraps modulo P within the public id range.
std::vector<ReplicaId> proxy_set(View v, const ClusterConfig& cfg);
bool is_proxy_of_view(ReplicaId r, View v, const ClusterConfig& cfg);

// The trusted replica that assembles the new view in Peacock mode.
ReplicaId transferer_of_view(View v_new, uint32_t private_size);

}  // namespace seemore
