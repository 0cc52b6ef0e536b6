#include "seemore/config.hpp"

#include <cmath>

namespace seemore {

std::optional<std::string> ClusterConfig::validate(Mode mode) const {
  if (total() < required_network_size(byz_bound, crash_bound))
    return "network too small: N < 3m + 2c + 1";
  if ((mode == Mode::Lion || mode == Mode::Dog) &&
      private_size <= crash_bound)
    return "trusted-primary mode needs S > c";
  if ((mode == Mode::Dog || mode == Mode::Peacock) &&
      public_size < proxy_count())
    return "proxy mode needs P >= 3m + 1";
  return std::nullopt;
}

uint32_t required_network_size(uint32_t byz_bound, uint32_t crash_bound) {
  return 3 * byz_bound + 2 * crash_bound + 1;
}

uint32_t quorum_size(Mode mode, uint32_t byz_bound, uint32_t crash_bound) {
  if (mode == Mode::Lion) return 2 * byz_bound + crash_bound + 1;
  return 2 * byz_bound + 1;
}

SizingResult required_public_rental(const SizingInput& in) {
  const bool ratio = in.alpha.has_value();
  const bool cluster = in.byz_cluster.has_value();
  if (ratio == cluster)
    return SizingResult::failure(SizingError::InvalidInput);
  if (!ratio && in.beta.has_value())
    return SizingResult::failure(SizingError::InvalidInput);
  if (ratio && in.crash_cluster.has_value())
    return SizingResult::failure(SizingError::InvalidInput);

  const double s = double(in.private_size);
  const double c = double(in.crash_bound);

  if (ratio) {
    const double alpha = *in.alpha;
    const double beta = in.beta.value_or(0.0);
    if (alpha < 0.0 || alpha >= 1.0 || beta < 0.0 || beta >= 1.0)
      return SizingResult::failure(SizingError::InvalidInput);
    // S >= 2c+1: a crash-tolerant private cloud needs no rentals.
    if (s >= 2 * c + 1) return SizingResult::value(0);
    const double denom = 3 * alpha + 2 * beta - 1.0;
    if (denom >= 0.0)
      return SizingResult::failure(SizingError::Infeasible);
    // tolerance keeps exact ratios (e.g. -1 / -0.2) from ceiling one too high
    const double p = std::ceil((s - (2 * c + 1)) / denom - 1e-9);
    return SizingResult::value(uint32_t(p < 0 ? 0 : p));
  }

  const double bm = double(*in.byz_cluster);
  const double bc = double(in.crash_cluster.value_or(0));
  const double p = (3 * bm + 2 * bc + 2 * c + 1) - s;
  return SizingResult::value(uint32_t(p < 0 ? 0 : p));
}

ReplicaId primary_of_view(View v, Mode mode, const ClusterConfig& cfg) {
  if (mode == Mode::Peacock)
    return ReplicaId(v % cfg.public_size) + cfg.private_size;
  return ReplicaId(v % cfg.private_size);
}

std::vector<ReplicaId> proxy_set(View v, const ClusterConfig& cfg) {
  std::vector<ReplicaId> out;
  const uint32_t p = cfg.public_size;
  const uint32_t off = uint32_t(v % p);
  out.reserve(cfg.proxy_count());
  for (uint32_t k = 0; k < cfg.proxy_count(); k++)
    out.push_back(cfg.private_size + (off + k) % p);
  return out;
}

bool is_proxy_of_view(ReplicaId r, View v, const ClusterConfig& cfg) {
  if (!cfg.is_public(r)) return false;
  const uint32_t p = cfg.public_size;
  const uint32_t rel =
      (r - cfg.private_size + p - uint32_t(v % p)) % p;
  return rel < cfg.proxy_count();
}

ReplicaId transferer_of_view(View v_new, uint32_t private_size) {
  return ReplicaId(v_new % private_size);
}

}  // namespace seemore
