#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seemore/types.hpp"

namespace seemore {

// The replicated application operation. Noop is the protocol-level filler
// committed at gap sequence numbers during view changes.
struct KvOp {
  enum class Kind : uint8_t { Noop = 0, Get = 1, Put = 2 };
  Kind kind = Kind::Noop;
  std::string key;
  std::string value;
};

// Deterministic key-value execution layer.
class KvStore {
 public:
  std::string apply(const KvOp& op) {
    switch (op.kind) {
      case KvOp::Kind::Noop:
        return "";
      case KvOp::Kind::Get: {
        auto it = data_.find(op.key);
        return it == data_.end() ? "" : it->second;
      }
      case KvOp::Kind::Put:
        data_[op.key] = op.value;
        return "OK";
    }
    return "";
  }

  std::vector<std::pair<std::string, std::string>> snapshot() const {
    return {data_.begin(), data_.end()};
  }
  void load(const std::vector<std::pair<std::string, std::string>>& kv) {
    data_.clear();
    data_.insert(kv.begin(), kv.end());
  }
  size_t size() const { return data_.size(); }

 private:
  std::map<std::string, std::string> data_;
};

}  // namespace seemore
