#include "wider/sigcache.hpp"

namespace wider {

bool SignatureCache::check(const SubchainTx& tx) {
  const Hash256 key = sha256(encode_tx(tx));
  if (ok_.contains(key)) {
    ++hits_;
    return true;
  }
  ++misses_;
  if (!verify_tx(tx)) return false;
  // crude bound: start over rather than track recency
  if (ok_.size() >= limit_) ok_.clear();
  ok_.insert(key);
  return true;
}

}  // namespace wider
