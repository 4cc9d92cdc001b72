#include "wider/chainstate.hpp"

#include <algorithm>

namespace wider {

std::optional<SubchainState> ChainState::confirmed(const Address& address) const {
  auto it = confirmed_.find(address);
  if (it == confirmed_.end()) return std::nullopt;
  return it->second;
}

ChainState::Result ChainState::submit(const MainBlock& block, const Validator& validate, const Listener& listener) {
  Result result;
  const Hash256 hash = block.hash();
  if (view_.contains(hash)) {
    result.status = view_.is_canonical(hash) || !deferred_.contains(hash) ? Status::Duplicate : Status::Deferred;
    return result;
  }
  try {
    view_.add_block(block);
  } catch (const Error& e) {
    result.error = e;
    return result;
  }
  activate(validate, listener, result.reorg, hash, result.error);
  if (view_.is_canonical(hash)) {
    result.status = Status::Connected;
  } else if (deferred_.contains(hash)) {
    result.status = Status::Deferred;
  } else if (view_.is_invalid(hash)) {
    result.status = Status::Rejected;
  } else {
    result.status = Status::SideBranch;
  }
  return result;
}

std::size_t ChainState::retry_deferred(const Validator& validate, const Listener& listener) {
  if (deferred_.empty()) return 0;
  const std::set<Hash256> retry = std::exchange(deferred_, {});
  for (const auto& h : retry) view_.reconsider(h);
  Reorg reorg;
  std::optional<Error> ignored;
  activate(validate, listener, reorg, Hash256{}, ignored);
  return static_cast<std::size_t>(std::count_if(retry.begin(), retry.end(), [this](const Hash256& h) {
    return view_.is_canonical(h);
  }));
}

void ChainState::disconnect_tip(const Listener& listener, Reorg& reorg) {
  const Hash256 tip = view_.tip();
  const MainBlock& block = *view_.find(tip);
  if (auto it = undo_.find(tip); it != undo_.end()) {
    // restore in reverse so repeated addresses end at the oldest value
    for (auto u = it->second.rbegin(); u != it->second.rend(); ++u) {
      if (u->previous) {
        confirmed_[u->address] = *u->previous;
      } else {
        confirmed_.erase(u->address);
      }
    }
    undo_.erase(it);
  }
  view_.set_canonical(block.header.parent_block_hash);
  reorg.disconnected.push_back(tip);
  if (listener.disconnected) listener.disconnected(block);
}

void ChainState::activate(const Validator& validate, const Listener& listener, Reorg& reorg,
                          const Hash256& watched, std::optional<Error>& watched_error) {
  while (view_.best_tip() != view_.tip()) {
    std::vector<Hash256> branch;
    for (Hash256 cursor = view_.best_tip(); !view_.is_canonical(cursor);
         cursor = view_.find(cursor)->header.parent_block_hash) {
      branch.push_back(cursor);
    }
    std::reverse(branch.begin(), branch.end());
    const Hash256 fork = view_.find(branch.front())->header.parent_block_hash;
    while (view_.tip() != fork) disconnect_tip(listener, reorg);

    for (const Hash256& h : branch) {
      const MainBlock& block = *view_.find(h);
      std::vector<RecordDelta> deltas;
      try {
        deltas = validate(block, view_);
      } catch (const Error& e) {
        if (h == watched) watched_error = e;
        if (e.code() == ErrorCode::PartialFetch) deferred_.insert(h);
        view_.invalidate(h);
        break;
      }
      std::vector<Undo> undo;
      for (const auto& d : deltas) {
        if (!d.state) continue;
        undo.push_back({d.address, confirmed(d.address)});
        confirmed_[d.address] = *d.state;
      }
      undo_[h] = std::move(undo);
      view_.set_canonical(h);
      reorg.connected.push_back(h);
      if (listener.connected) listener.connected(block, deltas);
    }
  }
}

}  // namespace wider
