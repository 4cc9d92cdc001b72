#pragma once

#include <functional>
#include <optional>
#include <set>
#include <unordered_map>

#include "wider/mainchain.hpp"

namespace wider {

/// A chain view plus the confirmed subchain states its owner tracks. Blocks
/// are connected heaviest-chain-first; each connect records undo data so a
/// reorg rolls the tracked states back before the new branch is validated.
class ChainState {
 public:
  /// Validates a block against `view`, whose tip is the block's parent.
  using Validator = std::function<std::vector<RecordDelta>(const MainBlock&, const ChainView&)>;

  struct Listener {
    std::function<void(const MainBlock&, const std::vector<RecordDelta>&)> connected;
    std::function<void(const MainBlock&)> disconnected;
  };

  enum class Status {
    Connected,  // on the canonical chain after the call
    Duplicate,  // already known and not deferred
    SideBranch, // stored, not enough work to become canonical
    Deferred,   // fragments unavailable; kept for a retry
    Rejected,
  };

  struct Result {
    Status status = Status::Rejected;
    Reorg reorg;
    std::optional<Error> error;
  };

  explicit ChainState(ChainParams params) : view_(std::move(params)) {}

  const ChainView& view() const noexcept { return view_; }
  const ChainParams& params() const noexcept { return view_.params(); }

  Result submit(const MainBlock& block, const Validator& validate, const Listener& listener = {});
  /// Re-attempts every deferred block; returns how many got connected.
  std::size_t retry_deferred(const Validator& validate, const Listener& listener = {});
  const std::set<Hash256>& deferred() const noexcept { return deferred_; }

  /// Latest confirmed state of a tracked address, or nullopt if untracked.
  std::optional<SubchainState> confirmed(const Address& address) const;
  /// Seeds a tracked state without going through a block (cold start).
  void track(const SubchainState& state) { confirmed_[state.address] = state; }
  const std::unordered_map<Address, SubchainState>& tracked() const noexcept { return confirmed_; }

 private:
  struct Undo {
    Address address;
    std::optional<SubchainState> previous;
  };

  /// Moves the canonical tip to the best valid block, validating as it goes.
  /// Records the error raised by `watched` if it fails.
  void activate(const Validator& validate, const Listener& listener, Reorg& reorg, const Hash256& watched,
                std::optional<Error>& watched_error);
  void disconnect_tip(const Listener& listener, Reorg& reorg);

  ChainView view_;
  std::unordered_map<Address, SubchainState> confirmed_;
  std::unordered_map<Hash256, std::vector<Undo>> undo_;
  std::set<Hash256> deferred_;
};

}  // namespace wider
