#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wider {

enum class ErrorCode : std::uint8_t {
  // codec / crypto
  InvalidSeed,
  KeyMismatch,
  DecodeError,
  InvalidSignature,
  // subchain state transform
  BadLink,
  AddressMismatch,
  InsufficientBalance,
  DoubleClaim,
  UnconfirmedSend,
  AmountMismatch,
  WrongRecipient,
  FragmentMisaligned,
  ConfirmedFrozen,
  ConfirmAheadOfTip,
  // main chain
  MalformedBits,
  BadPoW,
  Oversize,
  UnsortedRecords,
  RootMismatch,
  StaleConfirmation,
  UnknownParent,
  TipMismatch,
  // sharding / network
  MaxDepth,
  ParentFull,
  NoHost,
  Timeout,
  // node
  PartialFetch,
  NotHosted,
  RangeUnavailable,
  DuplicateHashConflict,
  TailConflict,
  // miner
  PoolFull,
  // wallet
  Immature,
  AlreadyClaimed,
  // harness / io
  ConfigInvalid,
  InvariantViolation,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Protocol error. Carries a stable code so callers and tests can match on
/// the rejection reason rather than the message text; subchain errors are
/// optionally tagged with the offending address (hex) and height.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::optional<std::string>& address() const noexcept { return address_; }
  const std::optional<std::uint64_t>& height() const noexcept { return height_; }

  Error&& at_height(std::uint64_t h) &&;
  Error&& for_address(std::string hex) &&;

 private:
  void refresh_message();

  ErrorCode code_;
  std::string detail_;
  std::optional<std::string> address_;
  std::optional<std::uint64_t> height_;
};

}  // namespace wider
