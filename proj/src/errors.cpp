#include "wider/errors.hpp"

#include <utility>

namespace wider {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidSeed: return "InvalidSeed";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::InvalidSignature: return "InvalidSignature";
    case ErrorCode::BadLink: return "BadLink";
    case ErrorCode::AddressMismatch: return "AddressMismatch";
    case ErrorCode::InsufficientBalance: return "InsufficientBalance";
    case ErrorCode::DoubleClaim: return "DoubleClaim";
    case ErrorCode::UnconfirmedSend: return "UnconfirmedSend";
    case ErrorCode::AmountMismatch: return "AmountMismatch";
    case ErrorCode::WrongRecipient: return "WrongRecipient";
    case ErrorCode::FragmentMisaligned: return "FragmentMisaligned";
    case ErrorCode::ConfirmedFrozen: return "ConfirmedFrozen";
    case ErrorCode::ConfirmAheadOfTip: return "ConfirmAheadOfTip";
    case ErrorCode::MalformedBits: return "MalformedBits";
    case ErrorCode::BadPoW: return "BadPoW";
    case ErrorCode::Oversize: return "Oversize";
    case ErrorCode::UnsortedRecords: return "UnsortedRecords";
    case ErrorCode::RootMismatch: return "RootMismatch";
    case ErrorCode::StaleConfirmation: return "StaleConfirmation";
    case ErrorCode::UnknownParent: return "UnknownParent";
    case ErrorCode::TipMismatch: return "TipMismatch";
    case ErrorCode::MaxDepth: return "MaxDepth";
    case ErrorCode::ParentFull: return "ParentFull";
    case ErrorCode::NoHost: return "NoHost";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::PartialFetch: return "PartialFetch";
    case ErrorCode::NotHosted: return "NotHosted";
    case ErrorCode::RangeUnavailable: return "RangeUnavailable";
    case ErrorCode::DuplicateHashConflict: return "DuplicateHashConflict";
    case ErrorCode::TailConflict: return "TailConflict";
    case ErrorCode::PoolFull: return "PoolFull";
    case ErrorCode::Immature: return "Immature";
    case ErrorCode::AlreadyClaimed: return "AlreadyClaimed";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code))), code_(code), detail_(detail) {
  refresh_message();
}

Error&& Error::at_height(std::uint64_t h) && {
  if (!height_) height_ = h;
  refresh_message();
  return std::move(*this);
}

Error&& Error::for_address(std::string hex) && {
  if (!address_) address_ = std::move(hex);
  refresh_message();
  return std::move(*this);
}

void Error::refresh_message() {
  std::string msg(to_string(code_));
  if (address_) msg += " [address " + *address_ + "]";
  if (height_) msg += " [height " + std::to_string(*height_) + "]";
  if (!detail_.empty()) msg += ": " + detail_;
  static_cast<std::runtime_error&>(*this) = std::runtime_error(msg);
}

}  // namespace wider
