#include "wider/subchain.hpp"

#include <limits>

namespace wider {

namespace {

void check_claim(const SubchainState& state, const ReceiveTx& rx, const ClaimContext& ctx) {
  if (rx.is_coinbase_claim()) {
    if (state.claimed_coinbases.contains(rx.main_block_hash)) {
      throw Error(ErrorCode::DoubleClaim, "coinbase of block " + rx.main_block_hash.hex() + " already claimed");
    }
    auto block = ctx.canonical_block(rx.main_block_hash);
    if (!block) throw Error(ErrorCode::UnconfirmedSend, "block not on the canonical chain");
    if (block->depth < ctx.maturity()) {
      throw Error(ErrorCode::UnconfirmedSend, "block depth " + std::to_string(block->depth) + " below maturity");
    }
    if (block->miner != state.address) throw Error(ErrorCode::WrongRecipient, "coinbase belongs to another miner");
    if (rx.amount != ctx.coinbase_amount(block->height)) {
      throw Error(ErrorCode::AmountMismatch, "coinbase subsidy mismatch");
    }
    return;
  }

  if (state.claimed_sends.contains(rx.sender_tx_hash)) {
    throw Error(ErrorCode::DoubleClaim, "send " + rx.sender_tx_hash.hex() + " already claimed");
  }
  auto block = ctx.canonical_block(rx.main_block_hash);
  if (!block) throw Error(ErrorCode::UnconfirmedSend, "block not on the canonical chain");
  if (block->depth < ctx.maturity()) {
    throw Error(ErrorCode::UnconfirmedSend, "block depth " + std::to_string(block->depth) + " below maturity");
  }
  auto send = ctx.find_send(rx.sender_address, rx.sender_tx_hash);
  if (!send || send->tx_hash != rx.sender_tx_hash || send->current_address != rx.sender_address ||
      !ctx.check_signature(*send)) {
    throw Error(ErrorCode::UnconfirmedSend, "referenced send unavailable");
  }
  auto confirmed = ctx.confirmed_tip(rx.main_block_hash, rx.sender_address);
  if (!confirmed || *confirmed < send->height) {
    throw Error(ErrorCode::UnconfirmedSend, "block does not confirm the send");
  }
  if (send->recipient_address != state.address) {
    throw Error(ErrorCode::WrongRecipient, "send pays " + send->recipient_address.hex());
  }
  if (send->amount != rx.amount) throw Error(ErrorCode::AmountMismatch, "claim must equal the send amount");
}

}  // namespace

void apply_tx_in_place(SubchainState& state, const SubchainTx& tx, const ClaimContext& ctx) {
  if (address_of(tx) != state.address) {
    throw Error(ErrorCode::AddressMismatch, "tx belongs to " + address_of(tx).hex());
  }
  if (height_of(tx) != state.tip_height + 1 || parent_of(tx) != state.tip_hash) {
    throw Error(ErrorCode::BadLink, "expected height " + std::to_string(state.tip_height + 1) +
                                        " on parent " + state.tip_hash.hex());
  }
  if (amount_of(tx) == 0) throw Error(ErrorCode::AmountMismatch, "zero amount");
  if (!ctx.check_signature(tx)) throw Error(ErrorCode::InvalidSignature);

  if (const auto* send = std::get_if<SendTx>(&tx)) {
    if (send->amount > state.balance) {
      throw Error(ErrorCode::InsufficientBalance,
                  std::to_string(send->amount) + " > " + std::to_string(state.balance));
    }
    state.balance -= send->amount;
  } else {
    const auto& rx = std::get<ReceiveTx>(tx);
    check_claim(state, rx, ctx);
    if (rx.amount > std::numeric_limits<std::uint64_t>::max() - state.balance) {
      throw Error(ErrorCode::InvariantViolation, "balance overflow");
    }
    state.balance += rx.amount;
    if (rx.is_coinbase_claim()) {
      state.claimed_coinbases.insert(rx.main_block_hash);
    } else {
      state.claimed_sends.insert(rx.sender_tx_hash);
    }
  }
  state.tip_hash = tx_hash_of(tx);
  state.tip_height += 1;
}

SubchainState apply_tx(SubchainState state, const SubchainTx& tx, const ClaimContext& ctx) {
  apply_tx_in_place(state, tx, ctx);
  return state;
}

SubchainState replay(const Address& address, std::span<const SubchainTx> txs, const ClaimContext& ctx) {
  SubchainState state = SubchainState::genesis(address, ctx.genesis_allocation(address));
  for (const auto& tx : txs) {
    try {
      apply_tx_in_place(state, tx, ctx);
    } catch (Error& e) {
      throw std::move(e).at_height(height_of(tx));
    }
  }
  return state;
}

SubchainState verify_fragment(SubchainState state, const SubchainFragment& frag, const ClaimContext& ctx) {
  if (frag.address != state.address) throw Error(ErrorCode::FragmentMisaligned, "fragment for another address");
  if (frag.from_height != state.tip_height) {
    throw Error(ErrorCode::FragmentMisaligned, "fragment starts after height " + std::to_string(frag.from_height) +
                                                   ", tip is " + std::to_string(state.tip_height));
  }
  if (!frag.txs.empty() && parent_of(frag.txs.front()) != state.tip_hash) {
    throw Error(ErrorCode::FragmentMisaligned, "fragment does not link to the tip");
  }
  for (const auto& tx : frag.txs) {
    try {
      apply_tx_in_place(state, tx, ctx);
    } catch (Error& e) {
      throw std::move(e).at_height(height_of(tx));
    }
  }
  return state;
}

SubchainState try_replace_tail(const SubchainState& base, std::span<const SubchainTx> tail,
                               std::uint64_t fork_height, const SubchainFragment& new_tail,
                               const ClaimContext& ctx) {
  if (fork_height < base.confirmed_height) {
    throw Error(ErrorCode::ConfirmedFrozen, "fork at " + std::to_string(fork_height) + " below confirmed height " +
                                                std::to_string(base.confirmed_height));
  }
  if (fork_height < base.tip_height || fork_height > base.tip_height + tail.size() ||
      new_tail.from_height != fork_height) {
    throw Error(ErrorCode::FragmentMisaligned, "fork height outside the known tail");
  }
  SubchainFragment retained{base.address, base.tip_height,
                            {tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(fork_height - base.tip_height)}};
  SubchainState state = verify_fragment(base, retained, ctx);
  return verify_fragment(std::move(state), new_tail, ctx);
}

SubchainState mark_confirmed(SubchainState state, std::uint64_t height) {
  if (height > state.tip_height) {
    throw Error(ErrorCode::ConfirmAheadOfTip,
                std::to_string(height) + " > tip " + std::to_string(state.tip_height));
  }
  state.confirmed_height = std::max(state.confirmed_height, height);
  return state;
}

void check_fragment_links(const SubchainFragment& frag) {
  std::uint64_t expected = frag.from_height + 1;
  const Hash256* prev = nullptr;
  for (const auto& tx : frag.txs) {
    if (address_of(tx) != frag.address) throw Error(ErrorCode::FragmentMisaligned, "foreign tx in fragment");
    if (height_of(tx) != expected) {
      throw Error(ErrorCode::BadLink, "height gap").at_height(height_of(tx));
    }
    if (prev && parent_of(tx) != *prev) throw Error(ErrorCode::BadLink, "parent link broken").at_height(expected);
    prev = &tx_hash_of(tx);
    ++expected;
  }
}

void encode_fragment(const SubchainFragment& frag, ByteWriter& w) {
  w.fixed(frag.address);
  w.u64(frag.from_height);
  w.u32(static_cast<std::uint32_t>(frag.txs.size()));
  for (const auto& tx : frag.txs) encode_tx(tx, w);
}

Bytes encode_fragment(const SubchainFragment& frag) {
  ByteWriter w;
  encode_fragment(frag, w);
  return std::move(w).take();
}

SubchainFragment decode_fragment(ByteReader& r) {
  SubchainFragment frag;
  frag.address = r.fixed<Address>();
  frag.from_height = r.u64();
  std::uint32_t count = r.u32();
  // each tx is at least kSendEncodedSize bytes; reject counts the input cannot hold
  if (count > r.remaining() / kSendEncodedSize) throw Error(ErrorCode::DecodeError, "fragment count too large");
  frag.txs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) frag.txs.push_back(decode_tx(r));
  return frag;
}

SubchainFragment decode_fragment(ByteView bytes) {
  ByteReader r(bytes);
  SubchainFragment frag = decode_fragment(r);
  r.expect_done();
  return frag;
}

}  // namespace wider
