#include "wider/wallet.hpp"

#include <sys/stat.h>

#include <fstream>

namespace wider {

namespace {

void check_key(const AccountView& view, const KeyPair& key) {
  if (key.address != view.address) throw Error(ErrorCode::KeyMismatch, "key does not own " + view.address.hex());
}

bool already_claimed(const SubchainState& s, const Inflow& in) {
  return in.is_coinbase() ? s.claimed_coinbases.contains(in.block) : s.claimed_sends.contains(in.send_hash);
}

void advance(AccountView& view, const SubchainTx& tx) {
  view.head.tip_hash = tx_hash_of(tx);
  view.head.tip_height = height_of(tx);
  view.pending.push_back(tx);
}

}  // namespace

std::uint64_t AccountView::mature_claimable() const noexcept {
  std::uint64_t total = 0;
  for (const auto& in : inflows) {
    if (in.depth >= maturity) total += in.amount;
  }
  return total;
}

AccountView make_account_view(const SubchainState& confirmed, const SubchainState& head,
                              std::vector<SubchainTx> pending, const std::vector<Inflow>& candidates,
                              const ChainView& chain) {
  AccountView v;
  v.address = head.address;
  v.head = head;
  v.confirmed_balance = confirmed.balance;
  v.pending = std::move(pending);
  v.maturity = chain.params().maturity;
  for (Inflow in : candidates) {
    if (already_claimed(head, in) || !chain.is_canonical(in.block)) continue;
    in.depth = chain.depth(in.block).value_or(0);
    v.inflows.push_back(in);
  }
  return v;
}

SendTx build_send(AccountView& view, const Address& recipient, std::uint64_t amount, const KeyPair& key,
                  std::uint64_t timestamp) {
  check_key(view, key);
  if (amount > view.head.balance) {
    throw Error(ErrorCode::InsufficientBalance,
                "send " + std::to_string(amount) + " with " + std::to_string(view.head.balance) + " spendable");
  }
  SendTx t;
  t.parent_hash = view.head.tip_hash;
  t.height = view.head.tip_height + 1;
  t.current_address = view.address;
  t.recipient_address = recipient;
  t.amount = amount;
  t.timestamp = timestamp;
  SendTx signed_tx = std::get<SendTx>(sign_tx(t, key));
  view.head.balance -= amount;
  advance(view, signed_tx);
  return signed_tx;
}

ReceiveTx build_claim(AccountView& view, const Inflow& inflow, const KeyPair& key, std::uint64_t timestamp) {
  check_key(view, key);
  if (already_claimed(view.head, inflow)) throw Error(ErrorCode::AlreadyClaimed, inflow.send_hash.hex());
  if (inflow.depth < view.maturity) {
    throw Error(ErrorCode::Immature, "depth " + std::to_string(inflow.depth) + " < " + std::to_string(view.maturity));
  }
  ReceiveTx t;
  t.parent_hash = view.head.tip_hash;
  t.height = view.head.tip_height + 1;
  t.current_address = view.address;
  t.sender_address = inflow.sender;
  t.sender_tx_hash = inflow.send_hash;
  t.main_block_hash = inflow.block;
  t.amount = inflow.amount;
  t.timestamp = timestamp;
  ReceiveTx signed_tx = std::get<ReceiveTx>(sign_tx(t, key));
  view.head.balance += inflow.amount;
  if (inflow.is_coinbase()) {
    view.head.claimed_coinbases.insert(inflow.block);
  } else {
    view.head.claimed_sends.insert(inflow.send_hash);
  }
  advance(view, signed_tx);
  return signed_tx;
}

std::vector<SubchainTx> batch_settle(AccountView& view, const std::vector<std::pair<Address, std::uint64_t>>& sends,
                                     const KeyPair& key, std::uint64_t timestamp) {
  check_key(view, key);
  std::uint64_t needed = 0;
  for (const auto& [to, amount] : sends) needed += amount;
  if (needed > view.spendable() + view.mature_claimable()) {
    throw Error(ErrorCode::InsufficientBalance, "batch needs " + std::to_string(needed));
  }
  AccountView work = view;
  std::vector<SubchainTx> out;
  std::vector<Inflow> left;
  for (const auto& in : work.inflows) {
    if (in.depth >= work.maturity) {
      out.push_back(build_claim(work, in, key, timestamp++));
    } else {
      left.push_back(in);
    }
  }
  work.inflows = std::move(left);
  for (const auto& [to, amount] : sends) out.push_back(build_send(work, to, amount, key, timestamp++));
  view = std::move(work);
  return out;
}

void write_key_file(const std::filesystem::path& path, const SecretKey& secret) {
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << to_hex(secret) << '\n';
  }
  ::chmod(path.c_str(), 0600);
}

KeyPair read_key_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string hex;
  if (!in || !(in >> hex)) throw Error(ErrorCode::Io, "cannot read " + path.string());
  Bytes raw = from_hex(hex);
  if (raw.size() != 32) throw Error(ErrorCode::InvalidSeed, "key file must hold 32 bytes");
  SecretKey secret{};
  std::copy(raw.begin(), raw.end(), secret.begin());
  return keygen(secret);
}

}  // namespace wider
