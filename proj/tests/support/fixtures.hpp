#pragma once

// Test-only ledger scaffolding: an in-memory ClaimContext whose answers are
// set directly by the test, plus an account helper that builds signed,
// correctly linked subchains.

#include <map>
#include <random>
#include <vector>

#include "wider/subchain.hpp"

namespace wider::testing {

inline SecretKey seed_for(std::uint64_t n) {
  SecretKey s{};
  s[0] = 0x01;  // keeps the scalar well below the curve order
  for (int i = 0; i < 8; ++i) s[31 - i] = static_cast<std::uint8_t>(n >> (8 * i));
  return s;
}

/// Hand-driven main-chain snapshot.
class FakeChain : public ClaimContext {
 public:
  struct Block {
    std::uint64_t height = 0;
    Address miner;
    std::map<Address, std::uint64_t> confirms;
  };

  std::uint64_t maturity_depth = 6;
  std::uint64_t subsidy = 50ULL * 100'000'000ULL;
  std::uint64_t tip_height = 0;
  std::map<Hash256, Block> blocks;
  std::map<Hash256, SendTx> sends;
  std::map<Address, std::uint64_t> allocations;

  /// Adds a canonical block at `height` and returns its (synthetic) hash.
  Hash256 add_block(std::uint64_t height, std::map<Address, std::uint64_t> confirms = {}, Address miner = {}) {
    Hash256 h;
    for (int i = 0; i < 8; ++i) h[i] = static_cast<std::uint8_t>(height >> (8 * (7 - i)));
    h[8] = static_cast<std::uint8_t>(blocks.size());
    h[31] = 0xb1;
    blocks[h] = Block{height, miner, std::move(confirms)};
    tip_height = std::max(tip_height, height);
    return h;
  }
  void publish(const SendTx& send) { sends[send.tx_hash] = send; }

  std::uint64_t maturity() const override { return maturity_depth; }
  std::optional<BlockRef> canonical_block(const Hash256& block) const override {
    auto it = blocks.find(block);
    if (it == blocks.end()) return std::nullopt;
    return BlockRef{it->second.height, tip_height - it->second.height + 1, it->second.miner};
  }
  std::optional<std::uint64_t> confirmed_tip(const Hash256& block, const Address& address) const override {
    auto it = blocks.find(block);
    if (it == blocks.end()) return std::nullopt;
    auto c = it->second.confirms.find(address);
    if (c == it->second.confirms.end()) return std::nullopt;
    return c->second;
  }
  std::optional<SendTx> find_send(const Address& sender, const Hash256& tx_hash) const override {
    auto it = sends.find(tx_hash);
    if (it == sends.end() || it->second.current_address != sender) return std::nullopt;
    return it->second;
  }
  std::uint64_t coinbase_amount(std::uint64_t height) const override { return height == 0 ? 0 : subsidy; }
  std::uint64_t genesis_allocation(const Address& address) const override {
    auto it = allocations.find(address);
    return it == allocations.end() ? 0 : it->second;
  }
};

/// Owner-side chain builder: signs and links transactions without checking
/// balances, so tests can construct invalid chains on purpose.
struct Account {
  KeyPair key;
  std::vector<SubchainTx> txs;
  std::uint64_t clock = 1'700'000'000;

  explicit Account(std::uint64_t n) : key(keygen(seed_for(n))) {}

  const Address& address() const { return key.address; }
  Hash256 tip() const { return txs.empty() ? Hash256{} : tx_hash_of(txs.back()); }
  std::uint64_t height() const { return txs.size(); }

  SendTx send(const Address& to, std::uint64_t amount) {
    SendTx t;
    t.parent_hash = tip();
    t.height = height() + 1;
    t.current_address = address();
    t.recipient_address = to;
    t.amount = amount;
    t.timestamp = clock++;
    auto signed_tx = std::get<SendTx>(sign_tx(t, key));
    txs.push_back(signed_tx);
    return signed_tx;
  }

  ReceiveTx claim(const SendTx& from, const Hash256& block) { return claim_raw(from.current_address, from.tx_hash, block, from.amount); }

  ReceiveTx claim_coinbase(const Hash256& block, std::uint64_t amount) { return claim_raw({}, {}, block, amount); }

  ReceiveTx claim_raw(const Address& sender, const Hash256& send_hash, const Hash256& block, std::uint64_t amount) {
    ReceiveTx t;
    t.parent_hash = tip();
    t.height = height() + 1;
    t.current_address = address();
    t.sender_address = sender;
    t.sender_tx_hash = send_hash;
    t.main_block_hash = block;
    t.amount = amount;
    t.timestamp = clock++;
    auto signed_tx = std::get<ReceiveTx>(sign_tx(t, key));
    txs.push_back(signed_tx);
    return signed_tx;
  }
};

/// Builds a random valid subchain of `length` txs for `owner`, mixing sends,
/// claims of confirmed sends from helper accounts, and coinbase claims. Every
/// referenced block is registered in `chain` at mature depth.
inline void grow_random_chain(Account& owner, std::size_t length, FakeChain& chain, std::mt19937_64& rng,
                              std::vector<Account>& helpers) {
  std::uint64_t balance = chain.genesis_allocation(owner.address());
  std::uint64_t next_height = chain.tip_height + 1;
  while (owner.height() < length) {
    const auto roll = rng() % 10;
    if (roll < 5 && balance > 0) {
      std::uint64_t amount = 1 + rng() % std::max<std::uint64_t>(1, balance / 3);
      owner.send(helpers[rng() % helpers.size()].address(), amount);
      balance -= amount;
    } else if (roll < 9) {
      Account& payer = helpers[rng() % helpers.size()];
      SendTx s = payer.send(owner.address(), 1 + rng() % 1000);
      chain.publish(s);
      Hash256 b = chain.add_block(next_height++, {{payer.address(), payer.height()}});
      owner.claim(s, b);
      balance += s.amount;
    } else {
      Hash256 b = chain.add_block(next_height++, {}, owner.address());
      owner.claim_coinbase(b, chain.subsidy);
      balance += chain.subsidy;
    }
  }
  // bury every referenced block under the maturity depth
  chain.tip_height = next_height + chain.maturity_depth;
}

}  // namespace wider::testing
