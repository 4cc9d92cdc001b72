#include "service.hpp"

#include <httplib.h>

#include <chrono>
#include <mutex>
#include <thread>

namespace wider::service {

namespace {

const char* kBinary = "application/octet-stream";

std::string_view status_name(ChainState::Status s) {
  switch (s) {
    case ChainState::Status::Connected: return "connected";
    case ChainState::Status::Duplicate: return "duplicate";
    case ChainState::Status::SideBranch: return "side-branch";
    case ChainState::Status::Deferred: return "deferred";
    case ChainState::Status::Rejected: return "rejected";
  }
  return "unknown";
}

void fail(httplib::Response& res, int status, const std::string& code, const std::string& detail = {}) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", code}, {"detail", detail}}.dump(), "application/json");
}

void fail(httplib::Response& res, const Error& e) {
  const int status = e.code() == ErrorCode::NotHosted || e.code() == ErrorCode::RangeUnavailable ? 404 : 400;
  fail(res, status, std::string(to_string(e.code())), e.detail());
}

std::uint64_t query_u64(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) throw Error(ErrorCode::ConfigInvalid, std::string("missing ") + key);
  try {
    return std::stoull(req.get_param_value(key));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigInvalid, std::string("bad ") + key);
  }
}

Address query_address(const httplib::Request& req) {
  if (!req.has_param("address")) throw Error(ErrorCode::ConfigInvalid, "missing address");
  return Address::from_hex(req.get_param_value("address"));
}

Bytes body_bytes(const std::string& body) { return Bytes(body.begin(), body.end()); }

nlohmann::ordered_json state_json(const SubchainState& s) {
  return {{"tip_hash", s.tip_hash.hex()},
          {"tip_height", s.tip_height},
          {"balance", s.balance},
          {"confirmed_height", s.confirmed_height},
          {"claimed_sends", s.claimed_sends.size()},
          {"claimed_coinbases", s.claimed_coinbases.size()}};
}

}  // namespace

nlohmann::ordered_json params_to_json(const ChainParams& p) {
  nlohmann::ordered_json allocations = nlohmann::ordered_json::array();
  for (const auto& [a, v] : p.allocations) allocations.push_back({a.hex(), v});
  return {{"difficulty_bits", p.difficulty_bits}, {"block_size_limit", p.block_size_limit},
          {"subsidy", p.subsidy},                 {"maturity", p.maturity},
          {"genesis_timestamp", p.genesis_timestamp}, {"allocations", allocations}};
}

ChainParams params_from_json(const nlohmann::json& j) {
  ChainParams p;
  p.difficulty_bits = j.at("difficulty_bits").get<std::uint32_t>();
  p.block_size_limit = j.at("block_size_limit").get<std::size_t>();
  p.subsidy = j.at("subsidy").get<std::uint64_t>();
  p.maturity = j.at("maturity").get<std::uint64_t>();
  p.genesis_timestamp = j.at("genesis_timestamp").get<std::uint64_t>();
  for (const auto& a : j.at("allocations")) {
    p.allocations.emplace_back(Address::from_hex(a.at(0).get<std::string>()), a.at(1).get<std::uint64_t>());
  }
  return p;
}

struct NodeService::Impl {
  NodeServiceConfig config;
  std::mutex mutex;
  Node node;
  std::vector<Bytes> tx_log;
  httplib::Server server;
  std::thread thread;
  std::jthread syncer;

  explicit Impl(NodeServiceConfig c)
      : config(std::move(c)), node(Node::open(config.params, config.prefix, config.data_dir)) {
    routes();
  }

  void relay(const std::string& path, const std::string& body) {
    if (!config.parent) return;
    httplib::Client parent(*config.parent);
    parent.set_connection_timeout(2);
    parent.Post(path, body, kBinary);  // best effort
  }

  void pull_parent_blocks(std::stop_token stop) {
    httplib::Client parent(*config.parent);
    parent.set_connection_timeout(2);
    while (!stop.stop_requested()) {
      for (;;) {
        std::uint64_t next = 0;
        {
          std::scoped_lock lock(mutex);
          next = node.view().tip_height() + 1;
        }
        auto res = parent.Get("/block?height=" + std::to_string(next));
        if (!res || res->status != 200) break;
        try {
          const MainBlock block = decode_block(body_bytes(res->body));
          std::scoped_lock lock(mutex);
          if (node.ingest_block(block).status != ChainState::Status::Connected) break;
        } catch (const Error&) {
          break;
        }
      }
      const auto until = std::chrono::steady_clock::now() + config.sync_interval;
      while (!stop.stop_requested() && std::chrono::steady_clock::now() < until) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
    }
  }

  void routes() {
    server.Get("/params", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(params_to_json(config.params).dump(), "application/json");
    });
    server.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      std::scoped_lock lock(mutex);
      const StorageReport s = node.storage_report();
      nlohmann::ordered_json j{{"tip", node.view().tip().hex()},
                               {"height", node.view().tip_height()},
                               {"prefix", node.assignment().to_string()},
                               {"txs_logged", tx_log.size()},
                               {"storage",
                                {{"main_chain_bytes", s.main_chain_bytes},
                                 {"subchain_bytes", s.subchain_bytes},
                                 {"blocks", s.blocks},
                                 {"subchains", s.subchains},
                                 {"subchain_txs", s.subchain_txs}}}};
      res.set_content(j.dump(), "application/json");
    });
    server.Get("/block", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const std::uint64_t h = query_u64(req, "height");
        std::scoped_lock lock(mutex);
        const auto& chain = node.view().canonical_chain();
        if (h >= chain.size()) return fail(res, 404, "RangeUnavailable");
        const Bytes out = encode_block(*node.view().find(chain[h]));
        res.set_content(std::string(out.begin(), out.end()), kBinary);
      } catch (const Error& e) {
        fail(res, e);
      }
    });
    server.Get("/txs", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const std::uint64_t since = req.has_param("since") ? query_u64(req, "since") : 0;
        std::scoped_lock lock(mutex);
        ByteWriter w;
        for (std::size_t i = since; i < tx_log.size(); ++i) {
          w.u32(static_cast<std::uint32_t>(tx_log[i].size()));
          w.raw(tx_log[i]);
        }
        res.set_header("X-Next", std::to_string(tx_log.size()));
        const Bytes out = std::move(w).take();
        res.set_content(std::string(out.begin(), out.end()), kBinary);
      } catch (const Error& e) {
        fail(res, e);
      }
    });
    server.Get("/fragment", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const Address a = query_address(req);
        std::scoped_lock lock(mutex);
        const Bytes out = encode_fragment(node.serve_fragment(a, query_u64(req, "from"), query_u64(req, "to")));
        res.set_content(std::string(out.begin(), out.end()), kBinary);
      } catch (const Error& e) {
        fail(res, e);
      }
    });
    server.Get("/account", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const Address a = query_address(req);
        std::scoped_lock lock(mutex);
        auto confirmed = node.confirmed_state(a);
        if (!confirmed) throw Error(ErrorCode::NotHosted, a.hex());
        nlohmann::ordered_json j{{"address", a.hex()},
                                 {"confirmed", state_json(*confirmed)},
                                 {"head", state_json(*node.head_state(a))}};
        res.set_content(j.dump(), "application/json");
      } catch (const Error& e) {
        fail(res, e);
      }
    });
    server.Post("/tx", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const SubchainFragment frag = decode_fragment(body_bytes(req.body));
        std::size_t added = 0;
        {
          std::scoped_lock lock(mutex);
          added = node.accept_fragment(frag);
          tx_log.push_back(body_bytes(req.body));
        }
        relay("/tx", req.body);
        res.set_content(nlohmann::json{{"accepted", added}}.dump(), "application/json");
      } catch (const Error& e) {
        fail(res, e);
      }
    });
    server.Post("/block", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const MainBlock block = decode_block(body_bytes(req.body));
        ChainState::Result r;
        {
          std::scoped_lock lock(mutex);
          r = node.ingest_block(block);
          node.retry_deferred();
        }
        nlohmann::json j{{"status", status_name(r.status)}};
        if (r.error) j["error"] = to_string(r.error->code());
        if (r.status == ChainState::Status::Rejected) res.status = 400;
        if (r.status == ChainState::Status::Connected || r.status == ChainState::Status::SideBranch) {
          relay("/block", req.body);
        }
        res.set_content(j.dump(), "application/json");
      } catch (const Error& e) {
        fail(res, e);
      }
    });
  }
};

NodeService::NodeService(NodeServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

NodeService::~NodeService() { stop(); }

int NodeService::start() {
  auto& s = impl_->server;
  int port = impl_->config.port;
  if (port == 0) {
    port = s.bind_to_any_port(impl_->config.host);
  } else if (!s.bind_to_port(impl_->config.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error(ErrorCode::Io, "cannot listen on " + impl_->config.host);
  impl_->thread = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  if (impl_->config.parent) {
    impl_->syncer = std::jthread([this](std::stop_token stop) { impl_->pull_parent_blocks(stop); });
  }
  return port;
}

void NodeService::stop() {
  if (!impl_) return;
  if (impl_->syncer.joinable()) {
    impl_->syncer.request_stop();
    impl_->syncer.join();
  }
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

Node& NodeService::node() { return impl_->node; }

std::uint64_t run_miner(const MinerServiceConfig& config, const std::atomic<bool>& stop,
                        std::optional<std::uint64_t> max_blocks) {
  httplib::Client client(config.node_url);
  client.set_connection_timeout(5);
  auto params = client.Get("/params");
  if (!params || params->status != 200) throw Error(ErrorCode::Io, "cannot reach " + config.node_url);
  Miner miner(params_from_json(nlohmann::json::parse(params->body)), config.miner);

  std::uint64_t since = 0;
  std::uint64_t posted = 0;
  while (!stop.load() && (!max_blocks || posted < *max_blocks)) {
    for (std::uint64_t h = miner.node().view().tip_height() + 1;; ++h) {
      auto res = client.Get("/block?height=" + std::to_string(h));
      if (!res || res->status != 200) break;
      miner.ingest(decode_block(body_bytes(res->body)));
    }
    if (auto res = client.Get("/txs?since=" + std::to_string(since)); res && res->status == 200) {
      const Bytes log = body_bytes(res->body);
      ByteReader r(log);
      while (!r.done()) {
        const ByteView frag = r.raw(r.u32());
        try {
          miner.submit(decode_fragment(frag));
        } catch (const Error&) {
          // already confirmed or superseded
        }
      }
      since = std::stoull(res->get_header_value("X-Next"));
    }

    std::stop_source round;
    std::jthread timer([&round, &stop, limit = config.round](std::stop_token self) {
      const auto until = std::chrono::steady_clock::now() + limit;
      while (!self.stop_requested() && !stop.load() && std::chrono::steady_clock::now() < until) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      round.request_stop();
    });
    const auto now = std::chrono::duration_cast<std::chrono::seconds>(
        std::chrono::system_clock::now().time_since_epoch());
    auto block = miner.mine_once(static_cast<std::uint64_t>(now.count()), round.get_token());
    timer.request_stop();
    if (!block) continue;
    const Bytes enc = encode_block(*block);
    auto res = client.Post("/block", std::string(enc.begin(), enc.end()), kBinary);
    if (res && res->status == 200) ++posted;
  }
  return posted;
}

}  // namespace wider::service
