#include "wider/transport.hpp"

namespace wider {

const char* to_string(MessageKind kind) noexcept {
  switch (kind) {
    case MessageKind::NewTx: return "NewTx";
    case MessageKind::NewBlock: return "NewBlock";
    case MessageKind::FragmentRequest: return "FragmentRequest";
    case MessageKind::FragmentResponse: return "FragmentResponse";
    case MessageKind::Hello: return "Hello";
  }
  return "?";
}

namespace {

bool known_kind(std::uint8_t k) { return k >= 1 && k <= 5; }

}  // namespace

Hash256 Envelope::id_of(MessageKind kind, ByteView payload) {
  Bytes buf;
  buf.reserve(1 + payload.size());
  buf.push_back(static_cast<std::uint8_t>(kind));
  buf.insert(buf.end(), payload.begin(), payload.end());
  return sha256(buf);
}

Envelope Envelope::make(MessageKind kind, Bytes payload) {
  Envelope e;
  e.kind = kind;
  e.msg_id = id_of(kind, payload);
  e.payload = std::move(payload);
  return e;
}

Bytes frame(const Envelope& env) {
  ByteWriter w(4 + 1 + 32 + env.payload.size());
  w.u32(static_cast<std::uint32_t>(1 + 32 + env.payload.size()));
  w.u8(static_cast<std::uint8_t>(env.kind));
  w.fixed(env.msg_id);
  w.raw(env.payload);
  return std::move(w).take();
}

Envelope unframe(ByteView bytes) {
  ByteReader r(bytes);
  const std::uint32_t len = r.u32();
  if (len < 33 || len != r.remaining()) throw Error(ErrorCode::DecodeError, "frame length mismatch");
  const std::uint8_t kind = r.u8();
  if (!known_kind(kind)) throw Error(ErrorCode::DecodeError, "unknown message kind");
  Envelope e;
  e.kind = static_cast<MessageKind>(kind);
  e.msg_id = r.fixed<Hash256>();
  ByteView payload = r.raw(r.remaining());
  e.payload.assign(payload.begin(), payload.end());
  if (!e.id_valid()) throw Error(ErrorCode::DecodeError, "msg_id does not match payload");
  return e;
}

std::optional<Envelope> FrameDecoder::next() {
  if (buf_.size() < 4) return std::nullopt;
  const std::uint32_t len = (std::uint32_t{buf_[0]} << 24) | (std::uint32_t{buf_[1]} << 16) |
                            (std::uint32_t{buf_[2]} << 8) | buf_[3];
  if (len > kMaxFrame) throw Error(ErrorCode::DecodeError, "frame too large");
  if (buf_.size() < 4 + std::size_t{len}) return std::nullopt;
  Envelope e = unframe(ByteView(buf_).first(4 + len));
  buf_.erase(buf_.begin(), buf_.begin() + 4 + len);
  return e;
}

SimTransport::SimTransport(std::uint64_t seed, LatencyConfig latency) : rng_(seed), latency_(latency) {
  if (latency_.min_ms > latency_.max_ms) throw Error(ErrorCode::ConfigInvalid, "latency min above max");
}

void SimTransport::set_handler(NodeId endpoint, Handler handler) {
  handlers_[endpoint] = std::move(handler);
  alive_.try_emplace(endpoint, true);
}

void SimTransport::set_alive(NodeId endpoint, bool alive) { alive_[endpoint] = alive; }

bool SimTransport::alive(NodeId endpoint) const {
  auto it = alive_.find(endpoint);
  return it == alive_.end() || it->second;
}

void SimTransport::send(NodeId from, NodeId to, Envelope env) {
  std::uniform_int_distribution<std::uint64_t> dist(latency_.min_ms * 1000, latency_.max_ms * 1000);
  const Micros at = now_ + dist(rng_);
  Event e;
  e.from = from;
  e.to = to;
  e.env = std::move(env);
  queue_.emplace(std::pair{at, seq_++}, std::move(e));
}

void SimTransport::schedule(Micros at, std::function<void()> fn) {
  Event e;
  e.timer = std::move(fn);
  queue_.emplace(std::pair{std::max(at, now_), seq_++}, std::move(e));
}

void SimTransport::fire(Event& e) {
  if (e.timer) {
    e.timer();
    return;
  }
  const bool ok = alive(e.to) && handlers_.contains(e.to);
  if (tracing_) {
    ByteWriter w(8 + 8 + 8 + 1 + 32 + 2 + 1);
    w.u64(now_);
    w.u64(e.from);
    w.u64(e.to);
    w.u8(static_cast<std::uint8_t>(e.env->kind));
    w.fixed(e.env->msg_id);
    w.u16(e.env->hop_count);
    w.u8(ok ? 1 : 0);
    trace_.insert(trace_.end(), w.bytes().begin(), w.bytes().end());
  }
  if (!ok) {
    ++dropped_;
    return;
  }
  ++delivered_;
  // copy the handler: it may replace itself while running
  Handler h = handlers_.at(e.to);
  h(e.from, *e.env);
}

bool SimTransport::step() {
  if (queue_.empty()) return false;
  auto node = queue_.extract(queue_.begin());
  now_ = node.key().first;
  fire(node.mapped());
  return true;
}

void SimTransport::run() {
  while (step()) {
  }
}

void SimTransport::run_until(Micros until) {
  while (!queue_.empty() && queue_.begin()->first.first <= until) step();
  now_ = std::max(now_, until);
}

}  // namespace wider
