#include "wider/store.hpp"

#include <unistd.h>

#include <fstream>
#include <iterator>

#include "wider/crypto.hpp"

namespace wider {

namespace {

constexpr std::size_t kChecksumSize = 4;

std::filesystem::path log_path(const std::filesystem::path& dir) { return dir / "store.log"; }

bool valid_keyspace(std::uint8_t k) { return k >= 1 && k <= kKeyspaceCount; }

WriteBatch decode_batch(ByteView body) {
  ByteReader r(body);
  WriteBatch b;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t op = r.u8();
    const std::uint8_t ks = r.u8();
    if (op > 1 || !valid_keyspace(ks)) throw Error(ErrorCode::DecodeError, "bad log op");
    ByteView key = r.raw(r.u32());
    ByteView value = r.raw(r.u32());
    if (op == 1) {
      b.erase(static_cast<Keyspace>(ks), Bytes(key.begin(), key.end()));
    } else {
      b.put(static_cast<Keyspace>(ks), Bytes(key.begin(), key.end()), Bytes(value.begin(), value.end()));
    }
  }
  r.expect_done();
  return b;
}

void write_all(std::FILE* f, const Bytes& data) {
  if (std::fwrite(data.data(), 1, data.size(), f) != data.size() || std::fflush(f) != 0) {
    throw Error(ErrorCode::Io, "store log write failed");
  }
  ::fsync(::fileno(f));
}

}  // namespace

Bytes NodeStore::encode_batch(const WriteBatch& batch) {
  ByteWriter body;
  body.u32(static_cast<std::uint32_t>(batch.size()));
  for (const auto& op : batch.ops()) {
    body.u8(op.erase ? 1 : 0);
    body.u8(static_cast<std::uint8_t>(op.space));
    body.u32(static_cast<std::uint32_t>(op.key.size()));
    body.raw(op.key);
    body.u32(static_cast<std::uint32_t>(op.value.size()));
    body.raw(op.value);
  }
  ByteWriter rec(4 + body.size() + kChecksumSize);
  rec.u32(static_cast<std::uint32_t>(body.size()));
  rec.raw(body.bytes());
  Hash256 sum = sha256(body.bytes());
  rec.raw(ByteView(sum.bytes).first(kChecksumSize));
  return std::move(rec).take();
}

NodeStore NodeStore::open(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  NodeStore store;
  store.dir_ = dir;
  const auto path = log_path(dir);

  Bytes data;
  if (std::ifstream in(path, std::ios::binary); in) {
    data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::size_t good = 0;
  while (data.size() - good >= 4) {
    const std::size_t len = (std::size_t{data[good]} << 24) | (std::size_t{data[good + 1]} << 16) |
                            (std::size_t{data[good + 2]} << 8) | data[good + 3];
    if (data.size() - good - 4 < len + kChecksumSize) break;
    ByteView body = ByteView(data).subspan(good + 4, len);
    Hash256 sum = sha256(body);
    if (!std::equal(sum.bytes.begin(), sum.bytes.begin() + kChecksumSize, data.begin() + good + 4 + len)) break;
    try {
      store.apply_in_memory(decode_batch(body));
    } catch (const Error&) {
      break;
    }
    good += 4 + len + kChecksumSize;
  }
  if (good != data.size()) std::filesystem::resize_file(path, good);

  store.file_ = std::fopen(path.c_str(), "ab");
  if (!store.file_) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return store;
}

NodeStore::NodeStore(NodeStore&& other) noexcept
    : maps_(std::move(other.maps_)), bytes_(other.bytes_), dir_(std::move(other.dir_)),
      file_(std::exchange(other.file_, nullptr)) {}

NodeStore& NodeStore::operator=(NodeStore&& other) noexcept {
  if (this != &other) {
    close();
    maps_ = std::move(other.maps_);
    bytes_ = other.bytes_;
    dir_ = std::move(other.dir_);
    file_ = std::exchange(other.file_, nullptr);
  }
  return *this;
}

NodeStore::~NodeStore() { close(); }

void NodeStore::close() noexcept {
  if (file_) std::fclose(file_);
  file_ = nullptr;
}

void NodeStore::apply_in_memory(const WriteBatch& batch) {
  for (const auto& op : batch.ops()) {
    auto& m = maps_[index(op.space)];
    auto& total = bytes_[index(op.space)];
    auto it = m.find(op.key);
    if (it != m.end()) {
      total -= it->second.size();
      if (op.erase) {
        m.erase(it);
      } else {
        it->second = op.value;
        total += op.value.size();
      }
    } else if (!op.erase) {
      m.emplace(op.key, op.value);
      total += op.value.size();
    }
  }
}

void NodeStore::apply(const WriteBatch& batch) {
  if (batch.empty()) return;
  if (file_) write_all(file_, encode_batch(batch));
  apply_in_memory(batch);
}

std::optional<Bytes> NodeStore::get(Keyspace space, ByteView key) const {
  const auto& m = maps_[index(space)];
  auto it = m.find(Bytes(key.begin(), key.end()));
  if (it == m.end()) return std::nullopt;
  return it->second;
}

bool NodeStore::contains(Keyspace space, ByteView key) const {
  return maps_[index(space)].contains(Bytes(key.begin(), key.end()));
}

void NodeStore::scan(Keyspace space, ByteView prefix,
                     const std::function<void(ByteView key, ByteView value)>& fn) const {
  const auto& m = maps_[index(space)];
  for (auto it = m.lower_bound(Bytes(prefix.begin(), prefix.end())); it != m.end(); ++it) {
    if (it->first.size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), it->first.begin())) break;
    fn(it->first, it->second);
  }
}

void NodeStore::compact() {
  if (!dir_) return;
  const auto path = log_path(*dir_);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::FILE* out = std::fopen(tmp.c_str(), "wb");
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    for (std::size_t k = 0; k < kKeyspaceCount; ++k) {
      WriteBatch b;
      for (const auto& [key, value] : maps_[k]) b.put(static_cast<Keyspace>(k + 1), key, value);
      if (!b.empty()) write_all(out, encode_batch(b));
    }
    std::fclose(out);
  }
  close();
  std::filesystem::rename(tmp, path);
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw Error(ErrorCode::Io, "cannot reopen " + path.string());
}

}  // namespace wider
