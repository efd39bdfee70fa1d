// Copyright 2026 The InnerSelf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "innerself/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include <openssl/evp.h>
#include <zlib.h>

#include "innerself/error.hpp"
#include "innerself/utf8.hpp"

namespace innerself {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kChunkMagic = "ISCH";

[[noreturn]] void io_failure(const std::string& what, const fs::path& path) {
  throw Error(ErrorCode::kStoreUnavailable, what + " " + path.string() + ": " + std::strerror(errno),
              {{"path", path.string()}});
}

void write_all(int fd, std::string_view bytes, const fs::path& path) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      io_failure("write failed for", path);
    }
    done += static_cast<std::size_t>(n);
  }
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) io_failure("cannot create", tmp);
  write_all(fd, bytes, tmp);
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_failure("fsync failed for", tmp);
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) io_failure("rename failed for", path);
  fsync_dir(path.parent_path());
}

std::optional<std::string> read_if_exists(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kStoreUnavailable, "cannot create " + dir.string() + ": " + ec.message());
  }
}

void check_session_id(const std::string& id) {
  static const std::regex kPattern("[A-Za-z0-9_-]{1,64}");
  if (!std::regex_match(id, kPattern)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid session id", {{"session_id", id}});
  }
}

bool is_sha256_hex(std::string_view s) {
  return s.size() == 64 &&
         std::all_of(s.begin(), s.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

struct LineSpan {
  std::uint64_t turn_index;
  std::size_t begin;
  std::size_t end;
};

// Concatenated buffer lines of a turn log and the byte range of each line.
std::string log_text(const std::vector<TurnRecord>& turns, std::vector<LineSpan>* spans) {
  std::string text;
  for (const auto& t : turns) {
    const std::size_t begin = text.size();
    text += buffer_line(t);
    if (spans) spans->push_back({t.turn_index, begin, text.size()});
  }
  return text;
}

// Splits text[begin, end) at line boundaries, tagging each piece with its turn.
std::vector<EvictedFragment> fragments_for_range(const std::string& text, const std::vector<LineSpan>& spans,
                                                 std::size_t begin, std::size_t end) {
  std::vector<EvictedFragment> out;
  for (const auto& s : spans) {
    const std::size_t lo = std::max(begin, s.begin);
    const std::size_t hi = std::min(end, s.end);
    if (lo < hi) out.push_back({s.turn_index, text.substr(lo, hi - lo)});
  }
  return out;
}

std::uint64_t covered_bytes(SessionStore& store, const std::string& session_id, std::uint64_t count) {
  std::uint64_t total = 0;
  for (std::uint64_t seq = 0; seq < count; ++seq) total += store.read_chunk(session_id, seq).payload.size();
  return total;
}

}  // namespace

// ---------------------------------------------------------------------------

DialogueBuffer::DialogueBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::kInvalidArgument, "buffer capacity must be positive");
}

std::string DialogueBuffer::append(std::string_view text) {
  utf8::require_valid(text);
  const std::size_t n = utf8::scalar_count(text);
  if (n > 10 * capacity_) {
    throw Error(ErrorCode::kOversizeAppend, "append exceeds 10x buffer capacity",
                {{"scalars", n}, {"limit", 10 * capacity_}});
  }
  total_appended_ += n;
  content_.append(text);
  size_ += n;
  if (size_ <= capacity_) return {};
  const std::size_t cut = utf8::byte_offset_of_scalar(content_, size_ - capacity_);
  std::string evicted = content_.substr(0, cut);
  content_.erase(0, cut);
  size_ = capacity_;
  return evicted;
}

DialogueBuffer DialogueBuffer::restore(std::size_t capacity, std::string content, std::uint64_t total_appended) {
  DialogueBuffer b(capacity);
  utf8::require_valid(content);
  b.size_ = utf8::scalar_count(content);
  if (b.size_ > capacity || b.size_ > total_appended) {
    throw Error(ErrorCode::kInvalidArgument, "restored buffer violates its capacity");
  }
  b.content_ = std::move(content);
  b.total_appended_ = total_appended;
  return b;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Role role) { return role == Role::kUser ? "user" : "system"; }

Role role_from_string(std::string_view name) {
  if (name == "user") return Role::kUser;
  if (name == "system") return Role::kSystem;
  throw Error(ErrorCode::kInvalidArgument, "unknown role: " + std::string(name));
}

void TurnRecord::validate() const {
  const bool user = role == Role::kUser;
  if (user != emotion.has_value() || user == strategy.has_value() || user == prosody.has_value()) {
    throw Error(ErrorCode::kInvalidArgument, "turn record fields do not match its role",
                {{"turn_index", turn_index}, {"role", std::string(to_string(role))}});
  }
  utf8::require_valid(text);
}

void to_json(nlohmann::json& j, const TurnRecord& r) {
  j = {{"session_id", r.session_id},
       {"turn_index", r.turn_index},
       {"role", to_string(r.role)},
       {"text", r.text},
       {"timestamp", r.timestamp}};
  if (r.emotion) j["emotion"] = *r.emotion;
  if (r.strategy) j["strategy"] = {{"id", to_string(r.strategy->id)}, {"step", r.strategy->step}};
  if (r.prosody) j["prosody"] = *r.prosody;
  if (r.audio_ref) j["audio_ref"] = *r.audio_ref;
}

void from_json(const nlohmann::json& j, TurnRecord& r) {
  r.session_id = j.at("session_id").get<std::string>();
  r.turn_index = j.at("turn_index").get<std::uint64_t>();
  r.role = role_from_string(j.at("role").get<std::string>());
  r.text = j.at("text").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::string>();
  r.emotion.reset();
  r.strategy.reset();
  r.prosody.reset();
  r.audio_ref.reset();
  if (j.contains("emotion")) r.emotion = j.at("emotion").get<EmotionResult>();
  if (j.contains("strategy")) {
    const auto& s = j.at("strategy");
    r.strategy = StrategyRef{strategy_from_string(s.at("id").get<std::string>()), s.at("step").get<std::size_t>()};
  }
  if (j.contains("prosody")) r.prosody = j.at("prosody").get<ProsodyParams>();
  if (j.contains("audio_ref")) r.audio_ref = j.at("audio_ref").get<std::string>();
}

std::string buffer_line(const TurnRecord& record) {
  return (record.role == Role::kUser ? "U: " : "S: ") + record.text + "\n";
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string encode_chunk_file(const Chunk& chunk) {
  std::string out(kChunkMagic);
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((chunk.checksum >> shift) & 0xFF));
  out += chunk.payload;
  return out;
}

Chunk decode_chunk_file(std::string_view bytes, std::string session_id, std::uint64_t seq) {
  if (bytes.size() < 8 || bytes.substr(0, 4) != kChunkMagic) {
    throw Error(ErrorCode::kChecksumMismatch, "chunk header damaged", {{"seq", seq}});
  }
  std::uint32_t stored = 0;
  for (int i = 4; i < 8; ++i) stored = (stored << 8) | static_cast<unsigned char>(bytes[i]);
  Chunk c;
  c.session_id = std::move(session_id);
  c.seq = seq;
  c.payload = std::string(bytes.substr(8));
  c.checksum = stored;
  if (crc32_of(c.payload) != stored) {
    throw Error(ErrorCode::kChecksumMismatch, "chunk checksum mismatch", {{"seq", seq}});
  }
  return c;
}

// ---------------------------------------------------------------------------

std::string_view to_string(PlanStatus status) {
  switch (status) {
    case PlanStatus::kOpen: return "open";
    case PlanStatus::kCompleted: return "completed";
    case PlanStatus::kAbandoned: return "abandoned";
  }
  return "open";
}

PlanStatus plan_status_from_string(std::string_view name) {
  if (name == "open") return PlanStatus::kOpen;
  if (name == "completed") return PlanStatus::kCompleted;
  if (name == "abandoned") return PlanStatus::kAbandoned;
  throw Error(ErrorCode::kInvalidArgument, "unknown plan status: " + std::string(name));
}

bool ActionPlan::all_done() const {
  return !steps.empty() && std::all_of(steps.begin(), steps.end(), [](const PlanStep& s) { return s.done; });
}

void ActionPlan::mark_step(std::size_t index, bool done) {
  if (index >= steps.size()) {
    throw Error(ErrorCode::kInvalidArgument, "plan step out of range", {{"step", index}});
  }
  steps[index].done = done;
  if (status != PlanStatus::kAbandoned) status = all_done() ? PlanStatus::kCompleted : PlanStatus::kOpen;
}

void ActionPlan::validate() const {
  if (steps.empty()) throw Error(ErrorCode::kInvalidArgument, "action plan needs at least one step");
  if ((status == PlanStatus::kCompleted) != all_done() && status != PlanStatus::kAbandoned) {
    throw Error(ErrorCode::kInvalidArgument, "plan status disagrees with its steps", {{"plan_id", plan_id}});
  }
}

void to_json(nlohmann::json& j, const ActionPlan& p) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : p.steps) steps.push_back({{"text", s.text}, {"done", s.done}});
  j = {{"session_id", p.session_id},
       {"plan_id", p.plan_id},
       {"description", p.description},
       {"steps", steps},
       {"status", to_string(p.status)}};
}

void from_json(const nlohmann::json& j, ActionPlan& p) {
  p.session_id = j.at("session_id").get<std::string>();
  p.plan_id = j.at("plan_id").get<std::string>();
  p.description = j.at("description").get<std::string>();
  p.steps.clear();
  for (const auto& s : j.at("steps")) p.steps.push_back({s.at("text").get<std::string>(), s.at("done").get<bool>()});
  p.status = plan_status_from_string(j.at("status").get<std::string>());
  p.validate();
}

void to_json(nlohmann::json& j, const SessionMeta& m) {
  j = {{"session_id", m.session_id}, {"user_name", m.user_name}, {"created_at", m.created_at}, {"alpha", m.alpha}};
}

void from_json(const nlohmann::json& j, SessionMeta& m) {
  m.session_id = j.at("session_id").get<std::string>();
  m.user_name = j.at("user_name").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  m.alpha = j.value("alpha", kDefaultAlpha);
}

// ---------------------------------------------------------------------------

FileStore::FileStore(fs::path root) : root_(std::move(root)) { ensure_dir(root_); }

fs::path FileStore::session_dir(const std::string& session_id) const {
  check_session_id(session_id);
  return root_ / session_id;
}

fs::path FileStore::chunk_path(const std::string& session_id, std::uint64_t seq) const {
  return session_dir(session_id) / "chunks" / (std::to_string(seq) + ".chunk");
}

bool FileStore::session_exists(const std::string& session_id) {
  check_session_id(session_id);
  return fs::exists(root_ / session_id / "session.json");
}

std::vector<std::string> FileStore::list_sessions() {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root_, ec)) {
    if (entry.is_directory() && fs::exists(entry.path() / "session.json")) {
      out.push_back(entry.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void FileStore::write_meta(const SessionMeta& meta) {
  const auto dir = session_dir(meta.session_id);
  {
    std::lock_guard lock(mu_);
    ensure_dir(dir / "chunks");
    ensure_dir(dir / "audio");
  }
  write_file_atomic(dir / "session.json", nlohmann::json(meta).dump(2) + "\n");
}

SessionMeta FileStore::read_meta(const std::string& session_id) {
  const auto bytes = read_if_exists(session_dir(session_id) / "session.json");
  if (!bytes) throw Error(ErrorCode::kUnknownSession, "unknown session", {{"session_id", session_id}});
  return nlohmann::json::parse(*bytes).get<SessionMeta>();
}

void FileStore::append_turn(const TurnRecord& record) {
  record.validate();
  const auto path = session_dir(record.session_id) / "turns.jsonl";
  const std::string line = nlohmann::json(record).dump() + "\n";
  std::lock_guard lock(mu_);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) io_failure("cannot open", path);
  write_all(fd, line, path);
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_failure("fsync failed for", path);
  }
  ::close(fd);
}

std::vector<TurnRecord> FileStore::read_turns(const std::string& session_id) {
  const auto path = session_dir(session_id) / "turns.jsonl";
  std::lock_guard lock(mu_);
  const auto bytes = read_if_exists(path);
  std::vector<TurnRecord> out;
  if (!bytes) return out;
  std::size_t pos = 0;
  while (pos < bytes->size()) {
    const std::size_t nl = bytes->find('\n', pos);
    if (nl == std::string::npos) {
      // A torn final line from an interrupted append; the turn never committed.
      fs::resize_file(path, pos);
      break;
    }
    out.push_back(nlohmann::json::parse(bytes->substr(pos, nl - pos)).get<TurnRecord>());
    pos = nl + 1;
  }
  return out;
}

void FileStore::write_chunk(const Chunk& chunk) {
  const auto dir = session_dir(chunk.session_id) / "chunks";
  nlohmann::json frags = nlohmann::json::array();
  for (const auto& f : chunk.fragments) frags.push_back({{"turn_index", f.turn_index}, {"bytes", f.bytes}});
  // The sidecar lands first; the chunk file's rename is the commit point.
  write_file_atomic(dir / (std::to_string(chunk.seq) + ".frag.json"), frags.dump() + "\n");
  write_file_atomic(dir / (std::to_string(chunk.seq) + ".chunk"), encode_chunk_file(chunk));
}

Chunk FileStore::read_chunk(const std::string& session_id, std::uint64_t seq) {
  const auto bytes = read_if_exists(chunk_path(session_id, seq));
  if (!bytes) throw Error(ErrorCode::kChunkMissing, "chunk missing", {{"seq", seq}});
  Chunk c = decode_chunk_file(*bytes, session_id, seq);
  const auto frags = read_if_exists(session_dir(session_id) / "chunks" / (std::to_string(seq) + ".frag.json"));
  if (frags) {
    for (const auto& f : nlohmann::json::parse(*frags)) {
      c.fragments.push_back({f.at("turn_index").get<std::uint64_t>(), f.at("bytes").get<std::size_t>()});
    }
  }
  return c;
}

std::uint64_t FileStore::chunk_count(const std::string& session_id) {
  // One past the highest sequence present, so a hole reads as ChunkMissing.
  std::uint64_t count = 0;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(session_dir(session_id) / "chunks", ec)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".chunk") continue;
    const auto stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) continue;
    count = std::max<std::uint64_t>(count, std::stoull(stem) + 1);
  }
  return count;
}

void FileStore::write_profile(const std::string& session_id, const VoiceProfile& profile) {
  profile.validate();
  write_file_atomic(session_dir(session_id) / "profile.json", nlohmann::json(profile).dump() + "\n");
}

std::optional<VoiceProfile> FileStore::read_profile(const std::string& session_id) {
  const auto bytes = read_if_exists(session_dir(session_id) / "profile.json");
  if (!bytes) return std::nullopt;
  return nlohmann::json::parse(*bytes).get<VoiceProfile>();
}

void FileStore::write_plans(const std::string& session_id, const std::vector<ActionPlan>& plans) {
  write_file_atomic(session_dir(session_id) / "plans.json", nlohmann::json(plans).dump(2) + "\n");
}

std::vector<ActionPlan> FileStore::read_plans(const std::string& session_id) {
  const auto bytes = read_if_exists(session_dir(session_id) / "plans.json");
  if (!bytes) return {};
  return nlohmann::json::parse(*bytes).get<std::vector<ActionPlan>>();
}

std::string FileStore::put_audio(const std::string& session_id, std::string_view wav_bytes) {
  const std::string sha = sha256_hex(wav_bytes);
  const auto path = session_dir(session_id) / "audio" / (sha + ".wav");
  {
    std::lock_guard lock(mu_);
    ensure_dir(path.parent_path());
  }
  if (!fs::exists(path)) write_file_atomic(path, wav_bytes);
  return sha;
}

std::optional<std::string> FileStore::get_audio(std::string_view sha256) {
  if (!is_sha256_hex(sha256)) return std::nullopt;
  for (const auto& id : list_sessions()) {
    if (auto bytes = read_if_exists(root_ / id / "audio" / (std::string(sha256) + ".wav"))) return bytes;
  }
  return std::nullopt;
}

void FaultInjectingStore::check() const {
  if (offline_) throw Error(ErrorCode::kStoreUnavailable, "store offline (injected)");
}

void FaultInjectingStore::write_chunk(const Chunk& chunk) {
  check();
  if (fail_chunk_at_ >= 0 && chunk_writes_++ == fail_chunk_at_) {
    throw Error(ErrorCode::kStoreUnavailable, "chunk write failed (injected)", {{"seq", chunk.seq}});
  }
  inner_.write_chunk(chunk);
}

// ---------------------------------------------------------------------------

std::vector<std::uint64_t> flush_evictions(std::deque<EvictedFragment>& pending, SessionStore& store,
                                           const std::string& session_id, std::uint64_t& next_seq) {
  std::vector<std::uint64_t> written;
  while (!pending.empty()) {
    Chunk chunk;
    chunk.session_id = session_id;
    chunk.seq = next_seq;
    // Plan the chunk without touching the queue.
    std::size_t consumed_frags = 0;
    std::size_t tail_bytes = 0;  // bytes taken from a fragment that does not fit whole
    for (const auto& frag : pending) {
      const std::size_t room = kMaxChunkPayload - chunk.payload.size();
      if (room == 0) break;
      if (frag.text.size() <= room) {
        chunk.payload += frag.text;
        chunk.fragments.push_back({frag.turn_index, frag.text.size()});
        ++consumed_frags;
        continue;
      }
      tail_bytes = utf8::floor_boundary(frag.text, room);
      if (tail_bytes > 0) {
        chunk.payload.append(frag.text, 0, tail_bytes);
        chunk.fragments.push_back({frag.turn_index, tail_bytes});
      }
      break;
    }
    chunk.checksum = crc32_of(chunk.payload);
    store.write_chunk(chunk);

    for (std::size_t i = 0; i < consumed_frags; ++i) pending.pop_front();
    if (tail_bytes > 0) pending.front().text.erase(0, tail_bytes);
    written.push_back(next_seq++);
  }
  return written;
}

SessionLog::SessionLog(SessionStore& store, SessionMeta meta)
    : store_(&store), meta_(std::move(meta)), buffer_(meta_.alpha) {}

SessionLog SessionLog::create(SessionStore& store, SessionMeta meta) {
  if (store.session_exists(meta.session_id)) {
    throw Error(ErrorCode::kInvalidArgument, "session already exists", {{"session_id", meta.session_id}});
  }
  store.write_meta(meta);
  return SessionLog(store, std::move(meta));
}

SessionLog SessionLog::open(SessionStore& store, const std::string& session_id) {
  SessionLog log(store, store.read_meta(session_id));
  const auto turns = store.read_turns(session_id);
  std::vector<LineSpan> spans;
  const std::string full = log_text(turns, &spans);

  const std::size_t total = utf8::scalar_count(full);
  const std::size_t kept = std::min(total, log.meta_.alpha);
  const std::size_t evicted_end = utf8::byte_offset_of_scalar(full, total - kept);
  log.buffer_ = DialogueBuffer::restore(log.meta_.alpha, full.substr(evicted_end), total);

  log.next_seq_ = store.chunk_count(session_id);
  const std::uint64_t covered = covered_bytes(store, session_id, log.next_seq_);
  if (covered > evicted_end) {
    throw Error(ErrorCode::kChecksumMismatch, "chunks cover more text than the turn log evicted",
                {{"seq", log.next_seq_ - 1}});
  }
  for (auto& frag : fragments_for_range(full, spans, covered, evicted_end)) log.pending_.push_back(std::move(frag));
  for (const auto& s : spans) {
    if (s.end > evicted_end) log.buffer_spans_.push_back({s.turn_index, s.end - std::max(s.begin, evicted_end)});
  }

  for (const auto& t : turns) {
    if (t.turn_index != log.next_turn_) {
      throw Error(ErrorCode::kInvalidArgument, "turn log has a gap", {{"expected", log.next_turn_}, {"found", t.turn_index}});
    }
    ++log.next_turn_;
    if (t.strategy) {
      ++log.usage_[static_cast<std::size_t>(t.strategy->id)];
      if (t.strategy->id == StrategyId::kCognitiveRestructuring) ++log.restructuring_delivered_;
    }
  }
  log.plans_ = store.read_plans(session_id);
  return log;
}

TurnRecord SessionLog::record_turn(TurnRecord record) {
  record.session_id = meta_.session_id;
  record.turn_index = next_turn_;
  record.validate();
  const std::string line = buffer_line(record);
  if (utf8::scalar_count(line) > 10 * buffer_.capacity()) {
    throw Error(ErrorCode::kOversizeAppend, "turn text exceeds 10x buffer capacity",
                {{"limit", 10 * buffer_.capacity()}});
  }
  store_->append_turn(record);
  ++next_turn_;
  std::string evicted = buffer_.append(line);
  buffer_spans_.push_back({record.turn_index, line.size()});
  std::size_t offset = 0;
  while (offset < evicted.size()) {
    auto& [turn, bytes] = buffer_spans_.front();
    const std::size_t take = std::min(bytes, evicted.size() - offset);
    pending_.push_back({turn, evicted.substr(offset, take)});
    offset += take;
    bytes -= take;
    if (bytes == 0) buffer_spans_.pop_front();
  }
  if (record.strategy) {
    ++usage_[static_cast<std::size_t>(record.strategy->id)];
    if (record.strategy->id == StrategyId::kCognitiveRestructuring) ++restructuring_delivered_;
  }
  return record;
}

std::vector<std::uint64_t> SessionLog::flush_evictions() {
  return innerself::flush_evictions(pending_, *store_, meta_.session_id, next_seq_);
}

std::string SessionLog::reconstruct_transcript() const {
  std::string out;
  for (std::uint64_t seq = 0; seq < next_seq_; ++seq) out += store_->read_chunk(meta_.session_id, seq).payload;
  for (const auto& f : pending_) out += f.text;
  out += buffer_.content();
  return out;
}

StrategyHistory SessionLog::strategy_history() const {
  StrategyHistory h;
  h.usage = usage_;
  h.restructuring_step = restructuring_delivered_;
  for (const auto& p : plans_) {
    if (p.status != PlanStatus::kOpen) continue;
    const auto next = std::find_if(p.steps.begin(), p.steps.end(), [](const PlanStep& s) { return !s.done; });
    if (next == p.steps.end()) continue;
    h.open_action_plan = true;
    h.next_plan_step = next->text;
    break;
  }
  return h;
}

ActionPlan& SessionLog::find_plan(const std::string& plan_id) {
  const auto it = std::find_if(plans_.begin(), plans_.end(), [&](const ActionPlan& p) { return p.plan_id == plan_id; });
  if (it == plans_.end()) throw Error(ErrorCode::kNotFound, "unknown plan", {{"plan_id", plan_id}});
  return *it;
}

void SessionLog::save_plans() { store_->write_plans(meta_.session_id, plans_); }

ActionPlan& SessionLog::add_plan(std::string description, std::vector<std::string> steps) {
  ActionPlan plan;
  plan.session_id = meta_.session_id;
  plan.plan_id = "plan-" + std::to_string(plans_.size() + 1);
  plan.description = std::move(description);
  for (auto& s : steps) plan.steps.push_back({std::move(s), false});
  plan.validate();
  plans_.push_back(std::move(plan));
  try {
    save_plans();
  } catch (...) {
    plans_.pop_back();
    throw;
  }
  return plans_.back();
}

ActionPlan& SessionLog::update_plan_step(const std::string& plan_id, std::size_t step, bool done) {
  ActionPlan& plan = find_plan(plan_id);
  const ActionPlan before = plan;
  plan.mark_step(step, done);
  try {
    save_plans();
  } catch (...) {
    plan = before;
    throw;
  }
  return plan;
}

ActionPlan& SessionLog::abandon_plan(const std::string& plan_id) {
  ActionPlan& plan = find_plan(plan_id);
  const ActionPlan before = plan;
  plan.status = PlanStatus::kAbandoned;
  try {
    save_plans();
  } catch (...) {
    plan = before;
    throw;
  }
  return plan;
}

// ---------------------------------------------------------------------------

std::string reconstruct_transcript(SessionStore& store, const std::string& session_id) {
  if (!store.session_exists(session_id)) {
    throw Error(ErrorCode::kUnknownSession, "unknown session", {{"session_id", session_id}});
  }
  std::string out;
  const auto count = store.chunk_count(session_id);
  for (std::uint64_t seq = 0; seq < count; ++seq) out += store.read_chunk(session_id, seq).payload;
  const std::string full = log_text(store.read_turns(session_id), nullptr);
  if (out.size() > full.size()) {
    throw Error(ErrorCode::kChecksumMismatch, "chunks extend past the turn log", {{"seq", count - 1}});
  }
  out.append(full, out.size());
  return out;
}

void to_json(nlohmann::json& j, const TrajectoryPoint& p) {
  j = {{"turn_index", p.turn_index}, {"timestamp", p.timestamp}, {"emotion", p.emotion}};
}

std::vector<TrajectoryPoint> emotion_trajectory(SessionStore& store, const std::string& session_id) {
  if (!store.session_exists(session_id)) {
    throw Error(ErrorCode::kUnknownSession, "unknown session", {{"session_id", session_id}});
  }
  std::vector<TrajectoryPoint> out;
  for (const auto& t : store.read_turns(session_id)) {
    if (t.role == Role::kUser && t.emotion) out.push_back({t.turn_index, t.timestamp, *t.emotion});
  }
  return out;
}

nlohmann::json export_session(SessionStore& store, const std::string& session_id, const ExportOptions& options) {
  if (!store.session_exists(session_id)) {
    throw Error(ErrorCode::kUnknownSession, "unknown session", {{"session_id", session_id}});
  }
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : store.read_turns(session_id)) {
    nlohmann::json jt = t;
    if (!options.include_audio) jt.erase("audio_ref");
    turns.push_back(std::move(jt));
  }
  nlohmann::json doc;
  doc["schema"] = kExportSchema;
  doc["session"] = store.read_meta(session_id);
  doc["session"]["has_voice_profile"] = store.read_profile(session_id).has_value();
  doc["turns"] = std::move(turns);
  doc["trajectory"] = emotion_trajectory(store, session_id);
  doc["action_plans"] = store.read_plans(session_id);
  return doc;
}

std::string import_session(SessionStore& store, const nlohmann::json& document) {
  if (document.value("schema", "") != kExportSchema) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported export schema");
  }
  const auto meta = document.at("session").get<SessionMeta>();
  SessionLog::create(store, meta);
  std::uint64_t expected = 0;
  for (const auto& jt : document.at("turns")) {
    auto record = jt.get<TurnRecord>();
    if (record.turn_index != expected++) {
      throw Error(ErrorCode::kInvalidArgument, "export turns are not gapless");
    }
    record.session_id = meta.session_id;
    store.append_turn(record);
  }
  auto plans = document.at("action_plans").get<std::vector<ActionPlan>>();
  for (auto& p : plans) p.session_id = meta.session_id;
  if (!plans.empty()) store.write_plans(meta.session_id, plans);
  // Re-chunk the evicted part of the imported log.
  auto log = SessionLog::open(store, meta.session_id);
  log.flush_evictions();
  return meta.session_id;
}

}  // namespace innerself
