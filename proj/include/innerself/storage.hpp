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

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "innerself/conversation.hpp"
#include "innerself/emotion.hpp"
#include "innerself/prosody.hpp"
#include "innerself/voiceclone.hpp"

namespace innerself {

inline constexpr std::size_t kDefaultAlpha = 600;
inline constexpr std::size_t kMaxChunkPayload = 4096;

/// Fixed-capacity FIFO of Unicode scalar values. Appending past capacity
/// removes the oldest text and hands it back to the caller.
class DialogueBuffer {
 public:
  explicit DialogueBuffer(std::size_t capacity = kDefaultAlpha);

  /// Returns the evicted prefix, possibly empty. Throws kOversizeAppend when
  /// text holds more than 10 * capacity scalars, kInvalidUtf8 on bad input.
  std::string append(std::string_view text);

  const std::string& content() const noexcept { return content_; }
  std::string context_window() const { return content_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return size_; }  // scalars
  std::uint64_t total_appended() const noexcept { return total_appended_; }

  /// Restores a buffer whose content and counter were derived elsewhere.
  static DialogueBuffer restore(std::size_t capacity, std::string content, std::uint64_t total_appended);

 private:
  std::size_t capacity_;
  std::string content_;
  std::size_t size_ = 0;
  std::uint64_t total_appended_ = 0;
};

// ---------------------------------------------------------------------------
// Records

enum class Role { kUser, kSystem };
std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

struct StrategyRef {
  StrategyId id = StrategyId::kSmallTalk;
  std::size_t step = 0;
  friend bool operator==(const StrategyRef&, const StrategyRef&) = default;
};

struct TurnRecord {
  std::string session_id;
  std::uint64_t turn_index = 0;
  Role role = Role::kUser;
  std::string text;
  std::optional<EmotionResult> emotion;   // user turns
  std::optional<StrategyRef> strategy;    // system turns
  std::optional<ProsodyParams> prosody;   // system turns
  std::string timestamp;
  std::optional<std::string> audio_ref;

  /// Throws kInvalidArgument when role-conditional fields are wrong.
  void validate() const;
};
void to_json(nlohmann::json& j, const TurnRecord& r);
void from_json(const nlohmann::json& j, TurnRecord& r);

/// Buffer line for a turn: "U: text\n" or "S: text\n".
std::string buffer_line(const TurnRecord& record);

struct EvictedFragment {
  std::uint64_t turn_index = 0;
  std::string text;
};

struct ChunkFragment {
  std::uint64_t turn_index = 0;
  std::size_t bytes = 0;
  friend bool operator==(const ChunkFragment&, const ChunkFragment&) = default;
};

struct Chunk {
  std::string session_id;
  std::uint64_t seq = 0;
  std::string payload;
  std::vector<ChunkFragment> fragments;
  std::uint32_t checksum = 0;
};

std::uint32_t crc32_of(std::string_view bytes);

/// "ISCH" + big-endian CRC32 + payload.
std::string encode_chunk_file(const Chunk& chunk);
/// Throws kChecksumMismatch (with details {"seq"}) on a bad magic or CRC.
Chunk decode_chunk_file(std::string_view bytes, std::string session_id, std::uint64_t seq);

enum class PlanStatus { kOpen, kCompleted, kAbandoned };
std::string_view to_string(PlanStatus status);
PlanStatus plan_status_from_string(std::string_view name);

struct PlanStep {
  std::string text;
  bool done = false;
};

struct ActionPlan {
  std::string session_id;
  std::string plan_id;
  std::string description;
  std::vector<PlanStep> steps;
  PlanStatus status = PlanStatus::kOpen;

  bool all_done() const;
  /// Sets step `index` and recomputes status. Abandoned plans stay abandoned.
  void mark_step(std::size_t index, bool done);
  /// Throws kInvalidArgument if status disagrees with the steps.
  void validate() const;
};
void to_json(nlohmann::json& j, const ActionPlan& p);
void from_json(const nlohmann::json& j, ActionPlan& p);

struct SessionMeta {
  std::string session_id;
  std::string user_name;
  std::string created_at;
  std::size_t alpha = kDefaultAlpha;
};
void to_json(nlohmann::json& j, const SessionMeta& m);
void from_json(const nlohmann::json& j, SessionMeta& m);

// ---------------------------------------------------------------------------
// Store

/// Persistent backend. Every write is durable when the call returns.
/// Unreachable backends throw kStoreUnavailable.
class SessionStore {
 public:
  virtual ~SessionStore() = default;

  virtual bool session_exists(const std::string& session_id) = 0;
  virtual std::vector<std::string> list_sessions() = 0;
  virtual void write_meta(const SessionMeta& meta) = 0;
  /// Throws kUnknownSession.
  virtual SessionMeta read_meta(const std::string& session_id) = 0;

  virtual void append_turn(const TurnRecord& record) = 0;
  virtual std::vector<TurnRecord> read_turns(const std::string& session_id) = 0;

  virtual void write_chunk(const Chunk& chunk) = 0;
  /// Throws kChunkMissing or kChecksumMismatch, both with details {"seq"}.
  virtual Chunk read_chunk(const std::string& session_id, std::uint64_t seq) = 0;
  /// Number of chunks with contiguous sequence numbers from 0.
  virtual std::uint64_t chunk_count(const std::string& session_id) = 0;

  virtual void write_profile(const std::string& session_id, const VoiceProfile& profile) = 0;
  virtual std::optional<VoiceProfile> read_profile(const std::string& session_id) = 0;

  virtual void write_plans(const std::string& session_id, const std::vector<ActionPlan>& plans) = 0;
  virtual std::vector<ActionPlan> read_plans(const std::string& session_id) = 0;

  /// Stores WAV bytes under their SHA-256 and returns the hex digest.
  virtual std::string put_audio(const std::string& session_id, std::string_view wav_bytes) = 0;
  virtual std::optional<std::string> get_audio(std::string_view sha256) = 0;
};

/// Directory layout: <root>/<session_id>/{session.json, turns.jsonl,
/// chunks/<seq>.chunk, chunks/<seq>.frag.json, profile.json, plans.json,
/// audio/<sha256>.wav}. Files other than the turn log are replaced with
/// write-to-temp, fsync, rename; the turn log is appended and fsynced.
class FileStore final : public SessionStore {
 public:
  explicit FileStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  bool session_exists(const std::string& session_id) override;
  std::vector<std::string> list_sessions() override;
  void write_meta(const SessionMeta& meta) override;
  SessionMeta read_meta(const std::string& session_id) override;
  void append_turn(const TurnRecord& record) override;
  std::vector<TurnRecord> read_turns(const std::string& session_id) override;
  void write_chunk(const Chunk& chunk) override;
  Chunk read_chunk(const std::string& session_id, std::uint64_t seq) override;
  std::uint64_t chunk_count(const std::string& session_id) override;
  void write_profile(const std::string& session_id, const VoiceProfile& profile) override;
  std::optional<VoiceProfile> read_profile(const std::string& session_id) override;
  void write_plans(const std::string& session_id, const std::vector<ActionPlan>& plans) override;
  std::vector<ActionPlan> read_plans(const std::string& session_id) override;
  std::string put_audio(const std::string& session_id, std::string_view wav_bytes) override;
  std::optional<std::string> get_audio(std::string_view sha256) override;

  std::filesystem::path session_dir(const std::string& session_id) const;
  std::filesystem::path chunk_path(const std::string& session_id, std::uint64_t seq) const;

 private:
  std::filesystem::path root_;
  std::mutex mu_;  // guards directory creation and turn-log appends
};

/// Wraps a store and fails chosen operations on demand. Used to exercise the
/// pending-queue and crash paths.
class FaultInjectingStore final : public SessionStore {
 public:
  explicit FaultInjectingStore(SessionStore& inner) : inner_(inner) {}

  void set_offline(bool offline) { offline_ = offline; }
  // Fails the n-th (0-based) chunk write from now on; -1 disables.
  void fail_chunk_write_at(long n) { fail_chunk_at_ = n; chunk_writes_ = 0; }

  bool session_exists(const std::string& id) override { return inner_.session_exists(id); }
  std::vector<std::string> list_sessions() override { return inner_.list_sessions(); }
  void write_meta(const SessionMeta& meta) override { check(); inner_.write_meta(meta); }
  SessionMeta read_meta(const std::string& id) override { return inner_.read_meta(id); }
  void append_turn(const TurnRecord& r) override { check(); inner_.append_turn(r); }
  std::vector<TurnRecord> read_turns(const std::string& id) override { return inner_.read_turns(id); }
  void write_chunk(const Chunk& chunk) override;
  Chunk read_chunk(const std::string& id, std::uint64_t seq) override { return inner_.read_chunk(id, seq); }
  std::uint64_t chunk_count(const std::string& id) override { return inner_.chunk_count(id); }
  void write_profile(const std::string& id, const VoiceProfile& p) override { check(); inner_.write_profile(id, p); }
  std::optional<VoiceProfile> read_profile(const std::string& id) override { return inner_.read_profile(id); }
  void write_plans(const std::string& id, const std::vector<ActionPlan>& p) override { check(); inner_.write_plans(id, p); }
  std::vector<ActionPlan> read_plans(const std::string& id) override { return inner_.read_plans(id); }
  std::string put_audio(const std::string& id, std::string_view b) override { check(); return inner_.put_audio(id, b); }
  std::optional<std::string> get_audio(std::string_view sha) override { return inner_.get_audio(sha); }

 private:
  void check() const;

  SessionStore& inner_;
  bool offline_ = false;
  long fail_chunk_at_ = -1;
  long chunk_writes_ = 0;
};

// ---------------------------------------------------------------------------
// Session log: the single writer for one session

/// Groups pending fragments into chunks of at most 4096 payload bytes, split
/// on scalar boundaries, and writes them in order starting at `next_seq`.
/// Fragments are removed from `pending` only after the chunk holding them is
/// durable. Returns the written sequence numbers; throws kStoreUnavailable
/// with the unwritten remainder still queued.
std::vector<std::uint64_t> flush_evictions(std::deque<EvictedFragment>& pending, SessionStore& store,
                                           const std::string& session_id, std::uint64_t& next_seq);

class SessionLog {
 public:
  /// Creates the session on disk. Throws kInvalidArgument if it exists.
  static SessionLog create(SessionStore& store, SessionMeta meta);

  /// Rebuilds buffer, pending queue and strategy history from the turn log
  /// and chunk files. Evicted text not yet covered by chunks is re-queued.
  static SessionLog open(SessionStore& store, const std::string& session_id);

  const SessionMeta& meta() const noexcept { return meta_; }
  const DialogueBuffer& buffer() const noexcept { return buffer_; }
  const std::deque<EvictedFragment>& pending() const noexcept { return pending_; }
  std::uint64_t next_turn_index() const noexcept { return next_turn_; }
  std::uint64_t next_chunk_seq() const noexcept { return next_seq_; }

  /// Assigns the turn index, persists the record, then appends its line to
  /// the buffer. Evictions are queued but not flushed.
  TurnRecord record_turn(TurnRecord record);

  std::vector<std::uint64_t> flush_evictions();

  /// Chunks (checksum-verified) + pending + buffer.
  std::string reconstruct_transcript() const;

  /// Usage counts and Socratic progress from the system turns, plus the
  /// first open plan's next step.
  StrategyHistory strategy_history() const;
  const std::vector<ActionPlan>& plans() const noexcept { return plans_; }

  ActionPlan& add_plan(std::string description, std::vector<std::string> steps);
  ActionPlan& update_plan_step(const std::string& plan_id, std::size_t step, bool done);
  ActionPlan& abandon_plan(const std::string& plan_id);

 private:
  SessionLog(SessionStore& store, SessionMeta meta);
  ActionPlan& find_plan(const std::string& plan_id);
  void save_plans();

  SessionStore* store_;
  SessionMeta meta_;
  DialogueBuffer buffer_;
  std::deque<EvictedFragment> pending_;
  // (turn_index, bytes still buffered) for each line in the buffer, oldest first.
  std::deque<std::pair<std::uint64_t, std::size_t>> buffer_spans_;
  std::uint64_t next_turn_ = 0;
  std::uint64_t next_seq_ = 0;
  std::array<std::size_t, kStrategyCount> usage_{};
  std::size_t restructuring_delivered_ = 0;
  std::vector<ActionPlan> plans_;
};

/// Concatenated chunk payloads followed by the turn-log text they do not yet
/// cover. Throws kUnknownSession, kChunkMissing or kChecksumMismatch.
std::string reconstruct_transcript(SessionStore& store, const std::string& session_id);

struct TrajectoryPoint {
  std::uint64_t turn_index = 0;
  std::string timestamp;
  EmotionResult emotion;
};
void to_json(nlohmann::json& j, const TrajectoryPoint& p);

/// One entry per user turn, in turn order. Throws kUnknownSession.
std::vector<TrajectoryPoint> emotion_trajectory(SessionStore& store, const std::string& session_id);

inline constexpr std::string_view kExportSchema = "innerself-export/1";

struct ExportOptions {
  bool include_audio = false;
};

/// {"schema", "session", "turns", "trajectory", "action_plans"}.
nlohmann::json export_session(SessionStore& store, const std::string& session_id,
                              const ExportOptions& options = {});

/// Writes an export document into `store` as a new session. Throws
/// kInvalidArgument on a schema mismatch or an existing session id.
std::string import_session(SessionStore& store, const nlohmann::json& document);

}  // namespace innerself
