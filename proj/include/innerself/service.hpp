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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "innerself/conversation.hpp"
#include "innerself/emotion.hpp"
#include "innerself/storage.hpp"
#include "innerself/voiceclone.hpp"

namespace innerself {

// ---------------------------------------------------------------------------
// Configuration

struct AdapterEndpoints {
  // "reference" or an http(s) base URL.
  std::string stt = "reference";
  std::string audio_features = "reference";
  std::string language_model = "reference";
  std::string speaker_encoder = "reference";
  std::string synthesizer = "reference";
  std::string vocoder = "reference";
};

struct Config {
  std::filesystem::path data_dir = "var/sessions";
  std::size_t alpha = kDefaultAlpha;
  std::filesystem::path lexicon_dir = "data/lexicons";
  std::filesystem::path strategy_table = "data/tables/strategies.json";
  std::filesystem::path substitution_table = "data/tables/substitutions.json";
  std::filesystem::path prosody_table = "data/tables/prosody.json";
  std::filesystem::path classifier_head = "data/models/reference_head.json";
  std::filesystem::path openapi_path = "docs/openapi.json";
  std::filesystem::path static_dir = "webapp/dist";
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  int ws_port = 8081;
  double adapter_timeout_seconds = 10.0;
  AdapterEndpoints adapters;

  /// Parses a JSON object; unknown keys are rejected. Relative paths are
  /// resolved against `base_dir`.
  static Config from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  /// Reads a JSON config file, then applies INNERSELF_* environment
  /// overrides (see apply_env). Relative paths resolve against the file's
  /// directory; relative paths from the environment resolve against the
  /// working directory.
  static Config load(const std::filesystem::path& path);
  /// Defaults with paths resolved against `root`, plus environment overrides.
  static Config defaults(const std::filesystem::path& root);

  /// INNERSELF_<KEY> for each top-level key (upper case) and
  /// INNERSELF_ADAPTERS_<NAME> for adapter endpoints.
  void apply_env(const std::function<std::optional<std::string>(const std::string&)>& getenv);

  nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Time

class Clock {
 public:
  virtual ~Clock() = default;
  /// ISO-8601 UTC timestamp for the given turn index.
  virtual std::string timestamp(std::uint64_t turn_index) = 0;
  /// False when stage latencies must be reported as zero.
  virtual bool measures_latency() const = 0;
};

class SystemClock final : public Clock {
 public:
  std::string timestamp(std::uint64_t turn_index) override;
  bool measures_latency() const override { return true; }
};

/// Deterministic clock for simulate mode: the timestamp is the Unix epoch
/// plus `turn_index` seconds and latencies are reported as zero.
class TurnIndexClock final : public Clock {
 public:
  std::string timestamp(std::uint64_t turn_index) override;
  bool measures_latency() const override { return false; }
};

std::string format_iso8601(std::chrono::system_clock::time_point t);

// ---------------------------------------------------------------------------
// Pipeline resources and adapters

struct Resources {
  LexiconSet lexicons;
  ClassifierHead head;
  StrategyTable strategies;
  Reframer reframer;
  ProsodyTable prosody;

  /// Loads every table named in the config and runs the template and
  /// reframer self-checks. Throws kConfigError or kTableError.
  static Resources load(const Config& config);
};

struct Adapters {
  std::unique_ptr<SpeechToTextAdapter> stt;
  std::unique_ptr<AudioFeatureAdapter> audio_features;
  std::unique_ptr<LanguageModelAdapter> language_model;
  std::unique_ptr<SpeakerEncoderAdapter> speaker_encoder;
  std::unique_ptr<SynthesizerAdapter> synthesizer;
  std::unique_ptr<VocoderAdapter> vocoder;

  static Adapters reference();
  /// Reference implementations or HTTP clients, per the config.
  static Adapters from_config(const Config& config);
};

// ---------------------------------------------------------------------------
// Engine

enum class AudioMode { kAuto, kOn, kOff };
AudioMode audio_mode_from_string(std::string_view name);

struct StageLatency {
  std::string stage;
  double ms = 0.0;
};

struct TurnOutcome {
  std::string session_id;
  std::uint64_t turn_index = 0;  // index of the user turn record
  std::string transcript;
  EmotionResult emotion;
  StrategyRef strategy;
  std::string response_text;
  ConstraintReport constraint_report;
  std::size_t adapter_calls = 0;
  bool used_fallback = false;
  ProsodyParams prosody;
  std::optional<std::string> response_audio_ref;
  std::optional<nlohmann::json> audio_error;  // {"code", "message"} when synthesis failed
  std::size_t pending_evictions = 0;
  std::vector<StageLatency> latency_ms;
  std::string timestamp;
};
void to_json(nlohmann::json& j, const TurnOutcome& o);

struct SessionInfo {
  SessionMeta meta;
  bool has_voice_profile = false;
  std::uint64_t turn_count = 0;
};
void to_json(nlohmann::json& j, const SessionInfo& s);

struct EnrollmentWarning {
  std::size_t index = 0;
  std::vector<EnrollmentIssue> issues;
};

struct EnrollOutcome {
  VoiceProfile profile;
  std::vector<std::size_t> accepted;
  std::vector<EnrollmentWarning> warnings;
};
void to_json(nlohmann::json& j, const EnrollOutcome& o);

/// Live events for a turn: partial_transcript, emotion, response_text and
/// audio_ready, each a JSON object with an "event" field.
using EventSink = std::function<void(const std::string& session_id, const nlohmann::json& event)>;

class Engine {
 public:
  Engine(Config config, Resources resources, Adapters adapters, SessionStore& store, Clock& clock);

  const Config& config() const noexcept { return config_; }
  const Resources& resources() const noexcept { return resources_; }
  SessionStore& store() noexcept { return store_; }

  /// Creates a session; a random id is generated when none is given.
  SessionInfo create_session(const std::string& user_name, std::optional<std::string> session_id = {});
  SessionInfo session_info(const std::string& session_id);
  std::vector<std::string> list_sessions() { return store_.list_sessions(); }

  /// Validates every sample, embeds the accepted ones and persists the
  /// profile. Throws kNoValidSamples (details {"warnings"}) when none pass.
  EnrollOutcome enroll_voice(const std::string& session_id, std::vector<EnrollmentSample> samples);

  /// Runs one turn. Throws kBusy when the session is already processing a
  /// turn, kEmptyUtterance for silent input, and the stage error otherwise.
  /// Once the response text exists the turn is persisted even if synthesis
  /// fails; the failure is reported in audio_error.
  TurnOutcome process_turn(const std::string& session_id, const AudioClip& user_audio,
                           AudioMode audio = AudioMode::kAuto);

  std::vector<TurnRecord> history(const std::string& session_id);
  std::vector<TrajectoryPoint> trajectory(const std::string& session_id);
  nlohmann::json export_session(const std::string& session_id, bool include_audio);
  std::string reconstruct_transcript(const std::string& session_id);

  std::vector<ActionPlan> plans(const std::string& session_id);
  ActionPlan add_plan(const std::string& session_id, std::string description, std::vector<std::string> steps);
  ActionPlan update_plan_step(const std::string& session_id, const std::string& plan_id, std::size_t step,
                              bool done);
  ActionPlan abandon_plan(const std::string& session_id, const std::string& plan_id);

  /// Registers a listener for live events; returns a handle for unsubscribe.
  std::uint64_t subscribe(const std::string& session_id, EventSink sink);
  void unsubscribe(std::uint64_t handle);

 private:
  struct Slot {
    std::mutex mu;
    std::optional<SessionLog> log;
    std::optional<VoiceProfile> profile;
  };
  std::shared_ptr<Slot> slot(const std::string& session_id);
  SessionLog& log_of(Slot& slot, const std::string& session_id);
  void publish(const std::string& session_id, const nlohmann::json& event);

  Config config_;
  Resources resources_;
  Adapters adapters_;
  SessionStore& store_;
  Clock& clock_;

  std::mutex slots_mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;

  std::mutex sinks_mu_;
  std::uint64_t next_sink_ = 1;
  std::map<std::uint64_t, std::pair<std::string, EventSink>> sinks_;
};

// ---------------------------------------------------------------------------
// Offline simulation

/// One directive of a simulation script.
struct ScriptStep {
  enum class Kind { kUser, kSeed, kEnroll, kPlan, kStep, kTurn };
  Kind kind = Kind::kTurn;
  std::size_t line = 0;
  std::string text;                       // user name or plan description
  std::filesystem::path wav;              // turn
  std::vector<std::string> items;         // enroll paths or plan steps
  std::string plan_id;                    // step
  std::size_t index = 0;                  // step index or seed
  bool flag = false;                      // step done
};

/// Line-oriented script. Blank lines and '#' comments are ignored.
///   user <name>
///   seed <n>
///   enroll <wav> [<wav> ...]
///   plan <description> | <step> | <step> ...
///   step <plan_id> <index> done|open
///   turn <wav>
/// WAV paths are relative to the script's directory and must exist. Throws
/// kScriptParseError with details {"line", "path"?}.
std::vector<ScriptStep> parse_script(std::string_view text, const std::filesystem::path& base_dir);
std::vector<ScriptStep> load_script(const std::filesystem::path& path);

struct SimulationResult {
  std::size_t turns = 0;
  bool all_constraints_pass = true;
  std::string session_id;
};

/// Runs the script against a fresh session with the engine's adapters and
/// writes one JSON line per turn. The session id is "sim-<seed>".
SimulationResult simulate(Engine& engine, const std::vector<ScriptStep>& script, std::ostream& out);

}  // namespace innerself
