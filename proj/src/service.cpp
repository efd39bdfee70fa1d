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

#include "innerself/service.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "innerself/error.hpp"
#include "innerself/http_adapters.hpp"
#include "innerself/utf8.hpp"

namespace innerself {
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

// Re-throws a stage failure with the stage name attached to its details.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    auto details = e.details().is_object() ? e.details() : nlohmann::json::object();
    details["stage"] = name;
    throw Error(e.code(), e.what(), details);
  }
}

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  // Milliseconds since the previous lap (0 when disabled).
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return enabled_ ? ms : 0.0;
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

std::string random_session_id() {
  std::random_device rd;
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  for (int i = 0; i < 16; ++i) id.push_back(kHex[rd() & 0xF]);
  return id;
}

// Last `limit` scalars of the buffer, for the prompt's context block.
std::string tail_scalars(const std::string& text, std::size_t limit) {
  const std::size_t n = utf8::scalar_count(text);
  if (n <= limit) return text;
  return text.substr(utf8::byte_offset_of_scalar(text, n - limit));
}

}  // namespace

// ---------------------------------------------------------------------------

Config Config::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  static const std::vector<std::string> kKeys = {
      "data_dir",      "alpha",          "lexicon_dir",  "strategy_table", "substitution_table",
      "prosody_table", "classifier_head", "openapi_path", "static_dir",     "bind_address",
      "port",          "ws_port",        "adapter_timeout_seconds", "adapters"};
  static const std::vector<std::string> kAdapterKeys = {"stt",          "audio_features", "language_model",
                                                        "speaker_encoder", "synthesizer", "vocoder"};
  if (!j.is_object()) throw Error(ErrorCode::kConfigError, "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw Error(ErrorCode::kConfigError, "unknown config key: " + key);
    }
  }
  Config c;
  try {
    auto path_of = [&](const char* key, fs::path& field) {
      field = resolve(base_dir, j.contains(key) ? fs::path(j.at(key).get<std::string>()) : field);
    };
    path_of("data_dir", c.data_dir);
    path_of("lexicon_dir", c.lexicon_dir);
    path_of("strategy_table", c.strategy_table);
    path_of("substitution_table", c.substitution_table);
    path_of("prosody_table", c.prosody_table);
    path_of("classifier_head", c.classifier_head);
    path_of("openapi_path", c.openapi_path);
    path_of("static_dir", c.static_dir);
    c.alpha = j.value("alpha", c.alpha);
    c.bind_address = j.value("bind_address", c.bind_address);
    c.port = j.value("port", c.port);
    c.ws_port = j.value("ws_port", c.ws_port);
    c.adapter_timeout_seconds = j.value("adapter_timeout_seconds", c.adapter_timeout_seconds);
    if (j.contains("adapters")) {
      const auto& a = j.at("adapters");
      for (const auto& [key, _] : a.items()) {
        if (std::find(kAdapterKeys.begin(), kAdapterKeys.end(), key) == kAdapterKeys.end()) {
          throw Error(ErrorCode::kConfigError, "unknown adapter: " + key);
        }
      }
      c.adapters.stt = a.value("stt", c.adapters.stt);
      c.adapters.audio_features = a.value("audio_features", c.adapters.audio_features);
      c.adapters.language_model = a.value("language_model", c.adapters.language_model);
      c.adapters.speaker_encoder = a.value("speaker_encoder", c.adapters.speaker_encoder);
      c.adapters.synthesizer = a.value("synthesizer", c.adapters.synthesizer);
      c.adapters.vocoder = a.value("vocoder", c.adapters.vocoder);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("config: ") + e.what());
  }
  if (c.alpha == 0) throw Error(ErrorCode::kConfigError, "alpha must be positive");
  if (c.adapter_timeout_seconds <= 0.0) throw Error(ErrorCode::kConfigError, "adapter timeout must be positive");
  return c;
}

Config Config::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
  Config c = from_json(j, fs::absolute(path).parent_path());
  c.apply_env(process_env);
  return c;
}

Config Config::defaults(const fs::path& root) {
  Config c = from_json(nlohmann::json::object(), fs::absolute(root));
  c.apply_env(process_env);
  return c;
}

void Config::apply_env(const std::function<std::optional<std::string>(const std::string&)>& getenv) {
  nlohmann::json j = to_json();
  try {
    for (auto& [key, value] : j.items()) {
      if (key == "adapters") {
        for (auto& [name, endpoint] : value.items()) {
          if (auto v = getenv("INNERSELF_ADAPTERS_" + upper(name))) endpoint = *v;
        }
        continue;
      }
      const auto v = getenv("INNERSELF_" + upper(key));
      if (!v) continue;
      if (value.is_number_integer()) {
        value = std::stoll(*v);
      } else if (value.is_number()) {
        value = std::stod(*v);
      } else {
        value = *v;
      }
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kConfigError, "malformed numeric INNERSELF_* override");
  }
  *this = from_json(j, fs::current_path());
}

nlohmann::json Config::to_json() const {
  return {{"data_dir", data_dir.string()},
          {"alpha", alpha},
          {"lexicon_dir", lexicon_dir.string()},
          {"strategy_table", strategy_table.string()},
          {"substitution_table", substitution_table.string()},
          {"prosody_table", prosody_table.string()},
          {"classifier_head", classifier_head.string()},
          {"openapi_path", openapi_path.string()},
          {"static_dir", static_dir.string()},
          {"bind_address", bind_address},
          {"port", port},
          {"ws_port", ws_port},
          {"adapter_timeout_seconds", adapter_timeout_seconds},
          {"adapters",
           {{"stt", adapters.stt},
            {"audio_features", adapters.audio_features},
            {"language_model", adapters.language_model},
            {"speaker_encoder", adapters.speaker_encoder},
            {"synthesizer", adapters.synthesizer},
            {"vocoder", adapters.vocoder}}}};
}

// ---------------------------------------------------------------------------

std::string format_iso8601(std::chrono::system_clock::time_point t) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
  return out;
}

std::string SystemClock::timestamp(std::uint64_t /*turn_index*/) {
  return format_iso8601(std::chrono::system_clock::now());
}

std::string TurnIndexClock::timestamp(std::uint64_t turn_index) {
  return format_iso8601(std::chrono::system_clock::time_point(std::chrono::seconds(turn_index)));
}

// ---------------------------------------------------------------------------

Resources Resources::load(const Config& config) {
  auto lexicons = LexiconSet::load(config.lexicon_dir);
  auto head = ClassifierHead::load(config.classifier_head);
  if (head.input_dim() != kReferenceAudioDim + kReferenceTextDim && config.adapters.audio_features == "reference") {
    throw Error(ErrorCode::kConfigError, "classifier head does not match the reference feature dimension",
                {{"head_dim", head.input_dim()}});
  }
  auto strategies = StrategyTable::load(config.strategy_table);
  strategies.check_templates(lexicons);
  Reframer reframer(lexicons.absolutes, SubstitutionTable::load(config.substitution_table));
  auto prosody = ProsodyTable::load(config.prosody_table);
  return Resources{std::move(lexicons), std::move(head), std::move(strategies), std::move(reframer),
                   std::move(prosody)};
}

Adapters Adapters::reference() {
  Adapters a;
  a.stt = std::make_unique<ReferenceSpeechToText>();
  a.audio_features = std::make_unique<ReferenceAudioFeatures>();
  a.language_model = std::make_unique<ReferenceLanguageModel>();
  a.speaker_encoder = std::make_unique<ReferenceSpeakerEncoder>();
  a.synthesizer = std::make_unique<ReferenceSynthesizer>();
  a.vocoder = std::make_unique<ReferenceVocoder>();
  return a;
}

Adapters Adapters::from_config(const Config& config) {
  Adapters a = reference();
  const auto& e = config.adapters;
  const double t = config.adapter_timeout_seconds;
  auto remote = [&](const std::string& url) { return url != "reference"; };
  if (remote(e.stt)) a.stt = std::make_unique<HttpSpeechToText>(HttpEndpoint("stt", e.stt, t));
  if (remote(e.audio_features)) {
    a.audio_features = std::make_unique<HttpAudioFeatures>(HttpEndpoint("audio_features", e.audio_features, t), 0);
  }
  if (remote(e.language_model)) {
    a.language_model = std::make_unique<HttpLanguageModel>(HttpEndpoint("language_model", e.language_model, t));
  }
  if (remote(e.speaker_encoder)) {
    a.speaker_encoder = std::make_unique<HttpSpeakerEncoder>(HttpEndpoint("speaker_encoder", e.speaker_encoder, t));
  }
  if (remote(e.synthesizer)) {
    a.synthesizer = std::make_unique<HttpSynthesizer>(HttpEndpoint("synthesizer", e.synthesizer, t));
  }
  if (remote(e.vocoder)) a.vocoder = std::make_unique<HttpVocoder>(HttpEndpoint("vocoder", e.vocoder, t));
  return a;
}

// ---------------------------------------------------------------------------

AudioMode audio_mode_from_string(std::string_view name) {
  if (name.empty() || name == "auto") return AudioMode::kAuto;
  if (name == "true" || name == "on" || name == "1") return AudioMode::kOn;
  if (name == "false" || name == "off" || name == "0") return AudioMode::kOff;
  throw Error(ErrorCode::kInvalidArgument, "audio must be auto, true or false");
}

void to_json(nlohmann::json& j, const TurnOutcome& o) {
  nlohmann::json latency = nlohmann::json::object();
  for (const auto& l : o.latency_ms) latency[l.stage] = l.ms;
  j = {{"session_id", o.session_id},
       {"turn_index", o.turn_index},
       {"transcript", o.transcript},
       {"emotion", o.emotion},
       {"strategy", {{"id", to_string(o.strategy.id)}, {"step", o.strategy.step}}},
       {"response_text", o.response_text},
       {"constraint_report", o.constraint_report},
       {"adapter_calls", o.adapter_calls},
       {"used_fallback", o.used_fallback},
       {"prosody", o.prosody},
       {"response_audio_ref", o.response_audio_ref ? nlohmann::json(*o.response_audio_ref) : nlohmann::json()},
       {"pending_evictions", o.pending_evictions},
       {"latency_ms", latency},
       {"timestamp", o.timestamp}};
  if (o.audio_error) j["audio_error"] = *o.audio_error;
}

void to_json(nlohmann::json& j, const SessionInfo& s) {
  j = {{"session_id", s.meta.session_id},
       {"user_name", s.meta.user_name},
       {"created_at", s.meta.created_at},
       {"alpha", s.meta.alpha},
       {"has_voice_profile", s.has_voice_profile},
       {"turn_count", s.turn_count}};
}

void to_json(nlohmann::json& j, const EnrollOutcome& o) {
  nlohmann::json warnings = nlohmann::json::array();
  for (const auto& w : o.warnings) {
    nlohmann::json issues = nlohmann::json::array();
    for (auto i : w.issues) issues.push_back(std::string(to_string(i)));
    warnings.push_back({{"index", w.index}, {"issues", issues}});
  }
  j = {{"profile",
        {{"sample_count", o.profile.sample_count},
         {"created_at", o.profile.created_at},
         {"embedding_dim", o.profile.embedding.size()}}},
       {"accepted", o.accepted},
       {"warnings", warnings}};
}

Engine::Engine(Config config, Resources resources, Adapters adapters, SessionStore& store, Clock& clock)
    : config_(std::move(config)),
      resources_(std::move(resources)),
      adapters_(std::move(adapters)),
      store_(store),
      clock_(clock) {}

std::shared_ptr<Engine::Slot> Engine::slot(const std::string& session_id) {
  std::lock_guard lock(slots_mu_);
  auto it = slots_.find(session_id);
  if (it != slots_.end()) return it->second;
  if (!store_.session_exists(session_id)) {
    throw Error(ErrorCode::kUnknownSession, "unknown session", {{"session_id", session_id}});
  }
  auto s = std::make_shared<Slot>();
  slots_.emplace(session_id, s);
  return s;
}

SessionLog& Engine::log_of(Slot& s, const std::string& session_id) {
  if (!s.log) {
    s.log.emplace(SessionLog::open(store_, session_id));
    s.profile = store_.read_profile(session_id);
  }
  return *s.log;
}

SessionInfo Engine::create_session(const std::string& user_name, std::optional<std::string> session_id) {
  if (user_name.empty()) throw Error(ErrorCode::kInvalidArgument, "user_name must not be empty");
  utf8::require_valid(user_name);
  // The name is spliced into templates, so it must not break their constraints.
  const auto tokens = tokenize(user_name);
  const auto& lex = resources_.lexicons;
  const bool unusable =
      tokens.empty() || utf8::scalar_count(user_name) > 64 || !lex.absolutes.find_all(user_name).empty() ||
      !lex.negative.find_all(user_name).empty() ||
      std::any_of(tokens.begin(), tokens.end(),
                  [](const Token& t) { return is_first_person_singular(t.lower) || is_second_person(t.lower); });
  if (unusable) {
    throw Error(ErrorCode::kInvalidArgument,
                "user_name must be 1-64 characters with a word and no pronouns, absolute or negative terms",
                {{"user_name", user_name}});
  }
  SessionMeta meta{session_id.value_or(random_session_id()), user_name, clock_.timestamp(0), config_.alpha};
  auto log = SessionLog::create(store_, meta);
  auto s = std::make_shared<Slot>();
  s->log.emplace(std::move(log));
  {
    std::lock_guard lock(slots_mu_);
    slots_[meta.session_id] = s;
  }
  return SessionInfo{meta, false, 0};
}

SessionInfo Engine::session_info(const std::string& session_id) {
  if (!store_.session_exists(session_id)) {
    throw Error(ErrorCode::kUnknownSession, "unknown session", {{"session_id", session_id}});
  }
  return SessionInfo{store_.read_meta(session_id), store_.read_profile(session_id).has_value(),
                     store_.read_turns(session_id).size()};
}

EnrollOutcome Engine::enroll_voice(const std::string& session_id, std::vector<EnrollmentSample> samples) {
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "at least one enrollment sample is required");
  auto s = slot(session_id);
  std::unique_lock lock(s->mu, std::try_to_lock);
  if (!lock) throw Error(ErrorCode::kBusy, "session is busy", {{"session_id", session_id}});
  auto& log = log_of(*s, session_id);

  EnrollOutcome out;
  std::vector<EnrollmentSample> accepted;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto issues = enrollment_issues(samples[i]);
    if (issues.empty()) {
      samples[i].validated = true;
      accepted.push_back(std::move(samples[i]));
      out.accepted.push_back(i);
    } else {
      out.warnings.push_back({i, std::move(issues)});
    }
  }
  if (accepted.empty()) {
    nlohmann::json j = EnrollOutcome{{}, {}, out.warnings};
    throw Error(ErrorCode::kNoValidSamples, "no enrollment sample passed validation",
                {{"warnings", j.at("warnings")}});
  }
  out.profile = stage("speaker_encoder", [&] {
    return embed_speaker(accepted, *adapters_.speaker_encoder, clock_.timestamp(log.next_turn_index()));
  });
  store_.write_profile(session_id, out.profile);
  s->profile = out.profile;
  return out;
}

TurnOutcome Engine::process_turn(const std::string& session_id, const AudioClip& user_audio, AudioMode mode) {
  auto s = slot(session_id);
  std::unique_lock lock(s->mu, std::try_to_lock);
  if (!lock) throw Error(ErrorCode::kBusy, "a turn is already in progress for this session", {{"session_id", session_id}});
  auto& log = log_of(*s, session_id);
  if (mode == AudioMode::kOn && !s->profile) {
    throw Error(ErrorCode::kNoVoiceProfile, "audio output requested but the session has no voice profile");
  }
  const bool want_audio = s->profile && mode != AudioMode::kOff;

  TurnOutcome out;
  out.session_id = session_id;
  Stopwatch total(clock_.measures_latency());
  Stopwatch watch(clock_.measures_latency());
  auto lap = [&](const char* name) { out.latency_ms.push_back({name, watch.lap()}); };

  if (user_audio.empty() || user_audio.peak() < kSilencePeak) {
    throw Error(ErrorCode::kEmptyUtterance, "no speech in the submitted audio", {{"stage", "transcribe"}});
  }
  try {
    out.transcript = transcribe(user_audio, *adapters_.stt);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kEmptyTranscript || e.code() == ErrorCode::kSilentClip) {
      throw Error(ErrorCode::kEmptyUtterance, "no speech in the submitted audio", {{"stage", "transcribe"}});
    }
    throw Error(e.code(), e.what(), {{"stage", "transcribe"}, {"cause", e.details()}});
  }
  utf8::require_valid(out.transcript);
  lap("transcribe");
  publish(session_id, {{"event", "partial_transcript"}, {"text", out.transcript}});

  const auto& res = resources_;
  const auto fused = stage("features", [&] {
    return fuse(adapters_.audio_features->extract(user_audio), extract_text_features(out.transcript, res.lexicons));
  });
  lap("features");
  out.emotion = stage("classify", [&] { return classify(fused, res.head); });
  lap("classify");
  publish(session_id, {{"event", "emotion"}, {"emotion", out.emotion}});

  const auto history = log.strategy_history();
  const auto strategy = select_strategy(out.emotion, history, res.strategies);
  out.strategy = {strategy.id, strategy.step_index};
  SlotValues slots{log.meta().user_name, history.next_plan_step, ""};
  if (strategy.id == StrategyId::kImmediateReframe && res.reframer.has_absolutes(out.transcript)) {
    slots.reframed_text = res.reframer.reframe(out.transcript);
  }
  auto constraints = res.strategies.spec(strategy.id).constraints;
  constraints.addressee = log.meta().user_name;
  const std::string context = tail_scalars(log.buffer().context_window(), kMaxContextChars);
  const std::string prompt = build_prompt(strategy, context, slots, constraints);
  lap("strategy");

  const auto fallback = fallback_script(strategy, slots, constraints, res.lexicons);
  auto generated = stage("generate", [&] {
    return generate_response(prompt, *adapters_.language_model, constraints, res.lexicons, fallback);
  });
  out.response_text = std::move(generated.text);
  out.constraint_report = generated.report;
  out.adapter_calls = generated.adapter_calls;
  out.used_fallback = generated.used_fallback;
  lap("generate");
  publish(session_id, {{"event", "response_text"}, {"text", out.response_text}, {"strategy", to_string(strategy.id)}});

  out.prosody = prosody_for_emotion(out.emotion, res.prosody);
  lap("prosody");

  // Both lines must fit before anything is persisted.
  const std::size_t limit = 10 * log.buffer().capacity();
  for (const auto* text : {&out.transcript, &out.response_text}) {
    if (utf8::scalar_count(*text) + 4 > limit) {
      throw Error(ErrorCode::kOversizeAppend, "turn text exceeds 10x buffer capacity",
                  {{"limit", limit}, {"stage", "store"}});
    }
  }

  if (want_audio) {
    try {
      const auto mel = stage("synthesize",
                             [&] { return synthesize(out.response_text, *s->profile, *adapters_.synthesizer, out.prosody); });
      lap("synthesize");
      const auto wave = stage("vocode", [&] { return vocode(mel, *adapters_.vocoder); });
      lap("vocode");
      const auto shaped = apply_prosody(wave, out.prosody);
      lap("apply_prosody");
      out.response_audio_ref = store_.put_audio(session_id, encode_wav(shaped));
    } catch (const Error& e) {
      out.audio_error = nlohmann::json{{"code", error_code_name(e.code())}, {"message", e.what()}};
    }
  }

  TurnRecord user;
  user.role = Role::kUser;
  user.text = out.transcript;
  user.emotion = out.emotion;
  user.timestamp = clock_.timestamp(log.next_turn_index());
  user = stage("store", [&] { return log.record_turn(std::move(user)); });
  out.turn_index = user.turn_index;
  out.timestamp = user.timestamp;

  TurnRecord system;
  system.role = Role::kSystem;
  system.text = out.response_text;
  system.strategy = out.strategy;
  system.prosody = out.prosody;
  system.audio_ref = out.response_audio_ref;
  system.timestamp = clock_.timestamp(log.next_turn_index());
  stage("store", [&] { return log.record_turn(std::move(system)); });
  try {
    log.flush_evictions();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kStoreUnavailable) throw;
  }
  out.pending_evictions = log.pending().size();
  lap("store");
  out.latency_ms.push_back({"total", total.lap()});

  if (out.response_audio_ref) {
    publish(session_id, {{"event", "audio_ready"}, {"audio_ref", *out.response_audio_ref}});
  }
  return out;
}

std::vector<TurnRecord> Engine::history(const std::string& session_id) {
  if (!store_.session_exists(session_id)) {
    throw Error(ErrorCode::kUnknownSession, "unknown session", {{"session_id", session_id}});
  }
  return store_.read_turns(session_id);
}

std::vector<TrajectoryPoint> Engine::trajectory(const std::string& session_id) {
  return emotion_trajectory(store_, session_id);
}

nlohmann::json Engine::export_session(const std::string& session_id, bool include_audio) {
  return innerself::export_session(store_, session_id, ExportOptions{include_audio});
}

std::string Engine::reconstruct_transcript(const std::string& session_id) {
  return innerself::reconstruct_transcript(store_, session_id);
}

std::vector<ActionPlan> Engine::plans(const std::string& session_id) {
  if (!store_.session_exists(session_id)) {
    throw Error(ErrorCode::kUnknownSession, "unknown session", {{"session_id", session_id}});
  }
  return store_.read_plans(session_id);
}

ActionPlan Engine::add_plan(const std::string& session_id, std::string description, std::vector<std::string> steps) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  return log_of(*s, session_id).add_plan(std::move(description), std::move(steps));
}

ActionPlan Engine::update_plan_step(const std::string& session_id, const std::string& plan_id, std::size_t step,
                                    bool done) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  return log_of(*s, session_id).update_plan_step(plan_id, step, done);
}

ActionPlan Engine::abandon_plan(const std::string& session_id, const std::string& plan_id) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  return log_of(*s, session_id).abandon_plan(plan_id);
}

std::uint64_t Engine::subscribe(const std::string& session_id, EventSink sink) {
  std::lock_guard lock(sinks_mu_);
  const auto handle = next_sink_++;
  sinks_.emplace(handle, std::make_pair(session_id, std::move(sink)));
  return handle;
}

void Engine::unsubscribe(std::uint64_t handle) {
  std::lock_guard lock(sinks_mu_);
  sinks_.erase(handle);
}

void Engine::publish(const std::string& session_id, const nlohmann::json& event) {
  std::vector<EventSink> targets;
  {
    std::lock_guard lock(sinks_mu_);
    for (const auto& [_, entry] : sinks_) {
      if (entry.first == session_id) targets.push_back(entry.second);
    }
  }
  for (const auto& sink : targets) sink(session_id, event);
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& message, nlohmann::json extra = {}) {
  nlohmann::json details = {{"line", line}};
  if (extra.is_object()) details.update(extra);
  throw Error(ErrorCode::kScriptParseError, "line " + std::to_string(line) + ": " + message, details);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

fs::path existing_wav(std::size_t line, const fs::path& base, const std::string& rel) {
  const fs::path p = resolve(base, rel);
  if (!fs::is_regular_file(p)) parse_error(line, "missing audio file " + p.string(), {{"path", p.string()}});
  return p;
}

}  // namespace

std::vector<ScriptStep> parse_script(std::string_view text, const fs::path& base_dir) {
  std::vector<ScriptStep> steps;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  bool started = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto space = line.find_first_of(" \t");
    const std::string verb = line.substr(0, space);
    const std::string rest = space == std::string::npos ? "" : trim(line.substr(space));
    ScriptStep step;
    step.line = line_no;
    if (verb == "user" || verb == "seed") {
      if (started) parse_error(line_no, "'" + verb + "' must come before enroll, plan, step and turn");
      if (rest.empty()) parse_error(line_no, "'" + verb + "' needs a value");
      if (verb == "user") {
        step.kind = ScriptStep::Kind::kUser;
        step.text = rest;
      } else {
        step.kind = ScriptStep::Kind::kSeed;
        if (!std::all_of(rest.begin(), rest.end(), ::isdigit) || rest.size() > 18) {
          parse_error(line_no, "seed must be a non-negative integer");
        }
        step.index = std::stoull(rest);
      }
    } else if (verb == "enroll") {
      step.kind = ScriptStep::Kind::kEnroll;
      std::istringstream files(rest);
      std::string f;
      while (files >> f) step.items.push_back(existing_wav(line_no, base_dir, f).string());
      if (step.items.empty()) parse_error(line_no, "enroll needs at least one WAV path");
    } else if (verb == "plan") {
      step.kind = ScriptStep::Kind::kPlan;
      std::istringstream parts(rest);
      std::string part;
      std::vector<std::string> fields;
      while (std::getline(parts, part, '|')) fields.push_back(trim(part));
      if (fields.size() < 2 || fields[0].empty()) parse_error(line_no, "plan needs a description and steps");
      step.text = fields[0];
      step.items.assign(fields.begin() + 1, fields.end());
      if (std::any_of(step.items.begin(), step.items.end(), [](const std::string& s) { return s.empty(); })) {
        parse_error(line_no, "plan steps must not be empty");
      }
    } else if (verb == "step") {
      step.kind = ScriptStep::Kind::kStep;
      std::istringstream parts(rest);
      std::string index;
      std::string state;
      std::string extra;
      if (!(parts >> step.plan_id >> index >> state) || (parts >> extra)) {
        parse_error(line_no, "expected: step <plan_id> <index> done|open");
      }
      if (!std::all_of(index.begin(), index.end(), ::isdigit) || index.size() > 9) {
        parse_error(line_no, "step index must be a non-negative integer");
      }
      if (state != "done" && state != "open") parse_error(line_no, "step state must be done or open");
      step.index = std::stoul(index);
      step.flag = state == "done";
    } else if (verb == "turn") {
      step.kind = ScriptStep::Kind::kTurn;
      if (rest.empty() || rest.find_first_of(" \t") != std::string::npos) {
        parse_error(line_no, "turn needs exactly one WAV path");
      }
      step.wav = existing_wav(line_no, base_dir, rest);
    } else {
      parse_error(line_no, "unknown directive '" + verb + "'");
    }
    if (step.kind != ScriptStep::Kind::kUser && step.kind != ScriptStep::Kind::kSeed) started = true;
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<ScriptStep> load_script(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kScriptParseError, "cannot read script " + path.string(), {{"line", 0}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_script(ss.str(), fs::absolute(path).parent_path());
}

SimulationResult simulate(Engine& engine, const std::vector<ScriptStep>& script, std::ostream& out) {
  SimulationResult result;
  std::string user = "Alex";
  std::uint64_t seed = 0;
  bool created = false;
  auto ensure_session = [&] {
    if (created) return;
    result.session_id = "sim-" + std::to_string(seed);
    engine.create_session(user, result.session_id);
    created = true;
  };
  for (const auto& step : script) {
    switch (step.kind) {
      case ScriptStep::Kind::kUser:
        user = step.text;
        break;
      case ScriptStep::Kind::kSeed:
        seed = step.index;
        break;
      case ScriptStep::Kind::kEnroll: {
        ensure_session();
        std::vector<EnrollmentSample> samples;
        for (const auto& f : step.items) {
          auto clip = read_wav(f);
          std::string transcript = clip.annotation();
          samples.push_back({std::move(clip), std::move(transcript), false});
        }
        engine.enroll_voice(result.session_id, std::move(samples));
        break;
      }
      case ScriptStep::Kind::kPlan:
        ensure_session();
        engine.add_plan(result.session_id, step.text, step.items);
        break;
      case ScriptStep::Kind::kStep:
        ensure_session();
        engine.update_plan_step(result.session_id, step.plan_id, step.index, step.flag);
        break;
      case ScriptStep::Kind::kTurn: {
        ensure_session();
        const auto outcome = engine.process_turn(result.session_id, read_wav(step.wav));
        out << nlohmann::json(outcome).dump() << "\n";
        ++result.turns;
        result.all_constraints_pass = result.all_constraints_pass && outcome.constraint_report.all_pass();
        break;
      }
    }
  }
  out.flush();
  return result;
}

}  // namespace innerself
