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

#include <doctest.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <sstream>
#include <thread>

#include "support.hpp"

using namespace innerself;
using innerself::testing::demo_script;
using innerself::testing::enrollment_fixtures;
using innerself::testing::fixture;
using innerself::testing::Harness;
using innerself::testing::sine;
using innerself::testing::TempDir;
using innerself::testing::test_config;

namespace {

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const innerself::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::string run_demo(const std::filesystem::path& dir) {
  Harness h(dir);
  std::ostringstream out;
  const auto result = simulate(h.engine, load_script(demo_script()), out);
  CHECK(result.turns == 10);
  CHECK(result.all_constraints_pass);
  CHECK(result.session_id == "sim-7");
  return out.str();
}

// Blocks inside complete() until released.
struct GateModel final : LanguageModelAdapter {
  std::mutex mu;
  std::condition_variable cv;
  bool entered = false;
  bool released = false;
  ReferenceLanguageModel inner;
  std::string complete(const std::string& prompt) override {
    std::unique_lock lock(mu);
    entered = true;
    cv.notify_all();
    cv.wait(lock, [&] { return released; });
    return inner.complete(prompt);
  }
};

struct BrokenSynth final : SynthesizerAdapter {
  MelSpectrogram synthesize(const std::string&, const VoiceProfile&, const ProsodyParams&) override {
    throw Error(ErrorCode::kAdapterUnavailable, "synthesizer down");
  }
};

}  // namespace

TEST_CASE("worked example through the full pipeline") {
  TempDir dir;
  Harness h(dir.path());
  h.engine.create_session("Alex", std::string("worked"));
  const auto clip = read_wav(fixture("worked_example.wav"));
  const auto out = h.engine.process_turn("worked", clip);
  CHECK(out.transcript == "I CAN'T EVER get things done on time. I'll NEVER be good at this.");
  CHECK(out.emotion.dominant == EmotionLabel::kAnxiety);
  CHECK(out.strategy.id == StrategyId::kImmediateReframe);
  CHECK(out.response_text.find("I OCCASIONALLY struggle with deadlines. I CAN get better at this.") !=
        std::string::npos);
  CHECK(out.constraint_report.all_pass());
  CHECK(out.adapter_calls == 1);
  CHECK_FALSE(out.used_fallback);
  CHECK(out.turn_index == 0);
  CHECK(out.timestamp == "1970-01-01T00:00:00.000Z");
  CHECK_FALSE(out.response_audio_ref);  // no profile yet
  for (const auto& l : out.latency_ms) CHECK(l.ms == 0.0);
  const auto history = h.engine.history("worked");
  REQUIRE(history.size() == 2);
  CHECK(history[1].text == out.response_text);
  CHECK(h.engine.reconstruct_transcript("worked") ==
        "U: " + out.transcript + "\nS: " + out.response_text + "\n");
}

TEST_CASE("empty and unknown inputs") {
  TempDir dir;
  Harness h(dir.path());
  h.engine.create_session("Alex", std::string("e"));
  CHECK(code_of([&] { h.engine.process_turn("e", AudioClip(std::vector<double>(16000, 0.0), 16000)); }) ==
        ErrorCode::kEmptyUtterance);
  // Audible but unannotated: the reference recognizer hears nothing.
  CHECK(code_of([&] { h.engine.process_turn("e", sine(200, 0.5, 16000)); }) == ErrorCode::kEmptyUtterance);
  CHECK(h.engine.history("e").empty());
  CHECK(code_of([&] { h.engine.process_turn("nobody", read_wav(fixture("neutral_1.wav"))); }) ==
        ErrorCode::kUnknownSession);
  CHECK(code_of([&] { h.engine.session_info("nobody"); }) == ErrorCode::kUnknownSession);
  CHECK(code_of([&] { h.engine.create_session("Alex", std::string("e")); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("user names that would break template constraints are refused") {
  TempDir dir;
  Harness h(dir.path());
  for (const char* bad : {"", "   ", "I", "you", "Never", "Sad Sam", "me too"}) {
    CAPTURE(bad);
    CHECK(code_of([&] { h.engine.create_session(bad); }) == ErrorCode::kInvalidArgument);
  }
  CHECK(code_of([&] { h.engine.create_session(std::string(65, 'a')); }) == ErrorCode::kInvalidArgument);
  CHECK(h.engine.create_session("Ana Mar\xC3\xAD" "a").meta.user_name == "Ana Mar\xC3\xAD" "a");
  CHECK(h.engine.create_session("Alex").meta.session_id.size() > 8);
}

TEST_CASE("simulate is byte-identical across runs and fast") {
  TempDir a;
  TempDir b;
  const auto start = std::chrono::steady_clock::now();
  const auto first = run_demo(a.path());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto second = run_demo(b.path());
  CHECK(first == second);
  CHECK(seconds < 5.0);
  std::istringstream lines(first);
  std::string line;
  std::size_t n = 0;
  std::vector<std::string> strategies;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("turn_index") == 2 * n);
    for (const auto& [name, ok] : j.at("constraint_report").items()) CHECK(ok == true);
    CHECK(j.contains("response_audio_ref"));
    strategies.push_back(j.at("strategy").at("id").get<std::string>());
    ++n;
  }
  CHECK(n == 10);
  for (const char* s : {"immediate_reframe", "affirmation_support", "cognitive_restructuring", "action_plan"}) {
    CAPTURE(s);
    CHECK(std::find(strategies.begin(), strategies.end(), s) != strategies.end());
  }
}

TEST_CASE("script parsing errors carry the line") {
  const auto base = demo_script().parent_path();
  auto line_of = [&](const std::string& text) -> long {
    try {
      parse_script(text, base);
    } catch (const innerself::Error& e) {
      CHECK(e.code() == ErrorCode::kScriptParseError);
      return e.details().at("line").get<long>();
    }
    return -1;
  };
  CHECK(parse_script("", base).empty());
  CHECK(parse_script("# only a comment\n\n", base).empty());
  CHECK(line_of("user Sam\n\nturn ../fixtures/does_not_exist.wav\n") == 3);
  CHECK(line_of("dance now\n") == 1);
  CHECK(line_of("turn ../fixtures/neutral_1.wav\nseed 3\n") == 2);
  CHECK(line_of("seed -1\n") == 1);
  CHECK(line_of("plan only a description\n") == 1);
  CHECK(line_of("step plan-1 0 maybe\n") == 1);
  CHECK(line_of("turn a.wav b.wav\n") == 1);
  const auto steps = parse_script("plan Walk | shoes | door\nstep plan-1 1 done\n", base);
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].items == std::vector<std::string>{"shoes", "door"});
  CHECK(steps[1].flag);
  CHECK(steps[1].index == 1);
  CHECK(code_of([] { load_script("/nonexistent/script.txt"); }) == ErrorCode::kScriptParseError);

  TempDir dir;
  Harness h(dir.path());
  std::ostringstream out;
  const auto r = simulate(h.engine, {}, out);
  CHECK(r.turns == 0);
  CHECK(out.str().empty());
}

TEST_CASE("voice enrollment") {
  TempDir dir;
  Harness h(dir.path());
  h.engine.create_session("Alex", std::string("v"));
  auto samples = enrollment_fixtures();
  samples.push_back({sine(180, 0.5, 4000), "too short", false});
  const auto out = h.engine.enroll_voice("v", samples);
  CHECK(out.accepted == std::vector<std::size_t>{0, 1, 2});
  REQUIRE(out.warnings.size() == 1);
  CHECK(out.warnings[0].index == 3);
  CHECK(out.profile.sample_count == 3);
  CHECK(h.engine.session_info("v").has_voice_profile);

  try {
    h.engine.enroll_voice("v", {{sine(180, 0.5, 4000), "", false}});
    FAIL("expected rejection");
  } catch (const innerself::Error& e) {
    CHECK(e.code() == ErrorCode::kNoValidSamples);
    CHECK(e.details().at("warnings").size() == 1);
  }
  CHECK(code_of([&] { h.engine.enroll_voice("v", {}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("audio output follows the voice profile") {
  TempDir dir;
  Harness h(dir.path());
  h.engine.create_session("Alex", std::string("a"));
  const auto clip = read_wav(fixture("anger_1.wav"));
  CHECK(code_of([&] { h.engine.process_turn("a", clip, AudioMode::kOn); }) == ErrorCode::kNoVoiceProfile);
  CHECK(h.engine.history("a").empty());

  h.engine.enroll_voice("a", enrollment_fixtures());
  const auto out = h.engine.process_turn("a", clip);
  REQUIRE(out.response_audio_ref);
  CHECK_FALSE(out.audio_error);
  const auto bytes = h.store.get_audio(*out.response_audio_ref);
  REQUIRE(bytes);
  const auto wav = decode_wav(*bytes);
  CHECK(wav.sample_rate() == kCanonicalSampleRate);
  CHECK(wav.size() > 0);
  CHECK(h.engine.history("a")[1].audio_ref == out.response_audio_ref);
  CHECK_FALSE(h.engine.process_turn("a", clip, AudioMode::kOff).response_audio_ref);
}

TEST_CASE("a failing synthesizer still records the turn") {
  TempDir dir;
  auto adapters = Adapters::reference();
  adapters.synthesizer = std::make_unique<BrokenSynth>();
  Harness h(dir.path(), std::move(adapters));
  h.engine.create_session("Alex", std::string("s"));
  h.engine.enroll_voice("s", enrollment_fixtures());
  const auto out = h.engine.process_turn("s", read_wav(fixture("neutral_1.wav")));
  REQUIRE(out.audio_error);
  CHECK(out.audio_error->at("code") == "ADAPTER_UNAVAILABLE");
  CHECK_FALSE(out.response_audio_ref);
  CHECK(h.engine.history("s").size() == 2);
}

TEST_CASE("a second turn on a busy session is refused") {
  TempDir dir;
  auto adapters = Adapters::reference();
  auto gate = std::make_unique<GateModel>();
  auto* g = gate.get();
  adapters.language_model = std::move(gate);
  Harness h(dir.path(), std::move(adapters));
  h.engine.create_session("Alex", std::string("b"));
  const auto clip = read_wav(fixture("neutral_1.wav"));
  std::thread first([&] { h.engine.process_turn("b", clip); });
  {
    std::unique_lock lock(g->mu);
    g->cv.wait(lock, [&] { return g->entered; });
  }
  CHECK(code_of([&] { h.engine.process_turn("b", clip); }) == ErrorCode::kBusy);
  {
    std::lock_guard lock(g->mu);
    g->released = true;
  }
  g->cv.notify_all();
  first.join();
  CHECK(h.engine.history("b").size() == 2);
}

TEST_CASE("chunk write failures leave evictions pending until the next turn") {
  TempDir dir;
  FileStore disk(dir.path());
  FaultInjectingStore store(disk);
  auto config = test_config(dir.path());
  config.alpha = 40;
  TurnIndexClock clock;
  Engine engine(config, Resources::load(config), Adapters::reference(), store, clock);
  engine.create_session("Alex", std::string("f"));
  store.fail_chunk_write_at(0);
  const auto first = engine.process_turn("f", read_wav(fixture("neutral_1.wav")));
  CHECK(first.pending_evictions > 0);
  CHECK(disk.chunk_count("f") == 0);
  const auto second = engine.process_turn("f", read_wav(fixture("neutral_2.wav")));
  CHECK(second.pending_evictions == 0);
  CHECK(disk.chunk_count("f") == 1);
  std::string log;
  for (const auto& t : engine.history("f")) log += buffer_line(t);
  CHECK(reconstruct_transcript(disk, "f") == log);
  CHECK(engine.reconstruct_transcript("f") == log);
}

TEST_CASE("live events arrive in pipeline order") {
  TempDir dir;
  Harness h(dir.path());
  h.engine.create_session("Alex", std::string("l"));
  h.engine.enroll_voice("l", enrollment_fixtures());
  std::vector<std::string> seen;
  const auto handle = h.engine.subscribe("l", [&](const std::string& id, const nlohmann::json& e) {
    CHECK(id == "l");
    seen.push_back(e.at("event").get<std::string>());
  });
  h.engine.subscribe("other", [&](const std::string&, const nlohmann::json&) { FAIL("wrong session"); });
  h.engine.process_turn("l", read_wav(fixture("sadness_1.wav")));
  CHECK(seen == std::vector<std::string>{"partial_transcript", "emotion", "response_text", "audio_ready"});
  h.engine.unsubscribe(handle);
  h.engine.process_turn("l", read_wav(fixture("sadness_2.wav")));
  CHECK(seen.size() == 4);
}

TEST_CASE("config parsing and environment overrides") {
  const auto root = innerself::testing::source_dir();
  CHECK(code_of([&] { Config::from_json({{"colour", "blue"}}, root); }) == ErrorCode::kConfigError);
  CHECK(code_of([&] { Config::from_json({{"adapters", {{"mind_reader", "x"}}}}, root); }) == ErrorCode::kConfigError);
  CHECK(code_of([&] { Config::from_json({{"alpha", 0}}, root); }) == ErrorCode::kConfigError);
  CHECK(code_of([&] { Config::from_json({{"port", "eighty"}}, root); }) == ErrorCode::kConfigError);
  CHECK(code_of([&] { Config::from_json(nlohmann::json::array(), root); }) == ErrorCode::kConfigError);

  auto c = Config::from_json({{"data_dir", "sessions"}, {"alpha", 100}}, "/base");
  CHECK(c.data_dir == std::filesystem::path("/base/sessions"));
  CHECK(c.alpha == 100);
  const std::map<std::string, std::string> env = {{"INNERSELF_ALPHA", "12"},
                                                  {"INNERSELF_PORT", "9000"},
                                                  {"INNERSELF_DATA_DIR", "/srv/data"},
                                                  {"INNERSELF_ADAPTERS_STT", "http://localhost:9999"}};
  c.apply_env([&](const std::string& k) -> std::optional<std::string> {
    const auto it = env.find(k);
    return it == env.end() ? std::nullopt : std::optional<std::string>(it->second);
  });
  CHECK(c.alpha == 12);
  CHECK(c.port == 9000);
  CHECK(c.data_dir == std::filesystem::path("/srv/data"));
  CHECK(c.adapters.stt == "http://localhost:9999");
  CHECK(c.adapters.vocoder == "reference");
  CHECK(code_of([&] {
          c.apply_env([](const std::string& k) -> std::optional<std::string> {
            return k == "INNERSELF_ALPHA" ? std::optional<std::string>("many") : std::nullopt;
          });
        }) == ErrorCode::kConfigError);

  const auto shipped = Config::load(root / "config" / "innerself.json");
  CHECK(std::filesystem::weakly_canonical(shipped.lexicon_dir) ==
        std::filesystem::weakly_canonical(root / "data" / "lexicons"));
  CHECK_NOTHROW(Resources::load(shipped));
  CHECK(code_of([] { Config::load("/nonexistent/innerself.json"); }) == ErrorCode::kConfigError);
}

TEST_CASE("plans through the engine steer the action-plan strategy") {
  TempDir dir;
  Harness h(dir.path());
  h.engine.create_session("Alex", std::string("p"));
  const auto plan = h.engine.add_plan("p", "Finish the report", {"outline the report", "draft the summary"});
  CHECK(plan.plan_id == "plan-1");
  auto out = h.engine.process_turn("p", read_wav(fixture("neutral_1.wav")));
  CHECK(out.strategy.id == StrategyId::kActionPlan);
  CHECK(out.response_text.find("outline the report") != std::string::npos);
  h.engine.update_plan_step("p", "plan-1", 0, true);
  out = h.engine.process_turn("p", read_wav(fixture("neutral_2.wav")));
  CHECK(out.response_text.find("draft the summary") != std::string::npos);
  h.engine.abandon_plan("p", "plan-1");
  out = h.engine.process_turn("p", read_wav(fixture("neutral_1.wav")));
  CHECK(out.strategy.id == StrategyId::kSmallTalk);
  CHECK(code_of([&] { h.engine.update_plan_step("p", "plan-7", 0, true); }).has_value());
  CHECK(h.engine.trajectory("p").size() == 3);
}
