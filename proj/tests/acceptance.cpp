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

// Acceptance run: one PASS/FAIL line per primary criterion. Exit status is
// non-zero when any criterion fails.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "corpus.hpp"
#include "innerself/utf8.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace innerself;
using namespace innerself::testing;

namespace {

// Pinned tolerances.
constexpr double kSoftmaxSumTol = 1e-9;
constexpr double kShiftTol = 1e-6;
constexpr double kOracleTol = 1e-12;
constexpr double kLog4Tol = 1e-6;
constexpr double kNonFloorPower = 1e-4;
constexpr double kMelOracleTol = 1e-6;
constexpr long kRoundTripBins = 1;
constexpr double kBufferSeconds = 10.0;
constexpr double kSimulateSeconds = 5.0;
constexpr double kProsodyTol = 1e-12;

constexpr std::string_view kWorkedInput = "I CAN'T EVER get things done on time. I'll NEVER be good at this.";
constexpr std::string_view kWorkedReframe = "I OCCASIONALLY struggle with deadlines. I CAN get better at this.";

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure; later ones are counted.
struct Checker {
  Outcome out;
  std::size_t failures = 0;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures++ == 0) out.detail = what;
    out.pass = false;
  }
  Outcome done(std::string summary) {
    if (out.pass) {
      out.detail = std::move(summary);
    } else if (failures > 1) {
      out.detail += " (+" + std::to_string(failures - 1) + " more)";
    }
    return out;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Tables {
  LexiconSet lexicons = LexiconSet::load(source_dir() / "data" / "lexicons");
  StrategyTable strategies = StrategyTable::load(source_dir() / "data" / "tables" / "strategies.json");
  SubstitutionTable substitutions = SubstitutionTable::load(source_dir() / "data" / "tables" / "substitutions.json");
  ProsodyTable prosody = ProsodyTable::load(source_dir() / "data" / "tables" / "prosody.json");
  Reframer reframer{lexicons.absolutes, substitutions};
};

const Tables& tables() {
  static const Tables t;
  return t;
}

EmotionResult emotion(std::array<double, 5> p) { return EmotionResult::from_probabilities(p); }

// ---------------------------------------------------------------------------

Outcome worked_example() {
  Checker c;
  TempDir dir;
  Harness h(dir.path());
  h.engine.create_session("Alex", std::string("worked"));
  const auto clip = read_wav(fixture("worked_example.wav"));
  c.expect(clip.annotation() == kWorkedInput, "fixture transcript differs from the worked input");
  const auto out = h.engine.process_turn("worked", clip);
  c.expect(out.transcript == kWorkedInput, "transcript: " + out.transcript);
  c.expect(tables().reframer.reframe(out.transcript) == kWorkedReframe, "reframe: " + tables().reframer.reframe(out.transcript));
  c.expect(out.response_text.find(kWorkedReframe) != std::string::npos, "response: " + out.response_text);
  return c.done("response contains \"" + std::string(kWorkedReframe) + "\"");
}

Outcome buffer_conservation() {
  Checker c;
  const auto start = std::chrono::steady_clock::now();
  static const std::u32string alphabet = U"abcXYZ 019.,!?\néß€中\U0001F600\U0001F680\U00010348";
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  const std::size_t alphas[] = {1, 10, 600};
  std::size_t appends = 0;
  for (int trial = 0; trial < 1000 && c.out.pass; ++trial) {
    const std::size_t alpha = alphas[trial % 3];
    DialogueBuffer buffer(alpha);
    std::vector<char32_t> history;
    std::string evicted;
    std::uniform_int_distribution<std::size_t> len(0, std::min<std::size_t>(10 * alpha, 90));
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      std::vector<char32_t> piece(len(rng));
      for (auto& ch : piece) ch = alphabet[pick(rng)];
      history.insert(history.end(), piece.begin(), piece.end());
      evicted += buffer.append(oracle::encode(piece));
      ++appends;
      c.expect(buffer.size() <= alpha && oracle::decode(buffer.content()).size() <= alpha,
               "buffer exceeds alpha=" + std::to_string(alpha));
      c.expect(evicted + buffer.content() == oracle::encode(history),
               "evicted + buffer != history at trial " + std::to_string(trial));
    }
  }
  const double secs = seconds_since(start);
  c.expect(secs < kBufferSeconds, "took " + fmt(secs) + " s");
  return c.done("1000 sequences, " + std::to_string(appends) + " appends, " + fmt(secs) + " s");
}

std::string independent_log(const std::string& jsonl) {
  std::istringstream in(jsonl);
  std::string line;
  std::string log;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    log += "U: " + j.at("transcript").get<std::string>() + "\n";
    log += "S: " + j.at("response_text").get<std::string>() + "\n";
  }
  return log;
}

Outcome durability() {
  Checker c;
  TempDir dir;
  const auto data = dir.path() / "sessions";
  const auto out_path = dir.path() / "out.jsonl";
  const auto ready = dir.path() / "ready";
  std::cout.flush();
  const pid_t pid = ::fork();
  if (pid < 0) return {false, "fork failed"};
  if (pid == 0) {
    try {
      Harness h(data);
      std::ofstream out(out_path, std::ios::binary);
      simulate(h.engine, load_script(demo_script()), out);
      out.close();
      std::ofstream(ready) << "1";
      for (;;) ::pause();
    } catch (...) {
      ::_exit(3);
    }
  }
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
  while (!std::filesystem::exists(ready) && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(pid, SIGKILL);
  int status = 0;
  ::waitpid(pid, &status, 0);
  c.expect(std::filesystem::exists(ready), "simulate did not finish");
  c.expect(WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL, "child was not killed");
  if (!c.out.pass) return c.done("");

  const auto expected = independent_log(slurp(out_path));
  FileStore store(data);
  const auto chunks = store.chunk_count("sim-7");
  try {
    c.expect(reconstruct_transcript(store, "sim-7") == expected, "reconstructed transcript differs");
    c.expect(SessionLog::open(store, "sim-7").reconstruct_transcript() == expected, "reopened log differs");
  } catch (const std::exception& e) {
    c.expect(false, std::string("restart failed: ") + e.what());
  }
  c.expect(chunks >= 2, "demo produced fewer than two chunks");
  const std::uint64_t victim = chunks / 2;
  const auto path = store.chunk_path("sim-7", victim);
  auto bytes = slurp(path);
  bytes[bytes.size() - 1] ^= 0x10;
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  try {
    reconstruct_transcript(store, "sim-7");
    c.expect(false, "corruption not detected");
  } catch (const Error& e) {
    c.expect(e.code() == ErrorCode::kChecksumMismatch, "wrong code");
    c.expect(e.details().value("seq", -1L) == static_cast<long>(victim), "wrong seq " + e.details().dump());
  }
  return c.done("kill -9 after " + std::to_string(expected.size()) + " transcript bytes; restart matches; " +
                "CRC flip in chunk " + std::to_string(victim) + "/" + std::to_string(chunks) + " reported");
}

Outcome softmax_suite() {
  Checker c;
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> logit(-50.0, 50.0);
  std::uniform_real_distribution<double> shift(-100.0, 100.0);
  double worst_sum = 0.0;
  double worst_shift = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> z(2 + rng() % 11);
    for (auto& v : z) v = logit(rng);
    const auto p = softmax(z);
    const auto ref = oracle::softmax(z);
    long double sum = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) {
      sum += p[i];
      c.expect(std::abs(p[i] - static_cast<double>(ref[i])) < kOracleTol, "oracle mismatch");
    }
    worst_sum = std::max(worst_sum, std::abs(static_cast<double>(sum) - 1.0));
    const auto am = [](const std::vector<double>& v) { return std::max_element(v.begin(), v.end()) - v.begin(); };
    c.expect(am(p) == am(z), "argmax changed");
    const double k = shift(rng);
    auto zs = z;
    for (auto& v : zs) v += k;
    const auto q = softmax(zs);
    for (std::size_t i = 0; i < p.size(); ++i) worst_shift = std::max(worst_shift, std::abs(p[i] - q[i]));
  }
  c.expect(worst_sum <= kSoftmaxSumTol, "sum error " + fmt(worst_sum));
  c.expect(worst_shift <= kShiftTol, "shift error " + fmt(worst_shift));
  const auto extreme = softmax(std::vector<double>{1000.0, 0.0, -1000.0, 1000.0});
  for (double v : extreme) c.expect(std::isfinite(v), "non-finite at logit 1000");
  c.expect(std::abs(extreme[0] - 0.5) < kSoftmaxSumTol, "extreme logits mis-normalised");
  return c.done("10000 vectors; max |sum-1| " + fmt(worst_sum) + ", max shift diff " + fmt(worst_shift));
}

Outcome mel_suite() {
  Checker c;
  constexpr std::size_t kLength = 1024 + 3 * 256;
  const MelFilterbank fb;
  const oracle::Filterbank ref(80, 1024, 16000, 0, 8000);
  const auto silent = compute_mel(AudioClip(std::vector<double>(kLength, 0.0), kCanonicalSampleRate));
  for (double v : silent.data) c.expect(v == MelSpectrogram::log_floor(), "silence above floor");
  auto argmax = [](std::span<const double> v) { return static_cast<long>(std::max_element(v.begin(), v.end()) - v.begin()); };
  for (std::size_t m = 0; m < 80; ++m) {
    const auto clip = sine(fb.center_frequencies()[m], 0.5, kLength);
    const auto mel = compute_mel(clip);
    const auto expected = oracle::mel(clip.samples(), ref, 1024, 256);
    for (std::size_t t = 0; t < mel.frames; ++t) {
      c.expect(argmax(mel.frame(t)) == static_cast<long>(m), "argmax wrong at filter " + std::to_string(m));
      std::vector<double> want(80);
      for (std::size_t j = 0; j < 80; ++j) want[j] = static_cast<double>(expected[t][j]);
      c.expect(argmax(want) == static_cast<long>(m), "oracle argmax wrong at filter " + std::to_string(m));
      for (std::size_t j = 0; j < 80; ++j) {
        if (want[j] > std::log(1e-6)) c.expect(std::abs(mel.at(t, j) - want[j]) < kMelOracleTol, "oracle value mismatch");
      }
    }
  }
  double worst = 0.0;
  for (double hz : {150.0, 440.0, 1234.5, 3000.0, 7000.0}) {
    const auto a = compute_mel(sine(hz, 0.25, kLength));
    const auto b = compute_mel(sine(hz, 0.5, kLength));
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      if (a.data[i] < std::log(kNonFloorPower)) continue;
      worst = std::max(worst, std::abs(b.data[i] - a.data[i] - std::log(4.0)));
    }
  }
  c.expect(worst < kLog4Tol, "log 4 shift error " + fmt(worst));
  ReferenceVocoder vocoder;
  long worst_bins = 0;
  for (std::size_t m = 4; m < 80; m += 5) {
    const auto mel = compute_mel(sine(fb.center_frequencies()[m], 0.5, 1024 + 39 * 256));
    const auto audio = vocode(mel, vocoder);
    c.expect(audio.size() == mel.frames * mel.params.hop, "vocode length != T*hop");
    const auto back = compute_mel(audio);
    for (std::size_t t = 0; t < back.frames; ++t) {
      worst_bins = std::max(worst_bins, std::abs(argmax(back.frame(t)) - static_cast<long>(m)));
    }
  }
  c.expect(worst_bins <= kRoundTripBins, "round-trip peak off by " + std::to_string(worst_bins) + " bins");
  return c.done("80/80 centre sines peak in their filter; log4 err " + fmt(worst) + "; round-trip peak offset " +
                std::to_string(worst_bins) + " bins");
}

Outcome reframer_suite() {
  Checker c;
  const auto& t = tables();
  const auto& r = t.reframer;
  const auto corpus = reframe_corpus();
  c.expect(corpus.size() == 200, "corpus size");
  for (const auto& text : corpus) {
    const auto once = r.reframe(text);
    c.expect(r.reframe(once) == once, "not idempotent: " + text);
    bool pinned = false;
    for (const auto& p : t.substitutions.pinned) pinned = pinned || text.find(p.input) != std::string::npos;
    if (pinned) continue;
    std::string expected;
    std::size_t pos = 0;
    for (const auto& s : r.detect(text)) {
      expected.append(text, pos, s.start - pos);
      expected += apply_case_style(text.substr(s.start, s.end - s.start), t.substitutions.replacements.at(s.term));
      pos = s.end;
    }
    expected.append(text, pos);
    c.expect(once == expected, "bytes outside spans changed: " + text);
  }
  bool disjoint = true;
  for (const auto& [k, v] : t.substitutions.replacements) disjoint = disjoint && t.lexicons.absolutes.find_all(v).empty();
  for (const auto& e : t.lexicons.absolutes.entries()) disjoint = disjoint && t.substitutions.replacements.count(e);
  c.expect(disjoint, "lexicon/substitution overlap");
  c.expect(r.reframe(std::string(kWorkedInput)) == kWorkedReframe, "pair 1");
  c.expect(r.reframe("It's too difficult, I've tried everything.") ==
               "Although I faced difficulties, I move forward, I learn from.",
           "pair 2");
  c.expect(r.reframe("I always fail") == "I sometimes fail", "pair 3");
  return c.done("200 sentences idempotent and byte-preserving; tables disjoint; 3/3 pairs");
}

Outcome strategy_prosody() {
  Checker c;
  const auto& t = tables();
  StrategyHistory none;
  StrategyHistory planned;
  planned.open_action_plan = true;
  planned.next_plan_step = "draft the summary";
  struct Row {
    std::array<double, 5> p;
    const StrategyHistory* h;
    StrategyId want;
  };
  const Row rows[] = {
      {{0.0, 0.0, 0.0, 1.0, 0.0}, &none, StrategyId::kImmediateReframe},
      {{0.5, 0.2, 0.1, 0.1, 0.1}, &none, StrategyId::kImmediateReframe},
      {{0.1, 0.6, 0.1, 0.1, 0.1}, &none, StrategyId::kAffirmationSupport},
      {{0.1, 0.1, 0.5, 0.2, 0.1}, &none, StrategyId::kAffirmationSupport},
      {{0.2, 0.2, 0.2, 0.2, 0.2}, &none, StrategyId::kCognitiveRestructuring},
      {{0.1, 0.1, 0.1, 0.1, 0.6}, &planned, StrategyId::kActionPlan},
      {{0.1, 0.1, 0.1, 0.1, 0.6}, &none, StrategyId::kSmallTalk},
  };
  for (const auto& row : rows) {
    const auto a = select_strategy(emotion(row.p), *row.h, t.strategies);
    const auto b = select_strategy(emotion(row.p), *row.h, t.strategies);
    c.expect(a.id == row.want, "routing row for " + std::string(to_string(row.want)));
    c.expect(a.id == b.id && a.step_index == b.step_index, "routing not deterministic");
  }
  std::mt19937_64 rng(77);
  std::gamma_distribution<double> g(0.5, 1.0);
  for (int i = 0; i < 5000; ++i) {
    std::array<double, 5> p{};
    double s = 0;
    for (auto& v : p) s += (v = g(rng) + 1e-12);
    for (auto& v : p) v /= s;
    p[4] = std::max(0.0, 1.0 - (p[0] + p[1] + p[2] + p[3]));
    c.expect(prosody_for_emotion(emotion(p), t.prosody).valid(), "prosody outside its intervals");
  }
  const auto n = prosody_for_emotion(emotion({0, 0, 0, 0, 1}), t.prosody);
  c.expect(n.pitch_shift == 0.0 && n.volume_gain == 0.0 && n.rate == 1.0, "neutral is not exactly (0, 0, 1)");
  const auto a = prosody_for_emotion(emotion({0, 0, 0, 1, 0}), t.prosody);
  c.expect(std::abs(a.pitch_shift + 1.5) < kProsodyTol && std::abs(a.volume_gain + 3.0) < kProsodyTol &&
               std::abs(a.rate - 0.88) < kProsodyTol,
           "anger@1.0 gave (" + fmt(a.pitch_shift) + ", " + fmt(a.volume_gain) + ", " + fmt(a.rate) + ")");
  return c.done("7 routing rows; 5000 prosody samples in range; neutral (0, 0, 1); anger (-1.5, -3, 0.88)");
}

Outcome end_to_end() {
  Checker c;
  std::string runs[2];
  double first_secs = 0.0;
  bool all_pass = true;
  for (int i = 0; i < 2; ++i) {
    TempDir dir;
    Harness h(dir.path());
    std::ostringstream out;
    const auto start = std::chrono::steady_clock::now();
    const auto r = simulate(h.engine, load_script(demo_script()), out);
    if (i == 0) first_secs = seconds_since(start);
    c.expect(r.turns == 10, "expected 10 turns, got " + std::to_string(r.turns));
    all_pass = all_pass && r.all_constraints_pass;
    runs[i] = out.str();
  }
  c.expect(runs[0] == runs[1], "JSON-lines output differs between runs");
  c.expect(first_secs < kSimulateSeconds, "10 turns took " + fmt(first_secs) + " s");
  c.expect(all_pass, "a turn failed its constraints");
  return c.done("two runs byte-identical (" + std::to_string(runs[0].size()) + " bytes); 10 turns in " +
                fmt(first_secs) + " s");
}

Outcome constraint_guarantee() {
  Checker c;
  const auto& t = tables();
  const std::vector<std::string> names = {"Ana", "Sam", "Jordan", "Li", "Priya", "Mateo", "Kai"};
  const std::vector<std::string> topics = {"", "draft the summary", "call the bank"};
  std::mt19937 rng(99);
  std::size_t clean = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto id = kAllStrategies[rng() % kAllStrategies.size()];
    const auto& spec = t.strategies.spec(id);
    DialogStrategy s{id, spec.templates, rng() % spec.templates.size()};
    SlotValues slots{names[rng() % names.size()], topics[rng() % topics.size()], ""};
    if (id == StrategyId::kImmediateReframe) slots.reframed_text = t.reframer.reframe(std::string(kWorkedInput));
    auto constraints = spec.constraints;
    constraints.addressee = slots.user_name;
    Adversary llm;
    const auto g = generate_response(build_prompt(s, "", slots, constraints), llm, constraints, t.lexicons,
                                     fallback_script(s, slots, constraints, t.lexicons));
    c.expect(llm.calls == 3 && g.adapter_calls == 3, "adapter called " + std::to_string(llm.calls) + " times");
    c.expect(g.used_fallback, "fallback not used");
    clean += g.used_fallback && validate_response(g.text, constraints, t.lexicons).all_pass();
  }
  c.expect(clean == 100, std::to_string(clean) + "/100 clean");
  return c.done("100/100 trials: 3 adapter calls, fallback passes all constraints");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"worked-example-reproduction", worked_example},
      {"buffer-conservation", buffer_conservation},
      {"durability", durability},
      {"softmax-classifier", softmax_suite},
      {"mel-dsp", mel_suite},
      {"reframer", reframer_suite},
      {"strategy-prosody-determinism", strategy_prosody},
      {"end-to-end-determinism", end_to_end},
      {"constraint-guarantee", constraint_guarantee},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %-30s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
