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

#include <random>
#include <set>

#include "innerself/conversation.hpp"
#include "innerself/utf8.hpp"
#include "corpus.hpp"
#include "support.hpp"

using namespace innerself;
using innerself::testing::Adversary;
using innerself::testing::reframe_corpus;
using innerself::testing::source_dir;

namespace {

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

}  // namespace

// ---------------------------------------------------------------------------
// Routing

TEST_CASE("routing: one case per rule row") {
  const auto& t = tables().strategies;
  StrategyHistory none;
  StrategyHistory planned;
  planned.open_action_plan = true;
  planned.next_plan_step = "draft the summary";

  // Row 1: anger or anxiety with confidence >= 0.5.
  CHECK(select_strategy(emotion({0.0, 0.0, 0.0, 1.0, 0.0}), none, t).id == StrategyId::kImmediateReframe);
  CHECK(select_strategy(emotion({0.5, 0.2, 0.1, 0.1, 0.1}), none, t).id == StrategyId::kImmediateReframe);
  // Row 2: sadness or shame with confidence >= 0.5.
  CHECK(select_strategy(emotion({0.1, 0.6, 0.1, 0.1, 0.1}), none, t).id == StrategyId::kAffirmationSupport);
  CHECK(select_strategy(emotion({0.1, 0.1, 0.5, 0.2, 0.1}), none, t).id == StrategyId::kAffirmationSupport);
  // Row 3: low-confidence negative dominant with negative mass >= 0.5.
  const auto uniform = select_strategy(emotion({0.2, 0.2, 0.2, 0.2, 0.2}), none, t);
  CHECK(uniform.id == StrategyId::kCognitiveRestructuring);
  CHECK(uniform.step_index == 0);
  CHECK(select_strategy(emotion({0.3, 0.25, 0.2, 0.0, 0.25}), none, t).id == StrategyId::kCognitiveRestructuring);
  // Row 4: neutral with an open plan.
  CHECK(select_strategy(emotion({0.1, 0.1, 0.1, 0.1, 0.6}), planned, t).id == StrategyId::kActionPlan);
  // Row 5: everything else.
  CHECK(select_strategy(emotion({0.1, 0.1, 0.1, 0.1, 0.6}), none, t).id == StrategyId::kSmallTalk);
  CHECK(select_strategy(emotion({0.0, 0.0, 0.0, 0.0, 1.0}), none, t).id == StrategyId::kSmallTalk);
}

TEST_CASE("routing boundaries") {
  const auto& t = tables().strategies;
  StrategyHistory none;
  // Just under 0.5 confidence falls through to the mass rule.
  CHECK(select_strategy(emotion({0.49, 0.01, 0.0, 0.0, 0.5}), none, t).id == StrategyId::kSmallTalk);
  CHECK(select_strategy(emotion({0.49, 0.2, 0.0, 0.0, 0.31}), none, t).id == StrategyId::kCognitiveRestructuring);
  // A neutral-dominant result never reaches restructuring, even with negative mass.
  StrategyHistory planned;
  planned.open_action_plan = true;
  CHECK(select_strategy(emotion({0.15, 0.15, 0.15, 0.15, 0.4}), planned, t).id == StrategyId::kActionPlan);
}

TEST_CASE("restructuring steps advance and wrap") {
  const auto& t = tables().strategies;
  const auto steps = t.spec(StrategyId::kCognitiveRestructuring).templates.size();
  REQUIRE(steps >= 2);
  for (std::size_t delivered = 0; delivered < 2 * steps + 1; ++delivered) {
    StrategyHistory h;
    h.restructuring_step = delivered;
    const auto s = select_strategy(emotion({0.2, 0.2, 0.2, 0.2, 0.2}), h, t);
    CHECK(s.step_index == delivered % steps);
  }
}

TEST_CASE("routing is deterministic over random distributions") {
  const auto& t = tables().strategies;
  std::mt19937_64 rng(99);
  std::gamma_distribution<double> g(1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    std::array<double, 5> p{};
    double s = 0;
    for (auto& v : p) s += (v = g(rng));
    for (auto& v : p) v /= s;
    p[4] = 1.0 - (p[0] + p[1] + p[2] + p[3]);
    if (p[4] < 0) continue;
    const auto e = emotion(p);
    StrategyHistory h;
    h.open_action_plan = i % 2;
    const auto a = select_strategy(e, h, t);
    const auto b = select_strategy(e, h, t);
    REQUIRE(a.id == b.id);
    REQUIRE(a.step_index == b.step_index);
  }
}

// ---------------------------------------------------------------------------
// Prosody

TEST_CASE("prosody targets") {
  const auto& table = tables().prosody;
  const auto neutral = prosody_for_emotion(emotion({0.0, 0.0, 0.0, 0.0, 1.0}), table);
  CHECK(neutral.pitch_shift == 0.0);
  CHECK(neutral.volume_gain == 0.0);
  CHECK(neutral.rate == 1.0);
  const auto anger = prosody_for_emotion(emotion({0.0, 0.0, 0.0, 1.0, 0.0}), table);
  CHECK(anger.pitch_shift == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(anger.volume_gain == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(anger.rate == doctest::Approx(0.88).epsilon(1e-12));
  // Half confidence lands halfway to the target.
  const auto half = prosody_for_emotion(emotion({0.0, 0.5, 0.2, 0.2, 0.1}), table);
  CHECK(half.pitch_shift == doctest::Approx(0.5));
  CHECK(half.volume_gain == doctest::Approx(0.5));
  CHECK(half.rate == doctest::Approx(0.975));
}

TEST_CASE("prosody stays inside its intervals") {
  const auto& table = tables().prosody;
  std::mt19937_64 rng(5);
  std::gamma_distribution<double> g(0.5, 1.0);
  for (int i = 0; i < 5000; ++i) {
    std::array<double, 5> p{};
    double s = 0;
    for (auto& v : p) s += (v = g(rng) + 1e-12);
    for (auto& v : p) v /= s;
    p[4] = std::max(0.0, 1.0 - (p[0] + p[1] + p[2] + p[3]));
    const auto out = prosody_for_emotion(emotion(p), table);
    REQUIRE(out.valid());
  }
  // Tables with targets outside the intervals are rejected at load time.
  const nlohmann::json wild = {{"anxiety", {-9, -9, 0.5}}, {"sadness", {1, 1, 0.95}}, {"shame_regret", {0, 0, 1}},
                               {"anger", {0, 0, 1}}, {"neutral", {0, 0, 1}}};
  CHECK_THROWS_AS(ProsodyTable::from_json(wild), innerself::Error);
}

// ---------------------------------------------------------------------------
// Reframer

TEST_CASE("detects absolutes at hand-computed offsets") {
  const auto& r = tables().reframer;
  const auto spans = r.detect("Everyone always says never to say always");
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].start == 9);
  CHECK(spans[0].end == 15);
  CHECK(spans[1].start == 21);
  CHECK(spans[1].end == 26);
  CHECK(spans[2].start == 34);
  CHECK(spans[2].end == 40);
  CHECK(r.detect("I sometimes struggle").empty());
  const auto worked = r.detect("I CAN'T EVER get things done on time. I'll NEVER be good at this.");
  REQUIRE(worked.size() == 2);
  CHECK(worked[0].term == "can't ever");
  CHECK(worked[1].term == "i'll never be good at");
}

TEST_CASE("the three worked reframing pairs") {
  const auto& r = tables().reframer;
  CHECK(r.reframe("I CAN'T EVER get things done on time. I'll NEVER be good at this.") ==
        "I OCCASIONALLY struggle with deadlines. I CAN get better at this.");
  CHECK(r.reframe("It's too difficult, I've tried everything.") ==
        "Although I faced difficulties, I move forward, I learn from.");
  CHECK(r.reframe("I always fail") == "I sometimes fail");
  CHECK(r.reframe("hello world") == "hello world");
}

TEST_CASE("case style follows the span") {
  CHECK(apply_case_style("NEVER", "rarely") == "RARELY");
  CHECK(apply_case_style("Never", "rarely") == "Rarely");
  CHECK(apply_case_style("never", "rarely") == "rarely");
  CHECK(apply_case_style("I'll NEVER be good at", "i can get better at") == "I CAN get better at");
}

TEST_CASE("reframing is idempotent and preserves text outside spans") {
  const auto& r = tables().reframer;
  const auto& sub = tables().substitutions;
  const auto corpus = reframe_corpus();
  REQUIRE(corpus.size() == 200);
  std::size_t with_spans = 0;
  for (const auto& text : corpus) {
    CAPTURE(text);
    const auto once = r.reframe(text);
    CHECK(r.reframe(once) == once);
    CHECK(!r.has_absolutes(once));
    CHECK(utf8::is_valid(once));

    bool pinned = false;
    for (const auto& p : sub.pinned) pinned = pinned || text.find(p.input) != std::string::npos;
    if (pinned) continue;
    // Rebuild the expected output from the original bytes and the spans.
    const auto spans = r.detect(text);
    with_spans += !spans.empty();
    std::string expected;
    std::size_t pos = 0;
    for (const auto& s : spans) {
      expected.append(text, pos, s.start - pos);
      expected += apply_case_style(text.substr(s.start, s.end - s.start), sub.replacements.at(s.term));
      pos = s.end;
    }
    expected.append(text, pos);
    CHECK(once == expected);
  }
  CHECK(with_spans > 100);
}

TEST_CASE("lexicon and substitution table are disjoint") {
  const auto& t = tables();
  std::set<std::string> keys;
  for (const auto& [k, _] : t.substitutions.replacements) keys.insert(k);
  for (const auto& e : t.lexicons.absolutes.entries()) CHECK(keys.count(e) == 1);
  for (const auto& [k, v] : t.substitutions.replacements) {
    CAPTURE(v);
    CHECK(t.lexicons.absolutes.find_all(v).empty());
  }
  for (const auto& p : t.substitutions.pinned) CHECK(t.lexicons.absolutes.find_all(p.output).empty());
  // The constructor enforces the same property.
  SubstitutionTable bad = t.substitutions;
  bad.replacements["never"] = "always";
  CHECK_THROWS_AS(Reframer(t.lexicons.absolutes, bad), innerself::Error);
  bad = t.substitutions;
  bad.replacements.erase("forever");
  CHECK_THROWS_AS(Reframer(t.lexicons.absolutes, bad), innerself::Error);
}

// ---------------------------------------------------------------------------
// Prompts, validation and generation

TEST_CASE("response validation") {
  const auto& lex = tables().lexicons;
  ResponseConstraints c;
  CHECK(validate_response("I am calm and I can do this.", c, lex).all_pass());
  const auto r = validate_response("You always mess up.", c, lex);
  CHECK_FALSE(r.no_absolutes);
  CHECK_FALSE(r.pronoun_person);
  CHECK_FALSE(r.positive_affect);
  CHECK(r.length);
  c.max_chars = 10;
  CHECK_FALSE(validate_response("I am calm and good.", c, lex).length);
  ResponseConstraints second;
  second.pronoun_person = PronounPerson::kSecond;
  CHECK(validate_response("You are doing good work.", second, lex).all_pass());
  ResponseConstraints named;
  named.pronoun_person = PronounPerson::kNameAddress;
  named.addressee = "Ana";
  CHECK(validate_response("Ana, what helpful step feels possible?", named, lex).all_pass());
  CHECK_FALSE(validate_response("Bob, what helpful step feels possible?", named, lex).pronoun_person);
}

TEST_CASE("prompt layout") {
  const auto& t = tables().strategies;
  const auto spec = t.spec(StrategyId::kAffirmationSupport);
  DialogStrategy s{spec.id, spec.templates, 0};
  const SlotValues slots{"Ana", "", ""};
  const auto prompt = build_prompt(s, "", slots, spec.constraints);
  CHECK(prompt == build_prompt(s, "", slots, spec.constraints));
  const auto persona = prompt.find("positive psychology");
  const auto script = prompt.find(kScriptHeader);
  const auto context = prompt.find(kContextHeader);
  const auto constraints = prompt.find("first person singular");
  CHECK(persona < script);
  CHECK(script < context);
  CHECK(context < constraints);
  CHECK(constraints != std::string::npos);
  CHECK(prompt.find(render_template(spec.templates[0], slots)) != std::string::npos);
  const std::string ctx600(600, 'x');
  CHECK_NOTHROW(build_prompt(s, ctx600, slots, spec.constraints));
  CHECK_THROWS_AS(build_prompt(s, ctx600 + "y", slots, spec.constraints), innerself::Error);
  // 600 astral characters are 2400 bytes but still within the limit.
  std::string astral;
  for (int i = 0; i < 600; ++i) astral += "\xF0\x9F\x98\x80";
  CHECK_NOTHROW(build_prompt(s, astral, slots, spec.constraints));
}

TEST_CASE("reference model echoes the script and passes") {
  const auto& t = tables();
  ReferenceLanguageModel llm;
  for (auto id : kAllStrategies) {
    const auto& spec = t.strategies.spec(id);
    for (std::size_t step = 0; step < spec.templates.size(); ++step) {
      DialogStrategy s{id, spec.templates, step};
      auto c = spec.constraints;
      c.addressee = "Sam";
      const SlotValues slots{"Sam", "a short walk", ""};
      const auto g = generate_response(build_prompt(s, "U: hi\n", slots, c), llm, c, t.lexicons,
                                       fallback_script(s, slots, c, t.lexicons));
      CAPTURE(to_string(id));
      CHECK(g.adapter_calls == 1);
      CHECK_FALSE(g.used_fallback);
      CHECK(g.report.all_pass());
      CHECK(g.text == render_template(spec.templates[step], slots));
    }
  }
}

TEST_CASE("adversarial model: three calls then a clean fallback, 100 trials") {
  const auto& t = tables();
  const std::vector<std::string> names = {"Ana", "Sam", "Jordan", "Li", "Priya", "Mateo", "Zo\xC3\xAB", "Kai"};
  const std::vector<std::string> topics = {"", "draft the summary", "call the bank", "a ten minute walk"};
  const std::vector<std::string> transcripts = {"I always fail", "Nothing ever works, I hate it", "I can't ever sleep",
                                                "I'll never be good at this", "Everything is awful forever"};
  std::mt19937 rng(424242);
  std::size_t clean = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto id = kAllStrategies[rng() % kAllStrategies.size()];
    const auto& spec = t.strategies.spec(id);
    DialogStrategy s{id, spec.templates, rng() % spec.templates.size()};
    SlotValues slots{names[rng() % names.size()], topics[rng() % topics.size()], ""};
    if (id == StrategyId::kImmediateReframe) slots.reframed_text = t.reframer.reframe(transcripts[rng() % transcripts.size()]);
    auto c = spec.constraints;
    c.addressee = slots.user_name;
    Adversary llm;
    const auto g = generate_response(build_prompt(s, "", slots, c), llm, c, t.lexicons,
                                     fallback_script(s, slots, c, t.lexicons));
    CHECK(llm.calls == 3);
    CHECK(g.adapter_calls == 3);
    CHECK(g.used_fallback);
    const bool ok = g.report.all_pass() && validate_response(g.text, c, t.lexicons).all_pass();
    clean += ok && !t.reframer.has_absolutes(g.text);
  }
  CHECK(clean == 100);
}

TEST_CASE("templates are checked at load time") {
  const auto& t = tables();
  CHECK_NOTHROW(t.strategies.check_templates(t.lexicons));
  auto j = nlohmann::json::parse(read_file_bytes(source_dir() / "data" / "tables" / "strategies.json"));
  j["affirmation_support"]["templates"][0] = "You will never be happy.";
  CHECK_THROWS_AS(StrategyTable::from_json(j).check_templates(t.lexicons), innerself::Error);
}
