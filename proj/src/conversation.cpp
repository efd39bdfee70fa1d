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

#include "innerself/conversation.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "innerself/audio.hpp"
#include "innerself/error.hpp"
#include "innerself/utf8.hpp"

namespace innerself {
namespace {

constexpr std::string_view kSlotNames[] = {"user_name", "topic", "reframed_text"};

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_ws(s[b])) ++b;
  while (e > b && is_ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> slot_names_in(std::string_view tmpl) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
    const auto close = tmpl.find('}', pos);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::kTableError, "unterminated slot in template: " + std::string(tmpl));
    }
    names.emplace_back(tmpl.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return names;
}

enum class CaseStyle { kNone, kLower, kUpper, kTitle, kMixed };

CaseStyle style_of(std::string_view word) {
  std::size_t upper = 0;
  std::size_t lower = 0;
  bool first_letter_upper = false;
  bool seen_letter = false;
  bool rest_lower = true;
  for (char c : word) {
    const bool up = c >= 'A' && c <= 'Z';
    const bool lo = c >= 'a' && c <= 'z';
    if (!up && !lo) continue;
    if (!seen_letter) {
      first_letter_upper = up;
      seen_letter = true;
    } else if (up) {
      rest_lower = false;
    }
    upper += up ? 1 : 0;
    lower += lo ? 1 : 0;
  }
  if (!seen_letter) return CaseStyle::kNone;
  if (lower == 0) return CaseStyle::kUpper;
  if (upper == 0) return CaseStyle::kLower;
  if (first_letter_upper && rest_lower) return CaseStyle::kTitle;
  return CaseStyle::kMixed;
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

std::string capitalize(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') {
      c = static_cast<char>(c - 'a' + 'A');
      break;
    }
    if (c >= 'A' && c <= 'Z') break;
  }
  return out;
}

std::string styled(std::string_view word, CaseStyle style) {
  switch (style) {
    case CaseStyle::kUpper: return to_upper(word);
    case CaseStyle::kTitle: return capitalize(word);
    default: return std::string(word);
  }
}

// Collapses whitespace runs to single spaces and trims both ends.
std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_ws(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_ws(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_ws(s[j])) ++j;
    if (j > i) words.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string pronoun_directive(const ResponseConstraints& c) {
  switch (c.pronoun_person) {
    case PronounPerson::kFirstSingular:
      return "Speak as the user's own voice in the first person singular (\"I\", \"me\", \"my\").";
    case PronounPerson::kSecond:
      return "Address the user in the second person (\"you\", \"your\").";
    case PronounPerson::kNameAddress:
      return "Address the user by name" +
             (c.addressee.empty() ? std::string() : " (" + c.addressee + ")") +
             " and do not use first-person pronouns.";
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(StrategyId id) {
  switch (id) {
    case StrategyId::kImmediateReframe: return "immediate_reframe";
    case StrategyId::kCognitiveRestructuring: return "cognitive_restructuring";
    case StrategyId::kActionPlan: return "action_plan";
    case StrategyId::kAffirmationSupport: return "affirmation_support";
    case StrategyId::kSmallTalk: return "small_talk";
  }
  return "small_talk";
}

StrategyId strategy_from_string(std::string_view name) {
  for (auto id : kAllStrategies) {
    if (to_string(id) == name) return id;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

std::string_view to_string(PronounPerson p) {
  switch (p) {
    case PronounPerson::kFirstSingular: return "first_singular";
    case PronounPerson::kSecond: return "second";
    case PronounPerson::kNameAddress: return "name_address";
  }
  return "first_singular";
}

PronounPerson pronoun_person_from_string(std::string_view name) {
  for (auto p : {PronounPerson::kFirstSingular, PronounPerson::kSecond, PronounPerson::kNameAddress}) {
    if (to_string(p) == name) return p;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown pronoun person '" + std::string(name) + "'");
}

std::vector<std::string> ConstraintReport::failures() const {
  std::vector<std::string> out;
  if (!length) out.emplace_back("length");
  if (!pronoun_person) out.emplace_back("pronoun_person");
  if (!no_absolutes) out.emplace_back("no_absolutes");
  if (!positive_affect) out.emplace_back("positive_affect");
  return out;
}

void to_json(nlohmann::json& j, const ConstraintReport& r) {
  j = {{"length", r.length},
       {"pronoun_person", r.pronoun_person},
       {"no_absolutes", r.no_absolutes},
       {"positive_affect", r.positive_affect}};
}

void from_json(const nlohmann::json& j, ConstraintReport& r) {
  r.length = j.at("length").get<bool>();
  r.pronoun_person = j.at("pronoun_person").get<bool>();
  r.no_absolutes = j.at("no_absolutes").get<bool>();
  r.positive_affect = j.at("positive_affect").get<bool>();
}

ConstraintReport validate_response(std::string_view text, const ResponseConstraints& constraints,
                                   const LexiconSet& lexicons) {
  ConstraintReport report;
  report.length = utf8::is_valid(text) && utf8::scalar_count(text) <= constraints.max_chars;

  const auto tokens = tokenize(text);
  const bool first = std::any_of(tokens.begin(), tokens.end(),
                                 [](const Token& t) { return is_first_person_singular(t.lower); });
  const bool second = std::any_of(tokens.begin(), tokens.end(),
                                  [](const Token& t) { return is_second_person(t.lower); });
  switch (constraints.pronoun_person) {
    case PronounPerson::kFirstSingular:
      report.pronoun_person = first && !second;
      break;
    case PronounPerson::kSecond:
      report.pronoun_person = second && !first;
      break;
    case PronounPerson::kNameAddress: {
      bool named = constraints.addressee.empty();
      if (!named) {
        const auto name_tokens = tokenize(constraints.addressee);
        named = !name_tokens.empty() &&
                std::any_of(tokens.begin(), tokens.end(),
                            [&](const Token& t) { return t.lower == name_tokens.front().lower; });
      }
      report.pronoun_person = named && !first;
      break;
    }
  }

  if (constraints.forbid_absolutes) {
    report.no_absolutes = lexicons.absolutes.find_all(text, tokens).empty();
  }
  if (constraints.require_positive_affect) {
    const auto pos = lexicons.positive.find_all(text, tokens).size();
    const auto neg = lexicons.negative.find_all(text, tokens).size();
    report.positive_affect = pos > neg;
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string render_template(std::string_view tmpl, const SlotValues& slots) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(open));
      break;
    }
    const auto name = tmpl.substr(open + 1, close - open - 1);
    if (name == "user_name") {
      out += slots.user_name;
    } else if (name == "topic") {
      out += slots.topic;
    } else if (name == "reframed_text") {
      out += slots.reframed_text;
    } else {
      out.append(tmpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  return collapse_spaces(out);
}

// ---------------------------------------------------------------------------

StrategyTable StrategyTable::from_json(const nlohmann::json& j) {
  StrategyTable table;
  try {
    for (auto id : kAllStrategies) {
      const std::string key(to_string(id));
      if (!j.contains(key)) throw Error(ErrorCode::kTableError, "strategy table lacks '" + key + "'");
      const auto& entry = j.at(key);
      StrategySpec spec;
      spec.id = id;
      spec.templates = entry.at("templates").get<std::vector<std::string>>();
      if (spec.templates.empty()) {
        throw Error(ErrorCode::kTableError, "strategy '" + key + "' has no templates");
      }
      if (entry.contains("steps") && entry.at("steps").get<std::size_t>() != spec.templates.size()) {
        throw Error(ErrorCode::kTableError, "strategy '" + key + "' steps != template count");
      }
      for (const auto& t : spec.templates) {
        for (const auto& slot : slot_names_in(t)) {
          if (std::find(std::begin(kSlotNames), std::end(kSlotNames), slot) == std::end(kSlotNames)) {
            throw Error(ErrorCode::kTableError, "unknown slot {" + slot + "} in strategy '" + key + "'");
          }
        }
      }
      auto& c = spec.constraints;
      c.max_chars = entry.value("max_chars", c.max_chars);
      if (c.max_chars == 0 || c.max_chars > kMaxResponseChars) {
        throw Error(ErrorCode::kTableError, "max_chars must be in [1, 600]");
      }
      c.pronoun_person =
          pronoun_person_from_string(entry.value("pronoun_person", std::string("first_singular")));
      c.require_positive_affect = entry.value("require_positive_affect", true);
      c.forbid_absolutes = entry.value("forbid_absolutes", true);
      table.specs_[static_cast<std::size_t>(id)] = std::move(spec);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTableError, std::string("strategy table: ") + e.what());
  }
  return table;
}

StrategyTable StrategyTable::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file_bytes(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTableError, path.string() + ": " + e.what());
  }
}

void StrategyTable::check_templates(const LexiconSet& lexicons) const {
  const SlotValues& sample = kTemplateSampleSlots;
  for (const auto& spec : specs_) {
    auto constraints = spec.constraints;
    constraints.addressee = sample.user_name;
    for (std::size_t step = 0; step < spec.templates.size(); ++step) {
      const auto report =
          validate_response(render_template(spec.templates[step], sample), constraints, lexicons);
      if (!report.all_pass()) {
        std::string failed;
        for (const auto& f : report.failures()) failed += " " + f;
        throw Error(ErrorCode::kTableError, "template " + std::to_string(step) + " of '" +
                                                std::string(to_string(spec.id)) +
                                                "' violates:" + failed);
      }
    }
  }
}

DialogStrategy select_strategy(const EmotionResult& emotion, const StrategyHistory& history,
                               const StrategyTable& table) {
  const auto dominant = emotion.dominant;
  const double confidence = emotion.confidence;
  StrategyId id = StrategyId::kSmallTalk;
  if ((dominant == EmotionLabel::kAnger || dominant == EmotionLabel::kAnxiety) &&
      confidence >= kRoutingConfidence) {
    id = StrategyId::kImmediateReframe;
  } else if ((dominant == EmotionLabel::kSadness || dominant == EmotionLabel::kShameRegret) &&
             confidence >= kRoutingConfidence) {
    id = StrategyId::kAffirmationSupport;
  } else if (is_negative(dominant) && emotion.negative_mass() >= kRoutingConfidence) {
    id = StrategyId::kCognitiveRestructuring;
  } else if (dominant == EmotionLabel::kNeutral && history.open_action_plan) {
    id = StrategyId::kActionPlan;
  }

  const auto& spec = table.spec(id);
  DialogStrategy strategy{id, spec.templates, 0};
  if (id == StrategyId::kCognitiveRestructuring) {
    strategy.step_index = history.restructuring_step % spec.templates.size();
  }
  return strategy;
}

// ---------------------------------------------------------------------------

std::vector<AbsoluteSpan> detect_absolutes(std::string_view text, const Lexicon& absolutes) {
  std::vector<AbsoluteSpan> spans;
  for (auto& m : absolutes.find_all(text)) {
    spans.push_back(AbsoluteSpan{m.begin, m.end, std::move(m.entry), {}});
  }
  return spans;
}

SubstitutionTable SubstitutionTable::from_json(const nlohmann::json& j) {
  SubstitutionTable table;
  try {
    for (const auto& [term, replacement] : j.at("replacements").items()) {
      table.replacements[normalize_phrase(term)] = replacement.get<std::string>();
    }
    if (j.contains("pinned")) {
      for (const auto& p : j.at("pinned")) {
        table.pinned.push_back({p.at("input").get<std::string>(), p.at("output").get<std::string>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTableError, std::string("substitution table: ") + e.what());
  }
  return table;
}

SubstitutionTable SubstitutionTable::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file_bytes(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTableError, path.string() + ": " + e.what());
  }
}

std::string apply_case_style(std::string_view span_text, std::string_view replacement) {
  const auto span_words = split_words(span_text);
  std::vector<CaseStyle> styles;
  for (const auto& w : span_words) {
    const auto s = style_of(w);
    if (s != CaseStyle::kNone) styles.push_back(s);
  }
  if (styles.empty()) return std::string(replacement);
  const auto all = [&](CaseStyle s) {
    return std::all_of(styles.begin(), styles.end(), [s](CaseStyle x) { return x == s; });
  };
  if (all(CaseStyle::kUpper)) return to_upper(replacement);
  if (all(CaseStyle::kLower)) return std::string(replacement);
  if (styles.front() == CaseStyle::kTitle &&
      std::all_of(styles.begin() + 1, styles.end(), [](CaseStyle x) { return x == CaseStyle::kLower; })) {
    return capitalize(replacement);
  }
  // Mixed: carry each span word's style onto the replacement word at the
  // same position.
  const auto words = split_words(replacement);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    out += i < span_words.size() ? styled(words[i], style_of(span_words[i])) : words[i];
  }
  return out;
}

Reframer::Reframer(Lexicon absolutes, SubstitutionTable table)
    : absolutes_(std::move(absolutes)), table_(std::move(table)) {
  for (const auto& entry : absolutes_.entries()) {
    if (!table_.replacements.contains(entry)) {
      throw Error(ErrorCode::kTableError, "no replacement for absolute term '" + entry + "'");
    }
  }
  for (const auto& [term, replacement] : table_.replacements) {
    if (absolutes_.contains(replacement) || !absolutes_.find_all(replacement).empty()) {
      throw Error(ErrorCode::kTableError,
                  "replacement '" + replacement + "' for '" + term + "' contains an absolute term");
    }
  }
  for (const auto& pair : table_.pinned) {
    if (pair.input.empty()) throw Error(ErrorCode::kTableError, "pinned pair with empty input");
    if (!absolutes_.find_all(pair.output).empty()) {
      throw Error(ErrorCode::kTableError, "pinned output contains an absolute term: " + pair.output);
    }
  }
  // Longest pinned input first so overlapping inputs resolve deterministically.
  std::stable_sort(table_.pinned.begin(), table_.pinned.end(),
                   [](const PinnedPair& a, const PinnedPair& b) { return a.input.size() > b.input.size(); });
}

std::vector<AbsoluteSpan> Reframer::detect(std::string_view text) const {
  auto spans = detect_absolutes(text, absolutes_);
  for (auto& s : spans) s.replacement = table_.replacements.at(s.term);
  return spans;
}

std::string Reframer::reframe(std::string_view text) const {
  // Pinned regions first.
  struct Region {
    std::size_t begin;
    std::size_t end;
    const std::string* output;
  };
  std::vector<Region> pinned;
  std::size_t pos = 0;
  while (pos < text.size()) {
    bool hit = false;
    if (pos == 0 || is_ws(text[pos - 1])) {
      for (const auto& pair : table_.pinned) {
        const std::size_t end = pos + pair.input.size();
        if (text.substr(pos, pair.input.size()) == pair.input &&
            (end == text.size() || is_ws(text[end]))) {
          pinned.push_back({pos, end, &pair.output});
          pos = end;
          hit = true;
          break;
        }
      }
    }
    if (!hit) ++pos;
  }

  std::string out;
  const auto reframe_segment = [&](std::string_view seg) {
    std::size_t cursor = 0;
    for (const auto& span : detect(seg)) {
      out.append(seg.substr(cursor, span.start - cursor));
      out += apply_case_style(seg.substr(span.start, span.end - span.start), span.replacement);
      cursor = span.end;
    }
    out.append(seg.substr(cursor));
  };
  std::size_t cursor = 0;
  for (const auto& r : pinned) {
    reframe_segment(text.substr(cursor, r.begin - cursor));
    out += *r.output;
    cursor = r.end;
  }
  reframe_segment(text.substr(cursor));
  return out;
}

// ---------------------------------------------------------------------------

std::string build_prompt(const DialogStrategy& strategy, std::string_view context,
                         const SlotValues& slots, const ResponseConstraints& constraints) {
  if (!utf8::is_valid(context) || utf8::scalar_count(context) > kMaxContextChars) {
    throw Error(ErrorCode::kContextOverflow, "context exceeds 600 characters",
                {{"chars", utf8::is_valid(context) ? utf8::scalar_count(context) : context.size()}});
  }
  std::ostringstream p;
  p << "### Persona\n"
    << "You are the user's own inner voice, speaking back to them in their own cloned voice. "
       "Follow the principles of positive psychology: weave in words of encouragement, "
       "empathy and understanding, and keep the tone warm, realistic and constructive.\n"
    << "### Strategy\n"
    << to_string(strategy.id) << " (step " << strategy.step_index + 1 << " of " << strategy.steps()
    << ")\n"
    << kScriptHeader << render_template(strategy.current_template(), slots) << "\n"
    << kContextHeader << (context.empty() ? std::string_view("(no earlier conversation)") : context)
    << "\n"
    << "### Constraints\n"
    << "- Reply in at most " << constraints.max_chars << " characters.\n"
    << "- " << pronoun_directive(constraints) << "\n";
  if (constraints.forbid_absolutes) {
    p << "- Do not use absolute terms such as \"always\", \"never\", \"everything\" or \"nothing\".\n";
  }
  if (constraints.require_positive_affect) {
    p << "- Use positive, encouraging wording; positive words must outweigh negative ones.\n";
  }
  p << "### Response\n";
  return p.str();
}

std::string ReferenceLanguageModel::complete(const std::string& prompt) {
  const auto begin = prompt.find(kScriptHeader);
  if (begin == std::string::npos) return {};
  const auto start = begin + kScriptHeader.size();
  auto end = prompt.find(std::string("\n") + std::string(kContextHeader), start);
  if (end == std::string::npos) end = prompt.size();
  return trim(std::string_view(prompt).substr(start, end - start));
}

GeneratedResponse generate_response(const std::string& prompt, LanguageModelAdapter& llm,
                                    const ResponseConstraints& constraints,
                                    const LexiconSet& lexicons, std::string_view fallback_text) {
  if (prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "prompt is empty");
  GeneratedResponse out;
  std::string current = prompt;
  for (std::size_t attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    std::string candidate = trim(llm.complete(current));
    ++out.adapter_calls;
    const auto report = validate_response(candidate, constraints, lexicons);
    if (report.all_pass()) {
      out.text = std::move(candidate);
      out.report = report;
      return out;
    }
    std::string failed;
    for (const auto& f : report.failures()) failed += (failed.empty() ? "" : ", ") + f;
    current = prompt + "### Violations\nThe previous reply broke these constraints: " + failed +
              ". Rewrite it so that every constraint holds.\n### Response\n";
  }
  out.text = std::string(fallback_text);
  out.report = validate_response(out.text, constraints, lexicons);
  out.used_fallback = true;
  return out;
}

std::string fallback_script(const DialogStrategy& strategy, const SlotValues& slots,
                            const ResponseConstraints& constraints, const LexiconSet& lexicons) {
  // Progressively drop user-derived slot text; the last candidate is the one
  // check_templates() verified at load time.
  SlotValues plain = slots;
  plain.reframed_text.clear();
  SlotValues generic = plain;
  generic.topic = kTemplateSampleSlots.topic;
  const SlotValues candidates[] = {slots, plain, generic, kTemplateSampleSlots};
  for (const auto& c : candidates) {
    auto checked = constraints;
    if (&c == &candidates[3]) checked.addressee = kTemplateSampleSlots.user_name;
    std::string text = render_template(strategy.current_template(), c);
    if (validate_response(text, checked, lexicons).all_pass()) return text;
  }
  return render_template(strategy.current_template(), kTemplateSampleSlots);
}

// ---------------------------------------------------------------------------

bool ProsodyParams::valid() const noexcept {
  return pitch_shift >= kMinPitch && pitch_shift <= kMaxPitch && volume_gain >= kMinGain &&
         volume_gain <= kMaxGain && rate >= kMinRate && rate <= kMaxRate;
}

ProsodyParams ProsodyParams::clamped() const noexcept {
  return {std::clamp(pitch_shift, kMinPitch, kMaxPitch), std::clamp(volume_gain, kMinGain, kMaxGain),
          std::clamp(rate, kMinRate, kMaxRate)};
}

void to_json(nlohmann::json& j, const ProsodyParams& p) {
  j = {{"pitch_shift", p.pitch_shift}, {"volume_gain", p.volume_gain}, {"rate", p.rate}};
}

void from_json(const nlohmann::json& j, ProsodyParams& p) {
  p.pitch_shift = j.at("pitch_shift").get<double>();
  p.volume_gain = j.at("volume_gain").get<double>();
  p.rate = j.at("rate").get<double>();
}

ProsodyTable::ProsodyTable() {
  targets_[index_of(EmotionLabel::kAnxiety)] = {-1.0, -2.0, 0.90};
  targets_[index_of(EmotionLabel::kAnger)] = {-1.5, -3.0, 0.88};
  targets_[index_of(EmotionLabel::kSadness)] = {1.0, 1.0, 0.95};
  targets_[index_of(EmotionLabel::kShameRegret)] = {0.5, 1.0, 0.95};
  targets_[index_of(EmotionLabel::kNeutral)] = {0.0, 0.0, 1.0};
}

ProsodyTable ProsodyTable::from_json(const nlohmann::json& j) {
  ProsodyTable table;
  try {
    for (auto label : kAllEmotions) {
      const auto v = j.at(std::string(to_string(label))).get<std::vector<double>>();
      if (v.size() != 3) throw Error(ErrorCode::kTableError, "prosody entry needs 3 values");
      const ProsodyParams p{v[0], v[1], v[2]};
      if (!p.valid()) {
        throw Error(ErrorCode::kTableError,
                    "prosody target for " + std::string(to_string(label)) + " out of range");
      }
      table.targets_[index_of(label)] = p;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTableError, std::string("prosody table: ") + e.what());
  }
  if (!table.target(EmotionLabel::kNeutral).is_identity()) {
    throw Error(ErrorCode::kTableError, "neutral prosody target must be (0, 0, 1)");
  }
  return table;
}

ProsodyTable ProsodyTable::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file_bytes(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTableError, path.string() + ": " + e.what());
  }
}

ProsodyParams prosody_for_emotion(const EmotionResult& emotion, const ProsodyTable& table) {
  constexpr ProsodyParams kNeutral{};
  if (emotion.dominant == EmotionLabel::kNeutral) return kNeutral;
  const auto& t = table.target(emotion.dominant);
  const double c = std::clamp(emotion.confidence, 0.0, 1.0);
  const ProsodyParams blended{kNeutral.pitch_shift + c * (t.pitch_shift - kNeutral.pitch_shift),
                              kNeutral.volume_gain + c * (t.volume_gain - kNeutral.volume_gain),
                              kNeutral.rate + c * (t.rate - kNeutral.rate)};
  return blended.clamped();
}

}  // namespace innerself
