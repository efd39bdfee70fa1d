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

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "innerself/emotion.hpp"
#include "innerself/lexicon.hpp"
#include "innerself/prosody.hpp"

namespace innerself {

enum class StrategyId {
  kImmediateReframe = 0,
  kCognitiveRestructuring,
  kActionPlan,
  kAffirmationSupport,
  kSmallTalk,
};
inline constexpr std::size_t kStrategyCount = 5;
inline constexpr std::array<StrategyId, kStrategyCount> kAllStrategies = {
    StrategyId::kImmediateReframe, StrategyId::kCognitiveRestructuring, StrategyId::kActionPlan,
    StrategyId::kAffirmationSupport, StrategyId::kSmallTalk};

std::string_view to_string(StrategyId id);
StrategyId strategy_from_string(std::string_view name);

enum class PronounPerson { kFirstSingular, kSecond, kNameAddress };
std::string_view to_string(PronounPerson p);
PronounPerson pronoun_person_from_string(std::string_view name);

inline constexpr std::size_t kMaxResponseChars = 600;
inline constexpr std::size_t kMaxContextChars = 600;

struct ResponseConstraints {
  std::size_t max_chars = 300;  // Unicode scalar values, at most 600
  PronounPerson pronoun_person = PronounPerson::kFirstSingular;
  bool require_positive_affect = true;
  bool forbid_absolutes = true;
  // Name that a name_address response must mention; empty disables the check.
  std::string addressee;
};

/// One boolean per constraint. A constraint that is not requested passes.
struct ConstraintReport {
  bool length = true;
  bool pronoun_person = true;
  bool no_absolutes = true;
  bool positive_affect = true;

  bool all_pass() const noexcept { return length && pronoun_person && no_absolutes && positive_affect; }
  std::vector<std::string> failures() const;
  friend bool operator==(const ConstraintReport&, const ConstraintReport&) = default;
};
void to_json(nlohmann::json& j, const ConstraintReport& r);
void from_json(const nlohmann::json& j, ConstraintReport& r);

ConstraintReport validate_response(std::string_view text, const ResponseConstraints& constraints,
                                   const LexiconSet& lexicons);

// ---------------------------------------------------------------------------
// Strategies

/// Template slots are written as {user_name}, {topic} and {reframed_text}.
struct SlotValues {
  std::string user_name;
  std::string topic;
  std::string reframed_text;
};

/// Substitutes slots, then collapses whitespace runs and trims the ends so an
/// empty slot leaves no gap behind.
std::string render_template(std::string_view tmpl, const SlotValues& slots);

/// Slot values every template is checked against when a table is loaded.
inline const SlotValues kTemplateSampleSlots{"Alex", "a short walk", ""};

struct StrategySpec {
  StrategyId id = StrategyId::kSmallTalk;
  // One template per step; Socratic sequences have several.
  std::vector<std::string> templates;
  ResponseConstraints constraints;
};

/// Loaded from JSON: {"<strategy id>": {"templates": [...], "steps": N,
/// "pronoun_person": "...", "max_chars": N, "require_positive_affect": bool,
/// "forbid_absolutes": bool}, ...}. Every strategy must be present.
class StrategyTable {
 public:
  static StrategyTable from_json(const nlohmann::json& j);
  static StrategyTable load(const std::filesystem::path& path);

  const StrategySpec& spec(StrategyId id) const { return specs_.at(static_cast<std::size_t>(id)); }

  /// Every template, rendered with sample slots and an empty reframed_text,
  /// must satisfy its strategy's constraints. Throws kTableError otherwise.
  void check_templates(const LexiconSet& lexicons) const;

 private:
  std::array<StrategySpec, kStrategyCount> specs_;
};

struct DialogStrategy {
  StrategyId id = StrategyId::kSmallTalk;
  std::vector<std::string> script_templates;
  std::size_t step_index = 0;

  const std::string& current_template() const { return script_templates.at(step_index); }
  std::size_t steps() const noexcept { return script_templates.size(); }
};

/// Session-scoped strategy usage, owned by storage and passed by value.
struct StrategyHistory {
  std::array<std::size_t, kStrategyCount> usage{};
  // Number of Socratic steps already delivered; the next step resumes here.
  std::size_t restructuring_step = 0;
  bool open_action_plan = false;
  std::string next_plan_step;
};

inline constexpr double kRoutingConfidence = 0.5;

/// Rule table, first match wins:
///   anger | anxiety, confidence >= 0.5          -> immediate_reframe
///   sadness | shame_regret, confidence >= 0.5   -> affirmation_support
///   negative dominant, negative mass >= 0.5     -> cognitive_restructuring
///   neutral dominant with an open action plan   -> action_plan
///   otherwise                                   -> small_talk
DialogStrategy select_strategy(const EmotionResult& emotion, const StrategyHistory& history,
                               const StrategyTable& table);

// ---------------------------------------------------------------------------
// Absolute-term reframing

struct AbsoluteSpan {
  std::size_t start = 0;  // byte offsets, end exclusive
  std::size_t end = 0;
  std::string term;       // normalized lexicon entry
  std::string replacement;
};

/// Left-to-right, longest match first, case-insensitive, word-bounded.
std::vector<AbsoluteSpan> detect_absolutes(std::string_view text, const Lexicon& absolutes);

struct PinnedPair {
  std::string input;
  std::string output;
};

/// {"replacements": {"always": "sometimes", ...},
///  "pinned": [{"input": "...", "output": "..."}, ...]}
struct SubstitutionTable {
  std::map<std::string, std::string> replacements;
  std::vector<PinnedPair> pinned;

  static SubstitutionTable from_json(const nlohmann::json& j);
  static SubstitutionTable load(const std::filesystem::path& path);
};

/// Applies casing of the matched span to a lowercase replacement: an all-caps
/// span gives an all-caps replacement, a capitalized span a capitalized one;
/// mixed spans are styled word by word.
std::string apply_case_style(std::string_view span_text, std::string_view replacement);

class Reframer {
 public:
  /// Throws kTableError if a lexicon entry has no replacement, or if any
  /// replacement or pinned output would itself be detected as absolute.
  Reframer(Lexicon absolutes, SubstitutionTable table);

  std::vector<AbsoluteSpan> detect(std::string_view text) const;
  bool has_absolutes(std::string_view text) const { return !detect(text).empty(); }

  /// Pinned sentence pairs are substituted first (exact match on whitespace
  /// boundaries); remaining absolute spans are replaced from the table. Text
  /// outside replaced regions is preserved byte for byte.
  std::string reframe(std::string_view text) const;

  const Lexicon& lexicon() const noexcept { return absolutes_; }

 private:
  Lexicon absolutes_;
  SubstitutionTable table_;
};

// ---------------------------------------------------------------------------
// Prompt and generation

/// Builds the language-model prompt: persona, strategy script for the current
/// step, context block, then explicit constraint directives.
/// Throws kContextOverflow when context exceeds 600 characters.
std::string build_prompt(const DialogStrategy& strategy, std::string_view context,
                         const SlotValues& slots, const ResponseConstraints& constraints);

inline constexpr std::string_view kScriptHeader = "### Script\n";
inline constexpr std::string_view kContextHeader = "### Context\n";

class LanguageModelAdapter {
 public:
  virtual ~LanguageModelAdapter() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Returns the rendered strategy script embedded in the prompt verbatim.
class ReferenceLanguageModel final : public LanguageModelAdapter {
 public:
  std::string complete(const std::string& prompt) override;
};

inline constexpr std::size_t kMaxGenerationAttempts = 3;

struct GeneratedResponse {
  std::string text;
  ConstraintReport report;
  std::size_t adapter_calls = 0;
  bool used_fallback = false;
};

/// Calls the adapter up to three times, appending the violation report to the
/// prompt after each rejected candidate, then falls back to `fallback_text`.
/// Throws kEmptyText for an empty prompt; adapter errors propagate.
GeneratedResponse generate_response(const std::string& prompt, LanguageModelAdapter& llm,
                                    const ResponseConstraints& constraints,
                                    const LexiconSet& lexicons, std::string_view fallback_text);

/// The strategy template rendered with `slots`. When that violates the
/// constraints, user-derived slots are replaced step by step until the
/// rendering matches the one verified by StrategyTable::check_templates().
std::string fallback_script(const DialogStrategy& strategy, const SlotValues& slots,
                            const ResponseConstraints& constraints, const LexiconSet& lexicons);

// ---------------------------------------------------------------------------
// Prosody

/// label -> target (pitch, gain, rate). JSON form: {"anger": [-1.5, -3, 0.88], ...}.
class ProsodyTable {
 public:
  ProsodyTable();  // built-in defaults
  static ProsodyTable from_json(const nlohmann::json& j);
  static ProsodyTable load(const std::filesystem::path& path);

  const ProsodyParams& target(EmotionLabel label) const { return targets_[index_of(label)]; }

 private:
  std::array<ProsodyParams, kEmotionCount> targets_;
};

/// neutral + confidence * (target(dominant) - neutral), clamped.
ProsodyParams prosody_for_emotion(const EmotionResult& emotion, const ProsodyTable& table);

}  // namespace innerself
