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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "innerself/audio.hpp"
#include "innerself/lexicon.hpp"

namespace innerself {

// Index order is part of the classifier head file format.
enum class EmotionLabel : std::uint8_t {
  kAnxiety = 0,
  kSadness = 1,
  kShameRegret = 2,
  kAnger = 3,
  kNeutral = 4,
};

inline constexpr std::size_t kEmotionCount = 5;
inline constexpr std::array<EmotionLabel, kEmotionCount> kAllEmotions = {
    EmotionLabel::kAnxiety, EmotionLabel::kSadness, EmotionLabel::kShameRegret,
    EmotionLabel::kAnger, EmotionLabel::kNeutral};

std::string_view to_string(EmotionLabel label);
EmotionLabel emotion_from_string(std::string_view name);
constexpr std::size_t index_of(EmotionLabel label) { return static_cast<std::size_t>(label); }
constexpr bool is_negative(EmotionLabel label) { return label != EmotionLabel::kNeutral; }

enum class Modality { kAudio, kText, kFused };
std::string_view to_string(Modality modality);

/// Fixed-length real feature vector tagged with its modality. All values are
/// finite (enforced on construction).
class FeatureVector {
 public:
  FeatureVector(Modality modality, std::vector<double> values);

  Modality modality() const noexcept { return modality_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t dimension() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_.at(i); }

 private:
  Modality modality_;
  std::vector<double> values_;
};

struct EmotionResult {
  std::array<double, kEmotionCount> probabilities{};
  EmotionLabel dominant = EmotionLabel::kNeutral;
  double confidence = 0.0;
  std::vector<double> logits;

  double probability(EmotionLabel label) const { return probabilities[index_of(label)]; }
  // Sum over the four negative labels.
  double negative_mass() const;

  /// Builds a result from a probability vector, deriving dominant (lowest
  /// index wins ties) and confidence. Probabilities must be in [0, 1] and sum
  /// to 1 within 1e-9.
  static EmotionResult from_probabilities(const std::array<double, kEmotionCount>& probs,
                                          std::vector<double> logits = {});

  friend bool operator==(const EmotionResult&, const EmotionResult&) = default;
};

void to_json(nlohmann::json& j, const EmotionResult& r);
void from_json(const nlohmann::json& j, EmotionResult& r);

/// Linear classification head: logits = weights * fused + bias.
class ClassifierHead {
 public:
  ClassifierHead(std::size_t input_dim, std::vector<double> weights_row_major,
                 std::vector<double> bias);

  /// {"dims": [5, D], "weights": [[...] x5], "bias": [...]}
  static ClassifierHead from_json(const nlohmann::json& j);
  static ClassifierHead load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  std::size_t input_dim() const noexcept { return input_dim_; }
  double weight(std::size_t row, std::size_t col) const { return weights_[row * input_dim_ + col]; }
  std::span<const double> bias() const noexcept { return bias_; }

 private:
  std::size_t input_dim_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// ---------------------------------------------------------------------------
// Feature extraction

inline constexpr std::size_t kReferenceAudioDim = 8;
inline constexpr std::size_t kReferenceTextDim = 6;

// Slots of the reference audio feature vector.
enum AudioFeature : std::size_t {
  kRmsMean = 0,
  kRmsVariance,
  kZeroCrossingRate,
  kF0Mean,
  kF0Variance,
  kF0Range,
  kSpeakingRate,
  kSpectralCentroid,
};

// Slots of the reference text feature vector; all are per-token ratios.
enum TextFeature : std::size_t {
  kNegativeRatio = 0,
  kPositiveRatio,
  kAbsoluteRatio,
  kFirstPersonRatio,
  kQuestionRatio,
  kExclamationRatio,
};

inline constexpr double kMinFeatureClipSeconds = 0.2;
inline constexpr double kSilencePeak = 1e-4;

/// Reference acoustic features (dimension 8): frame RMS mean and variance,
/// zero-crossing rate, autocorrelation F0 mean/variance/range over voiced
/// frames, energy-onset rate (onsets per second) and spectral centroid mean.
///
/// Energy and ZCR use non-overlapping 20 ms frames; all voicing and onset
/// thresholds are relative to the clip's own level, so scaling the samples
/// leaves every feature except RMS unchanged.
///
/// Throws kClipTooShort below 0.2 s and kSilentClip when peak < 1e-4.
FeatureVector extract_audio_features(const AudioClip& clip);

/// Per-frame fundamental frequency (Hz) of the voiced 40 ms analysis frames.
std::vector<double> estimate_f0_track(const AudioClip& clip);

/// Valence and absolute-term word lists used by the text features and the
/// response validator.
struct LexiconSet {
  Lexicon positive;
  Lexicon negative;
  Lexicon absolutes;

  /// Loads positive.txt, negative.txt and absolutes.txt from a directory.
  static LexiconSet load(const std::filesystem::path& dir);
};

bool is_first_person_singular(std::string_view lower_token);
bool is_second_person(std::string_view lower_token);

/// Reference semantic features (dimension 6), each normalized by token count.
/// Throws kEmptyTranscript when the transcript has no tokens.
FeatureVector extract_text_features(std::string_view transcript, const LexiconSet& lexicons);

/// Concatenation audio || text. Throws kModalityMismatch.
FeatureVector fuse(const FeatureVector& audio, const FeatureVector& text);

/// Numerically stable softmax: logits are clamped to [-1e4, 1e4] and the
/// maximum is subtracted before exponentiation. Throws kNonFiniteInput.
std::vector<double> softmax(std::span<const double> logits);

/// Throws kDimensionMismatch when the head does not match the fused vector.
EmotionResult classify(const FeatureVector& fused, const ClassifierHead& head);

// ---------------------------------------------------------------------------
// Adapters

/// Identifies a feature backend: {"name", "feature_dim", "endpoint"}.
struct AdapterDescriptor {
  std::string name;
  std::size_t feature_dim = 0;
  std::string endpoint;
};
void to_json(nlohmann::json& j, const AdapterDescriptor& d);
void from_json(const nlohmann::json& j, AdapterDescriptor& d);

class SpeechToTextAdapter {
 public:
  virtual ~SpeechToTextAdapter() = default;
  virtual std::string transcribe(const AudioClip& clip) = 0;
};

/// Echoes the transcript annotation stored with fixture clips.
class ReferenceSpeechToText final : public SpeechToTextAdapter {
 public:
  std::string transcribe(const AudioClip& clip) override;
};

/// Runs the adapter and enforces the transcript contract: a silent clip or an
/// empty/whitespace-only transcript raises kEmptyTranscript.
std::string transcribe(const AudioClip& clip, SpeechToTextAdapter& stt);

class AudioFeatureAdapter {
 public:
  virtual ~AudioFeatureAdapter() = default;
  virtual AdapterDescriptor descriptor() const = 0;
  virtual FeatureVector extract(const AudioClip& clip) = 0;
};

class ReferenceAudioFeatures final : public AudioFeatureAdapter {
 public:
  AdapterDescriptor descriptor() const override { return {"reference", kReferenceAudioDim, ""}; }
  FeatureVector extract(const AudioClip& clip) override { return extract_audio_features(clip); }
};

}  // namespace innerself
